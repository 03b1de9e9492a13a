//! Excitation transfer, routing and entanglement through XX spin networks
//! whose terminal spins couple weakly to chosen nodes.
//!
//! The single-excitation sector of a network of `N` nodes with `m`
//! terminals is an `(m + N)`-dimensional Hermitian problem. Terminals come
//! first in the basis, followed by nodes `1..=N`. Terminal `α` sits on node
//! `n_α` with local field `ω_α` and coupling `εξ_α`.
//!
//! - [`network`] builds graphs, terminals and the full Hamiltonian.
//! - [`spectral`] diagonalizes the adjacency matrix, groups degenerate
//!   modes and provides chain and cycle closed forms.
//! - [`effective`] reduces the system to resonant (`s, λ′, d`) or detuned
//!   (terminals only) effective Hamiltonians.
//! - [`dynamics`] propagates states exactly and locates transfer peaks.
//! - [`protocol`] calibrates couplings and fields, routes between users,
//!   plans user frequencies and prepares Bell and W states.
//! - [`cli`] runs TOML scenarios and writes CSV, JSON and SVG output.
//!
//! ```
//! use spinnet::network::{SpinNetwork, SystemSpec, Terminal};
//! use spinnet::{dynamics, effective};
//!
//! let spec = SystemSpec::new(
//!     SpinNetwork::chain(4)?,
//!     vec![Terminal::new("s", 1, 0.02, 0.0)?, Terminal::new("d", 4, 0.02, 0.0)?],
//! )?;
//! let h = effective::effective_nonresonant(&spec, &Default::default())?;
//! let t = effective::transfer_time_estimate(&h)?;
//! let peak = dynamics::peak_transfer(&spec, "s", "d", 2.0 * t, 2000)?;
//! assert!(peak.value > 0.99);
//! # Ok::<(), spinnet::error::Error>(())
//! ```

pub mod cli;
pub mod dynamics;
pub mod effective;
pub mod error;
pub mod network;
pub mod protocol;
pub mod spectral;
