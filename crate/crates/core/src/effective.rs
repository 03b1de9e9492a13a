//! Effective Hamiltonians for weakly coupled terminals.
//!
//! Two regimes are covered. When the terminal fields sit exactly on a simple
//! network eigenvalue `λ′`, the dynamics reduce to the terminals plus that one
//! mode at first order in the coupling. When every field is detuned from the
//! whole spectrum, a Schrieffer–Wolff rotation removes the terminal–network
//! couplings at first order and leaves an `m × m` terminal-only Hamiltonian at
//! second order:
//!
//! ```text
//! H_ii = ω_i − |c_i|² Σ_λ |g_iλ|² / (λ − ω_i)
//! H_ij = −½ c_i c_j* Σ_λ g_iλ g_jλ* [1/(λ − ω_i) + 1/(λ − ω_j)]
//! ```
//!
//! with `c_i = εξ_i` and `g_iλ = ⟨n_i|λ⟩`. Both follow from
//! `H'' = H₀ + (i/2)[S, V] + O(ε³)` once `V + i[S, H₀] = 0`.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::network::{BasisLabel, SystemSpec};
use crate::spectral::{self, SpectralDecomposition};

/// Tunable thresholds shared by the effective-Hamiltonian builders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveOptions {
    /// Tolerance used to resolve a requested eigenvalue to a mode.
    /// `None` uses the decomposition's own degeneracy tolerance.
    pub degeneracy_tolerance: Option<f64>,
    /// Allowed `|ω − λ′|` for a terminal declared resonant.
    pub resonance_tolerance: f64,
    /// Minimum `|ω − λ|` for a non-resonant terminal.
    pub detuning_floor: f64,
    /// Couplings above `factor × gap` trigger a weak-coupling warning.
    pub weak_coupling_factor: f64,
}

impl Default for EffectiveOptions {
    fn default() -> Self {
        Self {
            degeneracy_tolerance: None,
            resonance_tolerance: 1e-9,
            detuning_floor: 1e-6,
            weak_coupling_factor: 0.2,
        }
    }
}

/// Non-fatal diagnostics attached to effective Hamiltonians and protocol results.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// A resonant coupling is not small against the gap around `λ′`.
    StrongCoupling {
        label: String,
        coupling: f64,
        threshold: f64,
    },
    /// A non-resonant field is close to a network eigenvalue relative to the coupling.
    NearResonance {
        label: String,
        mode_value: f64,
        detuning: f64,
        coupling: f64,
    },
    /// A rival user sits closer to the routing frequency than the separation floor.
    RoutingAmbiguity {
        target: String,
        rival: String,
        detuning: f64,
        floor: f64,
    },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::StrongCoupling {
                label,
                coupling,
                threshold,
            } => write!(
                f,
                "terminal `{label}`: |coupling| = {coupling:.4e} exceeds the weak-coupling threshold {threshold:.4e}"
            ),
            Warning::NearResonance {
                label,
                mode_value,
                detuning,
                coupling,
            } => write!(
                f,
                "terminal `{label}`: field is {detuning:.4e} from eigenvalue {mode_value:.6} with |coupling| = {coupling:.4e}; second-order theory is marginal"
            ),
            Warning::RoutingAmbiguity {
                target,
                rival,
                detuning,
                floor,
            } => write!(
                f,
                "user `{rival}` is {detuning:.4e} from the frequency of `{target}` (floor {floor:.4e}); expect crosstalk"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Resonant,
    Nonresonant,
}

/// A small Hermitian matrix acting on terminal states (and possibly one mode).
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveHamiltonian {
    pub matrix: DMatrix<C64>,
    pub basis_labels: Vec<BasisLabel>,
    pub regime: Regime,
    pub order_in_epsilon: u8,
    /// Ascending index of the resonant mode in the network spectrum.
    pub resonance_mode: Option<usize>,
    pub warnings: Vec<Warning>,
}

impl EffectiveHamiltonian {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn position(&self, label: &BasisLabel) -> Option<usize> {
        self.basis_labels.iter().position(|l| l == label)
    }

    /// Magnitudes of the couplings along the transfer path: `|H_01|` for a
    /// 2×2, `|H_01|, |H_12|` for the resonant s–λ′–d chain, every upper
    /// off-diagonal entry otherwise.
    pub fn off_diagonal_magnitudes(&self) -> Vec<f64> {
        let n = self.dim();
        if self.regime == Regime::Resonant && n == 3 {
            return vec![self.matrix[(0, 1)].norm(), self.matrix[(1, 2)].norm()];
        }
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| self.matrix[(i, j)].norm())
            .collect()
    }

    /// Resonant coupling scale `β = |off-diagonal| / ε`.
    pub fn beta(&self, epsilon: f64) -> f64 {
        self.off_diagonal_magnitudes()[0] / epsilon
    }

    /// Non-resonant coupling scale `β′ = |off-diagonal| / ε²`.
    pub fn beta_prime(&self, epsilon: f64) -> f64 {
        self.off_diagonal_magnitudes()[0] / (epsilon * epsilon)
    }
}

/// Network modes together with each terminal's overlap profile.
pub(crate) struct ModeTable {
    pub decomp: SpectralDecomposition,
    pub profiles: Vec<DVector<C64>>,
}

impl ModeTable {
    pub fn new(spec: &SystemSpec) -> Result<Self> {
        let decomp = spectral::network_spectrum(spec.network())?;
        let profiles = spec
            .terminals()
            .iter()
            .map(|t| spectral::node_amplitudes(&decomp, t.node()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { decomp, profiles })
    }

    fn lambda(&self) -> &[f64] {
        self.decomp.eigenvalues().as_slice()
    }
}

/// `ω − |c|² Σ_λ |g_λ|² / (λ − ω)`: a terminal's field after the second-order shift.
pub fn shifted_field(eigenvalues: &[f64], amplitudes: &DVector<C64>, coupling: C64, field: f64) -> f64 {
    let sum: f64 = eigenvalues
        .iter()
        .zip(amplitudes.iter())
        .map(|(lam, g)| g.norm_sqr() / (lam - field))
        .sum();
    field - coupling.norm_sqr() * sum
}

/// `−½ c_i c_j* Σ_λ g_iλ g_jλ* [1/(λ−ω_i) + 1/(λ−ω_j)]`: the second-order
/// exchange between two detuned terminals.
pub fn exchange_coupling(
    eigenvalues: &[f64],
    (g_i, c_i, w_i): (&DVector<C64>, C64, f64),
    (g_j, c_j, w_j): (&DVector<C64>, C64, f64),
) -> C64 {
    let mut sum = C64::new(0.0, 0.0);
    for (k, lam) in eigenvalues.iter().enumerate() {
        let weight = 1.0 / (lam - w_i) + 1.0 / (lam - w_j);
        sum += g_i[k] * g_j[k].conj() * weight;
    }
    -0.5 * c_i * c_j.conj() * sum
}

/// Distance from `value` to the nearest eigenvalue outside the class of `mode`.
fn adjacent_gap(decomp: &SpectralDecomposition, mode: usize) -> f64 {
    let value = decomp.eigenvalue(mode);
    let class = decomp.class_containing(mode);
    decomp
        .eigenvalues()
        .iter()
        .enumerate()
        .filter(|(i, _)| !class.contains(i))
        .map(|(_, v)| (v - value).abs())
        .fold(f64::INFINITY, f64::min)
}

fn resolve_simple_mode(decomp: &SpectralDecomposition, lambda: f64, opts: &EffectiveOptions) -> Result<usize> {
    let tol = opts.degeneracy_tolerance.unwrap_or_else(|| decomp.tolerance());
    decomp.simple_mode(lambda, tol)
}

fn check_resonant_fields(spec: &SystemSpec, value: f64, opts: &EffectiveOptions) -> Result<()> {
    for t in spec.terminals() {
        if (t.field() - value).abs() > opts.resonance_tolerance {
            return Err(Error::NotResonant {
                label: t.label().to_string(),
                field: t.field(),
                mode_value: value,
            });
        }
    }
    Ok(())
}

fn weak_coupling_warnings(spec: &SystemSpec, gap: f64, opts: &EffectiveOptions) -> Vec<Warning> {
    let threshold = opts.weak_coupling_factor * gap;
    spec.terminals()
        .iter()
        .filter(|t| t.coupling().norm() > threshold)
        .map(|t| Warning::StrongCoupling {
            label: t.label().to_string(),
            coupling: t.coupling().norm(),
            threshold,
        })
        .collect()
}

/// Checks the detuning floor for every terminal and mode; returns proximity warnings.
fn check_nonresonant(spec: &SystemSpec, table: &ModeTable, opts: &EffectiveOptions) -> Result<Vec<Warning>> {
    let mut warnings = Vec::new();
    for t in spec.terminals() {
        let (mut nearest, mut nearest_mode) = (f64::INFINITY, 0);
        for (k, lam) in table.lambda().iter().enumerate() {
            let detuning = (t.field() - lam).abs();
            if detuning <= opts.detuning_floor {
                return Err(Error::ResonantCollision {
                    label: t.label().to_string(),
                    field: t.field(),
                    mode_index: k,
                    mode_value: *lam,
                    detuning,
                });
            }
            if detuning < nearest {
                nearest = detuning;
                nearest_mode = k;
            }
        }
        if t.coupling().norm() > opts.weak_coupling_factor * nearest {
            warnings.push(Warning::NearResonance {
                label: t.label().to_string(),
                mode_value: table.lambda()[nearest_mode],
                detuning: nearest,
                coupling: t.coupling().norm(),
            });
        }
    }
    Ok(warnings)
}

/// First-order 3×3 Hamiltonian in the basis `{s, λ′, d}` for two terminals
/// tuned to the simple eigenvalue `lambda`.
pub fn effective_resonant(spec: &SystemSpec, lambda: f64, opts: &EffectiveOptions) -> Result<EffectiveHamiltonian> {
    if spec.terminals().len() != 2 {
        return Err(Error::InvalidInput(format!(
            "resonant transfer needs exactly two terminals, got {}",
            spec.terminals().len()
        )));
    }
    let table = ModeTable::new(spec)?;
    let mode = resolve_simple_mode(&table.decomp, lambda, opts)?;
    let value = table.decomp.eigenvalue(mode);
    check_resonant_fields(spec, value, opts)?;

    let (s, d) = (&spec.terminals()[0], &spec.terminals()[1]);
    let to_s = s.coupling() * table.profiles[0][mode];
    let to_d = d.coupling() * table.profiles[1][mode];
    let diag = C64::new(value, 0.0);
    let mut m = DMatrix::from_diagonal_element(3, 3, diag);
    m[(0, 1)] = to_s;
    m[(1, 0)] = to_s.conj();
    m[(1, 2)] = to_d.conj();
    m[(2, 1)] = to_d;

    Ok(EffectiveHamiltonian {
        matrix: m,
        basis_labels: vec![
            BasisLabel::Terminal(s.label().to_string()),
            BasisLabel::Mode(mode),
            BasisLabel::Terminal(d.label().to_string()),
        ],
        regime: Regime::Resonant,
        order_in_epsilon: 1,
        resonance_mode: Some(mode),
        warnings: weak_coupling_warnings(spec, adjacent_gap(&table.decomp, mode), opts),
    })
}

/// First-order star Hamiltonian: every terminal coupled to the simple mode
/// `lambda`, basis `{s_1, …, s_m, λ′}`.
pub fn effective_resonant_multiuser(
    spec: &SystemSpec,
    lambda: f64,
    opts: &EffectiveOptions,
) -> Result<EffectiveHamiltonian> {
    let m = spec.terminals().len();
    if m == 0 {
        return Err(Error::InvalidInput("need at least one terminal".into()));
    }
    let table = ModeTable::new(spec)?;
    let mode = resolve_simple_mode(&table.decomp, lambda, opts)?;
    let value = table.decomp.eigenvalue(mode);
    check_resonant_fields(spec, value, opts)?;

    let mut h = DMatrix::from_diagonal_element(m + 1, m + 1, C64::new(value, 0.0));
    for (i, t) in spec.terminals().iter().enumerate() {
        let c = t.coupling() * table.profiles[i][mode];
        h[(i, m)] = c;
        h[(m, i)] = c.conj();
    }
    let mut labels: Vec<BasisLabel> = spec
        .terminals()
        .iter()
        .map(|t| BasisLabel::Terminal(t.label().to_string()))
        .collect();
    labels.push(BasisLabel::Mode(mode));
    Ok(EffectiveHamiltonian {
        matrix: h,
        basis_labels: labels,
        regime: Regime::Resonant,
        order_in_epsilon: 1,
        resonance_mode: Some(mode),
        warnings: weak_coupling_warnings(spec, adjacent_gap(&table.decomp, mode), opts),
    })
}

/// Second-order terminal-only Hamiltonian for any number of detuned terminals.
///
/// Fields need not be equal; unequal fields show up as unequal diagonals,
/// which is how crosstalk between users is analysed.
pub fn effective_multiuser(spec: &SystemSpec, opts: &EffectiveOptions) -> Result<EffectiveHamiltonian> {
    let m = spec.terminals().len();
    if m == 0 {
        return Err(Error::InvalidInput("need at least one terminal".into()));
    }
    let table = ModeTable::new(spec)?;
    let warnings = check_nonresonant(spec, &table, opts)?;
    let lambda = table.lambda();
    let terminals = spec.terminals();

    let mut h = DMatrix::<C64>::zeros(m, m);
    for i in 0..m {
        let ti = &terminals[i];
        h[(i, i)] = C64::new(
            shifted_field(lambda, &table.profiles[i], ti.coupling(), ti.field()),
            0.0,
        );
        for j in (i + 1)..m {
            let tj = &terminals[j];
            let x = exchange_coupling(
                lambda,
                (&table.profiles[i], ti.coupling(), ti.field()),
                (&table.profiles[j], tj.coupling(), tj.field()),
            );
            h[(i, j)] = x;
            h[(j, i)] = x.conj();
        }
    }
    Ok(EffectiveHamiltonian {
        matrix: h,
        basis_labels: terminals
            .iter()
            .map(|t| BasisLabel::Terminal(t.label().to_string()))
            .collect(),
        regime: Regime::Nonresonant,
        order_in_epsilon: 2,
        resonance_mode: None,
        warnings,
    })
}

/// Second-order 2×2 Hamiltonian in the basis `{s, d}`.
pub fn effective_nonresonant(spec: &SystemSpec, opts: &EffectiveOptions) -> Result<EffectiveHamiltonian> {
    if spec.terminals().len() != 2 {
        return Err(Error::InvalidInput(format!(
            "non-resonant transfer needs exactly two terminals, got {}",
            spec.terminals().len()
        )));
    }
    effective_multiuser(spec, opts)
}

/// Coefficients of the Schrieffer–Wolff generator.
///
/// `S = Σ_{α,λ} (S_αλ |α⟩⟨λ| + h.c.)` in the basis of terminals followed by
/// network eigenmodes, with `S_αλ = i c_α g_αλ / (λ − ω_α)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SwGenerator {
    /// `S_αλ`, rows are terminals, columns ascending eigenmodes.
    pub coefficients: DMatrix<C64>,
    fields: Vec<f64>,
    eigenvalues: Vec<f64>,
    couplings: DMatrix<C64>,
    pub warnings: Vec<Warning>,
}

impl SwGenerator {
    pub fn coefficient(&self, terminal: usize, mode: usize) -> C64 {
        self.coefficients[(terminal, mode)]
    }

    /// `s_αλ = S_αλ / (εξ_α)`.
    pub fn reduced_coefficient(&self, spec: &SystemSpec, terminal: usize, mode: usize) -> C64 {
        self.coefficients[(terminal, mode)] / spec.terminals()[terminal].coupling()
    }

    fn dims(&self) -> (usize, usize) {
        (self.fields.len(), self.eigenvalues.len())
    }

    /// `H₀ = Σ ω_α |α⟩⟨α| + Σ λ |λ⟩⟨λ|`.
    pub fn unperturbed(&self) -> DMatrix<C64> {
        let diag: Vec<C64> = self
            .fields
            .iter()
            .chain(self.eigenvalues.iter())
            .map(|&x| C64::new(x, 0.0))
            .collect();
        DMatrix::from_diagonal(&DVector::from_vec(diag))
    }

    /// `V = Σ (c_α g_αλ |α⟩⟨λ| + h.c.)`.
    pub fn perturbation(&self) -> DMatrix<C64> {
        Self::off_block(self.dims(), &self.couplings)
    }

    /// The Hermitian generator `S` as a full matrix.
    pub fn generator(&self) -> DMatrix<C64> {
        Self::off_block(self.dims(), &self.coefficients)
    }

    fn off_block((m, n): (usize, usize), block: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(m + n, m + n);
        for a in 0..m {
            for k in 0..n {
                out[(a, m + k)] = block[(a, k)];
                out[(m + k, a)] = block[(a, k)].conj();
            }
        }
        out
    }

    /// `max |V + i[S, H₀]|`, which vanishes for a valid generator.
    pub fn condition_residual(&self) -> f64 {
        let s = self.generator();
        let h0 = self.unperturbed();
        let comm = &s * &h0 - &h0 * &s;
        let residual = self.perturbation() + comm * C64::new(0.0, 1.0);
        spectral::max_abs(&residual)
    }
}

/// Generator that cancels the first-order terminal–network couplings.
pub fn sw_generator(spec: &SystemSpec, opts: &EffectiveOptions) -> Result<SwGenerator> {
    let table = ModeTable::new(spec)?;
    let warnings = check_nonresonant(spec, &table, opts)?;
    let (m, n) = (spec.terminals().len(), table.decomp.dim());
    let lambda = table.lambda();
    let mut couplings = DMatrix::<C64>::zeros(m, n);
    let mut coefficients = DMatrix::<C64>::zeros(m, n);
    for (a, t) in spec.terminals().iter().enumerate() {
        for k in 0..n {
            let v = t.coupling() * table.profiles[a][k];
            couplings[(a, k)] = v;
            coefficients[(a, k)] = C64::new(0.0, 1.0) * v / (lambda[k] - t.field());
        }
    }
    Ok(SwGenerator {
        coefficients,
        fields: spec.terminals().iter().map(|t| t.field()).collect(),
        eigenvalues: lambda.to_vec(),
        couplings,
        warnings,
    })
}

/// Rough duration of a complete transfer.
///
/// Resonant three-level chain with equal couplings `b`: `π / (√2 b)`.
/// Non-resonant two-level system with coupling `b′`: `π / (2 b′)`.
pub fn transfer_time_estimate(h: &EffectiveHamiltonian) -> Result<f64> {
    match (h.regime, h.dim()) {
        (Regime::Resonant, 3) => {
            let mags = h.off_diagonal_magnitudes();
            let (a, b) = (mags[0], mags[1]);
            if a == 0.0 || b == 0.0 {
                return Err(Error::NotCalibrated("a resonant coupling vanishes".into()));
            }
            if (a - b).abs() > 0.01 * a.max(b) {
                return Err(Error::NotCalibrated(format!(
                    "resonant couplings differ: {a:.6e} vs {b:.6e}"
                )));
            }
            Ok(PI / (SQRT_2 * 0.5 * (a + b)))
        }
        (Regime::Nonresonant, 2) => {
            let b = h.matrix[(0, 1)].norm();
            if b == 0.0 {
                return Err(Error::NoNonresonantChannel(b));
            }
            Ok(PI / (2.0 * b))
        }
        (regime, dim) => Err(Error::InvalidInput(format!(
            "no transfer-time formula for a {dim}x{dim} {regime:?} Hamiltonian"
        ))),
    }
}
