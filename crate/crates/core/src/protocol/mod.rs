//! Calibration, routing, frequency planning and entanglement protocols.
//!
//! Calibration puts an effective Hamiltonian into the symmetric form under
//! which full transfer happens: equal couplings along `s–λ′–d` in the
//! resonant case, equal diagonals with a non-vanishing exchange term in the
//! non-resonant case.

mod entangle;
mod routing;

pub use entangle::{
    bell_fidelity, bell_protocol, w_fidelity, w_nonresonant_protocol, w_nonresonant_protocol_from_state,
    w_resonant_protocol, EntanglementReport, ProtocolKind, StageTiming, WScan, BELL_SUCCESS_FIDELITY,
};
pub use routing::{crosstalk_peaks, frequency_plan, route, FrequencyPlan, PlanConstraints, PlannedUser, RouteReport};

use std::f64::consts::{PI, SQRT_2};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::dynamics;
use crate::effective::{self, shifted_field, EffectiveHamiltonian, EffectiveOptions, ModeTable, Regime, Warning};
use crate::error::{Error, Result};
use crate::network::{SpinNetwork, SystemSpec};
use crate::spectral;

/// Overlaps below this are treated as a closed channel.
pub const CLOSED_CHANNEL_TOLERANCE: f64 = 1e-12;

/// Modes through which two nodes can exchange an excitation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelReport {
    pub exists: bool,
    /// Ascending mode indices, grouped by degeneracy class.
    pub witness_modes: Vec<usize>,
    /// `|⟨n_s|P_λ|n_d⟩|` per witness class, aligned with the first index of each class.
    pub strengths: Vec<f64>,
}

/// Lists every eigenspace whose projector links `n_s` and `n_d` above `tolerance`.
///
/// Degenerate eigenspaces are judged by `|⟨n_s|P|n_d⟩|` rather than by
/// individual eigenvectors, which would depend on the arbitrary basis chosen
/// inside the eigenspace.
pub fn channel_exists(network: &SpinNetwork, n_s: usize, n_d: usize, tolerance: f64) -> Result<ChannelReport> {
    let decomp = spectral::network_spectrum(network)?;
    let s = spectral::node_amplitudes(&decomp, n_s)?;
    let d = spectral::node_amplitudes(&decomp, n_d)?;
    let mut witness_modes = Vec::new();
    let mut strengths = Vec::new();
    for class in decomp.degeneracy_classes() {
        let overlap: C64 = class.iter().map(|&k| s[k] * d[k].conj()).sum();
        if overlap.norm() > tolerance {
            witness_modes.extend_from_slice(class);
            strengths.push(overlap.norm());
        }
    }
    Ok(ChannelReport {
        exists: !witness_modes.is_empty(),
        witness_modes,
        strengths,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreeParameter {
    /// Solve for `ω_s`.
    SourceField,
    /// Solve for `ω_d`.
    DestinationField,
    /// Solve for `|εξ_s|` with both fields fixed, keeping its phase.
    SourceCoupling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationDiagnostics {
    pub off_diagonal_magnitudes: Vec<f64>,
    /// Resonant: `|H_sλ| − |H_λd|` relative; non-resonant: `|H_ss − H_dd|`.
    pub diagonal_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub adjusted_spec: SystemSpec,
    pub regime: Regime,
    /// Ascending index of the resonant mode.
    pub resonance_mode: Option<usize>,
    pub predicted_time: f64,
    pub diagnostics: CalibrationDiagnostics,
    pub effective: EffectiveHamiltonian,
    pub warnings: Vec<Warning>,
}

impl CalibrationResult {
    pub fn source(&self) -> &str {
        self.adjusted_spec.terminals()[0].label()
    }

    pub fn destination(&self) -> &str {
        self.adjusted_spec.terminals()[1].label()
    }

    /// Checks the calibration invariants against the stored effective Hamiltonian.
    pub fn verify(&self) -> Result<()> {
        let mags = &self.diagnostics.off_diagonal_magnitudes;
        match self.regime {
            Regime::Resonant => {
                let (a, b) = (mags[0], mags[1]);
                if (a - b).abs() > 1e-9 * a.max(b) || a == 0.0 {
                    return Err(Error::NotCalibrated(format!(
                        "resonant couplings {a:.6e} and {b:.6e} are not equal"
                    )));
                }
            }
            Regime::Nonresonant => {
                if self.diagnostics.diagonal_residual >= 1e-9 {
                    return Err(Error::NotCalibrated(format!(
                        "diagonal mismatch {:.3e}",
                        self.diagnostics.diagonal_residual
                    )));
                }
                if mags[0] <= 1e-15 {
                    return Err(Error::NoNonresonantChannel(mags[0]));
                }
            }
        }
        Ok(())
    }
}

fn require_pair(spec: &SystemSpec) -> Result<()> {
    if spec.terminals().len() != 2 {
        return Err(Error::InvalidInput(format!(
            "calibration needs exactly two terminals, got {}",
            spec.terminals().len()
        )));
    }
    Ok(())
}

/// Tunes both fields to `lambda` and sets `εξ_d = εξ_s g_s / g_d`.
///
/// When even the smaller of the two couplings exceeds the weak-coupling
/// threshold (a fraction of the gap around `λ′`), both are scaled down
/// together; a larger coupling above threshold is only reported.
pub fn calibrate_resonant(spec: &SystemSpec, lambda: f64, opts: &EffectiveOptions) -> Result<CalibrationResult> {
    require_pair(spec)?;
    let table = ModeTable::new(spec)?;
    let tol = opts.degeneracy_tolerance.unwrap_or_else(|| table.decomp.tolerance());
    let mode = table.decomp.simple_mode(lambda, tol)?;
    let value = table.decomp.eigenvalue(mode);
    let (g_s, g_d) = (table.profiles[0][mode], table.profiles[1][mode]);
    for (t, g) in spec.terminals().iter().zip([g_s, g_d]) {
        if g.norm() < CLOSED_CHANNEL_TOLERANCE {
            return Err(Error::ClosedChannel {
                label: t.label().to_string(),
                mode_value: value,
            });
        }
    }

    let (s, d) = (&spec.terminals()[0], &spec.terminals()[1]);
    let mut c_s = s.coupling();
    let mut c_d = c_s * g_s / g_d;

    let gap = table
        .decomp
        .eigenvalues()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != mode)
        .map(|(_, v)| (v - value).abs())
        .fold(f64::INFINITY, f64::min);
    let threshold = opts.weak_coupling_factor * gap;
    let smaller = c_s.norm().min(c_d.norm());
    if smaller > threshold {
        let k = threshold / smaller;
        c_s *= k;
        c_d *= k;
    }

    let adjusted = spec.with_terminals(vec![
        s.with_field(value)?.with_coupling(c_s)?,
        d.with_field(value)?.with_coupling(c_d)?,
    ])?;
    let h = effective::effective_resonant(&adjusted, value, opts)?;
    let mags = h.off_diagonal_magnitudes();
    let residual = (mags[0] - mags[1]).abs() / mags[0].max(mags[1]);
    Ok(CalibrationResult {
        predicted_time: PI / (SQRT_2 * (c_s * g_s).norm()),
        regime: Regime::Resonant,
        resonance_mode: Some(mode),
        diagnostics: CalibrationDiagnostics {
            off_diagonal_magnitudes: mags,
            diagonal_residual: residual,
        },
        warnings: h.warnings.clone(),
        effective: h,
        adjusted_spec: adjusted,
    })
}

/// Monotone root of `f` on `[lo, hi]` by bisection; `f` must increase.
fn bisect_increasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo <= 0.0 && fhi >= 0.0) {
        return Err(Error::CalibrationFailure(format!(
            "root not bracketed on [{lo}, {hi}] (f = {flo:.3e}, {fhi:.3e})"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if f(lo).abs() <= f(hi).abs() { lo } else { hi })
}

/// Solves `diag_free(ω) = target` for the free field near `anchor`, within
/// `±10×` the Lamb shift and clipped short of the neighbouring eigenvalues.
fn solve_field(
    eigenvalues: &[f64],
    profile: &nalgebra::DVector<C64>,
    coupling: C64,
    anchor: f64,
    target: f64,
    floor: f64,
) -> Result<f64> {
    let f = |w: f64| shifted_field(eigenvalues, profile, coupling, w) - target;
    let lamb = (f(anchor) + target - anchor)
        .abs()
        .max((target - anchor).abs())
        .max(1e-300);
    let below = eigenvalues
        .iter()
        .copied()
        .filter(|&l| l < anchor)
        .fold(f64::NEG_INFINITY, f64::max);
    let above = eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > anchor)
        .fold(f64::INFINITY, f64::min);
    let lo = (anchor - 10.0 * lamb).max(below + floor);
    let hi = (anchor + 10.0 * lamb).min(above - floor);
    // The shifted field has slope 1 − Σ|c g|²/(λ − ω)², so it turns over
    // near a pole. Take the upward crossing closest to the anchor, which is
    // the branch continuously connected to the bare field.
    let grid = dynamics::time_grid(hi - lo, SCAN_POINTS)?;
    let values: Vec<f64> = grid.iter().map(|&u| f(lo + u)).collect();
    let cell = (0..grid.len() - 1)
        .filter(|&i| values[i] <= 0.0 && values[i + 1] >= 0.0)
        .min_by(|&i, &j| {
            let di = (lo + grid[i] - anchor).abs();
            let dj = (lo + grid[j] - anchor).abs();
            di.total_cmp(&dj)
        })
        .ok_or_else(|| {
            Error::CalibrationFailure(format!(
                "no upward crossing of the target diagonal on [{lo}, {hi}] (f = {:.3e} .. {:.3e})",
                values[0],
                values[values.len() - 1]
            ))
        })?;
    bisect_increasing(f, lo + grid[cell], lo + grid[cell + 1])
}

const SCAN_POINTS: usize = 2001;

/// Equalizes the second-order diagonals of a detuned pair by solving for one
/// free parameter, then checks that the exchange term survives.
pub fn calibrate_nonresonant(
    spec: &SystemSpec,
    free: FreeParameter,
    opts: &EffectiveOptions,
) -> Result<CalibrationResult> {
    require_pair(spec)?;
    effective::effective_nonresonant(spec, opts)?;
    let table = ModeTable::new(spec)?;
    let lambda = table.decomp.eigenvalues().as_slice();
    let (s, d) = (&spec.terminals()[0], &spec.terminals()[1]);
    let diag_s = shifted_field(lambda, &table.profiles[0], s.coupling(), s.field());
    let diag_d = shifted_field(lambda, &table.profiles[1], d.coupling(), d.field());

    let adjusted = if (diag_s - diag_d).abs() <= 1e-12 {
        spec.clone()
    } else {
        match free {
            FreeParameter::SourceField => {
                let w = solve_field(
                    lambda,
                    &table.profiles[0],
                    s.coupling(),
                    d.field(),
                    diag_d,
                    opts.detuning_floor,
                )?;
                spec.with_terminals(vec![s.with_field(w)?, d.clone()])?
            }
            FreeParameter::DestinationField => {
                let w = solve_field(
                    lambda,
                    &table.profiles[1],
                    d.coupling(),
                    s.field(),
                    diag_s,
                    opts.detuning_floor,
                )?;
                spec.with_terminals(vec![s.clone(), d.with_field(w)?])?
            }
            FreeParameter::SourceCoupling => {
                let lamb: f64 = lambda
                    .iter()
                    .zip(table.profiles[0].iter())
                    .map(|(l, g)| g.norm_sqr() / (l - s.field()))
                    .sum();
                let mag2 = (s.field() - diag_d) / lamb;
                if !(mag2.is_finite() && mag2 > 0.0) {
                    return Err(Error::CalibrationFailure(format!(
                        "no real coupling for `{}` equalizes the diagonals (|εξ|² = {mag2:.3e})",
                        s.label()
                    )));
                }
                let phase = s.coupling() / s.coupling().norm();
                spec.with_terminals(vec![s.with_coupling(phase * mag2.sqrt())?, d.clone()])?
            }
        }
    };

    let h = effective::effective_nonresonant(&adjusted, opts)?;
    let off = h.matrix[(0, 1)].norm();
    if off <= 1e-15 {
        return Err(Error::NoNonresonantChannel(off));
    }
    Ok(CalibrationResult {
        predicted_time: PI / (2.0 * off),
        regime: Regime::Nonresonant,
        resonance_mode: None,
        diagnostics: CalibrationDiagnostics {
            off_diagonal_magnitudes: vec![off],
            diagonal_residual: (h.matrix[(0, 0)] - h.matrix[(1, 1)]).norm(),
        },
        warnings: h.warnings.clone(),
        effective: h,
        adjusted_spec: adjusted,
    })
}

/// Full Hamiltonian with the couplings of the listed terminals removed.
pub(crate) fn hamiltonian_without(spec: &SystemSpec, detached: &[usize]) -> DMatrix<C64> {
    let mut h = crate::network::full_hamiltonian(spec);
    let m = spec.terminals().len();
    for &a in detached {
        let site = m + spec.terminals()[a].node() - 1;
        h[(a, site)] = C64::new(0.0, 0.0);
        h[(site, a)] = C64::new(0.0, 0.0);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Terminal;
    use rand::SeedableRng;

    fn pair(net: SpinNetwork, (n1, c1, w1): (usize, f64, f64), (n2, c2, w2): (usize, f64, f64)) -> SystemSpec {
        SystemSpec::new(
            net,
            vec![
                Terminal::new("s", n1, c1, w1).unwrap(),
                Terminal::new("d", n2, c2, w2).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn channel_top_mode_and_disconnected() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let net = SpinNetwork::random_connected(9, 0.3, &mut rng);
        let r = channel_exists(&net, 1, 9, 1e-12).unwrap();
        assert!(r.exists);
        assert!(r.witness_modes.contains(&8));

        let split = SpinNetwork::from_edge_list(4, &[(1, 2, 1.0), (3, 4, 1.0)]).unwrap();
        let r = channel_exists(&split, 1, 3, 1e-12).unwrap();
        assert!(!r.exists);
        assert!(r.witness_modes.is_empty());
    }

    #[test]
    fn channel_chain30_mode5() {
        let r = channel_exists(&SpinNetwork::chain(30).unwrap(), 2, 13, 1e-12).unwrap();
        assert!(r.witness_modes.contains(&25));
    }

    #[test]
    fn resonant_ratio_chain30() {
        let l5 = 2.0 * (5.0 * PI / 31.0).cos();
        let spec = pair(SpinNetwork::chain(30).unwrap(), (2, 0.01, 0.0), (13, 0.01, 0.0));
        let cal = calibrate_resonant(&spec, l5, &EffectiveOptions::default()).unwrap();
        let ts = cal.adjusted_spec.terminals();
        let ratio = (ts[1].coupling() / ts[0].coupling()).norm();
        let oracle = (10.0 * PI / 31.0).sin() / (3.0 * PI / 31.0).sin();
        assert!((ratio - oracle).abs() < 1e-10);
        assert!((ts[0].coupling().norm() - 0.01).abs() < 1e-15);
        assert_eq!(cal.resonance_mode, Some(25));
        cal.verify().unwrap();
        assert!((cal.predicted_time - 1030.56418898198).abs() < 1e-6);
    }

    #[test]
    fn resonant_symmetric_ratio_one_and_closed_channel() {
        let l = 2.0 * (PI / 7.0).cos();
        let spec = pair(SpinNetwork::chain(6).unwrap(), (2, 0.01, l), (5, 0.01, l));
        let cal = calibrate_resonant(&spec, l, &EffectiveOptions::default()).unwrap();
        let ts = cal.adjusted_spec.terminals();
        assert!(((ts[1].coupling() / ts[0].coupling()).norm() - 1.0).abs() < 1e-12);

        let spec = pair(SpinNetwork::chain(3).unwrap(), (1, 0.01, 0.0), (2, 0.01, 0.0));
        assert!(matches!(
            calibrate_resonant(&spec, 0.0, &EffectiveOptions::default()),
            Err(Error::ClosedChannel { label, .. }) if label == "d"
        ));
    }

    #[test]
    fn resonant_rescales_when_both_strong() {
        let l = 2.0 * (PI / 5.0).cos();
        let spec = pair(SpinNetwork::chain(4).unwrap(), (1, 0.5, l), (4, 0.5, l));
        let cal = calibrate_resonant(&spec, l, &EffectiveOptions::default()).unwrap();
        let gap = l - 2.0 * (2.0 * PI / 5.0).cos();
        let c = cal.adjusted_spec.terminals()[0].coupling().norm();
        assert!((c - 0.2 * gap).abs() < 1e-12);
        cal.verify().unwrap();
    }

    #[test]
    fn nonresonant_symmetric_already_calibrated() {
        let spec = pair(SpinNetwork::chain(4).unwrap(), (1, 0.01, 0.0), (4, 0.01, 0.0));
        let cal = calibrate_nonresonant(&spec, FreeParameter::SourceField, &EffectiveOptions::default()).unwrap();
        assert_eq!(cal.adjusted_spec, spec);
        cal.verify().unwrap();
    }

    #[test]
    fn nonresonant_cycle_pair_symmetric() {
        let spec = pair(SpinNetwork::cycle(21).unwrap(), (3, 0.1, -0.9), (18, 0.1, -0.9));
        let cal = calibrate_nonresonant(&spec, FreeParameter::SourceField, &EffectiveOptions::default()).unwrap();
        assert!(cal.diagnostics.diagonal_residual < 1e-12);
        assert_eq!(cal.adjusted_spec.terminals()[0].field(), -0.9);
    }

    #[test]
    fn nonresonant_asymmetric_field_shift() {
        let spec = pair(SpinNetwork::chain(6).unwrap(), (1, 0.01, 2.3), (3, 0.01, 2.3));
        let opts = EffectiveOptions::default();
        for free in [
            FreeParameter::SourceField,
            FreeParameter::DestinationField,
            FreeParameter::SourceCoupling,
        ] {
            let cal = calibrate_nonresonant(&spec, free, &opts).unwrap();
            cal.verify().unwrap();
            let shift = match free {
                FreeParameter::SourceField => cal.adjusted_spec.terminals()[0].field() - 2.3,
                FreeParameter::DestinationField => cal.adjusted_spec.terminals()[1].field() - 2.3,
                FreeParameter::SourceCoupling => 0.0,
            };
            assert!(shift.abs() < 1e-3);
            // Independent check of the residual straight from the sums.
            let h = effective::effective_nonresonant(&cal.adjusted_spec, &opts).unwrap();
            assert!((h.matrix[(0, 0)] - h.matrix[(1, 1)]).norm() < 1e-12);
        }
    }

    #[test]
    fn nonresonant_vanishing_exchange() {
        let split = SpinNetwork::from_edge_list(4, &[(1, 2, 1.0), (3, 4, 1.0)]).unwrap();
        let spec = pair(split, (1, 0.01, 2.5), (4, 0.01, 2.5));
        assert!(matches!(
            calibrate_nonresonant(&spec, FreeParameter::SourceField, &EffectiveOptions::default()),
            Err(Error::NoNonresonantChannel(_))
        ));
    }

    #[test]
    fn bisection_reports_unbracketed() {
        assert!(matches!(
            bisect_increasing(|x| x + 5.0, 0.0, 1.0),
            Err(Error::CalibrationFailure(_))
        ));
        let r = bisect_increasing(|x| x - 0.3, 0.0, 1.0).unwrap();
        assert!((r - 0.3).abs() < 1e-15);
    }
}
