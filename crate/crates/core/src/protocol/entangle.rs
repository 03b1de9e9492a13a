use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64 as C64;

use super::{hamiltonian_without, CalibrationResult, CLOSED_CHANNEL_TOLERANCE};
use crate::dynamics::{self, golden_max};
use crate::effective::{self, EffectiveOptions, ModeTable, Regime, Warning};
use crate::error::{Error, Result};
use crate::network::{full_hamiltonian, BasisLabel, SystemSpec};

pub const BELL_SUCCESS_FIDELITY: f64 = 0.99;
pub const W_POPULATION_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolKind {
    Bell,
    WNonresonant,
    WResonant,
}

impl ProtocolKind {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Bell => "bell",
            ProtocolKind::WNonresonant => "w_nonresonant",
            ProtocolKind::WResonant => "w_resonant",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntanglementReport {
    pub protocol: ProtocolKind,
    /// Bell: `[t ≈ T/2, T]`; W non-resonant: `[t*]`; W resonant: stage durations.
    pub target_times: Vec<f64>,
    pub achieved_fidelity: f64,
    /// Relative phases `φ_j = arg ψ_j − arg ψ_1`, first entry zero.
    pub optimal_phases: Vec<f64>,
    /// Final populations of the terminals, plus the resonant mode where relevant.
    pub populations: Vec<(BasisLabel, f64)>,
    pub success: bool,
    pub note: Option<String>,
    pub warnings: Vec<Warning>,
}

/// `max_φ |⟨(|s⟩ + e^{iφ}|d⟩)/√2 | ψ⟩|² = (|ψ_s| + |ψ_d|)² / 2` and the maximizing `φ`.
pub fn bell_fidelity(psi_s: C64, psi_d: C64) -> (f64, f64) {
    let f = (psi_s.norm() + psi_d.norm()).powi(2) / 2.0;
    (f.min(1.0), wrap_phase(psi_d.arg() - psi_s.arg()))
}

/// `max_φ |⟨W_φ|ψ⟩|² = (Σ_j |ψ_j|)² / m` over the `m` given amplitudes.
pub fn w_fidelity(amplitudes: &[C64]) -> (f64, Vec<f64>) {
    let m = amplitudes.len() as f64;
    let f = amplitudes.iter().map(|a| a.norm()).sum::<f64>().powi(2) / m;
    let reference = amplitudes.first().map_or(0.0, |a| a.arg());
    let phases = amplitudes.iter().map(|a| wrap_phase(a.arg() - reference)).collect();
    (f.min(1.0), phases)
}

fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

fn terminal_populations(spec: &SystemSpec, psi: &DVector<C64>) -> Vec<(BasisLabel, f64)> {
    spec.terminals()
        .iter()
        .enumerate()
        .map(|(i, t)| (BasisLabel::Terminal(t.label().to_string()), psi[i].norm_sqr()))
        .collect()
}

/// Evolves a calibrated pair for half the exactly located transfer time.
///
/// In the detuned regime the time is then polished within a few periods of
/// the fast leakage oscillation, `2π/min|λ − ω|`, around `T/2`.
pub fn bell_protocol(cal: &CalibrationResult) -> Result<EntanglementReport> {
    cal.verify()?;
    let spec = &cal.adjusted_spec;
    let (s, d) = (cal.source(), cal.destination());
    let (is, id) = (spec.terminal_index(s)?, spec.terminal_index(d)?);
    let peak = dynamics::peak_transfer(spec, s, d, 2.0 * cal.predicted_time, dynamics::DEFAULT_COARSE_POINTS)?;
    let prop = dynamics::propagator(&full_hamiltonian(spec))?;
    let start = prop.prepare(&dynamics::basis_state(spec.dim(), is))?;
    let bell_at = |t: f64| bell_fidelity(start.amplitude(is, t), start.amplitude(id, t)).0;

    let mut half = 0.5 * peak.time;
    if cal.regime == Regime::Nonresonant {
        let table = ModeTable::new(spec)?;
        let detuning = [s, d]
            .iter()
            .map(|l| spec.terminal(l).map(|t| t.field()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flat_map(|w| table.decomp.eigenvalues().iter().map(move |l| (l - w).abs()))
            .fold(f64::INFINITY, f64::min);
        let ripple = 2.0 * PI / detuning;
        let window = (4.0 * ripple).min(0.05 * peak.time);
        let lo = (half - window).max(0.0);
        let points = ((2.0 * window / ripple) * 40.0).ceil().max(200.0) as usize;
        let best = dynamics::maximize_on_interval(|u| bell_at(lo + u), half + window - lo, points)?;
        if best.value > bell_at(half) {
            half = lo + best.time;
        }
    }
    let psi = start.state(half);
    let (fidelity, phi) = bell_fidelity(psi[is], psi[id]);
    let note = (cal.regime == Regime::Resonant)
        .then(|| "resonant regime: at T/2 about half of the excitation occupies the network mode".to_string());
    Ok(EntanglementReport {
        protocol: ProtocolKind::Bell,
        target_times: vec![half, peak.time],
        achieved_fidelity: fidelity,
        optimal_phases: vec![0.0, phi],
        populations: terminal_populations(spec, &psi),
        success: fidelity >= BELL_SUCCESS_FIDELITY,
        note,
        warnings: cal.warnings.clone(),
    })
}

/// Search window for a W-state crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WScan {
    pub t_max: f64,
    pub n_points: usize,
    /// Allowed `|p_j − 1/m|` for every terminal.
    pub tolerance: f64,
}

impl WScan {
    pub fn new(t_max: f64) -> Self {
        Self {
            t_max,
            n_points: 4000,
            tolerance: W_POPULATION_TOLERANCE,
        }
    }
}

/// Looks for a time at which every detuned terminal holds `1/m` of the
/// excitation, starting from the first terminal.
pub fn w_nonresonant_protocol(spec: &SystemSpec, scan: &WScan, opts: &EffectiveOptions) -> Result<EntanglementReport> {
    let psi0 = dynamics::basis_state(spec.dim(), 0);
    w_nonresonant_protocol_from_state(spec, &psi0, scan, opts)
}

pub fn w_nonresonant_protocol_from_state(
    spec: &SystemSpec,
    psi0: &DVector<C64>,
    scan: &WScan,
    opts: &EffectiveOptions,
) -> Result<EntanglementReport> {
    let m = spec.terminals().len();
    if m < 2 {
        return Err(Error::InvalidInput(format!(
            "W protocol needs at least two terminals, got {m}"
        )));
    }
    let w0 = spec.terminals()[0].field();
    if let Some(t) = spec.terminals().iter().find(|t| (t.field() - w0).abs() > 1e-12) {
        return Err(Error::InvalidInput(format!(
            "terminal `{}` has field {} but the W protocol needs equal fields ({w0})",
            t.label(),
            t.field()
        )));
    }
    let warnings = effective::effective_multiuser(spec, opts)?.warnings;
    let prop = dynamics::propagator(&full_hamiltonian(spec))?;
    let prepared = prop.prepare(psi0)?;
    let target = 1.0 / m as f64;
    let amplitudes = |t: f64| -> Vec<C64> { (0..m).map(|i| prepared.amplitude(i, t)).collect() };
    let deviation = |a: &[C64]| a.iter().map(|z| (z.norm_sqr() - target).abs()).fold(0.0, f64::max);

    let grid = dynamics::time_grid(scan.t_max, scan.n_points)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, &t) in grid.iter().enumerate() {
        let a = amplitudes(t);
        if deviation(&a) <= scan.tolerance {
            let f = w_fidelity(&a).0;
            if best.is_none_or(|(_, bf)| f > bf) {
                best = Some((i, f));
            }
        }
    }

    let Some((i, coarse_f)) = best else {
        let psi = prepared.state(scan.t_max);
        return Ok(EntanglementReport {
            protocol: ProtocolKind::WNonresonant,
            target_times: vec![],
            achieved_fidelity: 0.0,
            optimal_phases: vec![],
            populations: terminal_populations(spec, &psi),
            success: false,
            note: Some(format!(
                "no time in [0, {}] with every terminal population within {} of 1/{m}",
                scan.t_max, scan.tolerance
            )),
            warnings,
        });
    };

    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    let refined = golden_max(|t| w_fidelity(&amplitudes(t)).0, lo, hi, 1e-9 * scan.t_max.max(1.0));
    let t_star = if refined.value > coarse_f && deviation(&amplitudes(refined.time)) <= scan.tolerance {
        refined.time
    } else {
        grid[i]
    };
    let a = amplitudes(t_star);
    let (fidelity, phases) = w_fidelity(&a);
    Ok(EntanglementReport {
        protocol: ProtocolKind::WNonresonant,
        target_times: vec![t_star],
        achieved_fidelity: fidelity,
        optimal_phases: phases,
        populations: terminal_populations(spec, &prepared.state(t_star)),
        success: true,
        note: None,
        warnings,
    })
}

/// How the durations of the two resonant W stages are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StageTiming {
    /// `π/(2b)` then `π/(2b√m)` from the first-order models.
    #[default]
    Analytic,
    /// Stage 1 ends at the exact peak of the mode population, stage 2 at the
    /// exact peak of the W fidelity, each searched over twice the analytic time.
    Refined,
}

/// Two-stage resonant W preparation.
///
/// Stage 1 couples only the first terminal to the simple mode `λ′` and
/// waits for the excitation to enter the network. Stage 2 couples every
/// terminal, with couplings rescaled so that all `εξ_i g_iλ′` are equal, and
/// waits for the bright-state rotation to empty the mode. The switch is
/// instantaneous.
pub fn w_resonant_protocol(
    spec: &SystemSpec,
    lambda: f64,
    timing: StageTiming,
    opts: &EffectiveOptions,
) -> Result<EntanglementReport> {
    let m = spec.terminals().len();
    if m == 0 {
        return Err(Error::InvalidInput("W protocol needs at least one terminal".into()));
    }
    let table = ModeTable::new(spec)?;
    let tol = opts.degeneracy_tolerance.unwrap_or_else(|| table.decomp.tolerance());
    let mode = table.decomp.simple_mode(lambda, tol)?;
    let value = table.decomp.eigenvalue(mode);
    for (t, g) in spec.terminals().iter().zip(&table.profiles) {
        if g[mode].norm() < CLOSED_CHANNEL_TOLERANCE {
            return Err(Error::ClosedChannel {
                label: t.label().to_string(),
                mode_value: value,
            });
        }
    }

    let c1g1 = spec.terminals()[0].coupling() * table.profiles[0][mode];
    let b = c1g1.norm();
    let terminals = spec
        .terminals()
        .iter()
        .zip(&table.profiles)
        .map(|(t, g)| t.with_field(value)?.with_coupling(c1g1 / g[mode]))
        .collect::<Result<Vec<_>>>()?;
    let staged = spec.with_terminals(terminals)?;
    let warnings = effective::effective_resonant_multiuser(&staged, value, opts)?.warnings;

    let h1 = hamiltonian_without(&staged, &(1..m).collect::<Vec<_>>());
    let h2 = full_hamiltonian(&staged);
    let dim = staged.dim();
    let mut mode_state = DVector::<C64>::zeros(dim);
    mode_state
        .rows_mut(m, dim - m)
        .copy_from(&table.decomp.eigenvector(mode));

    let analytic = [PI / (2.0 * b), PI / (2.0 * b * (m as f64).sqrt())];
    let p1 = dynamics::propagator(&h1)?;
    let start = p1.prepare(&dynamics::basis_state(dim, 0))?;
    let t1 = match timing {
        StageTiming::Analytic => analytic[0],
        StageTiming::Refined => {
            dynamics::maximize_on_interval(
                |t| mode_state.dotc(&start.state(t)).norm_sqr(),
                2.0 * analytic[0],
                dynamics::DEFAULT_COARSE_POINTS,
            )?
            .time
        }
    };
    let psi1 = start.state(t1);
    let p2 = dynamics::propagator(&h2)?;
    let middle = p2.prepare(&psi1)?;
    let t2 = match timing {
        StageTiming::Analytic => analytic[1],
        StageTiming::Refined => {
            let amps = |t: f64| -> Vec<C64> { (0..m).map(|i| middle.amplitude(i, t)).collect() };
            dynamics::maximize_on_interval(
                |t| w_fidelity(&amps(t)).0,
                2.0 * analytic[1],
                dynamics::DEFAULT_COARSE_POINTS,
            )?
            .time
        }
    };
    let psi = middle.state(t2);

    let amps: Vec<C64> = (0..m).map(|i| psi[i]).collect();
    let (fidelity, phases) = w_fidelity(&amps);
    let target = 1.0 / m as f64;
    let success = amps
        .iter()
        .all(|a| (a.norm_sqr() - target).abs() <= W_POPULATION_TOLERANCE);
    let mut populations = terminal_populations(&staged, &psi);
    populations.push((BasisLabel::Mode(mode), mode_state.dotc(&psi).norm_sqr()));
    Ok(EntanglementReport {
        protocol: ProtocolKind::WResonant,
        target_times: vec![t1, t2],
        achieved_fidelity: fidelity,
        optimal_phases: phases,
        populations,
        success,
        note: Some(format!(
            "{} stage timing; equalized coupling |εξ g| = {b:.6e}",
            match timing {
                StageTiming::Analytic => "analytic",
                StageTiming::Refined => "refined",
            }
        )),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{SpinNetwork, Terminal};
    use crate::protocol::{calibrate_nonresonant, FreeParameter};

    #[test]
    fn bell_closed_forms() {
        let (f, _) = bell_fidelity(C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        assert!((f - 0.5).abs() < 1e-15);
        let s = 0.5f64.sqrt();
        let (f, phi) = bell_fidelity(C64::new(s, 0.0), C64::new(0.0, -s));
        assert!((f - 1.0).abs() < 1e-15);
        assert!((phi + PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn w_closed_forms() {
        let s = (1.0f64 / 3.0).sqrt();
        let (f, ph) = w_fidelity(&[C64::new(s, 0.0), C64::new(0.0, s), C64::new(-s, 0.0)]);
        assert!((f - 1.0).abs() < 1e-14);
        assert!((ph[1] - PI / 2.0).abs() < 1e-14 && (ph[2].abs() - PI).abs() < 1e-14);
        let (f, _) = w_fidelity(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
        assert!((f - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn bell_on_symmetric_chain() {
        let spec = SystemSpec::new(
            SpinNetwork::chain(4).unwrap(),
            vec![
                Terminal::new("s", 1, 0.01, 0.0).unwrap(),
                Terminal::new("d", 4, 0.01, 0.0).unwrap(),
            ],
        )
        .unwrap();
        let cal = calibrate_nonresonant(&spec, FreeParameter::SourceField, &EffectiveOptions::default()).unwrap();
        let r = bell_protocol(&cal).unwrap();
        assert!(r.success, "fidelity {}", r.achieved_fidelity);
        assert!((r.target_times[0] - 0.5 * r.target_times[1]).abs() <= 0.05 * r.target_times[1]);
    }

    #[test]
    fn w_from_w_state_at_zero() {
        let spec = SystemSpec::new(
            SpinNetwork::cycle(21).unwrap(),
            vec![
                Terminal::new("a", 3, 0.1, -0.9).unwrap(),
                Terminal::new("b", 12, 0.1, -0.9).unwrap(),
                Terminal::new("c", 15, 0.1, -0.9).unwrap(),
            ],
        )
        .unwrap();
        let s = (1.0f64 / 3.0).sqrt();
        let mut psi0 = DVector::zeros(spec.dim());
        for i in 0..3 {
            psi0[i] = C64::new(s, 0.0);
        }
        let r =
            w_nonresonant_protocol_from_state(&spec, &psi0, &WScan::new(100.0), &EffectiveOptions::default()).unwrap();
        assert!(r.target_times[0] < 1e-6);
        assert!((r.achieved_fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn w_scan_without_crossing_is_a_report() {
        let spec = SystemSpec::new(
            SpinNetwork::cycle(21).unwrap(),
            vec![
                Terminal::new("a", 3, 0.1, -0.9).unwrap(),
                Terminal::new("b", 12, 0.1, -0.9).unwrap(),
                Terminal::new("c", 15, 0.1, -0.9).unwrap(),
            ],
        )
        .unwrap();
        let r = w_nonresonant_protocol(&spec, &WScan::new(5.0), &EffectiveOptions::default()).unwrap();
        assert!(!r.success);
        assert!(r.note.is_some());
    }

    #[test]
    fn w_resonant_single_user_round_trip() {
        let spec = SystemSpec::new(
            SpinNetwork::cycle(21).unwrap(),
            vec![Terminal::new("s1", 1, 0.01, 2.0).unwrap()],
        )
        .unwrap();
        let r = w_resonant_protocol(&spec, 2.0, StageTiming::Analytic, &EffectiveOptions::default()).unwrap();
        assert!(r.achieved_fidelity > 0.99, "{}", r.achieved_fidelity);
        let b = 0.01 / 21f64.sqrt();
        assert!((r.target_times[0] - PI / (2.0 * b)).abs() < 1e-9);
        assert!((r.target_times[1] - r.target_times[0]).abs() < 1e-9);
    }

    #[test]
    fn w_resonant_rejects_degenerate_mode() {
        let l = 2.0 * (2.0 * PI / 21.0).cos();
        let spec = SystemSpec::new(
            SpinNetwork::cycle(21).unwrap(),
            vec![Terminal::new("s1", 1, 0.01, l).unwrap()],
        )
        .unwrap();
        assert!(matches!(
            w_resonant_protocol(&spec, l, StageTiming::Analytic, &EffectiveOptions::default()),
            Err(Error::DegenerateMode { .. })
        ));
    }
}
