use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64 as C64;

use super::{calibrate_nonresonant, CalibrationResult, FreeParameter};
use crate::dynamics::{self, Peak};
use crate::effective::{exchange_coupling, EffectiveOptions, Warning};
use crate::error::{Error, Result};
use crate::network::{full_hamiltonian, SpinNetwork, SystemSpec};
use crate::spectral;

/// Separation floor in units of the calibrated exchange coupling.
pub const AMBIGUITY_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RouteReport {
    pub source: String,
    pub target: String,
    /// Calibration of the isolated `(source, target)` pair.
    pub calibration: CalibrationResult,
    /// The whole system with the source retuned and recalibrated.
    pub adjusted_spec: SystemSpec,
    /// `|ω_u − ω_target|` for every other user.
    pub user_detunings: Vec<(String, f64)>,
    pub min_user_detuning: f64,
    pub min_spectrum_detuning: f64,
    pub ambiguity_floor: f64,
    pub warnings: Vec<Warning>,
}

/// Tunes the source to the target user's field and calibrates its coupling
/// against that user. Every other terminal is treated as a rival user.
pub fn route(spec: &SystemSpec, source: &str, target: &str, opts: &EffectiveOptions) -> Result<RouteReport> {
    if source == target {
        return Err(Error::InvalidInput("source and target must differ".into()));
    }
    spec.terminal(source)?;
    let dest = spec.terminal(target)?;
    let users: Vec<_> = spec.terminals().iter().filter(|t| t.label() != source).collect();
    for (i, a) in users.iter().enumerate() {
        for b in &users[i + 1..] {
            if a.field() == b.field() {
                return Err(Error::InvalidInput(format!(
                    "users `{}` and `{}` share the field {}; routing needs distinct frequencies",
                    a.label(),
                    b.label(),
                    a.field()
                )));
            }
        }
    }

    let omega = dest.field();
    let pair = spec
        .restrict(&[source, target])?
        .map_terminal(source, |t| t.with_field(omega))?;
    let calibration = calibrate_nonresonant(&pair, FreeParameter::SourceCoupling, opts)?;
    let tuned = calibration.adjusted_spec.terminal(source)?.clone();
    let adjusted_spec = spec.map_terminal(source, |_| Ok(tuned))?;

    let floor = AMBIGUITY_FACTOR * calibration.diagnostics.off_diagonal_magnitudes[0];
    let mut warnings = calibration.warnings.clone();
    let mut user_detunings = Vec::new();
    for u in users.iter().filter(|u| u.label() != target) {
        let detuning = (u.field() - omega).abs();
        if detuning < floor {
            warnings.push(Warning::RoutingAmbiguity {
                target: target.to_string(),
                rival: u.label().to_string(),
                detuning,
                floor,
            });
        }
        user_detunings.push((u.label().to_string(), detuning));
    }
    let min_user_detuning = user_detunings.iter().map(|(_, d)| *d).fold(f64::INFINITY, f64::min);
    let decomp = spectral::network_spectrum(spec.network())?;
    let min_spectrum_detuning = decomp
        .eigenvalues()
        .iter()
        .map(|l| (l - omega).abs())
        .fold(f64::INFINITY, f64::min);

    Ok(RouteReport {
        source: source.to_string(),
        target: target.to_string(),
        calibration,
        adjusted_spec,
        user_detunings,
        min_user_detuning,
        min_spectrum_detuning,
        ambiguity_floor: floor,
        warnings,
    })
}

/// Peak population of every terminal other than `source` over `[0, t_max]`,
/// starting from the source under exact dynamics.
pub fn crosstalk_peaks(
    spec: &SystemSpec,
    source: &str,
    t_max: f64,
    coarse_points: usize,
) -> Result<Vec<(String, Peak)>> {
    let s = spec.terminal_index(source)?;
    let h = full_hamiltonian(spec);
    let psi0 = dynamics::basis_state(spec.dim(), s);
    spec.terminals()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != s)
        .map(|(i, t)| {
            Ok((
                t.label().to_string(),
                dynamics::peak_population(&h, &psi0, i, t_max, coarse_points)?,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanConstraints {
    pub min_mutual_sep: f64,
    pub min_spectrum_sep: f64,
    pub max_time: Option<f64>,
    /// 1-based node of the shared source.
    pub source_node: usize,
    /// `|εξ|` of every user; the source coupling is calibrated per user.
    pub coupling: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedUser {
    pub label: String,
    pub node: usize,
    pub omega: f64,
    pub predicted_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyPlan {
    pub users: Vec<PlannedUser>,
    /// Smallest achieved `|ω − λ|` over users and eigenvalues.
    pub min_eigenvalue_separation: f64,
    /// Smallest achieved pairwise `|ω_i − ω_j|`; infinite for one user.
    pub min_mutual_separation: f64,
    pub worst_predicted_time: f64,
}

impl FrequencyPlan {
    pub fn assignments(&self) -> BTreeMap<String, f64> {
        self.users.iter().map(|u| (u.label.clone(), u.omega)).collect()
    }
}

/// Candidate fields: from each end of every admissible interval, stepping
/// inward by the mutual separation, at most `count` per end.
fn candidate_fields(distinct: &[f64], sep: f64, step: f64, count: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let (lo, hi) = (distinct[0], distinct[distinct.len() - 1]);
    for k in 0..count {
        out.push(lo - sep - k as f64 * step);
        out.push(hi + sep + k as f64 * step);
    }
    for w in distinct.windows(2) {
        let (a, b) = (w[0] + sep, w[1] - sep);
        if a > b {
            continue;
        }
        for k in 0..count {
            let x = a + k as f64 * step;
            let y = b - k as f64 * step;
            if x <= b {
                out.push(x);
            }
            if y >= a {
                out.push(y);
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Calibrated non-resonant transfer time between two nodes at a shared field.
fn pair_time(lambda: &[f64], g_s: &DVector<C64>, g_d: &DVector<C64>, coupling: f64, omega: f64) -> Option<f64> {
    let lamb = |g: &DVector<C64>| -> f64 {
        lambda
            .iter()
            .zip(g.iter())
            .map(|(l, a)| a.norm_sqr() / (l - omega))
            .sum()
    };
    let (l_s, l_d) = (lamb(g_s), lamb(g_d));
    let ratio = l_d / l_s;
    if !(ratio.is_finite() && ratio > 0.0) {
        return None;
    }
    let c_s = C64::new(coupling * ratio.sqrt(), 0.0);
    let c_d = C64::new(coupling, 0.0);
    let x = exchange_coupling(lambda, (g_s, c_s, omega), (g_d, c_d, omega)).norm();
    (x > 1e-15).then(|| PI / (2.0 * x))
}

/// Assigns each user a field so that the source can reach every user by
/// retuning, respecting separation from the spectrum and between users.
///
/// Greedy: all `(user, field)` candidates are sorted by predicted transfer
/// time and accepted fastest first when they keep the mutual separation.
pub fn frequency_plan(network: &SpinNetwork, users: &[(&str, usize)], c: &PlanConstraints) -> Result<FrequencyPlan> {
    if users.is_empty() {
        return Err(Error::InvalidInput("no users to plan".into()));
    }
    if !(c.min_mutual_sep > 0.0 && c.min_spectrum_sep > 0.0 && c.coupling > 0.0) {
        return Err(Error::InvalidInput("separations and coupling must be positive".into()));
    }
    let decomp = spectral::network_spectrum(network)?;
    let lambda = decomp.eigenvalues().as_slice();
    let distinct: Vec<f64> = decomp.degeneracy_classes().iter().map(|cl| lambda[cl[0]]).collect();
    let g_s = spectral::node_amplitudes(&decomp, c.source_node)?;
    let profiles = users
        .iter()
        .map(|&(_, node)| spectral::node_amplitudes(&decomp, node))
        .collect::<Result<Vec<_>>>()?;

    let fields = candidate_fields(&distinct, c.min_spectrum_sep, c.min_mutual_sep, users.len());
    let mut options: Vec<(f64, usize, f64)> = Vec::new();
    for (u, g_d) in profiles.iter().enumerate() {
        for &w in &fields {
            if let Some(t) = pair_time(lambda, &g_s, g_d, c.coupling, w) {
                options.push((t, u, w));
            }
        }
    }
    options.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)));

    let mut chosen: Vec<Option<(f64, f64)>> = vec![None; users.len()];
    for (t, u, w) in options {
        if chosen[u].is_some() {
            continue;
        }
        let clear = chosen
            .iter()
            .flatten()
            .all(|&(other, _)| (other - w).abs() >= c.min_mutual_sep * (1.0 - 1e-12));
        if clear {
            chosen[u] = Some((w, t));
        }
    }

    let mut planned = Vec::with_capacity(users.len());
    for (&(label, node), pick) in users.iter().zip(&chosen) {
        let (omega, time) = pick.ok_or_else(|| {
            Error::Infeasible(format!(
                "user `{label}`: no field left at min_mutual_sep = {} and min_spectrum_sep = {}",
                c.min_mutual_sep, c.min_spectrum_sep
            ))
        })?;
        if let Some(limit) = c.max_time {
            if time > limit {
                return Err(Error::Infeasible(format!(
                    "user `{label}`: fastest admissible transfer takes {time:.4e} > max_time = {limit:.4e}"
                )));
            }
        }
        planned.push(PlannedUser {
            label: label.to_string(),
            node,
            omega,
            predicted_time: time,
        });
    }

    let min_eigenvalue_separation = planned
        .iter()
        .flat_map(|u| lambda.iter().map(move |l| (u.omega - l).abs()))
        .fold(f64::INFINITY, f64::min);
    let mut min_mutual_separation = f64::INFINITY;
    for (i, a) in planned.iter().enumerate() {
        for b in &planned[i + 1..] {
            min_mutual_separation = min_mutual_separation.min((a.omega - b.omega).abs());
        }
    }
    let worst_predicted_time = planned.iter().map(|u| u.predicted_time).fold(0.0, f64::max);
    Ok(FrequencyPlan {
        users: planned,
        min_eigenvalue_separation,
        min_mutual_separation,
        worst_predicted_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Terminal;

    fn three_users(omega_u: f64) -> SystemSpec {
        SystemSpec::new(
            SpinNetwork::cycle(21).unwrap(),
            vec![
                Terminal::new("s", 3, 0.1, -0.9).unwrap(),
                Terminal::new("u", 10, 0.1, omega_u).unwrap(),
                Terminal::new("d", 18, 0.1, -0.9).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn route_keeps_symmetric_coupling() {
        let r = route(&three_users(-0.85), "s", "d", &EffectiveOptions::default()).unwrap();
        let c = r.adjusted_spec.terminal("s").unwrap().coupling().norm();
        assert!((c - 0.1).abs() < 1e-12);
        assert!((r.min_user_detuning - 0.05).abs() < 1e-12);
        assert!((r.min_spectrum_detuning - 0.1).abs() < 1e-12);
        assert!(!r.warnings.iter().any(|w| matches!(w, Warning::RoutingAmbiguity { .. })));

        let r = route(&three_users(-0.89), "s", "d", &EffectiveOptions::default()).unwrap();
        assert!(r
            .warnings
            .iter()
            .any(|w| matches!(w, Warning::RoutingAmbiguity { rival, .. } if rival == "u")));
    }

    #[test]
    fn route_single_user_matches_pair_calibration() {
        let spec = SystemSpec::new(
            SpinNetwork::chain(6).unwrap(),
            vec![
                Terminal::new("s", 1, 0.01, 2.5).unwrap(),
                Terminal::new("d", 3, 0.01, 2.3).unwrap(),
            ],
        )
        .unwrap();
        let opts = EffectiveOptions::default();
        let r = route(&spec, "s", "d", &opts).unwrap();
        let direct = calibrate_nonresonant(
            &spec.map_terminal("s", |t| t.with_field(2.3)).unwrap(),
            FreeParameter::SourceCoupling,
            &opts,
        )
        .unwrap();
        assert_eq!(r.adjusted_spec, direct.adjusted_spec);
        assert!(r.user_detunings.is_empty());
        r.calibration.verify().unwrap();
    }

    #[test]
    fn route_rejects_shared_user_fields() {
        assert!(route(&three_users(-0.9), "s", "d", &EffectiveOptions::default()).is_err());
    }

    fn constraints(sep: f64) -> PlanConstraints {
        PlanConstraints {
            min_mutual_sep: sep,
            min_spectrum_sep: sep,
            max_time: None,
            source_node: 1,
            coupling: 0.01,
        }
    }

    #[test]
    fn plan_single_user_hugs_an_exclusion_boundary() {
        let net = SpinNetwork::chain(5).unwrap();
        let plan = frequency_plan(&net, &[("d", 5)], &constraints(0.1)).unwrap();
        assert_eq!(plan.users.len(), 1);
        assert!((plan.min_eigenvalue_separation - 0.1).abs() < 1e-12);
    }

    #[test]
    fn plan_cycle21_three_users() {
        let net = SpinNetwork::cycle(21).unwrap();
        let users = [("a", 5), ("b", 9), ("c", 14)];
        let plan = frequency_plan(&net, &users, &constraints(0.05)).unwrap();
        assert_eq!(plan.users.len(), 3);
        assert!(plan.min_mutual_separation >= 0.05 - 1e-12);
        assert!(plan.min_eigenvalue_separation >= 0.05 - 1e-12);
        assert_eq!(plan.assignments().len(), 3);
    }

    #[test]
    fn plan_reports_binding_time_limit() {
        let net = SpinNetwork::chain(5).unwrap();
        let mut c = constraints(0.1);
        c.max_time = Some(1.0);
        match frequency_plan(&net, &[("d", 5)], &c) {
            Err(Error::Infeasible(msg)) => assert!(msg.contains("max_time")),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn candidates_respect_spectrum_gap() {
        let c = candidate_fields(&[-1.0, 0.0, 1.0], 0.2, 0.3, 2);
        assert!(c
            .iter()
            .all(|w| [-1.0f64, 0.0, 1.0].iter().all(|l| (w - l).abs() >= 0.2 - 1e-12)));
        assert!(c.contains(&1.2) && c.contains(&1.5) && c.contains(&-1.2));
    }
}
