//! Exact unitary evolution in the single-excitation subspace.
//!
//! `ψ(t) = V e^{−iΛt} V† ψ₀` with `H = V Λ V†`. Decompositions are cached by
//! matrix content, so repeated evolution under the same Hamiltonian costs one
//! matrix–vector product per time point.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, OnceLock, RwLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::network::{full_hamiltonian, BasisLabel, SystemSpec};
use crate::spectral::{self, SpectralDecomposition};

pub const NORM_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_COARSE_POINTS: usize = 2000;

/// Spectral propagator for a fixed Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Propagator {
    hamiltonian: DMatrix<C64>,
    decomp: SpectralDecomposition,
}

impl Propagator {
    pub fn new(h: &DMatrix<C64>) -> Result<Self> {
        Ok(Self {
            hamiltonian: h.clone(),
            decomp: spectral::eigendecompose(h, None)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &DMatrix<C64> {
        &self.hamiltonian
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.decomp
    }

    /// Projects `psi0` onto the eigenbasis once for repeated evaluation.
    pub fn prepare(&self, psi0: &DVector<C64>) -> Result<PreparedState<'_>> {
        check_state(psi0, self.dim())?;
        Ok(PreparedState {
            prop: self,
            initial: psi0.clone(),
            coefficients: self.decomp.eigenvectors().adjoint() * psi0,
        })
    }

    pub fn evolve(&self, psi0: &DVector<C64>, t: f64) -> Result<DVector<C64>> {
        Ok(self.prepare(psi0)?.state(t))
    }
}

/// A state expanded in the eigenbasis of a [`Propagator`].
#[derive(Debug, Clone)]
pub struct PreparedState<'a> {
    prop: &'a Propagator,
    initial: DVector<C64>,
    coefficients: DVector<C64>,
}

impl PreparedState<'_> {
    fn phased(&self, t: f64) -> DVector<C64> {
        let lambda = self.prop.decomp.eigenvalues();
        DVector::from_iterator(
            self.coefficients.len(),
            self.coefficients
                .iter()
                .zip(lambda.iter())
                .map(|(c, l)| c * C64::from_polar(1.0, -l * t)),
        )
    }

    pub fn state(&self, t: f64) -> DVector<C64> {
        if t == 0.0 {
            return self.initial.clone();
        }
        self.prop.decomp.eigenvectors() * self.phased(t)
    }

    /// `⟨index|ψ(t)⟩` without forming the full state.
    pub fn amplitude(&self, index: usize, t: f64) -> C64 {
        if t == 0.0 {
            return self.initial[index];
        }
        let v = self.prop.decomp.eigenvectors();
        let lambda = self.prop.decomp.eigenvalues();
        (0..self.coefficients.len())
            .map(|k| v[(index, k)] * self.coefficients[k] * C64::from_polar(1.0, -lambda[k] * t))
            .sum()
    }

    pub fn population(&self, index: usize, t: f64) -> f64 {
        self.amplitude(index, t).norm_sqr()
    }
}

fn check_state(psi: &DVector<C64>, dim: usize) -> Result<()> {
    if psi.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: psi.len(),
        });
    }
    let norm = psi.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(Error::NotNormalized(norm));
    }
    Ok(())
}

/// Content-keyed cache of propagators, safe for concurrent readers.
#[derive(Debug)]
pub struct PropagatorCache {
    entries: RwLock<HashMap<u64, Vec<Arc<Propagator>>>>,
    capacity: usize,
}

impl PropagatorCache {
    pub fn new(capacity: usize) -> Self {
        Self {
            entries: RwLock::new(HashMap::new()),
            capacity: capacity.max(1),
        }
    }

    fn key(h: &DMatrix<C64>) -> u64 {
        let mut hasher = DefaultHasher::new();
        h.nrows().hash(&mut hasher);
        h.ncols().hash(&mut hasher);
        for z in h.iter() {
            z.re.to_bits().hash(&mut hasher);
            z.im.to_bits().hash(&mut hasher);
        }
        hasher.finish()
    }

    pub fn get_or_insert(&self, h: &DMatrix<C64>) -> Result<Arc<Propagator>> {
        let key = Self::key(h);
        {
            let map = self.entries.read().unwrap_or_else(|e| e.into_inner());
            if let Some(p) = map.get(&key).and_then(|v| v.iter().find(|p| p.hamiltonian == *h)) {
                return Ok(Arc::clone(p));
            }
        }
        let prop = Arc::new(Propagator::new(h)?);
        let mut map = self.entries.write().unwrap_or_else(|e| e.into_inner());
        if map.values().map(Vec::len).sum::<usize>() >= self.capacity {
            map.clear();
        }
        let bucket = map.entry(key).or_default();
        if let Some(p) = bucket.iter().find(|p| p.hamiltonian == *h) {
            return Ok(Arc::clone(p));
        }
        bucket.push(Arc::clone(&prop));
        Ok(prop)
    }

    pub fn len(&self) -> usize {
        self.entries
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .map(Vec::len)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Process-wide propagator for `h`.
pub fn propagator(h: &DMatrix<C64>) -> Result<Arc<Propagator>> {
    static CACHE: OnceLock<PropagatorCache> = OnceLock::new();
    CACHE.get_or_init(|| PropagatorCache::new(256)).get_or_insert(h)
}

pub fn basis_state(dim: usize, index: usize) -> DVector<C64> {
    let mut v = DVector::zeros(dim);
    v[index] = C64::new(1.0, 0.0);
    v
}

pub fn evolve(h: &DMatrix<C64>, psi0: &DVector<C64>, t: f64) -> Result<DVector<C64>> {
    if psi0.len() != h.nrows() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            actual: psi0.len(),
        });
    }
    check_state(psi0, h.nrows())?;
    propagator(h)?.evolve(psi0, t)
}

/// Sampled evolution on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub time_grid: Vec<f64>,
    /// One row per time point.
    pub states: DMatrix<C64>,
    /// `|amplitude|²`, one row per time point.
    pub populations: DMatrix<f64>,
    pub basis_labels: Vec<BasisLabel>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.time_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_grid.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.basis_labels.len()
    }

    pub fn index_of(&self, label: &BasisLabel) -> Result<usize> {
        self.basis_labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn population_of(&self, index: usize) -> Vec<f64> {
        self.populations.column(index).iter().copied().collect()
    }

    /// Population series of a terminal by label.
    pub fn terminal_population(&self, label: &str) -> Result<Vec<f64>> {
        Ok(self.population_of(self.index_of(&BasisLabel::Terminal(label.to_string()))?))
    }

    pub fn state(&self, row: usize) -> DVector<C64> {
        self.states.row(row).transpose()
    }

    /// `(time, value)` of the largest sample in a population column.
    pub fn peak_of(&self, index: usize) -> (f64, f64) {
        self.populations
            .column(index)
            .iter()
            .enumerate()
            .fold((0.0, f64::NEG_INFINITY), |best, (i, &p)| {
                if p > best.1 {
                    (self.time_grid[i], p)
                } else {
                    best
                }
            })
    }

    /// `max_t |‖ψ(t)‖ − 1|`.
    pub fn norm_drift(&self) -> f64 {
        self.states
            .row_iter()
            .map(|r| (r.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max_t |Σ_i p_i(t) − 1|`.
    pub fn population_sum_drift(&self) -> f64 {
        self.populations
            .row_iter()
            .map(|r| (r.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `max_t |⟨ψ(t)|H|ψ(t)⟩ − ⟨ψ(0)|H|ψ(0)⟩|`.
    pub fn energy_drift(&self, h: &DMatrix<C64>) -> f64 {
        let energy = |row: usize| {
            let psi = self.state(row);
            psi.dotc(&(h * &psi)).re
        };
        if self.is_empty() {
            return 0.0;
        }
        let e0 = energy(0);
        (0..self.len()).map(|i| (energy(i) - e0).abs()).fold(0.0, f64::max)
    }
}

/// `n_points` evenly spaced times from 0 to `t_max` inclusive.
pub fn time_grid(t_max: f64, n_points: usize) -> Result<Vec<f64>> {
    if n_points < 2 {
        return Err(Error::InvalidInput(format!(
            "n_points must be at least 2, got {n_points}"
        )));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "t_max must be positive and finite, got {t_max}"
        )));
    }
    let step = t_max / (n_points - 1) as f64;
    Ok((0..n_points)
        .map(|i| if i + 1 == n_points { t_max } else { i as f64 * step })
        .collect())
}

/// Trajectory under an arbitrary Hermitian matrix.
pub fn trajectory_matrix(
    h: &DMatrix<C64>,
    basis_labels: Vec<BasisLabel>,
    psi0: &DVector<C64>,
    t_max: f64,
    n_points: usize,
) -> Result<Trajectory> {
    if basis_labels.len() != h.nrows() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            actual: basis_labels.len(),
        });
    }
    let grid = time_grid(t_max, n_points)?;
    check_state(psi0, h.nrows())?;
    let prop = propagator(h)?;
    let prepared = prop.prepare(psi0)?;
    let dim = h.nrows();
    let mut states = DMatrix::<C64>::zeros(grid.len(), dim);
    for (i, &t) in grid.iter().enumerate() {
        states.set_row(i, &prepared.state(t).transpose());
    }
    let populations = states.map(|z| z.norm_sqr());
    Ok(Trajectory {
        time_grid: grid,
        states,
        populations,
        basis_labels,
    })
}

/// Trajectory of the full system starting from the terminal `initial`.
pub fn trajectory(spec: &SystemSpec, initial: &str, t_max: f64, n_points: usize) -> Result<Trajectory> {
    let idx = spec.terminal_index(initial)?;
    let psi0 = basis_state(spec.dim(), idx);
    trajectory_matrix(&full_hamiltonian(spec), spec.basis_labels(), &psi0, t_max, n_points)
}

/// `|⟨d|e^{−iHt}|s⟩|²` for two terminals of the full system.
pub fn transfer_fidelity(spec: &SystemSpec, source: &str, dest: &str, t: f64) -> Result<f64> {
    let s = spec.terminal_index(source)?;
    let d = spec.terminal_index(dest)?;
    let prop = propagator(&full_hamiltonian(spec))?;
    let psi0 = basis_state(spec.dim(), s);
    Ok(prop.prepare(&psi0)?.population(d, t).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub time: f64,
    pub value: f64,
}

/// Golden-section maximization of `f` on `[lo, hi]` down to width `tol`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Peak {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    [(mid, f(mid)), (x1, f1), (x2, f2)].into_iter().fold(
        Peak {
            time: mid,
            value: f64::NEG_INFINITY,
        },
        |acc, (time, value)| {
            if value > acc.value {
                Peak { time, value }
            } else {
                acc
            }
        },
    )
}

/// Global maximum of `f` on `[0, t_max]`: coarse scan, then golden-section
/// refinement on the bracket around the best sample to `1e-6 · t_max`.
pub fn maximize_on_interval(f: impl Fn(f64) -> f64, t_max: f64, coarse_points: usize) -> Result<Peak> {
    let grid = time_grid(t_max, coarse_points.max(3))?;
    let values: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
    let (best, _) = values.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
    );
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let refined = golden_max(&f, lo, hi, 1e-6 * t_max);
    Ok(if refined.value > values[best] {
        refined
    } else {
        Peak {
            time: grid[best],
            value: values[best],
        }
    })
}

/// Peak of the population of basis state `target` starting from `psi0` under `h`.
pub fn peak_population(
    h: &DMatrix<C64>,
    psi0: &DVector<C64>,
    target: usize,
    t_max: f64,
    coarse_points: usize,
) -> Result<Peak> {
    if target >= h.nrows() {
        return Err(Error::DimensionMismatch {
            expected: h.nrows(),
            actual: target + 1,
        });
    }
    let prop = propagator(h)?;
    let prepared = prop.prepare(psi0)?;
    maximize_on_interval(|t| prepared.population(target, t), t_max, coarse_points)
}

/// Peak `|⟨d|e^{−iHt}|s⟩|²` over `[0, t_max]` for the full system.
pub fn peak_transfer(spec: &SystemSpec, source: &str, dest: &str, t_max: f64, coarse_points: usize) -> Result<Peak> {
    let s = spec.terminal_index(source)?;
    let d = spec.terminal_index(dest)?;
    peak_population(
        &full_hamiltonian(spec),
        &basis_state(spec.dim(), s),
        d,
        t_max,
        coarse_points,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{SpinNetwork, Terminal};
    use std::f64::consts::PI;

    fn rabi(b: f64) -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[0.0, b, b, 0.0].map(|x| C64::new(x, 0.0)))
    }

    #[test]
    fn identity_at_zero_and_rabi_half_period() {
        let h = rabi(0.3);
        let psi0 = basis_state(2, 0);
        assert_eq!(evolve(&h, &psi0, 0.0).unwrap(), psi0);
        let psi = evolve(&h, &psi0, PI / 0.6).unwrap();
        assert!((psi[1].norm() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn eigenstate_only_gains_phase() {
        let h = rabi(0.7);
        let s = 1.0 / 2f64.sqrt();
        let psi0 = DVector::from_vec(vec![C64::new(s, 0.0), C64::new(s, 0.0)]);
        let psi = evolve(&h, &psi0, 3.1).unwrap();
        let expected = psi0.map(|z| z * C64::from_polar(1.0, -0.7 * 3.1));
        assert!((psi - expected).norm() < 1e-13);
    }

    #[test]
    fn input_validation() {
        let h = rabi(1.0);
        assert!(matches!(
            evolve(&h, &basis_state(3, 0), 1.0),
            Err(Error::DimensionMismatch { expected: 2, actual: 3 })
        ));
        let bad = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        assert!(matches!(evolve(&h, &bad, 1.0), Err(Error::NotNormalized(_))));
        assert!(time_grid(1.0, 1).is_err());
        assert!(time_grid(0.0, 5).is_err());
    }

    #[test]
    fn grid_includes_endpoints() {
        let g = time_grid(10.0, 3).unwrap();
        assert_eq!(g, vec![0.0, 5.0, 10.0]);
    }

    #[test]
    fn two_level_peak() {
        let b = 0.05;
        let p = peak_population(&rabi(b), &basis_state(2, 0), 1, 2.0 * PI / (2.0 * b) * 0.9, 2000).unwrap();
        assert!((p.time - PI / (2.0 * b)).abs() < 1e-6 * 60.0);
        assert!((p.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cache_reuses_entries() {
        let cache = PropagatorCache::new(4);
        let a = cache.get_or_insert(&rabi(0.1)).unwrap();
        let b = cache.get_or_insert(&rabi(0.1)).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        cache.get_or_insert(&rabi(0.2)).unwrap();
        assert_eq!(cache.len(), 2);
        for k in 0..5 {
            cache.get_or_insert(&rabi(1.0 + k as f64)).unwrap();
        }
        assert!(cache.len() <= 4);
    }

    #[test]
    fn closed_channel_gives_no_transfer() {
        let spec = SystemSpec::new(
            SpinNetwork::chain(3).unwrap(),
            vec![
                Terminal::new("s", 1, 0.01, 0.0).unwrap(),
                Terminal::new("d", 2, 0.01, 0.0).unwrap(),
            ],
        )
        .unwrap();
        // λ = 0 has no weight on node 2; only far off-resonant leakage remains.
        let p = peak_transfer(&spec, "s", "d", 1e4, 2000).unwrap();
        assert!(p.value < 1e-3);
    }

    #[test]
    fn trajectory_hygiene() {
        let l5 = 2.0 * (5.0 * PI / 31.0).cos();
        let spec = SystemSpec::new(
            SpinNetwork::chain(30).unwrap(),
            vec![
                Terminal::new("s", 2, 0.01, l5).unwrap(),
                Terminal::new("d", 13, 0.01, l5).unwrap(),
            ],
        )
        .unwrap();
        let tr = trajectory(&spec, "s", 2500.0, 501).unwrap();
        assert_eq!(tr.len(), 501);
        assert!(tr.norm_drift() < 1e-10);
        assert!(tr.population_sum_drift() < 1e-10);
        assert!(tr.energy_drift(&full_hamiltonian(&spec)) < 1e-9);
        assert_eq!(tr.basis_labels[0], BasisLabel::Terminal("s".into()));
        assert!(transfer_fidelity(&spec, "s", "d", 0.0).unwrap() == 0.0);
    }
}
