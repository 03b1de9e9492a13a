//! Hermitian eigendecompositions, degeneracy classes and terminal-to-mode
//! coupling amplitudes.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::network::{SpinNetwork, Terminal};

/// Largest tolerated `|A - A†|` entry for input accepted as Hermitian.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

/// Default degeneracy tolerance `1e-8 · max(1, ρ)` for spectral radius `ρ`.
pub fn default_degeneracy_tolerance(spectral_radius: f64) -> f64 {
    1e-8 * spectral_radius.max(1.0)
}

/// Eigenvalues in ascending order with aligned unit eigenvectors (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<C64>,
    degeneracy_classes: Vec<Vec<usize>>,
    tolerance: f64,
}

impl SpectralDecomposition {
    /// Sorts, fixes eigenvector phases and groups degeneracies.
    fn from_parts(values: Vec<f64>, mut vectors: DMatrix<C64>, tolerance: Option<f64>) -> Self {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| values[i]));
        let sorted = DMatrix::from_fn(vectors.nrows(), n, |r, c| vectors[(r, order[c])]);
        vectors = sorted;
        for mut col in vectors.column_iter_mut() {
            fix_phase(col.as_mut_slice());
        }
        let radius = eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tolerance = tolerance.unwrap_or_else(|| default_degeneracy_tolerance(radius));
        let degeneracy_classes = group_degenerate(eigenvalues.as_slice(), tolerance);
        Self {
            eigenvalues,
            eigenvectors: vectors,
            degeneracy_classes,
            tolerance,
        }
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, index: usize) -> f64 {
        self.eigenvalues[index]
    }

    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, index: usize) -> DVector<C64> {
        self.eigenvectors.column(index).into_owned()
    }

    /// Index partition by eigenvalue equality within [`Self::tolerance`].
    pub fn degeneracy_classes(&self) -> &[Vec<usize>] {
        &self.degeneracy_classes
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Ascending index of the `k`-th largest eigenvalue (`k` is 1-based, so
    /// `k = 1` is the top of the spectrum). For a chain this matches the
    /// closed-form label `λ_k = 2cos(πk/(N+1))`.
    pub fn descending_index(&self, k: usize) -> Result<usize> {
        let n = self.dim();
        if k == 0 || k > n {
            return Err(Error::InvalidInput(format!("mode index {k} outside 1..={n}")));
        }
        Ok(n - k)
    }

    /// The degeneracy class containing `index`.
    pub fn class_containing(&self, index: usize) -> &[usize] {
        self.degeneracy_classes
            .iter()
            .find(|c| c.contains(&index))
            .map(Vec::as_slice)
            .expect("every index belongs to a class")
    }

    /// All indices whose eigenvalue lies within `tolerance` of `value`.
    pub fn degeneracy_class_of(&self, value: f64, tolerance: f64) -> Result<Vec<usize>> {
        let class: Vec<usize> = (0..self.dim())
            .filter(|&i| (self.eigenvalues[i] - value).abs() <= tolerance)
            .collect();
        if class.is_empty() {
            return Err(Error::NotAnEigenvalue { value, tolerance });
        }
        Ok(class)
    }

    /// Resolves `value` to a single non-degenerate mode index.
    pub fn simple_mode(&self, value: f64, tolerance: f64) -> Result<usize> {
        let class = self.degeneracy_class_of(value, tolerance)?;
        let full = self.class_containing(class[0]);
        if class.len() > 1 || full.len() > 1 {
            return Err(Error::DegenerateMode {
                value,
                multiplicity: class.len().max(full.len()),
            });
        }
        Ok(class[0])
    }

    /// Orthogonal projector onto the span of the given eigenvectors.
    pub fn projector(&self, indices: &[usize]) -> DMatrix<C64> {
        let n = self.eigenvectors.nrows();
        let mut p = DMatrix::zeros(n, n);
        for &k in indices {
            let v = self.eigenvectors.column(k);
            p += v * v.adjoint();
        }
        p
    }

    /// `V Λ V†`.
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let lambda = DMatrix::from_diagonal(&self.eigenvalues.map(|x| C64::new(x, 0.0)));
        &self.eigenvectors * lambda * self.eigenvectors.adjoint()
    }

    /// `max |⟨v_i|v_j⟩ - δ_ij|`.
    pub fn orthonormality_error(&self) -> f64 {
        let n = self.dim();
        let gram = self.eigenvectors.adjoint() * &self.eigenvectors;
        max_abs(&(gram - DMatrix::identity(n, n)))
    }
}

/// Makes the first component of (numerically) largest modulus real positive.
fn fix_phase(col: &mut [C64]) {
    let max = col.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    if max == 0.0 {
        return;
    }
    let pivot = col
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-10))
        .expect("pivot exists");
    let p = col[pivot];
    let rot = p.conj() / p.norm();
    for z in col.iter_mut() {
        *z *= rot;
    }
    col[pivot] = C64::new(col[pivot].re, 0.0);
}

fn group_degenerate(sorted: &[f64], tolerance: f64) -> Vec<Vec<usize>> {
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        match classes.last_mut() {
            Some(last) if (v - sorted[*last.last().unwrap()]).abs() <= tolerance => last.push(i),
            _ => classes.push(vec![i]),
        }
    }
    classes
}

pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// `max |A_ij - conj(A_ji)|`.
pub fn hermiticity_error(a: &DMatrix<C64>) -> f64 {
    max_abs(&(a - a.adjoint()))
}

/// Eigendecomposition of a Hermitian matrix.
///
/// `degeneracy_tolerance = None` uses [`default_degeneracy_tolerance`].
/// Eigenvector phases are fixed so that the first component of largest
/// modulus is real and positive, which makes repeated runs bit-identical.
pub fn eigendecompose(a: &DMatrix<C64>, degeneracy_tolerance: Option<f64>) -> Result<SpectralDecomposition> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            actual: a.ncols(),
        });
    }
    let herm = hermiticity_error(a);
    if herm > HERMITIAN_TOLERANCE {
        return Err(Error::NotHermitian(herm));
    }
    if a.nrows() == 0 {
        return Ok(SpectralDecomposition::from_parts(
            Vec::new(),
            DMatrix::zeros(0, 0),
            degeneracy_tolerance,
        ));
    }
    let eig = a
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numeric(format!("Hermitian eigensolver did not converge (n = {})", a.nrows())))?;
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("eigensolver produced non-finite eigenvalues".into()));
    }
    Ok(SpectralDecomposition::from_parts(
        values,
        eig.eigenvectors,
        degeneracy_tolerance,
    ))
}

/// Eigendecomposition of a network's adjacency matrix.
pub fn network_spectrum(network: &SpinNetwork) -> Result<SpectralDecomposition> {
    eigendecompose(&network.adjacency_complex(), None)
}

/// Analytic spectrum of the unit chain: `λ_k = 2cos(πk/(N+1))` with
/// components `√(2/(N+1)) sin(πkn/(N+1))`.
pub fn chain_spectrum_closed_form(n: usize) -> Result<SpectralDecomposition> {
    if n == 0 {
        return Err(Error::InvalidSize("a chain needs at least one node".into()));
    }
    let len = (n + 1) as f64;
    let norm = (2.0 / len).sqrt();
    let values = (1..=n).map(|k| 2.0 * (PI * k as f64 / len).cos()).collect();
    let vectors = DMatrix::from_fn(n, n, |row, col| {
        let (site, k) = ((row + 1) as f64, (col + 1) as f64);
        C64::new(norm * (PI * k * site / len).sin(), 0.0)
    });
    Ok(SpectralDecomposition::from_parts(values, vectors, None))
}

/// Analytic spectrum of the unit cycle: `λ_k = 2cos(2πk/N)`, returned in a
/// real basis (cosine/sine combinations for each degenerate pair).
pub fn cycle_spectrum_closed_form(n: usize) -> Result<SpectralDecomposition> {
    if n < 3 {
        return Err(Error::InvalidSize(format!(
            "a cycle needs at least three nodes, got {n}"
        )));
    }
    let nf = n as f64;
    let mut values = Vec::with_capacity(n);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
    values.push(2.0);
    columns.push(vec![1.0 / nf.sqrt(); n]);
    if n.is_multiple_of(2) {
        values.push(-2.0);
        columns.push(
            (1..=n)
                .map(|site| if site % 2 == 0 { 1.0 } else { -1.0 } / nf.sqrt())
                .collect(),
        );
    }
    let pair_norm = (2.0 / nf).sqrt();
    for k in 1..=((n - 1) / 2) {
        let theta = 2.0 * PI * k as f64 / nf;
        let value = 2.0 * theta.cos();
        values.push(value);
        columns.push((1..=n).map(|site| pair_norm * (theta * site as f64).cos()).collect());
        values.push(value);
        columns.push((1..=n).map(|site| pair_norm * (theta * site as f64).sin()).collect());
    }
    let vectors = DMatrix::from_fn(n, n, |row, col| C64::new(columns[col][row], 0.0));
    Ok(SpectralDecomposition::from_parts(values, vectors, None))
}

/// Outcome of the Perron–Frobenius check on a network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerronReport {
    pub top_eigenvalue: f64,
    pub simple: bool,
    pub strictly_positive: bool,
}

/// Checks that the top eigenvalue is simple with a strictly positive
/// eigenvector (guaranteed for connected graphs with nonnegative weights).
pub fn perron_check(network: &SpinNetwork) -> Result<PerronReport> {
    let decomp = network_spectrum(network)?;
    let top = decomp.dim() - 1;
    let simple = decomp.class_containing(top).len() == 1;
    let strictly_positive = decomp
        .eigenvectors()
        .column(top)
        .iter()
        .all(|z| z.re > 0.0 && z.im.abs() <= 1e-12 * z.re.max(1.0));
    Ok(PerronReport {
        top_eigenvalue: decomp.eigenvalue(top),
        simple,
        strictly_positive,
    })
}

/// Overlaps `g_αλ = ⟨n_α|λ⟩` of every eigenmode with a terminal's attachment node.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingProfile {
    pub label: String,
    pub node: usize,
    pub amplitudes: DVector<C64>,
}

impl CouplingProfile {
    pub fn amplitude(&self, mode: usize) -> C64 {
        self.amplitudes[mode]
    }

    /// `Σ_λ |g_αλ|²`, equal to one by completeness.
    pub fn total_weight(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Attachment-node components of the network eigenvectors in `decomp`.
pub fn node_amplitudes(decomp: &SpectralDecomposition, node: usize) -> Result<DVector<C64>> {
    if node == 0 || node > decomp.eigenvectors().nrows() {
        return Err(Error::InvalidInput(format!(
            "node {node} outside 1..={}",
            decomp.eigenvectors().nrows()
        )));
    }
    Ok(decomp.eigenvectors().row(node - 1).transpose())
}

pub fn coupling_profile(decomp: &SpectralDecomposition, terminal: &Terminal) -> Result<CouplingProfile> {
    Ok(CouplingProfile {
        label: terminal.label().to_string(),
        node: terminal.node(),
        amplitudes: node_amplitudes(decomp, terminal.node())?,
    })
}
