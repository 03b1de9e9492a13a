//! Closed-form spectra against the numerical eigensolver, the generator
//! condition on random detuned systems, and the Perron property.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::effective::{sw_generator, EffectiveOptions};
use crate::network::{SpinNetwork, SystemSpec, Terminal};
use crate::spectral::{self, SpectralDecomposition};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelftestReport {
    pub lines: Vec<String>,
    failed: usize,
}

impl SelftestReport {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        if !ok {
            self.failed += 1;
        }
        self.lines
            .push(format!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" }));
    }

    pub fn passed(&self) -> bool {
        self.failed == 0
    }

    pub fn failures(&self) -> usize {
        self.failed
    }
}

/// Largest eigenvalue and class-projector mismatch between two decompositions
/// of the same matrix.
pub(crate) fn spectral_mismatch(a: &SpectralDecomposition, b: &SpectralDecomposition) -> (f64, f64) {
    let eig = (a.eigenvalues() - b.eigenvalues()).amax();
    let mut proj: f64 = 0.0;
    for class in a.degeneracy_classes() {
        let d: DMatrix<C64> = a.projector(class) - b.projector(class);
        proj = proj.max(d.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    (eig, proj)
}

/// Runs every check; `seed` drives the random graphs.
pub fn selftest(seed: u64) -> SelftestReport {
    let mut r = SelftestReport::default();

    let (mut eig, mut proj) = (0.0f64, 0.0f64);
    let mut errors = Vec::new();
    for n in 2..=32 {
        let pairs = [
            (SpinNetwork::chain(n), spectral::chain_spectrum_closed_form(n)),
            (
                SpinNetwork::cycle(n.max(3)),
                spectral::cycle_spectrum_closed_form(n.max(3)),
            ),
        ];
        for (net, closed) in pairs {
            match (net.and_then(|g| spectral::network_spectrum(&g)), closed) {
                (Ok(num), Ok(cf)) => {
                    let (e, p) = spectral_mismatch(&cf, &num);
                    eig = eig.max(e);
                    proj = proj.max(p);
                }
                (Err(e), _) | (_, Err(e)) => errors.push(e.to_string()),
            }
        }
    }
    r.check(
        "closed-form spectra (chain, cycle, N <= 32)",
        errors.is_empty() && eig < 1e-9 && proj < 1e-8,
        format!("max eigenvalue error {eig:.2e}, max projector error {proj:.2e}"),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut built = 0;
    for _ in 0..20 {
        let n = rng.random_range(2..=12);
        let net = SpinNetwork::random_connected(n, 0.4, &mut rng);
        let Ok(decomp) = spectral::network_spectrum(&net) else {
            continue;
        };
        let lambda = decomp.eigenvalues();
        let mut omega;
        loop {
            omega = rng.random_range(lambda.min() - 1.0..lambda.max() + 1.0);
            if lambda.iter().all(|l| (l - omega).abs() >= 0.1) {
                break;
            }
        }
        let t = Terminal::new("s", rng.random_range(1..=n), C64::new(0.05, 0.02), omega);
        let Ok(spec) = t.and_then(|t| SystemSpec::new(net, vec![t])) else {
            continue;
        };
        if let Ok(g) = sw_generator(&spec, &EffectiveOptions::default()) {
            worst = worst.max(g.condition_residual());
            built += 1;
        }
    }
    r.check(
        "generator condition |V + i[S,H0]|",
        built == 20 && worst < 1e-12,
        format!("{built}/20 systems, worst residual {worst:.2e} (seed {seed})"),
    );

    let mut ok = 0;
    for _ in 0..20 {
        let n = rng.random_range(2..=16);
        let net = SpinNetwork::random_connected(n, 0.3, &mut rng);
        if let Ok(p) = spectral::perron_check(&net) {
            if p.simple && p.strictly_positive {
                ok += 1;
            }
        }
    }
    r.check("Perron top mode", ok == 20, format!("{ok}/20 random connected graphs"));
    r
}
