//! Chain and cycle spectra, degeneracy classes and the Perron mode of a
//! random graph.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spinnet::network::SpinNetwork;
use spinnet::spectral::{self, network_spectrum};

fn main() -> spinnet::error::Result<()> {
    for n in [6, 7] {
        let chain = network_spectrum(&SpinNetwork::chain(n)?)?;
        let closed = spectral::chain_spectrum_closed_form(n)?;
        let err = (chain.eigenvalues() - closed.eigenvalues()).amax();
        let values: Vec<String> = chain.eigenvalues().iter().map(|l| format!("{l:+.6}")).collect();
        println!("chain({n}) eigenvalues {}", values.join(" "));
        println!("  closed form agrees to {err:.1e}");
    }

    let cycle = network_spectrum(&SpinNetwork::cycle(8)?)?;
    println!("cycle(8) degeneracy classes:");
    for class in cycle.degeneracy_classes() {
        println!("  λ = {:+.6}  multiplicity {}", cycle.eigenvalue(class[0]), class.len());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = SpinNetwork::random_connected(12, 0.3, &mut rng);
    let perron = spectral::perron_check(&g)?;
    println!(
        "random graph: {} edges, top eigenvalue {:.6}, simple {}, positive {}",
        g.edges().len(),
        perron.top_eigenvalue,
        perron.simple,
        perron.strictly_positive
    );
    Ok(())
}
