//! Effective models against exact dynamics on a detuned chain pair.

use spinnet::dynamics;
use spinnet::effective::{self, EffectiveOptions};
use spinnet::network::{SpinNetwork, SystemSpec, Terminal};

fn main() -> spinnet::error::Result<()> {
    let opts = EffectiveOptions::default();
    for c in [0.02, 0.01, 0.005] {
        let spec = SystemSpec::new(
            SpinNetwork::chain(10)?,
            vec![Terminal::new("s", 1, c, 0.0)?, Terminal::new("d", 10, c, 0.0)?],
        )?;
        let h = effective::effective_nonresonant(&spec, &opts)?;
        let t = effective::transfer_time_estimate(&h)?;
        let residual = effective::sw_generator(&spec, &opts)?.condition_residual();
        let peak = dynamics::peak_transfer(&spec, "s", "d", 2.0 * t, 4000)?;
        println!(
            "εξ = {c:<5}  |H_sd| = {:.4e}  T = {t:>9.1}  exact peak {:.6} at {:>9.1}  generator residual {residual:.1e}",
            h.off_diagonal_magnitudes()[0],
            peak.value,
            peak.time
        );
    }
    Ok(())
}
