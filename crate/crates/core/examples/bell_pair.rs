//! Bell pair from stopping a detuned transfer at half time.

use spinnet::effective::EffectiveOptions;
use spinnet::network::{SpinNetwork, SystemSpec, Terminal};
use spinnet::protocol::{self, FreeParameter};

fn main() -> spinnet::error::Result<()> {
    for c in [0.02, 0.01, 0.005] {
        let spec = SystemSpec::new(
            SpinNetwork::chain(4)?,
            vec![Terminal::new("s", 1, c, 0.0)?, Terminal::new("d", 4, c, 0.0)?],
        )?;
        let cal = protocol::calibrate_nonresonant(&spec, FreeParameter::SourceField, &EffectiveOptions::default())?;
        let r = protocol::bell_protocol(&cal)?;
        println!(
            "εξ = {c:<5}  t = {:>8.2}  fidelity {:.6}  relative phase {:+.4}",
            r.target_times[0], r.achieved_fidelity, r.optimal_phases[1]
        );
    }
    Ok(())
}
