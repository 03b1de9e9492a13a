//! Two-stage W preparation through the uniform mode of a 21-cycle.

use spinnet::effective::EffectiveOptions;
use spinnet::network::{SpinNetwork, SystemSpec, Terminal};
use spinnet::protocol::{self, StageTiming};

fn main() -> spinnet::error::Result<()> {
    for c in [0.05, 0.02] {
        for m in [2, 3, 4] {
            let spec = SystemSpec::new(
                SpinNetwork::cycle(21)?,
                (0..m)
                    .map(|j| Terminal::new(format!("s{}", j + 1), 1 + 21 * j / m, c, 2.0))
                    .collect::<Result<Vec<_>, _>>()?,
            )?;
            for timing in [StageTiming::Analytic, StageTiming::Refined] {
                let r = protocol::w_resonant_protocol(&spec, 2.0, timing, &EffectiveOptions::default())?;
                let pops: Vec<String> = r.populations.iter().map(|(l, p)| format!("{l}={p:.4}")).collect();
                println!(
                    "εξ = {c}  m = {m}  {timing:?}: fidelity {:.4}, stages {:.1}/{:.1}, {}",
                    r.achieved_fidelity,
                    r.target_times[0],
                    r.target_times[1],
                    pops.join(" ")
                );
            }
        }
    }
    Ok(())
}
