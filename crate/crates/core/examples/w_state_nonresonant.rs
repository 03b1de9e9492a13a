//! Three detuned users on a 21-cycle meeting at equal populations.

use std::f64::consts::PI;

use spinnet::effective::{self, EffectiveOptions};
use spinnet::network::{SpinNetwork, SystemSpec, Terminal};
use spinnet::protocol::{self, WScan};

fn main() -> spinnet::error::Result<()> {
    let spec = SystemSpec::new(
        SpinNetwork::cycle(21)?,
        vec![
            Terminal::new("s1", 3, 0.1, -0.9)?,
            Terminal::new("s2", 12, 0.1, -0.9)?,
            Terminal::new("s3", 15, 0.1, -0.9)?,
        ],
    )?;
    let opts = EffectiveOptions::default();
    let h = effective::effective_multiuser(&spec, &opts)?;
    let weakest = h.off_diagonal_magnitudes().into_iter().fold(f64::INFINITY, f64::min);
    let r = protocol::w_nonresonant_protocol(&spec, &WScan::new(2.0 * PI / weakest), &opts)?;
    println!(
        "W state at t = {:.3}, fidelity {:.6}",
        r.target_times[0], r.achieved_fidelity
    );
    for (label, p) in &r.populations {
        println!("  {label}: {p:.4}");
    }
    println!("phases {:?}", r.optimal_phases);
    Ok(())
}
