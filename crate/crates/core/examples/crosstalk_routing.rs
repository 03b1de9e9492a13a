//! Routing on a 21-cycle while a third user drifts toward the source field.

use spinnet::effective::EffectiveOptions;
use spinnet::network::{SpinNetwork, SystemSpec, Terminal};
use spinnet::protocol;

fn main() -> spinnet::error::Result<()> {
    for omega_u in [-0.85, -0.87, -0.89] {
        let spec = SystemSpec::new(
            SpinNetwork::cycle(21)?,
            vec![
                Terminal::new("s", 3, 0.1, -0.9)?,
                Terminal::new("u", 10, 0.1, omega_u)?,
                Terminal::new("d", 18, 0.1, -0.9)?,
            ],
        )?;
        let route = protocol::route(&spec, "s", "d", &EffectiveOptions::default())?;
        let t = route.calibration.predicted_time;
        let peaks = protocol::crosstalk_peaks(&route.adjusted_spec, "s", 2.0 * t, 20_000)?;
        print!("ω_u = {omega_u:+.2}  T = {t:.2}");
        for (label, p) in &peaks {
            print!("  {label}: {:.4}", p.value);
        }
        println!();
        for w in &route.warnings {
            println!("  warning: {w}");
        }
    }
    Ok(())
}
