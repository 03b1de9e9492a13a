//! Resonant transfer through one chain mode, with and without coupling
//! calibration.

use std::f64::consts::PI;

use spinnet::dynamics;
use spinnet::effective::EffectiveOptions;
use spinnet::network::{SpinNetwork, SystemSpec, Terminal};
use spinnet::protocol;

fn main() -> spinnet::error::Result<()> {
    let lambda = 2.0 * (5.0 * PI / 31.0).cos();
    let spec = SystemSpec::new(
        SpinNetwork::chain(30)?,
        vec![
            Terminal::new("s", 2, 0.01, lambda)?,
            Terminal::new("d", 13, 0.01, lambda)?,
        ],
    )?;

    let cal = protocol::calibrate_resonant(&spec, lambda, &EffectiveOptions::default())?;
    let t = cal.predicted_time;
    println!("mode λ = {lambda:.6}, predicted transfer time {t:.2}");
    println!(
        "calibrated εξ_d = {:.6}",
        cal.adjusted_spec.terminal("d")?.coupling().re
    );
    for w in &cal.warnings {
        println!("warning: {w}");
    }

    let before = dynamics::peak_transfer(&spec, "s", "d", 2.5 * t, 20_000)?;
    let after = dynamics::peak_transfer(&cal.adjusted_spec, "s", "d", 2.5 * t, 20_000)?;
    println!("uncalibrated peak {:.6} at t = {:.2}", before.value, before.time);
    println!("calibrated   peak {:.6} at t = {:.2}", after.value, after.time);
    Ok(())
}
