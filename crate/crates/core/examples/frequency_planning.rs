//! Assigning detuned fields to several users sharing one source.

use spinnet::network::SpinNetwork;
use spinnet::protocol::{self, PlanConstraints};

fn main() -> spinnet::error::Result<()> {
    let network = SpinNetwork::cycle(21)?;
    let constraints = PlanConstraints {
        min_mutual_sep: 0.05,
        min_spectrum_sep: 0.1,
        max_time: None,
        source_node: 3,
        coupling: 0.1,
    };
    let plan = protocol::frequency_plan(&network, &[("a", 10), ("b", 18), ("c", 14)], &constraints)?;
    for u in &plan.users {
        println!(
            "{} at node {:>2}: ω = {:+.4}, transfer time {:.1}",
            u.label, u.node, u.omega, u.predicted_time
        );
    }
    println!(
        "min |ω − λ| = {:.4}, min |ω_i − ω_j| = {:.4}, worst time {:.1}",
        plan.min_eigenvalue_separation, plan.min_mutual_separation, plan.worst_predicted_time
    );
    Ok(())
}
