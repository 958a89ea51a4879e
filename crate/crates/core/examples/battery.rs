//! Drive one node's battery with flow-coupled harvest under three fixed
//! transmission duties and account for wasted energy and gaps.

use hydrosched::energy::{EnergyConfig, EnergyDraws, NodeEnergyState};
use hydrosched::trace_gen::FlowProfile;
use hydrosched::NodeId;

fn main() -> hydrosched::Result<()> {
    let cfg = EnergyConfig::default();
    let profile = FlowProfile::default();
    let node = NodeId(3);
    let days = 3;
    let intervals = days * 96;
    let draws: Vec<_> = EnergyDraws::new(&cfg, &profile, 900.0, node, 5)
        .take(intervals)
        .collect();
    let harvested: f64 = draws.iter().map(|d| d.h).sum();
    println!(
        "{days} days, {:.1} J harvested on average per interval",
        harvested / intervals as f64
    );

    println!(
        "{:>12} {:>10} {:>10} {:>6} {:>14}",
        "duty", "final_J", "wasted_J", "gaps", "max_residual"
    );
    for every in [1, 2, 4] {
        let mut state = NodeEnergyState::new(node, cfg.b_init, cfg.b_max)?;
        let mut gaps = 0;
        let mut residual: f64 = 0.0;
        for (t, d) in draws.iter().enumerate() {
            let step = state.step(t % every == 0, d.e_tr, d.e_in, d.h)?;
            gaps += step.gap() as usize;
            residual = residual.max(step.conservation_residual().abs());
        }
        println!(
            "{:>12} {:>10.1} {:>10.1} {:>6} {:>14.1e}",
            format!("1 in {every}"),
            state.b,
            state.total_wasted,
            gaps,
            residual
        );
    }
    Ok(())
}
