//! Synthetic 80-node network: FAST-DTS against the baselines at scale.
//! An optional argument shortens the run to that many intervals.

use std::time::Instant;

use hydrosched::harness::{self, RunConfig};

fn main() -> hydrosched::Result<()> {
    let mut cfg = RunConfig::scalability();
    if let Some(arg) = std::env::args().nth(1) {
        cfg.duration = arg
            .parse()
            .map_err(|_| hydrosched::Error::Config(format!("duration {arg:?} is not an interval count")))?;
    }
    let start = Instant::now();
    let (scenario, outputs) = harness::run_all(&cfg)?;
    println!(
        "{} nodes × {} intervals in {:.1} s",
        scenario.node_count(),
        scenario.duration(),
        start.elapsed().as_secs_f64()
    );
    println!(
        "{:<6} {:>12} {:>10} {:>8} {:>12}",
        "algo", "reliability%", "wasted_kJ", "gaps", "fits/interval"
    );
    for m in outputs.iter().map(|o| &o.metrics) {
        println!(
            "{:<6} {:>12.3} {:>10.1} {:>8} {:>12.1}",
            m.algorithm.to_string(),
            m.reliability_pct,
            m.wasted_kj,
            m.gaps,
            m.rlb_evaluations as f64 / scenario.duration() as f64
        );
    }
    Ok(())
}
