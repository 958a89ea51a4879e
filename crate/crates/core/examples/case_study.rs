//! Seven-node case study: FAST-DTS against RG, EGm and RRm on one shared
//! scenario. Pass a directory to also write the run's CSV outputs.

use std::path::PathBuf;

use hydrosched::harness::{self, io, Format, RunConfig};

fn main() -> hydrosched::Result<()> {
    let cfg = RunConfig::case_study();
    let (scenario, outputs) = harness::run_all(&cfg)?;
    println!(
        "{} nodes, {} intervals, {} anomaly reports",
        scenario.node_count(),
        scenario.duration(),
        scenario.anomalies.len()
    );
    println!(
        "{:<6} {:>12} {:>10} {:>6} {:>10}",
        "algo", "reliability%", "wasted_kJ", "gaps", "transmit%"
    );
    for m in outputs.iter().map(|o| &o.metrics) {
        println!(
            "{:<6} {:>12.3} {:>10.3} {:>6} {:>10.2}",
            m.algorithm.to_string(),
            m.reliability_pct,
            m.wasted_kj,
            m.gaps,
            m.transmit_pct
        );
    }
    if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
        for path in io::write_run(&dir, &cfg, &scenario, &outputs, Format::Csv)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
