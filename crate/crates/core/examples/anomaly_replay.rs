//! A node's pressure diverges mid-run: its anomaly counter marks it as an
//! outlier, it is forced to send raw data, its links drop out of the
//! correlation graph and return once the disturbance has passed.

use hydrosched::harness::{replay_anomaly_scenario, RunConfig};

fn main() -> hydrosched::Result<()> {
    let report = replay_anomaly_scenario(&RunConfig::anomaly_replay())?;
    let Some(target) = report.target else {
        println!("the configuration holds no node-located anomaly");
        return Ok(());
    };
    println!("watching node {target}");
    for e in &report.events {
        println!("interval {:>3}: {}", e.interval, e.kind);
    }
    let names = ["outlier", "enforced", "link removed", "link restored"];
    for (name, t) in names.iter().zip(report.milestones) {
        println!(
            "{name:>14}: {}",
            t.map_or("never".to_string(), |t| format!("interval {t}"))
        );
    }
    println!("causal order observed: {}", report.ordering_ok);
    println!(
        "samples inside the disturbance: {} received raw, {} left to estimation",
        report.divergent_raw_samples, report.divergent_estimated_samples
    );
    Ok(())
}
