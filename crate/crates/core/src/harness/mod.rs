//! Discrete-interval simulation of the whole system: scenario preparation,
//! the per-interval center loop, metrics, parameter sweeps, anomaly replay
//! and file output.

pub mod config;
pub mod io;
pub mod metrics;
pub mod replay;
pub mod scenario;
pub mod sim;
pub mod sweep;

use rayon::prelude::*;

pub use config::RunConfig;
pub use io::Format;
pub use metrics::RunMetrics;
pub use replay::{replay_anomaly_scenario, ReplayReport};
pub use scenario::Scenario;
pub use sim::{simulate, simulate_with, RunOutput};
pub use sweep::{sweep, SweepGrid, SweepResult};

use crate::{Error, Result};

/// Process exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Process exit status for an invalid configuration.
pub const EXIT_CONFIG: i32 = 1;
/// Process exit status for a runtime failure.
pub const EXIT_RUNTIME: i32 = 2;
/// Process exit status when more than half of the intervals were infeasible.
pub const EXIT_INFEASIBLE: i32 = 3;

/// Exit status for a failed run.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_RUNTIME
    }
}

/// Exit status for completed runs: infeasibility dominates any run.
pub fn outcome_code(outputs: &[RunOutput]) -> i32 {
    if outputs.iter().any(|o| o.metrics.infeasible_dominated()) {
        EXIT_INFEASIBLE
    } else {
        EXIT_OK
    }
}

/// Build the scenario once and run every configured algorithm on it.
/// Outputs follow the configured algorithm order.
pub fn run_all(cfg: &RunConfig) -> Result<(Scenario, Vec<RunOutput>)> {
    let scenario = Scenario::build(cfg)?;
    let outputs = run_scenario(&scenario, cfg)?;
    Ok((scenario, outputs))
}

/// Run every configured algorithm on a prepared scenario, in parallel.
pub fn run_scenario(scenario: &Scenario, cfg: &RunConfig) -> Result<Vec<RunOutput>> {
    cfg.algorithm_list()
        .par_iter()
        .map(|&alg| simulate(scenario, cfg, alg))
        .collect()
}
