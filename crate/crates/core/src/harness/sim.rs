//! The per-interval loop for one algorithm over a prepared [`Scenario`].
//!
//! Per interval: anomaly counters arrive, the center flags counter outliers,
//! requests refreshes and partitions the nodes, the scheduler decides, every
//! node steps its battery, delivered raw streams update the correlation graph
//! and every node's test reliability is scored.
//!
//! Test reliability uses the model trained on history before the interval and
//! the neighbour sets the decision saw, so it is evaluated before the delivered
//! streams enter the history; the result is the same as evaluating it after
//! the graph update.

use std::collections::BTreeMap;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::metrics::RunMetrics;
use super::scenario::Scenario;
use crate::correlation::{
    chauvenet_outliers, partition, refresh_requests, CorrelationGraph, EnforceReason, GraphSnapshot, ObservationLog,
};
use crate::energy::{EnergyStep, NodeEnergyState};
use crate::estimation::{ModelDump, TrainingReliability};
use crate::scheduler::{lyapunov, schedule, Algorithm, NodeState, Provenance, SchedulerConfig, SlotInput};
use crate::{Error, NodeId, Result};

/// One node in one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeInterval {
    pub node: usize,
    pub step: EnergyStep,
    pub delivered: bool,
    pub reliability: f64,
    pub provenance: Option<Provenance>,
    pub enforced: Vec<EnforceReason>,
    pub anomalies: u32,
}

/// Center-side record of one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub interval: u64,
    pub outliers: Vec<usize>,
    pub refresh: Vec<usize>,
    pub selected: Vec<usize>,
    pub provenance: BTreeMap<usize, Provenance>,
    pub objective: Option<f64>,
    pub infeasible: bool,
    pub rlb_evaluations: usize,
    pub lyapunov: f64,
    pub links_added: Vec<(usize, usize)>,
    pub links_removed: Vec<(usize, usize)>,
    /// Links after the graph update.
    pub links: usize,
    pub nodes: Vec<NodeInterval>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub algorithm: Algorithm,
    pub ids: Vec<NodeId>,
    pub b_exp: f64,
    pub records: Vec<IntervalRecord>,
    pub metrics: RunMetrics,
    pub snapshots: Vec<GraphSnapshot>,
    pub models: Vec<ModelDump>,
}

/// Run `algorithm` over `scenario` with the scheduler settings of `cfg`.
pub fn simulate(scenario: &Scenario, cfg: &RunConfig, algorithm: Algorithm) -> Result<RunOutput> {
    let sched = SchedulerConfig {
        algorithm,
        ..cfg.scheduler
    };
    simulate_with(scenario, cfg, &sched)
}

/// Run with an explicit scheduler configuration (used by sweeps).
pub fn simulate_with(scenario: &Scenario, cfg: &RunConfig, sched: &SchedulerConfig) -> Result<RunOutput> {
    let n = scenario.node_count();
    sched.validate(cfg.energy.b_max, n)?;
    let est = cfg.estimation;
    let capacity = (est.horizon + est.window as u64 + 1) as usize;
    let mut log = ObservationLog::new(scenario.refs.clone(), capacity);
    let mut graph = CorrelationGraph::new(scenario.ids.clone(), cfg.correlation.threshold);
    let mut batteries: Vec<NodeEnergyState> = scenario
        .ids
        .iter()
        .map(|&id| NodeEnergyState::new(id, cfg.energy.b_init, cfg.energy.b_max))
        .collect::<Result<_>>()?;
    let mut records = Vec::with_capacity(scenario.intervals.len());
    let mut snapshots = Vec::new();
    let mut models = Vec::new();
    for (t, data) in scenario.intervals.iter().enumerate() {
        let t = t as u64;
        let at = |e: Error| Error::AtInterval {
            interval: t,
            source: Box::new(e),
        };
        let outliers = chauvenet_outliers(&data.counters, &cfg.correlation.chauvenet);
        let refresh = refresh_requests(&graph, &log, t, cfg.correlation.staleness);
        let part = partition(&graph, &outliers, &refresh);
        let states: Vec<NodeState> = (0..n)
            .map(|i| NodeState {
                battery: batteries[i].b,
                e_tr: cfg
                    .energy
                    .transmit_cost(scenario.draws[i][t as usize].e_tr, data.mean_rate[i]),
            })
            .collect();
        let oracle = TrainingReliability::new(&log, &graph, t, est);
        let input = SlotInput {
            interval: t,
            partition: &part,
            states: &states,
            reliability: &oracle,
            e_max: cfg.energy.e_max,
        };
        let decision = schedule(&input, sched).map_err(at)?;
        let l_t = lyapunov(&states.iter().map(|s| s.battery).collect::<Vec<_>>(), sched.b_exp);

        let mut delivered = FixedBitSet::with_capacity(n);
        let mut steps = Vec::with_capacity(n);
        for i in 0..n {
            let d = scenario.draws[i][t as usize];
            let y = decision.contains(i);
            let step = batteries[i].step(y, states[i].e_tr, d.e_in, d.h).map_err(at)?;
            if y && !step.depleted {
                delivered.insert(i);
            }
            steps.push(step);
        }

        let mut nodes = Vec::with_capacity(n);
        for (i, step) in steps.into_iter().enumerate() {
            let reliability = if step.gap() {
                0.0
            } else {
                oracle.test_reliability(i, &delivered, &data.moments)
            };
            nodes.push(NodeInterval {
                node: i,
                step,
                delivered: delivered.contains(i),
                reliability,
                provenance: decision.provenance.get(&i).copied(),
                enforced: part.reasons(i).to_vec(),
                anomalies: data.counters[i],
            });
        }
        if cfg.output.model_dump {
            for i in 0..n {
                if !delivered.contains(i) {
                    if let Some(fit) = oracle.best_fit(i, &delivered) {
                        models.push(ModelDump::new(&fit.model, &scenario.ids, t));
                    }
                }
            }
        }
        let rlb_evaluations = decision.rlb_evaluations;
        drop(oracle);

        log.push(t, delivered, data.moments.clone()).map_err(at)?;
        let delta = graph.update(&log, est.window as u64);
        if cfg.output.graph_snapshots {
            snapshots.push(graph.snapshot(t));
        }
        records.push(IntervalRecord {
            interval: t,
            outliers,
            refresh,
            selected: decision.selected,
            provenance: decision.provenance,
            objective: decision.objective,
            infeasible: decision.infeasible,
            rlb_evaluations,
            lyapunov: l_t,
            links_added: delta.added,
            links_removed: delta.removed,
            links: graph.links().len(),
            nodes,
        });
    }
    let metrics = RunMetrics::from_records(sched.algorithm, &scenario.ids, &records);
    Ok(RunOutput {
        algorithm: sched.algorithm,
        ids: scenario.ids.clone(),
        b_exp: sched.b_exp,
        records,
        metrics,
        snapshots,
        models,
    })
}
