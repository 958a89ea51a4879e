//! Run-level metrics: mean test reliability, wasted energy and transmission gaps.

use serde::{Deserialize, Serialize};

use super::sim::IntervalRecord;
use crate::scheduler::Algorithm;
use crate::stats::trend_slope;
use crate::NodeId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub node_id: NodeId,
    pub reliability_pct: f64,
    pub wasted_j: f64,
    pub gaps: u64,
    pub transmissions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub algorithm: Algorithm,
    /// Mean over all nodes and intervals, gap intervals counting 0.
    pub reliability_pct: f64,
    pub wasted_kj: f64,
    pub gaps: u64,
    pub node_intervals: u64,
    pub gaps_per_1000: f64,
    /// Delivered raw streams as a share of node-intervals.
    pub transmit_pct: f64,
    pub infeasible_intervals: u64,
    pub rlb_evaluations: u64,
    /// Least-squares slope of `L(t)` per interval.
    pub lyapunov_slope: f64,
    pub lyapunov_mean: f64,
    pub per_node: Vec<NodeMetrics>,
    /// Mean reliability across nodes, per interval.
    pub per_interval_reliability: Vec<f64>,
}

impl RunMetrics {
    pub fn from_records(algorithm: Algorithm, ids: &[NodeId], records: &[IntervalRecord]) -> Self {
        let n = ids.len();
        let mut per_node: Vec<NodeMetrics> = ids
            .iter()
            .map(|&node_id| NodeMetrics {
                node_id,
                reliability_pct: 0.0,
                wasted_j: 0.0,
                gaps: 0,
                transmissions: 0,
            })
            .collect();
        let mut per_interval = Vec::with_capacity(records.len());
        let mut rel_sum = 0.0;
        let mut delivered = 0u64;
        for r in records {
            let mut s = 0.0;
            for x in &r.nodes {
                let m = &mut per_node[x.node];
                m.reliability_pct += x.reliability;
                m.wasted_j += x.step.wasted;
                m.gaps += x.step.gap() as u64;
                m.transmissions += x.delivered as u64;
                delivered += x.delivered as u64;
                s += x.reliability;
            }
            rel_sum += s;
            per_interval.push(if n > 0 { s / n as f64 } else { 0.0 });
        }
        let intervals = records.len() as f64;
        for m in &mut per_node {
            m.reliability_pct = if intervals > 0.0 {
                100.0 * m.reliability_pct / intervals
            } else {
                0.0
            };
        }
        let node_intervals = (n * records.len()) as u64;
        let gaps: u64 = per_node.iter().map(|m| m.gaps).sum();
        let wasted: f64 = per_node.iter().map(|m| m.wasted_j).sum();
        let lyap: Vec<f64> = records.iter().map(|r| r.lyapunov).collect();
        let denom = node_intervals.max(1) as f64;
        Self {
            algorithm,
            reliability_pct: 100.0 * rel_sum / denom,
            wasted_kj: wasted / 1000.0,
            gaps,
            node_intervals,
            gaps_per_1000: 1000.0 * gaps as f64 / denom,
            transmit_pct: 100.0 * delivered as f64 / denom,
            infeasible_intervals: records.iter().filter(|r| r.infeasible).count() as u64,
            rlb_evaluations: records.iter().map(|r| r.rlb_evaluations as u64).sum(),
            lyapunov_slope: trend_slope(&lyap),
            lyapunov_mean: if lyap.is_empty() {
                0.0
            } else {
                crate::stats::mean(&lyap)
            },
            per_node,
            per_interval_reliability: per_interval,
        }
    }

    /// More than half of the intervals had an unsatisfiable reliability constraint.
    pub fn infeasible_dominated(&self) -> bool {
        2 * self.infeasible_intervals > self.per_interval_reliability.len() as u64
    }
}
