//! Anomaly-adaptation replay: a node whose pressure diverges is flagged by
//! its anomaly counter, forced to transmit, dropped from the correlation
//! graph, and rejoins once its stream is consistent with its neighbours again.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::metrics::RunMetrics;
use super::scenario::Scenario;
use super::sim::{simulate, RunOutput};
use crate::correlation::EnforceReason;
use crate::scheduler::Algorithm;
use crate::trace_gen::EventLocation;
use crate::{NodeId, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ReplayEventKind {
    OutlierDetected,
    EnforcedTransmit,
    LinkRemoved { peer: NodeId },
    LinkRestored { peer: NodeId },
}

impl fmt::Display for ReplayEventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReplayEventKind::OutlierDetected => write!(f, "anomaly-counter outlier"),
            ReplayEventKind::EnforcedTransmit => write!(f, "enforced raw transmission"),
            ReplayEventKind::LinkRemoved { peer } => write!(f, "link to node {peer} removed"),
            ReplayEventKind::LinkRestored { peer } => write!(f, "link to node {peer} restored"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayEvent {
    pub interval: u64,
    pub node: NodeId,
    #[serde(flatten)]
    pub kind: ReplayEventKind,
}

/// Graph membership and transmission of the watched node in one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayStep {
    pub interval: u64,
    pub outlier: bool,
    pub enforced: bool,
    pub transmitted: bool,
    pub neighbors: Vec<NodeId>,
    /// Samples of the watched node inside the disturbance in this interval.
    pub divergent_samples: u64,
}

/// Flat form of [`ReplayStep`] for CSV output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayTimelineRow {
    pub interval: u64,
    pub node_id: NodeId,
    pub outlier: u8,
    pub enforced: u8,
    pub transmitted: u8,
    pub neighbors_json: String,
    pub divergent_samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub target: Option<NodeId>,
    pub events: Vec<ReplayEvent>,
    pub timeline: Vec<ReplayStep>,
    /// First occurrence of outlier, enforced transmit, link removal and link
    /// restoration, in that order.
    pub milestones: [Option<u64>; 4],
    pub ordering_ok: bool,
    /// Divergent samples the center would have estimated from neighbours.
    pub divergent_estimated_samples: u64,
    /// Divergent samples received raw.
    pub divergent_raw_samples: u64,
    pub metrics: RunMetrics,
}

impl ReplayReport {
    pub fn timeline_rows(&self) -> Vec<ReplayTimelineRow> {
        let Some(node_id) = self.target else { return Vec::new() };
        self.timeline
            .iter()
            .map(|s| ReplayTimelineRow {
                interval: s.interval,
                node_id,
                outlier: s.outlier as u8,
                enforced: s.enforced as u8,
                transmitted: s.transmitted as u8,
                neighbors_json: serde_json::to_string(&s.neighbors).expect("node ids serialize"),
                divergent_samples: s.divergent_samples,
            })
            .collect()
    }
}

pub fn replay_anomaly_scenario(cfg: &RunConfig) -> Result<ReplayReport> {
    let scenario = Scenario::build(cfg)?;
    let alg = cfg.algorithm_list().first().copied().unwrap_or(Algorithm::FastDts);
    let out = simulate(&scenario, cfg, alg)?;
    Ok(report(cfg, &scenario, &out))
}

fn report(cfg: &RunConfig, scenario: &Scenario, out: &RunOutput) -> ReplayReport {
    let event = cfg.profile.anomaly_events.iter().find_map(|e| match e.location {
        EventLocation::Node { id } => Some((id, e)),
        EventLocation::Segment { .. } => None,
    });
    let spi = scenario.sampling.samples_per_interval() as u64;
    let target = event.and_then(|(id, _)| scenario.ids.iter().position(|&x| x == id));
    let mut events = Vec::new();
    let mut timeline = Vec::new();
    let mut estimated = 0;
    let mut raw = 0;
    let mut linked: Vec<bool> = vec![false; scenario.node_count()];
    for r in &out.records {
        let Some(v) = target else { break };
        let id = scenario.ids[v];
        let span = event.map_or(0, |(_, e)| {
            let start = e.start_sample;
            let end = e.duration_samples.map_or(u64::MAX, |d| start.saturating_add(d));
            let (a, b) = (r.interval * spi, (r.interval + 1) * spi);
            b.min(end).saturating_sub(a.max(start))
        });
        let x = &r.nodes[v];
        let outlier = r.outliers.contains(&v);
        let enforced = x.enforced.contains(&EnforceReason::CounterOutlier);
        if outlier {
            events.push(ReplayEvent {
                interval: r.interval,
                node: id,
                kind: ReplayEventKind::OutlierDetected,
            });
        }
        if enforced && x.delivered {
            events.push(ReplayEvent {
                interval: r.interval,
                node: id,
                kind: ReplayEventKind::EnforcedTransmit,
            });
        }
        for &(a, b) in &r.links_removed {
            if a == v || b == v {
                let peer = if a == v { b } else { a };
                linked[peer] = false;
                events.push(ReplayEvent {
                    interval: r.interval,
                    node: id,
                    kind: ReplayEventKind::LinkRemoved {
                        peer: scenario.ids[peer],
                    },
                });
            }
        }
        for &(a, b) in &r.links_added {
            if a == v || b == v {
                let peer = if a == v { b } else { a };
                let was_removed = events
                    .iter()
                    .any(|e| matches!(e.kind, ReplayEventKind::LinkRemoved { peer: p } if p == scenario.ids[peer]));
                linked[peer] = true;
                if was_removed {
                    events.push(ReplayEvent {
                        interval: r.interval,
                        node: id,
                        kind: ReplayEventKind::LinkRestored {
                            peer: scenario.ids[peer],
                        },
                    });
                }
            }
        }
        if x.delivered {
            raw += span;
        } else {
            estimated += span;
        }
        timeline.push(ReplayStep {
            interval: r.interval,
            outlier,
            enforced,
            transmitted: x.delivered,
            neighbors: (0..scenario.node_count())
                .filter(|&j| linked[j])
                .map(|j| scenario.ids[j])
                .collect(),
            divergent_samples: span,
        });
    }
    let onset = event.map_or(0, |(_, e)| e.start_sample / spi.max(1));
    let first = |pred: &dyn Fn(&ReplayEventKind) -> bool, from: Option<u64>| {
        let from = from?;
        events
            .iter()
            .find(|e| e.interval >= from && pred(&e.kind))
            .map(|e| e.interval)
    };
    let t_out = first(&|k| matches!(k, ReplayEventKind::OutlierDetected), Some(onset));
    let t_enf = first(&|k| matches!(k, ReplayEventKind::EnforcedTransmit), t_out);
    let t_rem = first(&|k| matches!(k, ReplayEventKind::LinkRemoved { .. }), t_enf);
    let t_res = first(
        &|k| matches!(k, ReplayEventKind::LinkRestored { .. }),
        t_rem.map(|t| t + 1),
    );
    let milestones = [t_out, t_enf, t_rem, t_res];
    ReplayReport {
        target: target.map(|v| scenario.ids[v]),
        events,
        timeline,
        ordering_ok: milestones.iter().all(Option::is_some),
        milestones,
        divergent_estimated_samples: estimated,
        divergent_raw_samples: raw,
        metrics: out.metrics.clone(),
    }
}
