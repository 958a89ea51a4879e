//! Processing-center view of the network: the record of received raw data,
//! the Pearson correlation graph, anomaly-counter outliers and the split of the
//! nodes into an enforced set and a schedulable set.
//!
//! A pair's coefficient is recomputed only when both nodes delivered raw data
//! in the current interval, over the intervals of the correlation window in
//! which both delivered. Pairs at or above the threshold are linked.

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::stats::{mean, median, std_dev, Moments};
use crate::{Error, NodeId, Result};

pub const LINK_THRESHOLD: f64 = 0.95;

/// Sample Pearson coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::input("pearson inputs differ in length"));
    }
    if x.len() < 2 {
        return Err(Error::input("pearson needs at least two samples"));
    }
    let m = Moments::from_streams(&[x, y], &[mean(x), mean(y)]);
    m.pearson(0, 1).ok_or(Error::UndefinedCorrelation("constant input"))
}

/// Pearson coefficient of `x[k]` against `y[k + lag]` over the overlap.
pub fn pearson_with_lag(x: &[f64], y: &[f64], lag: isize) -> Result<f64> {
    let n = x.len().min(y.len()) as isize;
    if lag.abs() >= n {
        return Err(Error::input("lag leaves no overlap"));
    }
    let (xs, ys) = if lag >= 0 {
        let l = lag as usize;
        (&x[..(n as usize - l)], &y[l..n as usize])
    } else {
        let l = (-lag) as usize;
        (&x[l..n as usize], &y[..(n as usize - l)])
    };
    pearson(xs, ys)
}

/// One interval of received raw data.
#[derive(Debug, Clone)]
pub struct Observation {
    pub interval: u64,
    pub delivered: FixedBitSet,
    /// Moments over all node streams of the interval. Only rows of delivered
    /// nodes describe data the center actually holds; other rows are read
    /// solely for test-set evaluation.
    pub moments: Arc<Moments>,
}

/// Rolling record of recent observations plus each node's last delivery.
#[derive(Debug, Clone)]
pub struct ObservationLog {
    dim: usize,
    refs: Vec<f64>,
    capacity: usize,
    entries: VecDeque<Observation>,
    last_delivery: Vec<Option<u64>>,
}

impl ObservationLog {
    /// `refs` are the per-node offsets used for moment accumulation.
    pub fn new(refs: Vec<f64>, capacity: usize) -> Self {
        Self {
            dim: refs.len(),
            last_delivery: vec![None; refs.len()],
            refs,
            capacity: capacity.max(1),
            entries: VecDeque::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn refs(&self) -> &[f64] {
        &self.refs
    }

    /// Append interval `interval`; intervals must be pushed in increasing order.
    pub fn push(&mut self, interval: u64, delivered: FixedBitSet, moments: impl Into<Arc<Moments>>) -> Result<()> {
        let moments = moments.into();
        if moments.dim() != self.dim || delivered.len() != self.dim {
            return Err(Error::input("observation dimension mismatch"));
        }
        if let Some(last) = self.entries.back() {
            if interval <= last.interval {
                return Err(Error::input("observations must be pushed in increasing interval order"));
            }
        }
        for i in delivered.ones() {
            self.last_delivery[i] = Some(interval);
        }
        self.entries.push_back(Observation {
            interval,
            delivered,
            moments,
        });
        while self.entries.len() > self.capacity {
            self.entries.pop_front();
        }
        Ok(())
    }

    /// Append raw samples for the delivered nodes only (dense index -> samples).
    pub fn push_samples(&mut self, interval: u64, fresh: &BTreeMap<usize, &[f64]>) -> Result<()> {
        let idx: Vec<usize> = fresh.keys().copied().collect();
        if idx.iter().any(|&i| i >= self.dim) {
            return Err(Error::input("fresh stream for unknown node"));
        }
        let streams: Vec<&[f64]> = fresh.values().copied().collect();
        let len = streams.first().map_or(0, |s| s.len());
        if streams.iter().any(|s| s.len() != len) {
            return Err(Error::input("fresh streams of one interval must have equal length"));
        }
        let refs: Vec<f64> = idx.iter().map(|&i| self.refs[i]).collect();
        let m = Moments::from_streams(&streams, &refs).embed(&idx, self.dim);
        let mut delivered = FixedBitSet::with_capacity(self.dim);
        for &i in &idx {
            delivered.insert(i);
        }
        self.push(interval, delivered, m)
    }

    pub fn get(&self, interval: u64) -> Option<&Observation> {
        let first = self.entries.front()?.interval;
        if interval < first {
            return None;
        }
        // Intervals are increasing but may skip; search from the back.
        self.entries.iter().rev().find(|o| o.interval == interval)
    }

    pub fn latest(&self) -> Option<&Observation> {
        self.entries.back()
    }

    pub fn delivered(&self, interval: u64, node: usize) -> bool {
        self.get(interval).is_some_and(|o| o.delivered.contains(node))
    }

    pub fn last_delivery(&self, node: usize) -> Option<u64> {
        self.last_delivery[node]
    }

    /// Observations with interval in `[from, to]`, most recent first.
    pub fn range_rev(&self, from: u64, to: u64) -> impl Iterator<Item = &Observation> {
        self.entries
            .iter()
            .rev()
            .skip_while(move |o| o.interval > to)
            .take_while(move |o| o.interval >= from)
    }
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i < j { (i, j) } else { (j, i) };
    a * (2 * n - a - 1) / 2 + (b - a - 1)
}

/// Time-varying correlation graph over dense node indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationGraph {
    pub ids: Vec<NodeId>,
    pub threshold: f64,
    coeff: Vec<Option<f64>>,
    last_update: Vec<Option<u64>>,
}

/// Link-set change caused by an update.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDelta {
    pub added: Vec<(usize, usize)>,
    pub removed: Vec<(usize, usize)>,
}

impl CorrelationGraph {
    pub fn new(ids: Vec<NodeId>, threshold: f64) -> Self {
        let n = ids.len();
        let pairs = n * n.saturating_sub(1) / 2;
        Self {
            ids,
            threshold,
            coeff: vec![None; pairs],
            last_update: vec![None; pairs],
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn coefficient(&self, i: usize, j: usize) -> Option<f64> {
        if i == j {
            return None;
        }
        self.coeff[pair_index(self.len(), i, j)]
    }

    pub fn last_update(&self, i: usize, j: usize) -> Option<u64> {
        if i == j {
            return None;
        }
        self.last_update[pair_index(self.len(), i, j)]
    }

    pub fn linked(&self, i: usize, j: usize) -> bool {
        self.coefficient(i, j).is_some_and(|c| c >= self.threshold)
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.linked(i, j)).collect()
    }

    pub fn links(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.linked(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Set or clear a pair's coefficient.
    pub fn set(&mut self, i: usize, j: usize, c: Option<f64>, interval: u64) {
        assert_ne!(i, j, "no self links");
        let k = pair_index(self.len(), i, j);
        self.coeff[k] = c;
        self.last_update[k] = Some(interval);
    }

    /// Recompute pairs that both delivered in the latest observation of `log`,
    /// over the last `window` intervals in which both delivered.
    pub fn update(&mut self, log: &ObservationLog, window: u64) -> GraphDelta {
        let mut delta = GraphDelta::default();
        let Some(latest) = log.latest() else { return delta };
        let t = latest.interval;
        let fresh: Vec<usize> = latest.delivered.ones().collect();
        let from = t.saturating_sub(window.saturating_sub(1));
        for (p, &i) in fresh.iter().enumerate() {
            for &j in &fresh[p + 1..] {
                let mut acc = Moments::zeros(2);
                for obs in log.range_rev(from, t) {
                    if obs.delivered.contains(i) && obs.delivered.contains(j) {
                        acc.add_selected(&obs.moments, &[i, j]);
                    }
                }
                let before = self.linked(i, j);
                self.set(i, j, acc.pearson(0, 1), t);
                let after = self.linked(i, j);
                if before && !after {
                    delta.removed.push((i, j));
                } else if after && !before {
                    delta.added.push((i, j));
                }
            }
        }
        delta
    }

    /// Connected components of the link graph, each sorted, ordered by first member.
    #[allow(clippy::needless_range_loop)]
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let c = out.len();
            let mut members = vec![s];
            comp[s] = c;
            let mut k = 0;
            while k < members.len() {
                let u = members[k];
                for v in 0..n {
                    if comp[v] == usize::MAX && self.linked(u, v) {
                        comp[v] = c;
                        members.push(v);
                    }
                }
                k += 1;
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    pub fn snapshot(&self, interval: u64) -> GraphSnapshot {
        GraphSnapshot {
            interval,
            nodes: (0..self.len())
                .map(|i| SnapshotNode {
                    id: self.ids[i],
                    neighbors: self
                        .neighbors(i)
                        .into_iter()
                        .map(|j| SnapshotLink {
                            id: self.ids[j],
                            coefficient: self.coefficient(i, j).unwrap_or(f64::NAN),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// JSON adjacency list of one interval's graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub interval: u64,
    pub nodes: Vec<SnapshotNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotNode {
    pub id: NodeId,
    pub neighbors: Vec<SnapshotLink>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotLink {
    pub id: NodeId,
    pub coefficient: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChauvenetConfig {
    /// For fewer than five nodes, when the strict criterion flags nothing but
    /// `max / median > 10`, flag counters above `mean + 3·std`.
    pub small_n_fallback: bool,
}

/// Nodes whose counter fails Chauvenet's criterion:
/// `n · erfc(|x - mean| / (√2 · std)) < 0.5` with the population standard deviation.
pub fn chauvenet_outliers(counters: &[u32], cfg: &ChauvenetConfig) -> Vec<usize> {
    let n = counters.len();
    if n < 3 {
        return Vec::new();
    }
    let xs: Vec<f64> = counters.iter().map(|&c| c as f64).collect();
    let m = mean(&xs);
    let sd = std_dev(&xs);
    if sd == 0.0 {
        return Vec::new();
    }
    let strict: Vec<usize> = (0..n)
        .filter(|&i| n as f64 * erfc((xs[i] - m).abs() / (std::f64::consts::SQRT_2 * sd)) < 0.5)
        .collect();
    if !strict.is_empty() || !cfg.small_n_fallback || n >= 5 {
        return strict;
    }
    let max = xs.iter().copied().fold(f64::MIN, f64::max);
    let med = median(&xs);
    if med > 0.0 && max / med <= 10.0 {
        return Vec::new();
    }
    (0..n).filter(|&i| xs[i] > m + 3.0 * sd).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnforceReason {
    GraphRefresh,
    NoNeighbor,
    CounterOutlier,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnforcedNode {
    pub node: usize,
    pub reasons: Vec<EnforceReason>,
}

/// Enforced set `S_a` (ascending, with reasons) and schedulable set `S_b`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulePartition {
    pub enforced: Vec<EnforcedNode>,
    pub schedulable: Vec<usize>,
}

impl SchedulePartition {
    pub fn enforced_nodes(&self) -> Vec<usize> {
        self.enforced.iter().map(|e| e.node).collect()
    }

    pub fn is_enforced(&self, node: usize) -> bool {
        self.enforced.binary_search_by_key(&node, |e| e.node).is_ok()
    }

    pub fn reasons(&self, node: usize) -> &[EnforceReason] {
        self.enforced
            .binary_search_by_key(&node, |e| e.node)
            .map_or(&[], |k| &self.enforced[k].reasons)
    }
}

/// `S_a = refresh ∪ {i : N_i = ∅} ∪ outliers`, `S_b = S \ S_a`.
pub fn partition(graph: &CorrelationGraph, outliers: &[usize], refresh: &[usize]) -> SchedulePartition {
    let mut p = SchedulePartition::default();
    for i in 0..graph.len() {
        let mut reasons = Vec::new();
        if refresh.contains(&i) {
            reasons.push(EnforceReason::GraphRefresh);
        }
        if graph.neighbors(i).is_empty() {
            reasons.push(EnforceReason::NoNeighbor);
        }
        if outliers.contains(&i) {
            reasons.push(EnforceReason::CounterOutlier);
        }
        if reasons.is_empty() {
            p.schedulable.push(i);
        } else {
            p.enforced.push(EnforcedNode { node: i, reasons });
        }
    }
    p
}

/// Nodes whose last delivery is `staleness` or more intervals before `t`:
/// at most one per connected component, the stalest (lowest index on ties).
pub fn refresh_requests(graph: &CorrelationGraph, log: &ObservationLog, t: u64, staleness: u64) -> Vec<usize> {
    let mut out = Vec::new();
    for comp in graph.components() {
        if comp.len() < 2 {
            continue;
        }
        let stalest = comp
            .iter()
            .map(|&i| (log.last_delivery(i), i))
            .filter(|&(last, _)| last.is_none_or(|l| t.saturating_sub(l) >= staleness))
            .min_by_key(|&(last, i)| (last.map_or(0, |l| l + 1), i));
        if let Some((_, i)) = stalest {
            out.push(i);
        }
    }
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_gen::{generate_traces, FlowProfile, NetworkTopology, SamplingConfig, SourceSignal};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ids(n: u32) -> Vec<NodeId> {
        (1..=n).map(NodeId).collect()
    }

    #[test]
    fn pearson_basics() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_relative_eq!(pearson(&x, &x).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(pearson(&x, &neg).unwrap(), -1.0, epsilon = 1e-12);
        // Deviations (-1.5,-0.5,0.5,1.5) and (-3.25,-1.25,0.75,3.75):
        // sxy = 11.5, sxx = 5, syy = 26.75.
        let r = pearson(&x, &[2.0, 4.0, 6.0, 9.0]).unwrap();
        assert_relative_eq!(r, 11.5 / (5.0f64 * 26.75).sqrt(), epsilon = 1e-12);
        assert!(matches!(pearson(&x, &[3.0; 4]), Err(Error::UndefinedCorrelation(_))));
        assert!(pearson(&x, &[1.0]).is_err());
    }

    #[test]
    fn lagged_pearson_recovers_shift() {
        let x: Vec<f64> = (0..200)
            .map(|k| (k as f64 * 0.37).sin() + (k as f64 * 0.05).cos())
            .collect();
        let y: Vec<f64> = (0..200).map(|k| if k >= 7 { x[k - 7] } else { 0.0 }).collect();
        assert_relative_eq!(pearson_with_lag(&x, &y, 7).unwrap(), 1.0, epsilon = 1e-12);
        assert!(pearson_with_lag(&x, &y, 0).unwrap() < 0.99);
    }

    #[test]
    fn chauvenet_examples() {
        let c = ChauvenetConfig::default();
        assert_eq!(chauvenet_outliers(&[3, 2, 100], &c), vec![2]);
        assert!(chauvenet_outliers(&[4, 4, 4, 4], &c).is_empty());
        assert_eq!(chauvenet_outliers(&[0, 0, 0, 0, 0, 0, 50], &c), vec![6]);
        assert!(chauvenet_outliers(&[0, 90], &c).is_empty());
    }

    #[test]
    fn chauvenet_oracle_values() {
        // (3, 2, 100): deviations (-32, -33, 65), population variance 6338 / 3.
        let z = 65.0 / (std::f64::consts::SQRT_2 * (6338.0f64 / 3.0).sqrt());
        assert_relative_eq!(z, 0.99995, epsilon = 1e-4);
        assert!(3.0 * erfc(z) < 0.5);
        // One non-zero counter among n nodes sits sqrt(n - 1) population deviations out.
        let z = 6f64.sqrt() / std::f64::consts::SQRT_2;
        assert!(7.0 * erfc(z) < 0.5);
        let xs = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 50.0];
        assert_relative_eq!((50.0 - mean(&xs)) / std_dev(&xs), 6f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn fallback_never_fires_below_three_sigma_bound() {
        // With the population std no counter of n < 5 nodes exceeds mean + sqrt(n - 1)·std < 3·std.
        let on = ChauvenetConfig { small_n_fallback: true };
        let off = ChauvenetConfig::default();
        for c in [[0, 0, 1, 30], [1, 1, 2, 40], [0, 5, 30, 0], [5, 5, 5, 6]] {
            assert_eq!(chauvenet_outliers(&c, &on), chauvenet_outliers(&c, &off));
        }
    }

    #[test]
    fn partition_rules() {
        let mut g = CorrelationGraph::new(ids(4), LINK_THRESHOLD);
        let p = partition(&g, &[], &[]);
        assert_eq!(p.enforced_nodes(), vec![0, 1, 2, 3]);
        assert!(p.schedulable.is_empty());
        for i in 0..4 {
            for j in i + 1..4 {
                g.set(i, j, Some(0.99), 0);
            }
        }
        let p = partition(&g, &[], &[]);
        assert!(p.enforced.is_empty());
        let p = partition(&g, &[2], &[]);
        assert_eq!(p.enforced_nodes(), vec![2]);
        assert_eq!(p.reasons(2), &[EnforceReason::CounterOutlier]);
        assert_eq!(p.schedulable, vec![0, 1, 3]);
    }

    #[test]
    fn no_fresh_streams_leaves_graph_unchanged() {
        let mut g = CorrelationGraph::new(ids(3), LINK_THRESHOLD);
        g.set(0, 1, Some(0.99), 0);
        let before = g.clone();
        let mut log = ObservationLog::new(vec![0.0; 3], 16);
        log.push_samples(1, &BTreeMap::new()).unwrap();
        let delta = g.update(&log, 4);
        assert_eq!(g, before);
        assert_eq!(delta, GraphDelta::default());
    }

    #[test]
    fn generated_case_study_gives_complete_graph() {
        let topo = NetworkTopology::case_study();
        let profile = FlowProfile {
            noise_std: 0.0,
            source: SourceSignal {
                white_noise_std_m: 0.0,
                ..SourceSignal::default()
            },
            ..FlowProfile::default()
        };
        let s = SamplingConfig {
            sample_rate_hz: 1.0,
            interval_length_s: 900.0,
            chunk_len: 100,
        };
        let tr = generate_traces(&topo, &profile, s, 4, 5).unwrap();
        let mut log = ObservationLog::new(vec![60.0; 7], 16);
        for t in 0..4u64 {
            let span = t as usize * 900..(t as usize + 1) * 900;
            let fresh: BTreeMap<usize, &[f64]> = (0..7).map(|i| (i, &tr.samples[i][span.clone()])).collect();
            log.push_samples(t, &fresh).unwrap();
        }
        let mut g = CorrelationGraph::new(ids(7), LINK_THRESHOLD);
        g.update(&log, 4);
        assert_eq!(g.links().len(), 21);
        assert!(partition(&g, &[], &[]).enforced.is_empty());
    }

    #[test]
    fn divergent_node_loses_links() {
        let base: Vec<f64> = (0..400).map(|k| (k as f64 / 30.0).sin()).collect();
        let other: Vec<f64> = base.iter().map(|v| 2.0 * v + 1.0).collect();
        let wild: Vec<f64> = (0..400).map(|k| ((k * 7919) % 101) as f64).collect();
        let mut log = ObservationLog::new(vec![0.0; 3], 16);
        let fresh: BTreeMap<usize, &[f64]> = [(0, base.as_slice()), (1, other.as_slice()), (2, base.as_slice())].into();
        log.push_samples(0, &fresh).unwrap();
        let mut g = CorrelationGraph::new(ids(3), LINK_THRESHOLD);
        g.update(&log, 4);
        assert_eq!(g.links().len(), 3);
        // Only node 2's next window diverges; pooled over the window it no longer correlates.
        let fresh: BTreeMap<usize, &[f64]> = [(0, base.as_slice()), (1, other.as_slice()), (2, wild.as_slice())].into();
        log.push_samples(1, &fresh).unwrap();
        let delta = g.update(&log, 4);
        assert_eq!(delta.removed, vec![(0, 2), (1, 2)]);
        assert!(g.neighbors(2).is_empty());
        assert!(partition(&g, &[], &[]).is_enforced(2));
    }

    #[test]
    fn one_refresh_per_component() {
        let mut g = CorrelationGraph::new(ids(5), LINK_THRESHOLD);
        g.set(0, 1, Some(0.99), 0);
        g.set(1, 2, Some(0.99), 0);
        g.set(3, 4, Some(0.99), 0);
        let mut log = ObservationLog::new(vec![0.0; 5], 32);
        let all = |ns: &[usize]| {
            let mut b = FixedBitSet::with_capacity(5);
            for &n in ns {
                b.insert(n);
            }
            b
        };
        log.push(0, all(&[0, 1, 2, 3, 4]), Moments::zeros(5)).unwrap();
        log.push(5, all(&[1, 2, 4]), Moments::zeros(5)).unwrap();
        assert!(refresh_requests(&g, &log, 7, 8).is_empty());
        assert_eq!(refresh_requests(&g, &log, 8, 8), vec![0, 3]);
    }

    proptest! {
        #[test]
        fn chauvenet_monotone_in_deviation(
            counters in proptest::collection::vec(0u32..50, 3..12),
            pick in any::<proptest::sample::Index>(),
            bump in 1u32..500,
        ) {
            let cfg = ChauvenetConfig::default();
            let i = pick.index(counters.len());
            let before = chauvenet_outliers(&counters, &cfg);
            if before.contains(&i) {
                let m = mean(&counters.iter().map(|&c| c as f64).collect::<Vec<_>>());
                let mut more = counters.clone();
                if more[i] as f64 >= m {
                    more[i] += bump;
                } else {
                    more[i] = more[i].saturating_sub(bump);
                    if more[i] == counters[i] { return Ok(()); }
                }
                prop_assert!(chauvenet_outliers(&more, &cfg).contains(&i));
            }
        }

        #[test]
        fn graph_links_are_symmetric_and_thresholded(
            coeffs in proptest::collection::vec(proptest::option::of(-1.0f64..=1.0), 15),
        ) {
            let mut g = CorrelationGraph::new(ids(6), LINK_THRESHOLD);
            let mut k = 0;
            for i in 0..6 {
                for j in i + 1..6 {
                    g.set(i, j, coeffs[k], 1);
                    k += 1;
                }
            }
            for i in 0..6 {
                prop_assert!(!g.linked(i, i));
                for j in 0..6 {
                    prop_assert_eq!(g.linked(i, j), g.linked(j, i));
                    prop_assert_eq!(g.coefficient(i, j), g.coefficient(j, i));
                    if i != j {
                        prop_assert_eq!(g.linked(i, j), g.coefficient(i, j).is_some_and(|c| c >= 0.95));
                    }
                }
            }
            let p = partition(&g, &[1], &[4]);
            let mut all: Vec<usize> = p.enforced_nodes();
            all.extend(&p.schedulable);
            all.sort_unstable();
            prop_assert_eq!(all, (0..6).collect::<Vec<_>>());
            prop_assert!(p.schedulable.iter().all(|i| !p.is_enforced(*i)));
        }
    }
}
