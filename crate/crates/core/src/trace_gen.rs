//! Synthetic pressure streams for a pipe network.
//!
//! Every real node sees the source head signal shifted by its cumulative
//! propagation delay and reduced by the friction loss of each pipe segment on
//! its path, plus independent sensor noise and any injected anomaly events that
//! lie upstream of it. Virtual nodes, inserted between real nodes for
//! scalability studies, are derived from the nearer real node with a
//! proportional delay and proportional friction loss.
//!
//! Generation is streaming: [`TraceGenerator`] emits one interval of samples at a
//! time so that long, many-node runs never hold a full trace in memory.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::ensure_finite;
use crate::{domain, substream, Error, NodeId, Result};

/// Standard gravity in m/s².
pub const GRAVITY: f64 = 9.80665;
/// Samples per chunk unless configured otherwise.
pub const DEFAULT_CHUNK_LEN: usize = 100;

/// A pipe between two nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipeSegment {
    pub length_m: f64,
    pub diameter_m: f64,
    pub friction_factor: f64,
    pub area_m2: f64,
    pub wave_speed_mps: f64,
}

impl PipeSegment {
    pub fn new(
        length_m: f64,
        diameter_m: f64,
        friction_factor: f64,
        area_m2: f64,
        wave_speed_mps: f64,
    ) -> Result<Self> {
        let seg = Self {
            length_m,
            diameter_m,
            friction_factor,
            area_m2,
            wave_speed_mps,
        };
        seg.validate()?;
        Ok(seg)
    }

    /// Full-bore circular pipe: area from the diameter.
    pub fn circular(length_m: f64, diameter_m: f64, friction_factor: f64, wave_speed_mps: f64) -> Result<Self> {
        let r = diameter_m / 2.0;
        Self::new(length_m, diameter_m, friction_factor, PI * r * r, wave_speed_mps)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("length", self.length_m),
            ("diameter", self.diameter_m),
            ("friction factor", self.friction_factor),
            ("area", self.area_m2),
            ("wave speed", self.wave_speed_mps),
        ] {
            ensure_finite(name, v)?;
        }
        if !(self.length_m > 0.0) {
            return Err(Error::input("segment length must be > 0"));
        }
        if !(self.diameter_m > 0.0) {
            return Err(Error::input("segment diameter must be > 0"));
        }
        if !(self.area_m2 > 0.0) {
            return Err(Error::input("segment area must be > 0"));
        }
        if self.friction_factor < 0.0 {
            return Err(Error::input("friction factor must be >= 0"));
        }
        if !(self.wave_speed_mps > 0.0) {
            return Err(Error::input("wave speed must be > 0"));
        }
        Ok(())
    }

    /// `k` such that the head loss at flow `q` is `k * q²`.
    pub fn loss_coefficient(&self) -> f64 {
        self.friction_factor * self.length_m / (2.0 * GRAVITY * self.diameter_m * self.area_m2 * self.area_m2)
    }

    /// The same pipe cut to `fraction` of its length.
    pub fn portion(&self, fraction: f64) -> Result<Self> {
        let mut seg = *self;
        seg.length_m *= fraction;
        seg.validate()?;
        Ok(seg)
    }
}

/// Downstream head after friction loss along `segment` at volumetric `flow`.
/// Negative results are returned as is.
pub fn attenuate_head(upstream_head: f64, segment: &PipeSegment, flow: f64) -> Result<f64> {
    ensure_finite("upstream head", upstream_head)?;
    ensure_finite("flow", flow)?;
    segment.validate()?;
    if flow < 0.0 {
        return Err(Error::input("flow must be >= 0"));
    }
    Ok(upstream_head - segment.loss_coefficient() * flow * flow)
}

/// Travel time of a pressure wave along `segment`, in seconds.
pub fn propagation_delay(segment: &PipeSegment) -> Result<f64> {
    segment.validate()?;
    Ok(segment.length_m / segment.wave_speed_mps)
}

/// Delay in seconds rounded to the nearest whole sample.
pub fn delay_in_samples(delay_s: f64, sample_rate_hz: f64) -> usize {
    (delay_s * sample_rate_hz).round() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    /// Set on virtual nodes: the real node whose stream this one is derived from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<NodeId>,
}

impl NodeSpec {
    pub fn real(id: u32) -> Self {
        Self {
            id: NodeId(id),
            anchor: None,
        }
    }

    pub fn is_virtual(&self) -> bool {
        self.anchor.is_some()
    }
}

/// An undirected pipe between two nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: NodeId,
    pub b: NodeId,
    pub pipe: PipeSegment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub nodes: Vec<NodeSpec>,
    pub segments: Vec<Segment>,
    pub source: NodeId,
}

/// Per-node path data derived from a topology.
#[derive(Debug, Clone)]
pub struct ResolvedTopology {
    /// Node ids in ascending order; dense index `i` refers to `ids[i]`.
    pub ids: Vec<NodeId>,
    pub anchors: Vec<Option<usize>>,
    pub source: usize,
    /// Cumulative propagation delay from the source, seconds.
    pub delay_s: Vec<f64>,
    /// Path length from the source, metres.
    pub distance_m: Vec<f64>,
    /// Friction loss at the node is `loss_coeff[i] * Q²` for network flow `Q`.
    pub loss_coeff: Vec<f64>,
    /// Segment indices on the path from the source, source side first.
    pub paths: Vec<Vec<usize>>,
    /// Share of the network flow carried by each segment.
    pub flow_share: Vec<f64>,
    segments: Vec<Segment>,
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl NetworkTopology {
    /// Shortest-delay paths from the source, flow shares and loss coefficients.
    pub fn resolve(&self) -> Result<ResolvedTopology> {
        let mut ids: Vec<NodeId> = self.nodes.iter().map(|n| n.id).collect();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("duplicate node ids in topology"));
        }
        let index: HashMap<NodeId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let n = ids.len();
        let source = *index
            .get(&self.source)
            .ok_or_else(|| Error::config(format!("source node {} not in topology", self.source)))?;
        let mut anchors = vec![None; n];
        for spec in &self.nodes {
            if let Some(a) = spec.anchor {
                let ai = *index
                    .get(&a)
                    .ok_or_else(|| Error::config(format!("anchor {a} of node {} not in topology", spec.id)))?;
                if self.nodes.iter().any(|s| s.id == a && s.is_virtual()) {
                    return Err(Error::config(format!(
                        "anchor {a} of node {} is itself virtual",
                        spec.id
                    )));
                }
                anchors[index[&spec.id]] = Some(ai);
            }
        }
        if anchors[source].is_some() {
            return Err(Error::config("source node cannot be virtual"));
        }

        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (e, seg) in self.segments.iter().enumerate() {
            seg.pipe
                .validate()
                .map_err(|err| Error::config(format!("segment {e}: {err}")))?;
            let a = *index
                .get(&seg.a)
                .ok_or_else(|| Error::config(format!("segment {e} references unknown node {}", seg.a)))?;
            let b = *index
                .get(&seg.b)
                .ok_or_else(|| Error::config(format!("segment {e} references unknown node {}", seg.b)))?;
            if a == b {
                return Err(Error::config(format!("segment {e} is a self loop")));
            }
            adj[a].push((b, e));
            adj[b].push((a, e));
        }

        let seg_delay: Vec<f64> = self
            .segments
            .iter()
            .map(|s| s.pipe.length_m / s.pipe.wave_speed_mps)
            .collect();
        let mut dist = vec![f64::INFINITY; n];
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        dist[source] = 0.0;
        let mut heap = BinaryHeap::new();
        heap.push(HeapItem(0.0, source));
        while let Some(HeapItem(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, e) in &adj[u] {
                let nd = d + seg_delay[e];
                if nd < dist[v] {
                    dist[v] = nd;
                    parent[v] = Some((u, e));
                    heap.push(HeapItem(nd, v));
                }
            }
        }
        if let Some(i) = dist.iter().position(|d| d.is_infinite()) {
            return Err(Error::config(format!(
                "topology is disconnected: node {} unreachable from source",
                ids[i]
            )));
        }

        let mut paths = vec![Vec::new(); n];
        for (v, path) in paths.iter_mut().enumerate() {
            let mut cur = v;
            while let Some((p, e)) = parent[cur] {
                path.push(e);
                cur = p;
            }
            path.reverse();
        }

        // Demand is drawn equally at every real non-source node.
        let consumers: Vec<usize> = (0..n).filter(|&i| i != source && anchors[i].is_none()).collect();
        let mut flow_share = vec![0.0; self.segments.len()];
        if !consumers.is_empty() {
            let unit = 1.0 / consumers.len() as f64;
            for &c in &consumers {
                for &e in &paths[c] {
                    flow_share[e] += unit;
                }
            }
        }
        // A virtual node splits a pipe without drawing demand: its half of the pipe
        // carries the flow of the half that leads to consumers.
        let mut changed = true;
        while changed {
            changed = false;
            for v in 0..n {
                if anchors[v].is_none() {
                    continue;
                }
                let Some(&last) = paths[v].last() else { continue };
                if flow_share[last] > 0.0 {
                    continue;
                }
                let through = adj[v]
                    .iter()
                    .filter(|&&(_, e)| e != last)
                    .map(|&(_, e)| flow_share[e])
                    .fold(0.0, f64::max);
                if through > 0.0 {
                    flow_share[last] = through;
                    changed = true;
                }
            }
        }

        let mut loss_coeff = vec![0.0; n];
        let mut distance_m = vec![0.0; n];
        for v in 0..n {
            for &e in &paths[v] {
                let s = flow_share[e];
                loss_coeff[v] += self.segments[e].pipe.loss_coefficient() * s * s;
                distance_m[v] += self.segments[e].pipe.length_m;
            }
        }

        Ok(ResolvedTopology {
            ids,
            anchors,
            source,
            delay_s: dist,
            distance_m,
            loss_coeff,
            paths,
            flow_share,
            segments: self.segments.clone(),
        })
    }

    /// Real nodes `1..=n` in a line, node 1 being the source.
    pub fn chain(n: u32, pipe: PipeSegment) -> Self {
        Self {
            nodes: (1..=n).map(NodeSpec::real).collect(),
            segments: (1..n)
                .map(|i| Segment {
                    a: NodeId(i),
                    b: NodeId(i + 1),
                    pipe,
                })
                .collect(),
            source: NodeId(1),
        }
    }

    /// Seven district inlets fed from node 1 through a small branched main.
    pub fn case_study() -> Self {
        let pipe = |len: f64, d: f64| PipeSegment::circular(len, d, 0.02, 1100.0).expect("valid preset pipe");
        let links = [
            (1, 2, 900.0, 0.35),
            (2, 3, 700.0, 0.3),
            (3, 4, 600.0, 0.25),
            (3, 5, 800.0, 0.25),
            (2, 6, 1000.0, 0.3),
            (6, 7, 650.0, 0.25),
        ];
        Self {
            nodes: (1..=7).map(NodeSpec::real).collect(),
            segments: links
                .iter()
                .map(|&(a, b, len, d)| Segment {
                    a: NodeId(a),
                    b: NodeId(b),
                    pipe: pipe(len, d),
                })
                .collect(),
            source: NodeId(1),
        }
    }

    /// 24 real nodes and 24 pipes: a branched tree with one closing loop.
    pub fn scalability_base() -> Self {
        let mut segments = Vec::new();
        let mut add = |a: u32, b: u32, len: f64, d: f64| {
            segments.push(Segment {
                a: NodeId(a),
                b: NodeId(b),
                pipe: PipeSegment::circular(len, d, 0.02, 1100.0).expect("valid preset pipe"),
            });
        };
        // trunk
        for i in 1..8 {
            add(i, i + 1, 500.0 + 60.0 * i as f64, 0.4);
        }
        // branches off the trunk
        let branches = [(2, 9), (3, 12), (5, 15), (6, 18), (7, 21)];
        for &(root, first) in &branches {
            add(root, first, 450.0 + 10.0 * first as f64, 0.3);
            add(first, first + 1, 400.0 + 15.0 * first as f64, 0.25);
            add(first + 1, first + 2, 350.0 + 12.0 * first as f64, 0.2);
        }
        add(8, 24, 900.0, 0.3);
        // loop closing branch 9-11 back onto node 13
        add(11, 13, 750.0, 0.2);
        Self {
            nodes: (1..=24).map(NodeSpec::real).collect(),
            segments,
            source: NodeId(1),
        }
    }

    pub fn real_count(&self) -> usize {
        self.nodes.iter().filter(|n| !n.is_virtual()).count()
    }
}

/// How many virtual nodes to insert on each pipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualNodePlan {
    pub per_edge: usize,
    /// One further node on each of the `extra` longest pipes.
    #[serde(default)]
    pub extra: usize,
}

/// Split pipes by inserting equally spaced virtual nodes.
pub fn expand_topology(topology: &NetworkTopology, plan: VirtualNodePlan) -> Result<NetworkTopology> {
    if plan.extra > topology.segments.len() {
        return Err(Error::config("more extra virtual nodes than segments"));
    }
    if plan.per_edge == 0 && plan.extra == 0 {
        return Ok(topology.clone());
    }
    let mut order: Vec<usize> = (0..topology.segments.len()).collect();
    order.sort_by(|&x, &y| {
        topology.segments[y]
            .pipe
            .length_m
            .total_cmp(&topology.segments[x].pipe.length_m)
            .then(x.cmp(&y))
    });
    let mut counts = vec![plan.per_edge; topology.segments.len()];
    for &e in order.iter().take(plan.extra) {
        counts[e] += 1;
    }
    let mut next_id = topology.nodes.iter().map(|n| n.id.0).max().unwrap_or(0) + 1;
    let mut nodes = topology.nodes.clone();
    let mut segments = Vec::new();
    for (seg, &k) in topology.segments.iter().zip(&counts) {
        if k == 0 {
            segments.push(seg.clone());
            continue;
        }
        let piece = seg.pipe.portion(1.0 / (k + 1) as f64)?;
        let mut prev = seg.a;
        for j in 1..=k {
            let id = NodeId(next_id);
            next_id += 1;
            let alpha = j as f64 / (k + 1) as f64;
            let anchor = if alpha <= 0.5 { seg.a } else { seg.b };
            nodes.push(NodeSpec {
                id,
                anchor: Some(anchor),
            });
            segments.push(Segment {
                a: prev,
                b: id,
                pipe: piece,
            });
            prev = id;
        }
        segments.push(Segment {
            a: prev,
            b: seg.b,
            pipe: piece,
        });
    }
    Ok(NetworkTopology {
        nodes,
        segments,
        source: topology.source,
    })
}

/// Shape of an injected disturbance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyShape {
    /// Sustained level shift with water-hammer ringing at onset and release.
    Step,
    /// Short pulse with ringing.
    Spike,
    /// Sustained two-tone oscillation, as behind a throttled valve.
    Oscillation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventLocation {
    Node { id: NodeId },
    Segment { a: NodeId, b: NodeId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyEvent {
    pub location: EventLocation,
    /// Sample index at which the disturbance reaches the location.
    pub start_sample: u64,
    /// `None` lasts until the end of the run.
    #[serde(default)]
    pub duration_samples: Option<u64>,
    /// Head change in metres (negative for a pressure drop).
    pub magnitude: f64,
    pub shape: AnomalyShape,
}

const RING_FREQ_HZ: f64 = 1.3;
const RING_DECAY_S: f64 = 2.5;
const RING_SPAN_S: f64 = 8.0 * RING_DECAY_S;
const SPIKE_WIDTH_S: f64 = 0.5;
const OSC_FREQS_HZ: [f64; 2] = [0.37, 1.9];

impl AnomalyEvent {
    fn span_samples(&self, rate: f64) -> Option<u64> {
        let ring = (RING_SPAN_S * rate).ceil() as u64;
        match self.shape {
            AnomalyShape::Spike => Some(self.duration_samples.unwrap_or((SPIKE_WIDTH_S * rate).ceil() as u64) + ring),
            AnomalyShape::Step => self.duration_samples.map(|d| d + ring),
            AnomalyShape::Oscillation => self.duration_samples,
        }
    }

    /// Head perturbation `s` samples after onset at this node.
    fn perturbation(&self, s: u64, rate: f64) -> f64 {
        let ring = |since: u64| {
            let t = since as f64 / rate;
            (-t / RING_DECAY_S).exp() * (2.0 * PI * RING_FREQ_HZ * t).sin()
        };
        let m = self.magnitude;
        match self.shape {
            AnomalyShape::Step => match self.duration_samples {
                Some(d) if s >= d => -m * ring(s - d),
                _ => m + m * ring(s),
            },
            AnomalyShape::Spike => {
                let width = self.duration_samples.unwrap_or((SPIKE_WIDTH_S * rate).ceil() as u64);
                if s < width {
                    m + m * ring(s)
                } else {
                    -m * ring(s - width)
                }
            }
            AnomalyShape::Oscillation => {
                let t = s as f64 / rate;
                let ramp = (t / 2.0).min(1.0);
                m * ramp * (0.6 * (2.0 * PI * OSC_FREQS_HZ[0] * t).sin() + 0.4 * (2.0 * PI * OSC_FREQS_HZ[1] * t).sin())
            }
        }
    }
}

/// Head at the source: diurnal pattern, smooth random walk and white noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceSignal {
    pub base_head_m: f64,
    /// Peaks at night when demand is lowest.
    pub diurnal_amplitude_m: f64,
    /// Stationary standard deviation of the walk.
    pub walk_std_m: f64,
    pub walk_timescale_s: f64,
    /// Faster demand transients, modelled as a second independent smooth walk.
    pub transient_std_m: f64,
    pub transient_timescale_s: f64,
    pub white_noise_std_m: f64,
}

impl Default for SourceSignal {
    fn default() -> Self {
        Self {
            base_head_m: 60.0,
            diurnal_amplitude_m: 3.0,
            walk_std_m: 0.8,
            walk_timescale_s: 600.0,
            transient_std_m: 0.25,
            transient_timescale_s: 60.0,
            white_noise_std_m: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowProfile {
    /// Mean network inflow, m³/s.
    pub base_flow: f64,
    /// Relative diurnal swing of the flow, in `[0, 1]`.
    pub flow_swing: f64,
    /// Length of one demand cycle, in intervals.
    pub diurnal_period: u32,
    /// Independent sensor noise per node, metres.
    pub noise_std: f64,
    pub source: SourceSignal,
    pub anomaly_events: Vec<AnomalyEvent>,
}

impl Default for FlowProfile {
    fn default() -> Self {
        Self {
            base_flow: 0.06,
            flow_swing: 0.5,
            diurnal_period: 96,
            noise_std: 0.01,
            source: SourceSignal::default(),
            anomaly_events: Vec::new(),
        }
    }
}

impl FlowProfile {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("base_flow", self.base_flow),
            ("flow_swing", self.flow_swing),
            ("noise_std", self.noise_std),
            ("base_head_m", self.source.base_head_m),
            ("diurnal_amplitude_m", self.source.diurnal_amplitude_m),
            ("walk_std_m", self.source.walk_std_m),
            ("walk_timescale_s", self.source.walk_timescale_s),
            ("transient_std_m", self.source.transient_std_m),
            ("transient_timescale_s", self.source.transient_timescale_s),
            ("white_noise_std_m", self.source.white_noise_std_m),
        ] {
            ensure_finite(name, v).map_err(|e| Error::config(e.to_string()))?;
        }
        if self.base_flow < 0.0 {
            return Err(Error::config("base_flow must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.flow_swing) {
            return Err(Error::config("flow_swing must lie in [0, 1]"));
        }
        if self.diurnal_period < 1 {
            return Err(Error::config("diurnal_period must be >= 1"));
        }
        if self.noise_std < 0.0
            || self.source.white_noise_std_m < 0.0
            || self.source.walk_std_m < 0.0
            || self.source.transient_std_m < 0.0
        {
            return Err(Error::config("noise levels must be >= 0"));
        }
        if !(self.source.walk_timescale_s > 0.0 && self.source.transient_timescale_s > 0.0) {
            return Err(Error::config("walk timescales must be > 0"));
        }
        for ev in &self.anomaly_events {
            ensure_finite("anomaly magnitude", ev.magnitude).map_err(|e| Error::config(e.to_string()))?;
        }
        Ok(())
    }

    /// Network flow at time `t_s` seconds; `period_s` is one diurnal cycle.
    /// Lowest at `t = 0` (midnight), never negative.
    pub fn flow_at(&self, t_s: f64, period_s: f64) -> f64 {
        let phase = 2.0 * PI * t_s / period_s;
        (self.base_flow * (1.0 - self.flow_swing * phase.cos())).max(0.0)
    }

    /// Mean flow over interval `t`.
    pub fn interval_flow(&self, t: u64, interval_length_s: f64) -> f64 {
        let period_s = self.diurnal_period as f64 * interval_length_s;
        let mid = (t as f64 + 0.5) * interval_length_s;
        self.flow_at(mid, period_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub sample_rate_hz: f64,
    pub interval_length_s: f64,
    pub chunk_len: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 128.0,
            interval_length_s: 900.0,
            chunk_len: DEFAULT_CHUNK_LEN,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::config("sample_rate_hz must be > 0"));
        }
        if !(self.interval_length_s > 0.0 && self.interval_length_s.is_finite()) {
            return Err(Error::config("interval_length_s must be > 0"));
        }
        if self.chunk_len == 0 {
            return Err(Error::config("chunk_len must be >= 1"));
        }
        let exact = self.sample_rate_hz * self.interval_length_s;
        if (exact - exact.round()).abs() > 1e-6 || exact.round() < 1.0 {
            return Err(Error::config(
                "sample_rate_hz * interval_length_s must be a whole number of samples",
            ));
        }
        if !self.samples_per_interval().is_multiple_of(self.chunk_len) {
            return Err(Error::config("samples per interval must be a multiple of chunk_len"));
        }
        Ok(())
    }

    pub fn samples_per_interval(&self) -> usize {
        (self.sample_rate_hz * self.interval_length_s).round() as usize
    }

    pub fn chunks_per_interval(&self) -> usize {
        self.samples_per_interval() / self.chunk_len
    }

    pub fn timestamp_us(&self, sample_index: u64) -> u64 {
        (sample_index as f64 * 1e6 / self.sample_rate_hz).round() as u64
    }

    /// Sample index of the first sample at or after `timestamp_us`.
    pub fn sample_at(&self, timestamp_us: u64) -> u64 {
        (timestamp_us as f64 * self.sample_rate_hz / 1e6).ceil() as u64
    }
}

/// A fixed-length block of consecutive samples from one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureChunk {
    pub node_id: NodeId,
    pub timestamp_us: u64,
    pub samples: Vec<f64>,
}

/// One interval of samples for every node, indexed like [`ResolvedTopology::ids`].
#[derive(Debug, Clone)]
pub struct IntervalFrame {
    pub interval: u64,
    pub start_sample: u64,
    pub samples: Vec<Vec<f64>>,
    /// Number of generated samples with negative head.
    pub negative_heads: usize,
}

impl IntervalFrame {
    pub fn chunks(&self, node: usize, node_id: NodeId, sampling: &SamplingConfig) -> Vec<PressureChunk> {
        self.samples[node]
            .chunks(sampling.chunk_len)
            .enumerate()
            .map(|(c, s)| PressureChunk {
                node_id,
                timestamp_us: sampling.timestamp_us(self.start_sample + (c * sampling.chunk_len) as u64),
                samples: s.to_vec(),
            })
            .collect()
    }
}

/// Second-order smooth walk with unit stationary variance: two cascaded AR(1) stages.
#[derive(Debug, Clone)]
pub(crate) struct SmoothWalk {
    a: f64,
    innovation: f64,
    one_minus_a: f64,
    scale: f64,
    u: f64,
    v: f64,
}

impl SmoothWalk {
    pub(crate) fn new(dt_s: f64, timescale_s: f64, rng: &mut impl Rng) -> Self {
        let one_minus_a = -(-dt_s / timescale_s).exp_m1();
        let a = 1.0 - one_minus_a;
        // 1 - a² = (1 - a)(1 + a)
        let innovation = (one_minus_a * (1.0 + a)).sqrt();
        let var_v = (1.0 + a * a) / ((1.0 + a) * (1.0 + a));
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        // Draw (u, v) from the stationary joint distribution.
        let u = z1;
        let v = (z1 + a * z2) / (1.0 + a);
        Self {
            a,
            innovation,
            one_minus_a,
            scale: 1.0 / var_v.sqrt(),
            u,
            v,
        }
    }

    #[cfg(test)]
    pub(crate) fn stationary_variance(a: f64) -> f64 {
        (1.0 + a * a) / ((1.0 + a) * (1.0 + a))
    }

    #[cfg(test)]
    pub(crate) fn coefficient(&self) -> f64 {
        self.a
    }

    pub(crate) fn value(&self) -> f64 {
        self.v * self.scale
    }

    pub(crate) fn step(&mut self, rng: &mut impl Rng) -> f64 {
        let e: f64 = rng.sample(StandardNormal);
        self.u = self.a * self.u + self.innovation * e;
        self.v = self.a * self.v + self.one_minus_a * self.u;
        self.value()
    }
}

struct ResolvedEvent {
    event: AnomalyEvent,
    /// (dense node index, global sample index of onset at that node)
    onsets: Vec<(usize, u64)>,
    span: Option<u64>,
}

fn resolve_events(topo: &ResolvedTopology, profile: &FlowProfile, rate: f64) -> Result<Vec<ResolvedEvent>> {
    let index: HashMap<NodeId, usize> = topo.ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let mut out = Vec::new();
    for ev in &profile.anomaly_events {
        // Affected real nodes and the delay at the disturbance location.
        let (affected, origin_delay): (Vec<usize>, f64) = match ev.location {
            EventLocation::Node { id } => {
                let v = *index
                    .get(&id)
                    .ok_or_else(|| Error::config(format!("anomaly at unknown node {id}")))?;
                if topo.anchors[v].is_some() {
                    return Err(Error::config(format!("anomaly at virtual node {id}")));
                }
                let through: Vec<usize> = (0..topo.ids.len())
                    .filter(|&j| j == v || topo.path_nodes(j).contains(&v))
                    .collect();
                (through, topo.delay_s[v])
            }
            EventLocation::Segment { a, b } => {
                let ia = *index
                    .get(&a)
                    .ok_or_else(|| Error::config(format!("anomaly on unknown node {a}")))?;
                let ib = *index
                    .get(&b)
                    .ok_or_else(|| Error::config(format!("anomaly on unknown node {b}")))?;
                let e = topo
                    .segment_between(ia, ib)
                    .ok_or_else(|| Error::config(format!("no segment between {a} and {b}")))?;
                let near = topo.delay_s[ia].min(topo.delay_s[ib]);
                let through: Vec<usize> = (0..topo.ids.len()).filter(|&j| topo.paths[j].contains(&e)).collect();
                (through, near)
            }
        };
        let onsets = affected
            .into_iter()
            .filter(|&j| topo.anchors[j].is_none())
            .map(|j| {
                let extra = delay_in_samples((topo.delay_s[j] - origin_delay).max(0.0), rate) as u64;
                (j, ev.start_sample + extra)
            })
            .collect();
        out.push(ResolvedEvent {
            event: ev.clone(),
            onsets,
            span: ev.span_samples(rate),
        });
    }
    Ok(out)
}

impl ResolvedTopology {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Nodes on the path from the source to `v`, excluding `v`.
    pub fn path_nodes(&self, v: usize) -> Vec<usize> {
        let mut out = vec![self.source];
        let mut cur = self.source;
        for &e in &self.paths[v] {
            let seg = &self.segments[e];
            let a = self.index_of(seg.a).expect("resolved");
            let b = self.index_of(seg.b).expect("resolved");
            cur = if a == cur { b } else { a };
            if cur != v {
                out.push(cur);
            }
        }
        out
    }

    fn segment_between(&self, a: usize, b: usize) -> Option<usize> {
        let (ia, ib) = (self.ids[a], self.ids[b]);
        self.segments
            .iter()
            .position(|s| (s.a == ia && s.b == ib) || (s.a == ib && s.b == ia))
    }

    /// Nodes that are downstream of `v` (their path passes through it), excluding `v`.
    pub fn downstream_of(&self, v: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&j| j != v && self.path_nodes(j).contains(&v))
            .collect()
    }

    pub fn max_delay_s(&self) -> f64 {
        self.delay_s.iter().copied().fold(0.0, f64::max)
    }
}

/// Streaming generator emitting one [`IntervalFrame`] per call.
pub struct TraceGenerator {
    topo: ResolvedTopology,
    profile: FlowProfile,
    sampling: SamplingConfig,
    spi: usize,
    rate: f64,
    period_s: f64,
    delay_samples: Vec<usize>,
    /// For virtual nodes: signed shift (samples) relative to the anchor.
    virtual_shift: Vec<i64>,
    source_rng: ChaCha8Rng,
    walk: SmoothWalk,
    transient: SmoothWalk,
    node_rngs: Vec<ChaCha8Rng>,
    /// Source head for global indices `src_base..`.
    src_hist: VecDeque<f64>,
    src_base: i64,
    /// Real node samples for global indices `hist_base..`.
    hist: Vec<VecDeque<f64>>,
    hist_base: i64,
    generated: i64,
    lookahead: i64,
    lookback: i64,
    max_delay: usize,
    events: Vec<ResolvedEvent>,
    next_interval: u64,
}

impl TraceGenerator {
    pub fn new(topology: &NetworkTopology, profile: &FlowProfile, sampling: SamplingConfig, seed: u64) -> Result<Self> {
        sampling.validate()?;
        profile.validate()?;
        let topo = topology.resolve()?;
        let rate = sampling.sample_rate_hz;
        let n = topo.len();
        let delay_samples: Vec<usize> = topo.delay_s.iter().map(|&d| delay_in_samples(d, rate)).collect();
        let mut virtual_shift = vec![0i64; n];
        for v in 0..n {
            if let Some(a) = topo.anchors[v] {
                virtual_shift[v] = delay_samples[v] as i64 - delay_samples[a] as i64;
            }
        }
        let lookahead = virtual_shift.iter().map(|&s| (-s).max(0)).max().unwrap_or(0);
        let lookback = virtual_shift.iter().map(|&s| s.max(0)).max().unwrap_or(0);
        let max_delay = delay_samples.iter().copied().max().unwrap_or(0);
        let mut source_rng = substream(seed, domain::TRACE, 0);
        let walk = SmoothWalk::new(1.0 / rate, profile.source.walk_timescale_s, &mut source_rng);
        let transient = SmoothWalk::new(1.0 / rate, profile.source.transient_timescale_s, &mut source_rng);
        let node_rngs = topo
            .ids
            .iter()
            .map(|id| substream(seed, domain::TRACE, 1 + id.0 as u64))
            .collect();
        let events = resolve_events(&topo, profile, rate)?;
        let period_s = profile.diurnal_period as f64 * sampling.interval_length_s;
        let mut gen = Self {
            spi: sampling.samples_per_interval(),
            rate,
            period_s,
            delay_samples,
            virtual_shift,
            source_rng,
            walk,
            transient,
            node_rngs,
            src_hist: VecDeque::new(),
            src_base: -(max_delay as i64) - lookback,
            hist: vec![VecDeque::new(); n],
            hist_base: -lookback,
            generated: -lookback,
            lookahead,
            lookback,
            max_delay,
            events,
            next_interval: 0,
            topo,
            profile: profile.clone(),
            sampling,
        };
        gen.extend_source_to(gen.generated);
        Ok(gen)
    }

    pub fn topology(&self) -> &ResolvedTopology {
        &self.topo
    }

    pub fn sampling(&self) -> &SamplingConfig {
        &self.sampling
    }

    fn time_s(&self, k: i64) -> f64 {
        k as f64 / self.rate
    }

    fn source_head(&mut self, k: i64) -> f64 {
        let s = &self.profile.source;
        let t = self.time_s(k);
        let diurnal = s.diurnal_amplitude_m * (2.0 * PI * t / self.period_s).cos();
        let walk = s.walk_std_m * self.walk.step(&mut self.source_rng)
            + s.transient_std_m * self.transient.step(&mut self.source_rng);
        let white = if s.white_noise_std_m > 0.0 {
            let z: f64 = self.source_rng.sample(StandardNormal);
            s.white_noise_std_m * z
        } else {
            0.0
        };
        s.base_head_m + diurnal + walk + white
    }

    /// Generate source samples for indices `< end`.
    fn extend_source_to(&mut self, end: i64) {
        let mut k = self.src_base + self.src_hist.len() as i64;
        while k < end {
            let h = self.source_head(k);
            self.src_hist.push_back(h);
            k += 1;
        }
    }

    fn perturbation(&self, node: usize, k: i64) -> f64 {
        let mut total = 0.0;
        for ev in &self.events {
            for &(j, onset) in &ev.onsets {
                if j != node || k < onset as i64 {
                    continue;
                }
                let s = (k - onset as i64) as u64;
                if ev.span.is_some_and(|span| s >= span) {
                    continue;
                }
                total += ev.event.perturbation(s, self.rate);
            }
        }
        total
    }

    /// Generate real-node samples for indices `< end`.
    fn extend_real_to(&mut self, end: i64) {
        self.extend_source_to(end);
        let n = self.topo.len();
        let has_events = !self.events.is_empty();
        let noise = self.profile.noise_std;
        while self.generated < end {
            let k = self.generated;
            let q = self.profile.flow_at(self.time_s(k), self.period_s);
            let q2 = q * q;
            for i in 0..n {
                if self.topo.anchors[i].is_some() {
                    continue;
                }
                let src_idx = (k - self.delay_samples[i] as i64 - self.src_base) as usize;
                let mut x = self.src_hist[src_idx] - self.topo.loss_coeff[i] * q2;
                if has_events {
                    x += self.perturbation(i, k);
                }
                if noise > 0.0 {
                    let z: f64 = self.node_rngs[i].sample(StandardNormal);
                    x += noise * z;
                }
                self.hist[i].push_back(x);
            }
            self.generated += 1;
        }
    }

    /// Emit the next interval.
    #[allow(clippy::needless_range_loop)]
    pub fn next_interval(&mut self) -> IntervalFrame {
        let t = self.next_interval;
        let start = t as i64 * self.spi as i64;
        let end = start + self.spi as i64;
        self.extend_real_to(end + self.lookahead);
        let n = self.topo.len();
        let mut samples = vec![Vec::with_capacity(self.spi); n];
        let noise = self.profile.noise_std;
        for i in 0..n {
            match self.topo.anchors[i] {
                None => {
                    let off = (start - self.hist_base) as usize;
                    samples[i].extend(self.hist[i].range(off..off + self.spi));
                }
                Some(a) => {
                    let shift = self.virtual_shift[i];
                    let dk = self.topo.loss_coeff[i] - self.topo.loss_coeff[a];
                    for k in start..end {
                        let q = self.profile.flow_at(self.time_s(k), self.period_s);
                        let idx = (k - shift - self.hist_base) as usize;
                        let mut x = self.hist[a][idx] - dk * q * q;
                        if noise > 0.0 {
                            let z: f64 = self.node_rngs[i].sample(StandardNormal);
                            x += noise * z;
                        }
                        samples[i].push(x);
                    }
                }
            }
        }
        // Drop history no longer reachable by any later interval.
        let keep_from = end - self.lookback;
        let drop = (keep_from - self.hist_base).max(0) as usize;
        for h in &mut self.hist {
            let d = drop.min(h.len());
            h.drain(..d);
        }
        self.hist_base += drop as i64;
        let src_keep_from = self.generated - self.max_delay as i64;
        let src_drop = (src_keep_from - self.src_base).max(0) as usize;
        self.src_hist.drain(..src_drop.min(self.src_hist.len()));
        self.src_base += src_drop as i64;

        let negative_heads = samples.iter().flatten().filter(|&&x| x < 0.0).count();
        self.next_interval += 1;
        IntervalFrame {
            interval: t,
            start_sample: start as u64,
            samples,
            negative_heads,
        }
    }
}

/// Full traces held in memory, indexed like [`ResolvedTopology::ids`].
#[derive(Debug, Clone)]
pub struct TraceSet {
    pub ids: Vec<NodeId>,
    pub sampling: SamplingConfig,
    pub samples: Vec<Vec<f64>>,
    pub negative_heads: usize,
}

impl TraceSet {
    pub fn node(&self, id: NodeId) -> Option<&[f64]> {
        self.ids.binary_search(&id).ok().map(|i| self.samples[i].as_slice())
    }

    /// The trace of `id` cut into chunks.
    pub fn chunks(&self, id: NodeId) -> Option<Vec<PressureChunk>> {
        let data = self.node(id)?;
        let len = self.sampling.chunk_len;
        Some(
            data.chunks(len)
                .enumerate()
                .map(|(c, s)| PressureChunk {
                    node_id: id,
                    timestamp_us: self.sampling.timestamp_us((c * len) as u64),
                    samples: s.to_vec(),
                })
                .collect(),
        )
    }
}

/// Generate `duration` intervals for every node of `topology`.
pub fn generate_traces(
    topology: &NetworkTopology,
    profile: &FlowProfile,
    sampling: SamplingConfig,
    duration: u64,
    seed: u64,
) -> Result<TraceSet> {
    if duration < 1 {
        return Err(Error::config("duration must be >= 1 interval"));
    }
    let mut gen = TraceGenerator::new(topology, profile, sampling, seed)?;
    let n = gen.topology().len();
    let mut samples = vec![Vec::with_capacity(duration as usize * sampling.samples_per_interval()); n];
    let mut negative_heads = 0;
    for _ in 0..duration {
        let frame = gen.next_interval();
        negative_heads += frame.negative_heads;
        for (dst, src) in samples.iter_mut().zip(frame.samples) {
            dst.extend(src);
        }
    }
    Ok(TraceSet {
        ids: gen.topology().ids.clone(),
        sampling,
        samples,
        negative_heads,
    })
}

/// Insert virtual nodes into `topology` and derive their traces from the nearer
/// real node of `traces`: shifted by the proportional delay, attenuated (or, when
/// derived from the downstream node, amplified) by the proportional friction loss,
/// plus independent sensor noise.
pub fn synthesize_virtual_nodes(
    topology: &NetworkTopology,
    traces: &TraceSet,
    plan: VirtualNodePlan,
    profile: &FlowProfile,
    seed: u64,
) -> Result<(NetworkTopology, TraceSet)> {
    let expanded = expand_topology(topology, plan)?;
    if expanded.nodes.len() == topology.nodes.len() {
        return Ok((expanded, traces.clone()));
    }
    let topo = expanded.resolve()?;
    let rate = traces.sampling.sample_rate_hz;
    let period_s = profile.diurnal_period as f64 * traces.sampling.interval_length_s;
    let len = traces.samples.first().map_or(0, |s| s.len());
    let mut samples = Vec::with_capacity(topo.len());
    for (i, id) in topo.ids.iter().enumerate() {
        match topo.anchors[i] {
            None => {
                let s = traces
                    .node(*id)
                    .ok_or_else(|| Error::input(format!("trace for real node {id} missing")))?;
                samples.push(s.to_vec());
            }
            Some(a) => {
                let anchor = traces
                    .node(topo.ids[a])
                    .ok_or_else(|| Error::input(format!("trace for anchor {} missing", topo.ids[a])))?;
                let shift =
                    delay_in_samples(topo.delay_s[i], rate) as i64 - delay_in_samples(topo.delay_s[a], rate) as i64;
                let dk = topo.loss_coeff[i] - topo.loss_coeff[a];
                let mut rng = substream(seed, domain::TRACE, 1 + id.0 as u64);
                let out = (0..len as i64)
                    .map(|k| {
                        let src = (k - shift).clamp(0, len as i64 - 1) as usize;
                        let q = profile.flow_at(k as f64 / rate, period_s);
                        let z: f64 = rng.sample(StandardNormal);
                        anchor[src] - dk * q * q + profile.noise_std * z
                    })
                    .collect();
                samples.push(out);
            }
        }
    }
    let negative_heads = samples.iter().flatten().filter(|&&x| x < 0.0).count();
    Ok((
        expanded,
        TraceSet {
            ids: topo.ids.clone(),
            sampling: traces.sampling,
            samples,
            negative_heads,
        },
    ))
}
