//! Algorithm-independent inputs of a run, computed once and shared by every
//! algorithm in a comparison: per-interval ground-truth moments, on-node
//! anomaly counters and compression rates, and the energy draws.

use std::sync::Arc;

use rayon::prelude::*;

use super::config::RunConfig;
use crate::anomaly::{AnomalyReport, NodeDetector};
use crate::compression::ChunkRateMeter;
use crate::energy::{EnergyDraw, EnergyDraws};
use crate::stats::{mean, Moments};
use crate::trace_gen::{IntervalFrame, SamplingConfig, TraceGenerator, TraceSet};
use crate::{Error, NodeId, Result};

/// Sensor-side outcome of one interval.
#[derive(Debug, Clone)]
pub struct IntervalData {
    /// Moments of every node's stream relative to [`Scenario::refs`].
    pub moments: Arc<Moments>,
    /// Anomalies starting in this interval, per node.
    pub counters: Vec<u32>,
    /// Mean chunk compression rate, per node.
    pub mean_rate: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub ids: Vec<NodeId>,
    pub sampling: SamplingConfig,
    pub refs: Vec<f64>,
    pub intervals: Vec<IntervalData>,
    /// `draws[node][interval]`.
    pub draws: Vec<Vec<EnergyDraw>>,
    /// Non-empty anomaly reports, ordered by interval then node.
    pub anomalies: Vec<AnomalyReport>,
    pub negative_heads: usize,
}

struct NodePipeline {
    meter: ChunkRateMeter,
    detector: NodeDetector,
}

/// Accumulates per-interval sensor-side results, whatever the trace source.
struct Builder {
    ids: Vec<NodeId>,
    sampling: SamplingConfig,
    pipes: Vec<NodePipeline>,
    refs: Option<Vec<f64>>,
    intervals: Vec<IntervalData>,
    anomalies: Vec<AnomalyReport>,
    negative_heads: usize,
}

impl Builder {
    fn new(cfg: &RunConfig, ids: Vec<NodeId>) -> Result<Self> {
        let pipes = ids
            .iter()
            .map(|_| {
                Ok(NodePipeline {
                    meter: ChunkRateMeter::new(cfg.anomaly.quantizer)?,
                    detector: NodeDetector::new(&cfg.anomaly.kalman, &cfg.anomaly.detector)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            ids,
            sampling: cfg.sampling,
            pipes,
            refs: None,
            intervals: Vec::with_capacity(cfg.duration as usize),
            anomalies: Vec::new(),
            negative_heads: 0,
        })
    }

    fn push(&mut self, streams: &[&[f64]], start_sample: u64) {
        let sampling = self.sampling;
        let t = self.intervals.len() as u64;
        let refs = self
            .refs
            .get_or_insert_with(|| streams.iter().map(|s| mean(s)).collect());
        let per_node: Vec<(u32, f64, Vec<u64>)> = self
            .pipes
            .par_iter_mut()
            .zip(streams)
            .map(|(p, samples)| {
                let mut count = 0;
                let mut rate_sum = 0.0;
                let mut stamps = Vec::new();
                for (c, chunk) in samples.chunks(sampling.chunk_len).enumerate() {
                    let (_, rate) = p.meter.measure(chunk);
                    rate_sum += rate;
                    if p.detector.push(rate) {
                        count += 1;
                        stamps.push(sampling.timestamp_us(start_sample + (c * sampling.chunk_len) as u64));
                    }
                }
                (count, rate_sum / sampling.chunks_per_interval() as f64, stamps)
            })
            .collect();
        let moments = Arc::new(Moments::from_streams(streams, refs));
        let mut counters = Vec::with_capacity(streams.len());
        let mut mean_rate = Vec::with_capacity(streams.len());
        for (i, (count, rate, stamps)) in per_node.into_iter().enumerate() {
            if count > 0 {
                self.anomalies.push(AnomalyReport {
                    node_id: self.ids[i],
                    interval: t,
                    count,
                    timestamps_us: stamps,
                });
            }
            counters.push(count);
            mean_rate.push(rate);
        }
        self.intervals.push(IntervalData {
            moments,
            counters,
            mean_rate,
        });
    }

    fn finish(self, cfg: &RunConfig) -> Scenario {
        let draws = self
            .ids
            .iter()
            .map(|&id| {
                EnergyDraws::new(&cfg.energy, &cfg.profile, self.sampling.interval_length_s, id, cfg.seed)
                    .take(self.intervals.len())
                    .collect()
            })
            .collect();
        Scenario {
            ids: self.ids,
            sampling: self.sampling,
            refs: self.refs.unwrap_or_default(),
            intervals: self.intervals,
            draws,
            anomalies: self.anomalies,
            negative_heads: self.negative_heads,
        }
    }
}

impl Scenario {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        Self::build_with(cfg, |_| {})
    }

    /// As [`Scenario::build`], also handing every generated frame to `on_frame`.
    pub fn build_with(cfg: &RunConfig, mut on_frame: impl FnMut(&IntervalFrame)) -> Result<Self> {
        cfg.validate()?;
        let topology = cfg.topology.build()?;
        let mut gen = TraceGenerator::new(&topology, &cfg.profile, cfg.sampling, cfg.seed)?;
        let mut b = Builder::new(cfg, gen.topology().ids.clone())?;
        for _ in 0..cfg.duration {
            let frame = gen.next_interval();
            on_frame(&frame);
            b.negative_heads += frame.negative_heads;
            let streams: Vec<&[f64]> = frame.samples.iter().map(Vec::as_slice).collect();
            b.push(&streams, frame.start_sample);
        }
        Ok(b.finish(cfg))
    }

    /// Ingest recorded traces instead of generating them. The traces must use
    /// the configured sampling and cover `cfg.duration` intervals; energy draws
    /// still come from the configuration.
    pub fn from_traces(cfg: &RunConfig, traces: &TraceSet) -> Result<Self> {
        cfg.validate()?;
        if traces.sampling != cfg.sampling {
            return Err(Error::config("trace sampling differs from the configured sampling"));
        }
        let spi = cfg.sampling.samples_per_interval();
        let need = cfg.duration as usize * spi;
        if traces.ids.is_empty() || traces.samples.iter().any(|s| s.len() < need) {
            return Err(Error::input(format!(
                "traces must hold {need} samples per node for {} intervals",
                cfg.duration
            )));
        }
        let mut b = Builder::new(cfg, traces.ids.clone())?;
        b.negative_heads = traces.negative_heads;
        for t in 0..cfg.duration as usize {
            let streams: Vec<&[f64]> = traces.samples.iter().map(|s| &s[t * spi..(t + 1) * spi]).collect();
            b.push(&streams, (t * spi) as u64);
        }
        Ok(b.finish(cfg))
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn duration(&self) -> u64 {
        self.intervals.len() as u64
    }
}
