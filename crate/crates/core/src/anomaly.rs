//! In-node anomaly detection on the compression-rate stream.
//!
//! Abrupt pressure changes make a chunk's bytes less self-similar, so its
//! compression rate drops. The rate stream is smoothed by a scalar Kalman
//! filter; a smoothed value outside `avg ± l·std` of the preceding `mavgw`
//! smoothed values is flagged, and a run of consecutive flagged chunks counts
//! as one anomaly stamped at its first chunk.
//!
//! The band half-width never falls below `l·min_std`. With `min_std = 0` a flat
//! window gives the degenerate band `[avg, avg]`, where only deviations above
//! `1e-9` are flagged.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::compression::CompressionRatePoint;
use crate::{Error, NodeId, Result};

/// Deviations at or below this are never anomalies.
pub const ABS_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KalmanConfig {
    pub process_noise_q: f64,
    pub measurement_noise_r: f64,
    /// `None` starts from the first measurement.
    pub initial_estimate: Option<f64>,
    pub initial_error_p: f64,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        Self {
            process_noise_q: 1e-4,
            measurement_noise_r: 1e-2,
            initial_estimate: None,
            initial_error_p: 1.0,
        }
    }
}

impl KalmanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.process_noise_q > 0.0 && self.process_noise_q.is_finite()) {
            return Err(Error::config("kalman q must be > 0"));
        }
        if !(self.measurement_noise_r > 0.0 && self.measurement_noise_r.is_finite()) {
            return Err(Error::config("kalman r must be > 0"));
        }
        if !(self.initial_error_p >= 0.0 && self.initial_error_p.is_finite()) {
            return Err(Error::config("kalman initial p must be >= 0"));
        }
        Ok(())
    }
}

/// Scalar constant-level Kalman filter.
#[derive(Debug, Clone)]
pub struct KalmanFilter {
    q: f64,
    r: f64,
    x: Option<f64>,
    p: f64,
}

impl KalmanFilter {
    pub fn new(cfg: &KalmanConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            q: cfg.process_noise_q,
            r: cfg.measurement_noise_r,
            x: cfg.initial_estimate,
            p: cfg.initial_error_p,
        })
    }

    pub fn update(&mut self, z: f64) -> f64 {
        let x = self.x.unwrap_or(z);
        let p = self.p + self.q;
        let k = p / (p + self.r);
        let x = x + k * (z - x);
        self.p = (1.0 - k) * p;
        self.x = Some(x);
        x
    }

    pub fn estimate(&self) -> Option<f64> {
        self.x
    }
}

pub fn kalman_filter(rates: &[CompressionRatePoint], cfg: &KalmanConfig) -> Result<Vec<f64>> {
    let mut f = KalmanFilter::new(cfg)?;
    Ok(rates.iter().map(|p| f.update(p.rate)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Trailing window length, in chunks.
    pub mavgw: usize,
    /// Band width in standard deviations.
    pub l: f64,
    /// Floor on the window standard deviation, in rate units.
    pub min_std: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            mavgw: 20,
            l: 2.0,
            min_std: 0.02,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mavgw < 2 {
            return Err(Error::config("mavgw must be >= 2"));
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::config("band multiplier l must be > 0"));
        }
        if !(self.min_std >= 0.0 && self.min_std.is_finite()) {
            return Err(Error::config("min_std must be >= 0"));
        }
        Ok(())
    }

    fn outside(&self, window: impl Iterator<Item = f64> + Clone, x: f64) -> bool {
        let n = self.mavgw as f64;
        let avg = window.clone().sum::<f64>() / n;
        let var = window.map(|v| (v - avg) * (v - avg)).sum::<f64>() / n;
        let dev = (x - avg).abs();
        dev > ABS_EPSILON && dev > self.l * var.sqrt().max(self.min_std)
    }
}

/// Indices whose value leaves the band of the preceding `mavgw` values.
/// The first `mavgw` indices are warm-up and never flagged.
pub fn flag_indices(smoothed: &[f64], cfg: &DetectorConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    let w = cfg.mavgw;
    Ok((w..smoothed.len())
        .filter(|&i| cfg.outside(smoothed[i - w..i].iter().copied(), smoothed[i]))
        .collect())
}

/// First index of every run of consecutive flagged indices.
pub fn detect(smoothed: &[f64], cfg: &DetectorConfig) -> Result<Vec<usize>> {
    let flags = flag_indices(smoothed, cfg)?;
    Ok(flags
        .iter()
        .enumerate()
        .filter(|&(k, &i)| k == 0 || flags[k - 1] + 1 != i)
        .map(|(_, &i)| i)
        .collect())
}

/// Streaming form of [`kalman_filter`] followed by [`detect`], one per node.
#[derive(Debug, Clone)]
pub struct NodeDetector {
    cfg: DetectorConfig,
    filter: KalmanFilter,
    window: VecDeque<f64>,
    in_run: bool,
}

impl NodeDetector {
    pub fn new(kalman: &KalmanConfig, cfg: &DetectorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: *cfg,
            filter: KalmanFilter::new(kalman)?,
            window: VecDeque::with_capacity(cfg.mavgw + 1),
            in_run: false,
        })
    }

    /// Feed one chunk's compression rate; true when a new anomaly starts here.
    pub fn push(&mut self, rate: f64) -> bool {
        let x = self.filter.update(rate);
        let flagged = self.window.len() == self.cfg.mavgw && self.cfg.outside(self.window.iter().copied(), x);
        if self.window.len() == self.cfg.mavgw {
            self.window.pop_front();
        }
        self.window.push_back(x);
        let starts = flagged && !self.in_run;
        self.in_run = flagged;
        starts
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub node_id: NodeId,
    pub interval: u64,
    pub count: u32,
    pub timestamps_us: Vec<u64>,
}

/// Bucket anomaly timestamps by interval. Reports cover at least
/// `num_intervals` intervals and every interval holding a timestamp.
pub fn count_per_interval(
    node_id: NodeId,
    timestamps_us: &[u64],
    interval_length_s: f64,
    num_intervals: u64,
) -> Result<Vec<AnomalyReport>> {
    if !(interval_length_s > 0.0 && interval_length_s.is_finite()) {
        return Err(Error::input("interval length must be > 0"));
    }
    let mut sorted = timestamps_us.to_vec();
    sorted.sort_unstable();
    let bucket = |ts: u64| (ts as f64 / (interval_length_s * 1e6)).floor() as u64;
    let n = sorted.last().map_or(0, |&ts| bucket(ts) + 1).max(num_intervals);
    let mut reports: Vec<AnomalyReport> = (0..n)
        .map(|interval| AnomalyReport {
            node_id,
            interval,
            count: 0,
            timestamps_us: Vec::new(),
        })
        .collect();
    for ts in sorted {
        let r = &mut reports[bucket(ts) as usize];
        r.count += 1;
        r.timestamps_us.push(ts);
    }
    Ok(reports)
}

/// Matching of detections against ground-truth onsets (both in chunk indices).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl DetectionScore {
    pub fn precision(&self) -> f64 {
        let d = self.true_positives + self.false_positives;
        if d == 0 {
            1.0
        } else {
            self.true_positives as f64 / d as f64
        }
    }

    pub fn recall(&self) -> f64 {
        let d = self.true_positives + self.false_negatives;
        if d == 0 {
            1.0
        } else {
            self.true_positives as f64 / d as f64
        }
    }

    pub fn add(&mut self, other: &DetectionScore) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
    }
}

/// A detection at `d` matches truth `t` when `t <= d <= t + tolerance`. Each
/// truth is matched at most once; unmatched detections are false positives.
pub fn score_detections(detected: &[usize], truth: &[usize], tolerance: usize) -> DetectionScore {
    let mut used = vec![false; truth.len()];
    let mut tp = 0;
    let mut fp = 0;
    for &d in detected {
        let hit = truth
            .iter()
            .enumerate()
            .find(|&(k, &t)| !used[k] && t <= d && d <= t + tolerance);
        match hit {
            Some((k, _)) => {
                used[k] = true;
                tp += 1;
            }
            None => fp += 1,
        }
    }
    DetectionScore {
        true_positives: tp,
        false_positives: fp,
        false_negatives: used.iter().filter(|u| !**u).count(),
    }
}

/// Event-level matching: one disturbance may raise several detections while
/// the rate drops and recovers, so detections are scored against spans.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventScore {
    /// Detections inside some event span.
    pub detections_in_events: usize,
    /// Detections outside every event span.
    pub false_alarms: usize,
    pub events_detected: usize,
    pub events_missed: usize,
}

impl EventScore {
    pub fn precision(&self) -> f64 {
        let d = self.detections_in_events + self.false_alarms;
        if d == 0 {
            1.0
        } else {
            self.detections_in_events as f64 / d as f64
        }
    }

    pub fn recall(&self) -> f64 {
        let d = self.events_detected + self.events_missed;
        if d == 0 {
            1.0
        } else {
            self.events_detected as f64 / d as f64
        }
    }

    pub fn add(&mut self, other: &EventScore) {
        self.detections_in_events += other.detections_in_events;
        self.false_alarms += other.false_alarms;
        self.events_detected += other.events_detected;
        self.events_missed += other.events_missed;
    }
}

/// Event `t` spans `t..=t + span`. A detection is correct when it falls in any
/// span; an event is detected when its span holds at least one detection.
pub fn score_events(detected: &[usize], onsets: &[usize], span: usize) -> EventScore {
    let inside = |d: usize, t: usize| t <= d && d <= t + span;
    let hits = detected
        .iter()
        .filter(|&&d| onsets.iter().any(|&t| inside(d, t)))
        .count();
    let found = onsets
        .iter()
        .filter(|&&t| detected.iter().any(|&d| inside(d, t)))
        .count();
    EventScore {
        detections_in_events: hits,
        false_alarms: detected.len() - hits,
        events_detected: found,
        events_missed: onsets.len() - found,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::variance;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn points(xs: &[f64]) -> Vec<CompressionRatePoint> {
        xs.iter()
            .enumerate()
            .map(|(i, &rate)| CompressionRatePoint {
                timestamp_us: i as u64,
                rate,
            })
            .collect()
    }

    #[test]
    fn constant_input_converges() {
        let cfg = KalmanConfig {
            initial_estimate: Some(0.0),
            ..KalmanConfig::default()
        };
        let out = kalman_filter(&points(&[0.7; 50]), &KalmanConfig::default()).unwrap();
        assert!((out[49] - 0.7).abs() < 1e-6);
        // From a wrong prior the error shrinks monotonically towards zero.
        let out = kalman_filter(&points(&[0.7; 50]), &cfg).unwrap();
        assert!(out.windows(2).all(|w| (w[1] - 0.7).abs() <= (w[0] - 0.7).abs()));
        assert!((out[49] - 0.7).abs() < 1e-4, "{}", out[49]);
    }

    #[test]
    fn vanishing_measurement_noise_tracks_input() {
        let cfg = KalmanConfig {
            measurement_noise_r: 1e-15,
            initial_estimate: Some(0.0),
            ..KalmanConfig::default()
        };
        let xs = [0.1, 0.9, 0.3, 0.5, 0.0, 1.0];
        let out = kalman_filter(&points(&xs), &cfg).unwrap();
        for (a, b) in out.iter().zip(xs) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn smoothing_reduces_variance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let noise = Normal::new(0.5, 0.05).unwrap();
        let xs: Vec<f64> = (0..2000).map(|_| noise.sample(&mut rng)).collect();
        let out = kalman_filter(&points(&xs), &KalmanConfig::default()).unwrap();
        assert_eq!(out.len(), xs.len());
        assert!(variance(&out[100..]) < variance(&xs[100..]));
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = KalmanConfig {
            process_noise_q: 0.0,
            ..KalmanConfig::default()
        };
        assert!(KalmanFilter::new(&bad).is_err());
        let bad = DetectorConfig {
            mavgw: 1,
            ..DetectorConfig::default()
        };
        assert!(detect(&[0.0; 10], &bad).is_err());
    }

    #[test]
    fn constant_stream_has_no_anomalies() {
        let strict = DetectorConfig {
            min_std: 0.0,
            ..DetectorConfig::default()
        };
        assert!(detect(&[0.4; 500], &strict).unwrap().is_empty());
        assert!(detect(&[0.4; 10], &strict).unwrap().is_empty());
    }

    #[test]
    fn flat_window_flags_any_real_deviation_without_floor() {
        let strict = DetectorConfig {
            min_std: 0.0,
            ..DetectorConfig::default()
        };
        let mut xs = vec![0.4; 30];
        xs[25] = 0.4 + 1e-6;
        assert_eq!(detect(&xs, &strict).unwrap(), vec![25]);
        xs[25] = 0.4 + 1e-10;
        assert!(detect(&xs, &strict).unwrap().is_empty());
    }

    #[test]
    fn single_deep_drop_is_one_anomaly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let mut rates: Vec<f64> = (0..140).map(|_| 0.45 + noise.sample(&mut rng)).collect();
        for r in &mut rates[100..103] {
            *r = 0.0;
        }
        let smoothed = kalman_filter(&points(&rates), &KalmanConfig::default()).unwrap();
        let found = detect(&smoothed, &DetectorConfig::default()).unwrap();
        assert_eq!(found, vec![100]);
    }

    #[test]
    fn streaming_detector_matches_batch() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let mut rates: Vec<f64> = (0..600).map(|_| 0.4 + noise.sample(&mut rng)).collect();
        for k in [150, 300, 301, 450] {
            rates[k] = 0.0;
        }
        let cfg = DetectorConfig::default();
        let batch = detect(&kalman_filter(&points(&rates), &KalmanConfig::default()).unwrap(), &cfg).unwrap();
        let mut node = NodeDetector::new(&KalmanConfig::default(), &cfg).unwrap();
        let stream: Vec<usize> = rates
            .iter()
            .enumerate()
            .filter_map(|(i, &r)| node.push(r).then_some(i))
            .collect();
        assert_eq!(batch, stream);
        assert!(!batch.is_empty());
    }

    #[test]
    fn bucketing_by_interval() {
        let reports = count_per_interval(NodeId(2), &[], 900.0, 8).unwrap();
        assert_eq!(reports.len(), 8);
        assert!(reports.iter().all(|r| r.count == 0));
        let base = 5 * 900_000_000;
        let ts = [base + 1, base + 10, base + 899_999_999];
        let reports = count_per_interval(NodeId(2), &ts, 900.0, 8).unwrap();
        assert_eq!(reports[5].count, 3);
        assert_eq!(reports[5].timestamps_us, ts.to_vec());
        assert_eq!(reports.iter().map(|r| r.count).sum::<u32>(), 3);
    }

    #[test]
    fn score_matching() {
        let s = score_detections(&[10, 13, 50, 90], &[10, 48, 200], 5);
        assert_eq!(s.true_positives, 2);
        assert_eq!(s.false_positives, 2);
        assert_eq!(s.false_negatives, 1);
    }

    #[test]
    fn event_scoring_counts_repeats_once_per_event() {
        let s = score_events(&[10, 13, 50, 90], &[10, 48, 200], 5);
        assert_eq!(s.detections_in_events, 3);
        assert_eq!(s.false_alarms, 1);
        assert_eq!(s.events_detected, 2);
        assert_eq!(s.events_missed, 1);
        assert_eq!(s.precision(), 0.75);
        assert_eq!(s.recall(), 2.0 / 3.0);
    }

    proptest! {
        #[test]
        fn smaller_band_flags_superset(
            xs in proptest::collection::vec(0.0f64..1.0, 0..200),
            l_small in 0.5f64..2.0,
            extra in 0.0f64..2.0,
            min_std in 0.0f64..0.05,
        ) {
            let small = DetectorConfig { l: l_small, min_std, ..DetectorConfig::default() };
            let large = DetectorConfig { l: l_small + extra, ..small };
            let fs = flag_indices(&xs, &small).unwrap();
            let fl = flag_indices(&xs, &large).unwrap();
            for i in &fl {
                prop_assert!(fs.contains(i));
            }
            // Every run start under the wider band lies inside a flagged run of the narrower one.
            for i in detect(&xs, &large).unwrap() {
                prop_assert!(fs.contains(&i));
            }
        }

        #[test]
        fn detections_in_range_and_counts_consistent(
            xs in proptest::collection::vec(0.0f64..1.0, 0..300),
        ) {
            let found = detect(&xs, &DetectorConfig::default()).unwrap();
            prop_assert!(found.iter().all(|&i| i >= 20 && i < xs.len()));
            let ts: Vec<u64> = found.iter().map(|&i| i as u64 * 1_000_000).collect();
            let reports = count_per_interval(NodeId(1), &ts, 10.0, 0).unwrap();
            prop_assert_eq!(reports.iter().map(|r| r.count as usize).sum::<usize>(), found.len());
            for r in &reports {
                prop_assert_eq!(r.count as usize, r.timestamps_us.len());
            }
        }
    }
}
