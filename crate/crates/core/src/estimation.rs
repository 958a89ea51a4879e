//! Multiple linear regression of a node's stream on its transmitting
//! correlation neighbours, and the two reliability measures built on it:
//! training-window reliability `rlb_i(Y)` for the scheduler and test-set
//! reliability for the metrics.
//!
//! Fits work on sufficient statistics ([`Moments`]), so pooling intervals and
//! choosing predictor subsets never touches raw samples. Normal equations are
//! solved on the standardized Gram matrix by Cholesky; a rank-deficient Gram
//! falls back to Tikhonov ridge with `λ = 1e-8 · trace / n`.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::correlation::{CorrelationGraph, Observation, ObservationLog};
use crate::stats::Moments;
use crate::{Error, NodeId, Result};

const RIDGE_SCALE: f64 = 1e-8;
const PIVOT_TOL: f64 = 1e-12;
const CONSTANT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Linear,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SolveMode {
    /// Cholesky, ridge only when the Gram matrix is rank deficient.
    #[default]
    Auto,
    /// Always add the ridge term.
    Ridge,
}

/// Fitted `x̂_target = b_0 + Σ b_k x_predictor_k`; indices are stream positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub kind: ModelKind,
    pub target: usize,
    pub predictors: Vec<usize>,
    /// `b_0, b_1, ..., b_n` in absolute units.
    pub coefficients: Vec<f64>,
    /// Number of intervals the training data spans.
    pub window: usize,
    pub train_sse: f64,
    pub train_sst: f64,
    pub r_squared: f64,
    pub ridge: bool,
}

impl RegressionModel {
    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn slopes(&self) -> &[f64] {
        &self.coefficients[1..]
    }

    /// `1 - SSE / SST` of this model on other data, clamped to `[0, 1]`.
    /// `m` and `refs` use the same stream positions as the fit.
    pub fn reliability_on(&self, m: &Moments, refs: &[f64]) -> f64 {
        let n = m.count();
        if n == 0.0 {
            return 0.0;
        }
        let t = self.target;
        let b = self.slopes();
        // Intercept in reference-shifted coordinates.
        let c = self.intercept() - refs[t] + b.iter().zip(&self.predictors).map(|(bk, &p)| bk * refs[p]).sum::<f64>();
        let mut mean_res = m.sum(t) / n - c;
        for (bk, &p) in b.iter().zip(&self.predictors) {
            mean_res -= bk * m.sum(p) / n;
        }
        let sse = centered_sse(m, t, &self.predictors, b) + n * mean_res * mean_res;
        let sst = m.centered(t, t);
        reliability_ratio(sse, sst, m.cross(t, t))
    }
}

fn reliability_ratio(sse: f64, sst: f64, raw_tt: f64) -> f64 {
    if sst <= CONSTANT_TOL * raw_tt.max(f64::MIN_POSITIVE) {
        return if sse <= CONSTANT_TOL * raw_tt.max(f64::MIN_POSITIVE) {
            1.0
        } else {
            0.0
        };
    }
    (1.0 - sse / sst).clamp(0.0, 1.0)
}

/// `Σ (e - ē)²` for residual `e = x_t - Σ b_k x_k`, from centered co-moments.
fn centered_sse(m: &Moments, t: usize, preds: &[usize], b: &[f64]) -> f64 {
    let mut sse = m.centered(t, t);
    for (a, &pa) in preds.iter().enumerate() {
        sse -= 2.0 * b[a] * m.centered(pa, t);
        for (c, &pc) in preds.iter().enumerate() {
            sse += b[a] * b[c] * m.centered(pa, pc);
        }
    }
    sse.max(0.0)
}

/// In-place Cholesky of a packed-row `n × n` symmetric matrix; `false` on a
/// non-positive or negligible pivot.
fn cholesky(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > PIVOT_TOL) {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

fn cholesky_solve(l: &[f64], n: usize, rhs: &[f64]) -> Vec<f64> {
    let mut y = rhs.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    y
}

/// Least-squares fit of position `target` on `predictors` from moments taken
/// relative to `refs` (one offset per position of `m`).
pub fn fit_moments(
    m: &Moments,
    refs: &[f64],
    target: usize,
    predictors: &[usize],
    mode: SolveMode,
) -> Result<RegressionModel> {
    if refs.len() != m.dim() {
        return Err(Error::input("one reference offset per stream required"));
    }
    let n = predictors.len();
    if n == 0 {
        return Err(Error::NoPredictors { target });
    }
    if m.count() < (n + 2) as f64 {
        return Err(Error::input(format!("{} samples cannot fit {n} predictors", m.count())));
    }
    let scale: Vec<f64> = predictors
        .iter()
        .map(|&p| {
            let s = m.centered(p, p);
            if s > CONSTANT_TOL * m.cross(p, p) {
                s.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let active: Vec<usize> = (0..n).filter(|&a| scale[a] > 0.0).collect();
    let k = active.len();
    let mut b = vec![0.0; n];
    let mut ridge = false;
    if k > 0 {
        let mut g = vec![0.0; k * k];
        let mut rhs = vec![0.0; k];
        for (r, &a) in active.iter().enumerate() {
            rhs[r] = m.centered(predictors[a], target) / scale[a];
            for (c, &bb) in active.iter().enumerate() {
                g[r * k + c] = m.centered(predictors[a], predictors[bb]) / (scale[a] * scale[bb]);
            }
        }
        let mut l = g.clone();
        let ok = mode == SolveMode::Auto && cholesky(&mut l, k);
        if !ok {
            ridge = true;
            let lambda = RIDGE_SCALE * (0..k).map(|i| g[i * k + i]).sum::<f64>() / k as f64;
            l = g;
            for i in 0..k {
                l[i * k + i] += lambda;
            }
            if !cholesky(&mut l, k) {
                return Err(Error::input("regression Gram matrix is not positive semidefinite"));
            }
        }
        let beta = cholesky_solve(&l, k, &rhs);
        for (r, &a) in active.iter().enumerate() {
            b[a] = beta[r] / scale[a];
        }
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("regression produced non-finite coefficients"));
    }
    let cnt = m.count();
    let mut c = m.sum(target) / cnt;
    for (a, &p) in predictors.iter().enumerate() {
        c -= b[a] * m.sum(p) / cnt;
    }
    let b0 = c + refs[target] - predictors.iter().zip(&b).map(|(&p, bk)| bk * refs[p]).sum::<f64>();
    let sse = centered_sse(m, target, predictors, &b);
    let sst = m.centered(target, target);
    let r_squared = if sst > CONSTANT_TOL * m.cross(target, target) {
        1.0 - sse / sst
    } else {
        1.0
    };
    let mut coefficients = Vec::with_capacity(n + 1);
    coefficients.push(b0);
    coefficients.extend(b);
    Ok(RegressionModel {
        kind: ModelKind::Linear,
        target,
        predictors: predictors.to_vec(),
        coefficients,
        window: 1,
        train_sse: sse,
        train_sst: sst,
        r_squared,
        ridge,
    })
}

/// Fit `target` on `predictors` from raw samples. Model positions are
/// `0..n` for the predictors and `n` for the target.
pub fn fit(target: &[f64], predictors: &[&[f64]], window: usize) -> Result<RegressionModel> {
    fit_with(target, predictors, window, SolveMode::Auto)
}

pub fn fit_with(target: &[f64], predictors: &[&[f64]], window: usize, mode: SolveMode) -> Result<RegressionModel> {
    let n = predictors.len();
    if n == 0 {
        return Err(Error::NoPredictors { target: 0 });
    }
    if predictors.iter().any(|p| p.len() != target.len()) {
        return Err(Error::input("predictor and target lengths differ"));
    }
    let mut streams: Vec<&[f64]> = predictors.to_vec();
    streams.push(target);
    let refs: Vec<f64> = streams.iter().map(|s| crate::stats::mean(s)).collect();
    if refs.iter().any(|r| !r.is_finite()) {
        return Err(Error::input("streams must be non-empty and finite"));
    }
    let m = Moments::from_streams(&streams, &refs);
    let idx: Vec<usize> = (0..n).collect();
    let mut model = fit_moments(&m, &refs, n, &idx, mode)?;
    model.window = window;
    Ok(model)
}

/// `x̂ = b_0 + Σ b_k x_k`, elementwise.
pub fn estimate_stream(model: &RegressionModel, predictors: &[&[f64]]) -> Result<Vec<f64>> {
    if predictors.len() != model.predictors.len() {
        return Err(Error::input("predictor count does not match the model"));
    }
    let len = predictors.first().map_or(0, |p| p.len());
    if predictors.iter().any(|p| p.len() != len) {
        return Err(Error::input("predictor streams differ in length"));
    }
    let mut out = vec![model.intercept(); len];
    for (bk, p) in model.slopes().iter().zip(predictors) {
        for (o, x) in out.iter_mut().zip(*p) {
            *o += bk * x;
        }
    }
    Ok(out)
}

/// `1 - ‖x - x̂‖² / ‖x - x̄‖²`, clamped to `[0, 1]`.
pub fn test_reliability(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    if truth.len() != estimate.len() || truth.is_empty() {
        return Err(Error::input("truth and estimate must be equally long and non-empty"));
    }
    let mean = crate::stats::mean(truth);
    let sse: f64 = truth.iter().zip(estimate).map(|(x, e)| (x - e) * (x - e)).sum();
    let sst: f64 = truth.iter().map(|x| (x - mean) * (x - mean)).sum();
    let raw: f64 = truth.iter().map(|x| x * x).sum();
    Ok(reliability_ratio(sse, sst, raw))
}

/// Per-node reliability of a candidate transmitting set.
pub trait Reliability {
    fn node_count(&self) -> usize;

    /// `rlb_i(Y)` in `[0, 1]`; 1 when `i ∈ Y`.
    fn rlb(&self, i: usize, y: &FixedBitSet) -> f64;

    /// Running count of distinct fits computed, for cost accounting.
    fn evaluations(&self) -> usize {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationConfig {
    /// Training window `w`, intervals.
    pub window: usize,
    /// Intervals searched back for the target's own deliveries.
    pub horizon: u64,
    /// Factor applied per stale interval when fewer than `window` deliveries exist.
    pub stale_decay: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            window: 4,
            horizon: 16,
            stale_decay: 0.99,
        }
    }
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 1 {
            return Err(Error::config("training window must be >= 1 interval"));
        }
        if self.horizon < self.window as u64 {
            return Err(Error::config("staleness horizon must be >= the training window"));
        }
        if !(self.stale_decay > 0.0 && self.stale_decay <= 1.0) {
            return Err(Error::config("stale decay must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Best training fit of one target under one transmitting set.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingFit {
    pub model: RegressionModel,
    /// Training intervals used, most recent first.
    pub intervals: Vec<u64>,
    /// `clamp(R², 0, 1)` times the staleness decay.
    pub rlb: f64,
}

/// Fits keyed by target and effective predictor set; `None` marks no usable fit.
type FitCache = HashMap<(usize, FixedBitSet), Option<Arc<TrainingFit>>>;

/// Training-window reliability at interval `t` from the center's history.
///
/// The target's training set is its last `w` deliveries within the horizon.
/// For each `r ≤ w`, predictors are the members of `Y ∩ N_i` that delivered
/// together with the target in all of its `r` most recent training intervals;
/// `rlb_i(Y)` is the best `R²` over `r`. Every term is a least-squares fit on
/// a predictor set that grows with `Y`, so the maximum is monotone in `Y`.
pub struct TrainingReliability<'a> {
    log: &'a ObservationLog,
    cfg: EstimationConfig,
    neighbors: Vec<FixedBitSet>,
    training: Vec<Vec<usize>>,
    decay: Vec<f64>,
    history: Vec<&'a Observation>,
    cache: Mutex<FitCache>,
    evaluations: AtomicUsize,
}

impl<'a> TrainingReliability<'a> {
    /// History is every observation of `log` before interval `t`.
    pub fn new(log: &'a ObservationLog, graph: &CorrelationGraph, t: u64, cfg: EstimationConfig) -> Self {
        let n = log.dim();
        let mut neighbors = Vec::with_capacity(n);
        for i in 0..n {
            let mut b = FixedBitSet::with_capacity(n);
            for j in graph.neighbors(i) {
                b.insert(j);
            }
            neighbors.push(b);
        }
        let from = t.saturating_sub(cfg.horizon);
        let history: Vec<_> = if t == 0 {
            Vec::new()
        } else {
            log.range_rev(from, t - 1).collect()
        };
        let mut training = vec![Vec::new(); n];
        let mut decay = vec![1.0; n];
        for i in 0..n {
            training[i] = (0..history.len())
                .filter(|&k| history[k].delivered.contains(i))
                .take(cfg.window)
                .collect();
            if let Some(&k) = training[i].first() {
                if training[i].len() < cfg.window {
                    let stale = t - 1 - history[k].interval;
                    decay[i] = cfg.stale_decay.powi(stale as i32);
                }
            }
        }
        Self {
            log,
            cfg,
            neighbors,
            training,
            decay,
            history,
            cache: Mutex::new(HashMap::new()),
            evaluations: AtomicUsize::new(0),
        }
    }

    pub fn config(&self) -> &EstimationConfig {
        &self.cfg
    }

    /// True when the target has no usable training history.
    pub fn warm_up(&self, i: usize) -> bool {
        self.training[i].is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &FixedBitSet {
        &self.neighbors[i]
    }

    /// Best training fit of `i` from predictors `Y ∩ N_i`; `None` when there is
    /// no history or no usable predictor.
    pub fn best_fit(&self, i: usize, y: &FixedBitSet) -> Option<Arc<TrainingFit>> {
        let mut key = self.neighbors[i].clone();
        key.intersect_with(y);
        key.set(i, false);
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&(i, key.clone())) {
            return hit.clone();
        }
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let fit = self.compute(i, &key).map(Arc::new);
        self.cache.lock().expect("cache lock").insert((i, key), fit.clone());
        fit
    }

    fn compute(&self, i: usize, candidates: &FixedBitSet) -> Option<TrainingFit> {
        let train = &self.training[i];
        if train.is_empty() || candidates.is_clear() {
            return None;
        }
        // Positions: candidate predictors in ascending order, then the target.
        let mut pos: Vec<usize> = candidates.ones().collect();
        pos.push(i);
        let mut pooled = Moments::zeros(pos.len());
        let mut alive = candidates.clone();
        let mut best: Option<TrainingFit> = None;
        for (r, &k) in train.iter().enumerate() {
            let obs = self.history[k];
            alive.intersect_with(&obs.delivered);
            if alive.is_clear() {
                break;
            }
            pooled.add_selected(&obs.moments, &pos);
            let local: Vec<usize> = (0..pos.len() - 1).filter(|&p| alive.contains(pos[p])).collect();
            let refs: Vec<f64> = pos.iter().map(|&p| self.log.refs()[p]).collect();
            let Ok(mut model) = fit_moments(&pooled, &refs, pos.len() - 1, &local, SolveMode::Auto) else {
                continue;
            };
            let rlb = model.r_squared.clamp(0.0, 1.0) * self.decay[i];
            if best.as_ref().is_none_or(|b| rlb >= b.rlb) {
                model.window = r + 1;
                model.target = i;
                model.predictors = local.iter().map(|&p| pos[p]).collect();
                best = Some(TrainingFit {
                    model,
                    intervals: train[..=r].iter().map(|&k| self.history[k].interval).collect(),
                    rlb,
                });
            }
        }
        best
    }

    /// Test-set reliability of `i` at the interval whose ground-truth moments
    /// are `truth` (all positions, same refs as the log), given the set that
    /// actually delivered. 1 if `i` delivered, 0 without a usable model.
    pub fn test_reliability(&self, i: usize, delivered: &FixedBitSet, truth: &Moments) -> f64 {
        if delivered.contains(i) {
            return 1.0;
        }
        match self.best_fit(i, delivered) {
            Some(fit) => fit.model.reliability_on(truth, self.log.refs()),
            None => 0.0,
        }
    }
}

impl Reliability for TrainingReliability<'_> {
    fn node_count(&self) -> usize {
        self.log.dim()
    }

    fn rlb(&self, i: usize, y: &FixedBitSet) -> f64 {
        if y.contains(i) {
            return 1.0;
        }
        self.best_fit(i, y).map_or(0.0, |f| f.rlb)
    }

    fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }
}

/// JSON record of one fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDump {
    pub node: NodeId,
    pub interval: u64,
    pub predictors: Vec<NodeId>,
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
    pub window: usize,
}

impl ModelDump {
    pub fn new(model: &RegressionModel, ids: &[NodeId], interval: u64) -> Self {
        Self {
            node: ids[model.target],
            interval,
            predictors: model.predictors.iter().map(|&p| ids[p]).collect(),
            coefficients: model.coefficients.clone(),
            r_squared: model.r_squared,
            window: model.window,
        }
    }
}
