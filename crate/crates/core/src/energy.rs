//! Per-node battery queue.
//!
//! Each interval a node pays its in-node cost and, when scheduled, its
//! transmission cost from the stored energy, then banks the harvest:
//! `B' = max(0, B - y·E_tr - E_in) + h`, clipped to `B_max`. Energy above the
//! capacity is wasted. Consumption exceeding the stored energy raises the
//! depletion flag; a scheduled transmission in such an interval is not
//! delivered.
//!
//! Harvest and cost draws come from a per-node random stream that is consumed
//! identically whatever the schedule, so every algorithm sees the same draws.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::ensure_finite;
use crate::trace_gen::FlowProfile;
use crate::{domain, substream, Error, NodeId, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HarvestConfig {
    /// Mean harvest per interval at mean flow, Joules.
    pub mean_j: f64,
    /// Node scale factors are uniform on `[1 - spread, 1 + spread]`.
    pub node_spread: f64,
    /// Share of the harvest that follows the flow: `1 - c + c·q/q_base`.
    /// 1 makes the harvest proportional to flow; 0 makes it flow-independent.
    pub flow_coupling: f64,
    /// Relative per-interval noise.
    pub noise_rel_std: f64,
    /// Generator limit per interval, Joules (0.7 W over 15 minutes).
    pub cap_j: f64,
}

impl Default for HarvestConfig {
    fn default() -> Self {
        Self {
            mean_j: 36.0,
            node_spread: 0.1,
            flow_coupling: 0.4,
            noise_rel_std: 0.1,
            cap_j: 630.0,
        }
    }
}

/// How the transmission cost depends on the payload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransmitCost {
    /// The drawn cost, independent of payload size.
    Fixed,
    /// The drawn cost scaled by `(1 - rate) / (1 - reference_rate)`, capped at `E_max`.
    BySize { reference_rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnergyConfig {
    pub b_max: f64,
    pub b_init: f64,
    pub e_in_mean: f64,
    pub e_tr_mean: f64,
    /// Standard deviation of both costs relative to their means.
    pub cost_rel_std: f64,
    /// Upper bound of every cost draw.
    pub e_max: f64,
    pub harvest: HarvestConfig,
    pub transmit_cost: TransmitCost,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            b_max: 500.0,
            b_init: 250.0,
            e_in_mean: 6.0,
            e_tr_mean: 30.0,
            cost_rel_std: 0.1,
            e_max: 45.0,
            harvest: HarvestConfig::default(),
            transmit_cost: TransmitCost::Fixed,
        }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("b_max", self.b_max),
            ("b_init", self.b_init),
            ("e_in_mean", self.e_in_mean),
            ("e_tr_mean", self.e_tr_mean),
            ("cost_rel_std", self.cost_rel_std),
            ("e_max", self.e_max),
            ("harvest.mean_j", self.harvest.mean_j),
            ("harvest.node_spread", self.harvest.node_spread),
            ("harvest.flow_coupling", self.harvest.flow_coupling),
            ("harvest.noise_rel_std", self.harvest.noise_rel_std),
            ("harvest.cap_j", self.harvest.cap_j),
        ] {
            ensure_finite(name, v).map_err(|e| Error::config(e.to_string()))?;
        }
        if !(self.b_max > 0.0) {
            return Err(Error::config("b_max must be > 0"));
        }
        if !(0.0..=self.b_max).contains(&self.b_init) {
            return Err(Error::config("b_init must lie in [0, b_max]"));
        }
        if !(self.e_tr_mean > 0.0 && self.e_tr_mean <= self.e_max) {
            return Err(Error::config("e_tr_mean must lie in (0, e_max]"));
        }
        if !(self.e_in_mean > 0.0 && self.e_in_mean <= self.e_max) {
            return Err(Error::config("e_in_mean must lie in (0, e_max]"));
        }
        if self.cost_rel_std < 0.0 || self.harvest.noise_rel_std < 0.0 {
            return Err(Error::config("relative standard deviations must be >= 0"));
        }
        if !(0.0..1.0).contains(&self.harvest.node_spread) {
            return Err(Error::config("harvest.node_spread must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.harvest.flow_coupling) {
            return Err(Error::config("harvest.flow_coupling must lie in [0, 1]"));
        }
        if self.harvest.mean_j < 0.0 || self.harvest.cap_j < 0.0 {
            return Err(Error::config("harvest mean and cap must be >= 0"));
        }
        if let TransmitCost::BySize { reference_rate } = self.transmit_cost {
            if !(0.0..1.0).contains(&reference_rate) {
                return Err(Error::config("reference_rate must lie in [0, 1)"));
            }
        }
        Ok(())
    }

    /// Transmission cost for a payload compressed at `rate`.
    pub fn transmit_cost(&self, drawn: f64, rate: f64) -> f64 {
        match self.transmit_cost {
            TransmitCost::Fixed => drawn,
            TransmitCost::BySize { reference_rate } => {
                (drawn * (1.0 - rate) / (1.0 - reference_rate)).clamp(f64::MIN_POSITIVE, self.e_max)
            }
        }
    }
}

/// Normal draw truncated to `(0, upper]` by rejection.
fn truncated_normal(rng: &mut ChaCha8Rng, mean: f64, std: f64, upper: f64) -> f64 {
    if std == 0.0 {
        return mean.min(upper);
    }
    let dist = Normal::new(mean, std).expect("std > 0");
    loop {
        let x = dist.sample(rng);
        if x > 0.0 && x <= upper {
            return x;
        }
    }
}

/// One interval's random inputs for one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyDraw {
    pub h: f64,
    pub e_tr: f64,
    pub e_in: f64,
}

/// Deterministic per-node source of harvest and cost draws.
pub struct EnergyDraws {
    rng: ChaCha8Rng,
    factor: f64,
    cfg: EnergyConfig,
    profile: FlowProfile,
    interval_length_s: f64,
    next: u64,
}

impl EnergyDraws {
    pub fn new(cfg: &EnergyConfig, profile: &FlowProfile, interval_length_s: f64, node: NodeId, seed: u64) -> Self {
        let mut rng = substream(seed, domain::ENERGY, node.0 as u64);
        let s = cfg.harvest.node_spread;
        let factor = if s > 0.0 {
            rng.random_range(1.0 - s..=1.0 + s)
        } else {
            1.0
        };
        Self {
            rng,
            factor,
            cfg: cfg.clone(),
            profile: profile.clone(),
            interval_length_s,
            next: 0,
        }
    }

    pub fn node_factor(&self) -> f64 {
        self.factor
    }

    fn harvest(&mut self, t: u64) -> f64 {
        let hc = &self.cfg.harvest;
        let noise = if hc.noise_rel_std > 0.0 {
            let z: f64 = self.rng.sample(rand_distr::StandardNormal);
            (1.0 + hc.noise_rel_std * z).max(0.0)
        } else {
            1.0
        };
        let base = self.profile.base_flow;
        if base <= 0.0 {
            return 0.0;
        }
        let q = self.profile.interval_flow(t, self.interval_length_s);
        let c = hc.flow_coupling;
        (hc.mean_j * self.factor * (1.0 - c + c * q / base) * noise).min(hc.cap_j)
    }
}

impl Iterator for EnergyDraws {
    type Item = EnergyDraw;

    fn next(&mut self) -> Option<EnergyDraw> {
        let t = self.next;
        self.next += 1;
        let h = self.harvest(t);
        let c = &self.cfg;
        let e_tr = truncated_normal(&mut self.rng, c.e_tr_mean, c.cost_rel_std * c.e_tr_mean, c.e_max);
        let e_in = truncated_normal(&mut self.rng, c.e_in_mean, c.cost_rel_std * c.e_in_mean, c.e_max);
        Some(EnergyDraw { h, e_tr, e_in })
    }
}

/// Harvested Joules per interval for one node.
pub fn harvest_series(
    profile: &FlowProfile,
    cfg: &EnergyConfig,
    node: NodeId,
    duration: u64,
    interval_length_s: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if duration < 1 {
        return Err(Error::input("duration must be >= 1"));
    }
    cfg.validate()?;
    Ok(EnergyDraws::new(cfg, profile, interval_length_s, node, seed)
        .take(duration as usize)
        .map(|d| d.h)
        .collect())
}

/// Record of one battery update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyStep {
    pub b_before: f64,
    pub b_after: f64,
    pub h: f64,
    pub e_tr: f64,
    pub e_in: f64,
    pub y: bool,
    pub wasted: f64,
    pub shortfall: f64,
    pub depleted: bool,
}

impl EnergyStep {
    /// Gap: scheduled to transmit but the battery could not pay.
    pub fn gap(&self) -> bool {
        self.y && self.depleted
    }

    /// Residual of `B' - B = h - (y·E_tr + E_in) - wasted + shortfall`.
    pub fn conservation_residual(&self) -> f64 {
        let spent = if self.y { self.e_tr } else { 0.0 } + self.e_in;
        (self.b_after - self.b_before) - (self.h - spent - self.wasted + self.shortfall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEnergyState {
    pub node_id: NodeId,
    pub b: f64,
    pub b_max: f64,
    pub history: Vec<EnergyStep>,
    pub total_wasted: f64,
}

impl NodeEnergyState {
    pub fn new(node_id: NodeId, b_init: f64, b_max: f64) -> Result<Self> {
        if !(b_max > 0.0 && b_max.is_finite()) || !(0.0..=b_max).contains(&b_init) {
            return Err(Error::input("battery must satisfy 0 <= b_init <= b_max, b_max > 0"));
        }
        Ok(Self {
            node_id,
            b: b_init,
            b_max,
            history: Vec::new(),
            total_wasted: 0.0,
        })
    }

    /// Apply one interval and return its record.
    pub fn step(&mut self, y: bool, e_tr: f64, e_in: f64, h: f64) -> Result<EnergyStep> {
        for (name, v) in [("E_tr", e_tr), ("E_in", e_in), ("h", h)] {
            ensure_finite(name, v)?;
            if v < 0.0 {
                return Err(Error::input(format!("{name} must be >= 0, got {v}")));
            }
        }
        let spent = if y { e_tr } else { 0.0 } + e_in;
        let rest = self.b - spent;
        let (kept, shortfall) = if rest < 0.0 { (0.0, -rest) } else { (rest, 0.0) };
        let filled = kept + h;
        let wasted = (filled - self.b_max).max(0.0);
        let b_after = filled.min(self.b_max);
        let step = EnergyStep {
            b_before: self.b,
            b_after,
            h,
            e_tr,
            e_in,
            y,
            wasted,
            shortfall,
            depleted: rest < 0.0,
        };
        self.b = b_after;
        self.total_wasted += wasted;
        self.history.push(step);
        Ok(step)
    }
}
