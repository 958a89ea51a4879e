//! Per-interval transmission decision `Y(t)`.
//!
//! The per-slot objective is `Σ_i [V·U(rlb_i(Y)) + β_i·y_i]` with
//! `β_i = E_tr_i·(B_i - B_exp)`, subject to `rlb_i(Y) ≥ rlb_min` for every node.
//! `β_i > 0` when the battery is above `B_exp`, which makes transmitting
//! attractive for charged nodes and costly for drained ones.
//!
//! [`dts_exact`] enumerates every subset of the schedulable set, [`fast_dts`]
//! is the linear-time greedy rule, and [`baseline`] covers RG, EGm and RRm.
//! All iteration is in ascending node order so decisions are reproducible.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::correlation::SchedulePartition;
use crate::estimation::Reliability;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Algorithm {
    DtsExact,
    FastDts,
    Rg,
    Eg(usize),
    Rr(usize),
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::DtsExact => write!(f, "DTS"),
            Algorithm::FastDts => write!(f, "FDTS"),
            Algorithm::Rg => write!(f, "RG"),
            Algorithm::Eg(m) => write!(f, "EG{m}"),
            Algorithm::Rr(m) => write!(f, "RR{m}"),
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let u = s.trim().to_ascii_uppercase().replace('-', "_");
        let parse_m = |rest: &str| {
            rest.parse::<usize>()
                .map_err(|_| Error::config(format!("algorithm {s:?}: expected a node count after the prefix")))
        };
        match u.as_str() {
            "DTS" | "DTS_EXACT" => Ok(Algorithm::DtsExact),
            "FDTS" | "FAST_DTS" => Ok(Algorithm::FastDts),
            "RG" => Ok(Algorithm::Rg),
            _ if u.starts_with("EG") => Ok(Algorithm::Eg(parse_m(&u[2..])?)),
            _ if u.starts_with("RR") => Ok(Algorithm::Rr(parse_m(&u[2..])?)),
            _ => Err(Error::config(format!("unknown algorithm {s:?}"))),
        }
    }
}

impl TryFrom<String> for Algorithm {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> Self {
        a.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilityKind {
    /// `ln(rlb + ε)`.
    LogPropFair {
        epsilon: f64,
    },
    Linear,
}

impl Default for UtilityKind {
    fn default() -> Self {
        UtilityKind::LogPropFair { epsilon: 0.01 }
    }
}

pub fn utility(rlb: f64, kind: UtilityKind) -> f64 {
    match kind {
        UtilityKind::LogPropFair { epsilon } => (rlb + epsilon).ln(),
        UtilityKind::Linear => rlb,
    }
}

/// `V_threshold = Σ_i (U(1) - U(0)) / (E_max · B_exp)` over `nodes` identical utilities.
pub fn v_threshold(kind: UtilityKind, nodes: usize, e_max: f64, b_exp: f64) -> f64 {
    nodes as f64 * (utility(1.0, kind) - utility(0.0, kind)) / (e_max * b_exp)
}

/// `β_i = E_tr_i · (B_i - B_exp)`.
pub fn beta(e_tr: f64, battery: f64, b_exp: f64) -> f64 {
    e_tr * (battery - b_exp)
}

/// `L(t) = ½ Σ (B_i - B_exp)²`.
pub fn lyapunov(batteries: &[f64], b_exp: f64) -> f64 {
    0.5 * batteries.iter().map(|b| (b - b_exp) * (b - b_exp)).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchedulerConfig {
    pub algorithm: Algorithm,
    /// Drift-plus-penalty weight for exact DTS; `None` uses `V_threshold`.
    pub v: Option<f64>,
    pub b_exp: f64,
    pub rlb_min: f64,
    pub utility: UtilityKind,
    pub exact_size_limit: usize,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::FastDts,
            v: None,
            b_exp: 150.0,
            rlb_min: 0.98,
            utility: UtilityKind::default(),
            exact_size_limit: 20,
        }
    }
}

impl SchedulerConfig {
    pub fn validate(&self, b_max: f64, nodes: usize) -> Result<()> {
        if !(self.b_exp > 0.0 && self.b_exp < b_max) {
            return Err(Error::config(format!(
                "B_exp must lie in (0, B_max = {b_max}), got {}",
                self.b_exp
            )));
        }
        if !(0.0..=1.0).contains(&self.rlb_min) {
            return Err(Error::config("rlb_min must lie in [0, 1]"));
        }
        if let UtilityKind::LogPropFair { epsilon } = self.utility {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(Error::config("log utility epsilon must be > 0"));
            }
        }
        if let Some(v) = self.v {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config("V must be finite and >= 0"));
            }
        }
        if let Algorithm::Eg(m) | Algorithm::Rr(m) = self.algorithm {
            if m < 1 || m > nodes {
                return Err(Error::config(format!("{}: m must lie in [1, {nodes}]", self.algorithm)));
            }
        }
        Ok(())
    }

    /// `V` used by exact DTS for a network of `nodes`.
    pub fn v_for(&self, nodes: usize, e_max: f64) -> f64 {
        self.v
            .unwrap_or_else(|| v_threshold(self.utility, nodes, e_max, self.b_exp))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Enforced,
    BatteryRule,
    ReliabilityRescue,
    BaselinePick,
    /// Exact DTS only: a node at or below `B_exp` chosen because it raised the
    /// objective although every constraint held without it.
    ObjectiveGain,
}

/// Battery level and this interval's transmission cost of one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub battery: f64,
    pub e_tr: f64,
}

/// Everything a solver sees for one interval.
pub struct SlotInput<'a> {
    pub interval: u64,
    pub partition: &'a SchedulePartition,
    pub states: &'a [NodeState],
    pub reliability: &'a dyn Reliability,
    pub e_max: f64,
}

impl SlotInput<'_> {
    fn n(&self) -> usize {
        self.states.len()
    }

    fn base_set(&self) -> FixedBitSet {
        let mut y = FixedBitSet::with_capacity(self.n());
        for e in &self.partition.enforced {
            y.insert(e.node);
        }
        y
    }

    fn battery_above(&self, i: usize, b_exp: f64) -> bool {
        self.states[i].battery > b_exp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDecision {
    pub interval: u64,
    pub algorithm: Algorithm,
    /// Transmitting nodes, ascending.
    pub selected: Vec<usize>,
    pub provenance: BTreeMap<usize, Provenance>,
    /// Per-slot objective of `selected` (DTS and FAST-DTS).
    pub objective: Option<f64>,
    /// Some node's reliability constraint is violated.
    pub infeasible: bool,
    /// Distinct reliability fits requested while deciding.
    pub rlb_evaluations: usize,
}

impl ScheduleDecision {
    pub fn contains(&self, i: usize) -> bool {
        self.selected.binary_search(&i).is_ok()
    }

    pub fn to_bitset(&self, n: usize) -> FixedBitSet {
        let mut y = FixedBitSet::with_capacity(n);
        for &i in &self.selected {
            y.insert(i);
        }
        y
    }
}

/// `Σ_i [V·U(rlb_i(Y)) + β_i·y_i]`.
pub fn objective(input: &SlotInput, y: &FixedBitSet, cfg: &SchedulerConfig, v: f64) -> f64 {
    (0..input.n())
        .map(|i| {
            let u = v * utility(input.reliability.rlb(i, y), cfg.utility);
            let s = input.states[i];
            if y.contains(i) {
                u + beta(s.e_tr, s.battery, cfg.b_exp)
            } else {
                u
            }
        })
        .sum()
}

/// Smallest `rlb_i(Y)` over all nodes (1 for members of `Y`).
pub fn min_reliability(input: &SlotInput, y: &FixedBitSet) -> f64 {
    (0..input.n())
        .filter(|&i| !y.contains(i))
        .map(|i| input.reliability.rlb(i, y))
        .fold(1.0, f64::min)
}

fn feasible(input: &SlotInput, y: &FixedBitSet, rlb_min: f64) -> bool {
    (0..input.n())
        .filter(|&i| !y.contains(i))
        .all(|i| input.reliability.rlb(i, y) >= rlb_min)
}

fn finish(
    input: &SlotInput,
    algorithm: Algorithm,
    y: &FixedBitSet,
    provenance: BTreeMap<usize, Provenance>,
) -> ScheduleDecision {
    ScheduleDecision {
        interval: input.interval,
        algorithm,
        selected: y.ones().collect(),
        provenance,
        objective: None,
        infeasible: false,
        rlb_evaluations: 0,
    }
}

fn ties_prefer(a: &FixedBitSet, b: &FixedBitSet) -> bool {
    let (ca, cb) = (a.count_ones(..), b.count_ones(..));
    if ca != cb {
        return ca < cb;
    }
    a.ones().lt(b.ones())
}

fn near_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Exhaustive DTS over all subsets of the schedulable set.
///
/// Among feasible maximizers ties go to fewer transmitters, then the
/// lexicographically smallest node set. With no feasible subset the one
/// maximizing the minimum reliability is returned and flagged.
pub fn dts_exact(input: &SlotInput, cfg: &SchedulerConfig) -> Result<ScheduleDecision> {
    let sb = &input.partition.schedulable;
    if sb.len() > cfg.exact_size_limit {
        return Err(Error::ExactLimitExceeded {
            size: sb.len(),
            limit: cfg.exact_size_limit,
        });
    }
    let start = input.reliability.evaluations();
    let v = cfg.v_for(input.n(), input.e_max);
    let base = input.base_set();
    let mut best: Option<(f64, FixedBitSet)> = None;
    let mut fallback: Option<(f64, FixedBitSet)> = None;
    for mask in 0u64..(1u64 << sb.len()) {
        let mut y = base.clone();
        for (k, &i) in sb.iter().enumerate() {
            if mask >> k & 1 == 1 {
                y.insert(i);
            }
        }
        if feasible(input, &y, cfg.rlb_min) {
            let obj = objective(input, &y, cfg, v);
            let better = match &best {
                None => true,
                Some((bo, by)) => obj > *bo && !near_equal(obj, *bo) || near_equal(obj, *bo) && ties_prefer(&y, by),
            };
            if better {
                best = Some((obj, y));
            }
        } else if best.is_none() {
            let m = min_reliability(input, &y);
            let better = match &fallback {
                None => true,
                Some((bm, by)) => m > *bm || m == *bm && ties_prefer(&y, by),
            };
            if better {
                fallback = Some((m, y));
            }
        }
    }
    let (y, infeasible) = match (best, fallback) {
        (Some((_, y)), _) => (y, false),
        (None, Some((_, y))) => (y, true),
        (None, None) => unreachable!("at least one subset is enumerated"),
    };
    let mut prov = BTreeMap::new();
    for i in y.ones() {
        let p = if input.partition.is_enforced(i) {
            Provenance::Enforced
        } else if input.battery_above(i, cfg.b_exp) {
            Provenance::BatteryRule
        } else {
            let mut without = y.clone();
            without.set(i, false);
            if feasible(input, &without, cfg.rlb_min) {
                Provenance::ObjectiveGain
            } else {
                Provenance::ReliabilityRescue
            }
        };
        prov.insert(i, p);
    }
    let mut d = finish(input, Algorithm::DtsExact, &y, prov);
    d.objective = Some(objective(input, &y, cfg, v));
    d.infeasible = infeasible;
    d.rlb_evaluations = input.reliability.evaluations() - start;
    Ok(d)
}

/// FAST-DTS: enforced nodes, then every schedulable node above `B_exp`, then
/// one ascending pass adding any node whose reliability against the growing
/// set is below `rlb_min`.
pub fn fast_dts(input: &SlotInput, cfg: &SchedulerConfig) -> ScheduleDecision {
    let start = input.reliability.evaluations();
    let mut y = input.base_set();
    let mut prov: BTreeMap<usize, Provenance> = y.ones().map(|i| (i, Provenance::Enforced)).collect();
    for &i in &input.partition.schedulable {
        if input.battery_above(i, cfg.b_exp) {
            y.insert(i);
            prov.insert(i, Provenance::BatteryRule);
        }
    }
    for &i in &input.partition.schedulable {
        if !y.contains(i) && input.reliability.rlb(i, &y) < cfg.rlb_min {
            y.insert(i);
            prov.insert(i, Provenance::ReliabilityRescue);
        }
    }
    let mut d = finish(input, Algorithm::FastDts, &y, prov);
    d.infeasible = !feasible(input, &y, cfg.rlb_min);
    d.objective = Some(objective(input, &y, cfg, cfg.v_for(input.n(), input.e_max)));
    d.rlb_evaluations = input.reliability.evaluations() - start;
    d
}

/// RG, EGm or RRm, always joined with the enforced set.
pub fn baseline(algorithm: Algorithm, input: &SlotInput) -> Result<ScheduleDecision> {
    let n = input.n();
    let mut y = input.base_set();
    let mut prov: BTreeMap<usize, Provenance> = y.ones().map(|i| (i, Provenance::Enforced)).collect();
    let picks: Vec<usize> = match algorithm {
        Algorithm::Rg => (0..n).collect(),
        Algorithm::Eg(m) | Algorithm::Rr(m) if m < 1 || m > n => {
            return Err(Error::config(format!("{algorithm}: m must lie in [1, {n}]")));
        }
        Algorithm::Eg(m) => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                input.states[b]
                    .battery
                    .total_cmp(&input.states[a].battery)
                    .then(a.cmp(&b))
            });
            order.truncate(m);
            order
        }
        Algorithm::Rr(m) => {
            let start = (input.interval as u128 * m as u128 % n as u128) as usize;
            (0..m).map(|k| (start + k) % n).collect()
        }
        Algorithm::DtsExact | Algorithm::FastDts => {
            return Err(Error::input(format!("{algorithm} is not a baseline")));
        }
    };
    for i in picks {
        if !y.contains(i) {
            y.insert(i);
            prov.insert(i, Provenance::BaselinePick);
        }
    }
    Ok(finish(input, algorithm, &y, prov))
}

/// Dispatch on `cfg.algorithm`.
pub fn schedule(input: &SlotInput, cfg: &SchedulerConfig) -> Result<ScheduleDecision> {
    match cfg.algorithm {
        Algorithm::DtsExact => dts_exact(input, cfg),
        Algorithm::FastDts => Ok(fast_dts(input, cfg)),
        a => baseline(a, input),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::{EnforceReason, EnforcedNode};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Reliability from a fixed table: node `i` is covered by `k` members of `Y`
    /// with rlb `table[i][min(k, len - 1)]`; monotone if each row is non-decreasing.
    struct Table {
        rows: Vec<Vec<f64>>,
        neighbors: Vec<Vec<usize>>,
    }

    impl Reliability for Table {
        fn node_count(&self) -> usize {
            self.rows.len()
        }

        fn rlb(&self, i: usize, y: &FixedBitSet) -> f64 {
            if y.contains(i) {
                return 1.0;
            }
            let k = self.neighbors[i].iter().filter(|&&j| y.contains(j)).count();
            let row = &self.rows[i];
            row[k.min(row.len() - 1)]
        }
    }

    fn complete(n: usize, rows: Vec<Vec<f64>>) -> Table {
        Table {
            neighbors: (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect(),
            rows,
        }
    }

    fn part(n: usize, enforced: &[usize]) -> SchedulePartition {
        SchedulePartition {
            enforced: enforced
                .iter()
                .map(|&i| EnforcedNode {
                    node: i,
                    reasons: vec![EnforceReason::CounterOutlier],
                })
                .collect(),
            schedulable: (0..n).filter(|i| !enforced.contains(i)).collect(),
        }
    }

    #[test]
    fn utility_examples() {
        let log = UtilityKind::default();
        assert_eq!(utility(1.0, UtilityKind::Linear), 1.0);
        assert_relative_eq!(utility(0.0, log), 0.01f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(utility(0.0, log), -4.605170185988091, epsilon = 1e-12);
        let gain = utility(1.0, log) - utility(0.0, log);
        assert_relative_eq!(gain, 1.01f64.ln() - 0.01f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(gain, 4.61512051684126, epsilon = 1e-12);
    }

    #[test]
    fn v_threshold_examples() {
        assert_relative_eq!(
            v_threshold(UtilityKind::Linear, 7, 45.0, 150.0),
            7.0 / 6750.0,
            epsilon = 1e-18
        );
        let gain = 101f64.ln();
        assert_relative_eq!(
            v_threshold(UtilityKind::default(), 7, 45.0, 150.0),
            7.0 * gain / 6750.0,
            epsilon = 1e-15
        );
        assert!(v_threshold(UtilityKind::Linear, 7, 45.0, 300.0) < v_threshold(UtilityKind::Linear, 7, 45.0, 150.0));
    }

    #[test]
    fn lyapunov_examples() {
        assert_eq!(lyapunov(&[150.0, 150.0], 150.0), 0.0);
        assert_eq!(lyapunov(&[250.0], 150.0), 5000.0);
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in [
            Algorithm::DtsExact,
            Algorithm::FastDts,
            Algorithm::Rg,
            Algorithm::Eg(3),
            Algorithm::Rr(70),
        ] {
            assert_eq!(a.to_string().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("fast_dts".parse::<Algorithm>().unwrap(), Algorithm::FastDts);
        assert_eq!("DTS_EXACT".parse::<Algorithm>().unwrap(), Algorithm::DtsExact);
        assert!("EGx".parse::<Algorithm>().is_err());
        assert!("XYZ".parse::<Algorithm>().unwrap_err().is_config());
    }

    #[test]
    fn config_validation() {
        let c = SchedulerConfig::default();
        assert!(c.validate(500.0, 7).is_ok());
        assert!(SchedulerConfig { b_exp: 500.0, ..c }.validate(500.0, 7).is_err());
        assert!(SchedulerConfig { rlb_min: 1.2, ..c }.validate(500.0, 7).is_err());
        assert!(SchedulerConfig {
            algorithm: Algorithm::Eg(8),
            ..c
        }
        .validate(500.0, 7)
        .is_err());
        let bad = SchedulerConfig {
            utility: UtilityKind::LogPropFair { epsilon: 0.0 },
            ..c
        };
        assert!(bad.validate(500.0, 7).is_err());
    }

    #[test]
    fn empty_schedulable_set_returns_enforced() {
        let rel = complete(2, vec![vec![0.0, 1.0]; 2]);
        let p = part(2, &[0, 1]);
        let states = [NodeState {
            battery: 10.0,
            e_tr: 30.0,
        }; 2];
        let input = SlotInput {
            interval: 0,
            partition: &p,
            states: &states,
            reliability: &rel,
            e_max: 45.0,
        };
        let d = dts_exact(&input, &SchedulerConfig::default()).unwrap();
        assert_eq!(d.selected, vec![0, 1]);
        assert!(d.provenance.values().all(|p| *p == Provenance::Enforced));
    }

    #[test]
    fn two_charged_nodes_both_transmit() {
        // Subsets {}, {0}, {1}, {0,1}: every node already has rlb 1 and β > 0,
        // so each added node raises the objective by its β.
        let rel = complete(2, vec![vec![1.0, 1.0]; 2]);
        let p = part(2, &[]);
        let states = [NodeState {
            battery: 300.0,
            e_tr: 30.0,
        }; 2];
        let input = SlotInput {
            interval: 0,
            partition: &p,
            states: &states,
            reliability: &rel,
            e_max: 45.0,
        };
        let cfg = SchedulerConfig {
            rlb_min: 0.0,
            ..SchedulerConfig::default()
        };
        let d = dts_exact(&input, &cfg).unwrap();
        assert_eq!(d.selected, vec![0, 1]);
        assert_eq!(fast_dts(&input, &cfg).selected, vec![0, 1]);
    }

    #[test]
    fn drained_nodes_stay_off_unless_rescued() {
        let rel = complete(3, vec![vec![0.5, 0.99, 0.99]; 3]);
        let p = part(3, &[]);
        let states = [NodeState {
            battery: 100.0,
            e_tr: 30.0,
        }; 3];
        let input = SlotInput {
            interval: 0,
            partition: &p,
            states: &states,
            reliability: &rel,
            e_max: 45.0,
        };
        let cfg = SchedulerConfig::default();
        let d = fast_dts(&input, &cfg);
        // Node 0 is rescued (nobody on), then everyone else sees one transmitter.
        assert_eq!(d.selected, vec![0]);
        assert_eq!(d.provenance[&0], Provenance::ReliabilityRescue);
        assert!(!d.infeasible);
        let e = dts_exact(&input, &cfg).unwrap();
        assert_eq!(e.selected.len(), 1);
        assert!(e.objective.unwrap() >= d.objective.unwrap() - 1e-12);
    }

    #[test]
    fn all_above_b_exp_behaves_like_rg() {
        let rel = complete(4, vec![vec![0.0, 0.5, 0.9, 0.99]; 4]);
        let p = part(4, &[]);
        let states = [NodeState {
            battery: 400.0,
            e_tr: 30.0,
        }; 4];
        let input = SlotInput {
            interval: 0,
            partition: &p,
            states: &states,
            reliability: &rel,
            e_max: 45.0,
        };
        assert_eq!(fast_dts(&input, &SchedulerConfig::default()).selected, vec![0, 1, 2, 3]);
    }

    #[test]
    fn exact_limit_is_enforced() {
        let rel = complete(3, vec![vec![1.0]; 3]);
        let p = part(3, &[]);
        let states = [NodeState {
            battery: 100.0,
            e_tr: 30.0,
        }; 3];
        let input = SlotInput {
            interval: 0,
            partition: &p,
            states: &states,
            reliability: &rel,
            e_max: 45.0,
        };
        let cfg = SchedulerConfig {
            exact_size_limit: 2,
            ..SchedulerConfig::default()
        };
        let err = dts_exact(&input, &cfg).unwrap_err();
        assert!(matches!(err, Error::ExactLimitExceeded { size: 3, limit: 2 }));
        assert!(err.to_string().contains("FAST_DTS"));
    }

    #[test]
    fn infeasible_instances_fall_back_to_max_min() {
        // A node without neighbours can never be estimated, but it is schedulable
        // here only to exercise the fallback path: transmitting it gives rlb 1.
        let rel = Table {
            rows: vec![vec![0.0]; 2],
            neighbors: vec![vec![], vec![]],
        };
        let p = part(2, &[]);
        let states = [NodeState {
            battery: 100.0,
            e_tr: 30.0,
        }; 2];
        let input = SlotInput {
            interval: 0,
            partition: &p,
            states: &states,
            reliability: &rel,
            e_max: 45.0,
        };
        let cfg = SchedulerConfig {
            rlb_min: 1.0,
            ..SchedulerConfig::default()
        };
        let d = dts_exact(&input, &cfg).unwrap();
        assert_eq!(d.selected, vec![0, 1]);
        assert!(!d.infeasible);
    }

    #[test]
    fn baselines() {
        let rel = complete(7, vec![vec![1.0]; 7]);
        let p = part(7, &[]);
        let states: Vec<NodeState> = [50.0, 400.0, 300.0, 300.0, 10.0, 200.0, 450.0]
            .iter()
            .map(|&b| NodeState { battery: b, e_tr: 30.0 })
            .collect();
        let mut input = SlotInput {
            interval: 0,
            partition: &p,
            states: &states,
            reliability: &rel,
            e_max: 45.0,
        };
        assert_eq!(baseline(Algorithm::Rg, &input).unwrap().selected.len(), 7);
        assert_eq!(baseline(Algorithm::Eg(3), &input).unwrap().selected, vec![1, 2, 6]);
        // Equal levels 2 and 3: the lower index wins the last slot.
        assert_eq!(baseline(Algorithm::Eg(4), &input).unwrap().selected, vec![1, 2, 3, 6]);
        assert_eq!(baseline(Algorithm::Rr(3), &input).unwrap().selected, vec![0, 1, 2]);
        input.interval = 1;
        assert_eq!(baseline(Algorithm::Rr(3), &input).unwrap().selected, vec![3, 4, 5]);
        input.interval = 2;
        assert_eq!(baseline(Algorithm::Rr(3), &input).unwrap().selected, vec![0, 1, 6]);
        assert!(baseline(Algorithm::Eg(0), &input).is_err());
        let p2 = part(7, &[4]);
        input.partition = &p2;
        let d = baseline(Algorithm::Eg(3), &input).unwrap();
        assert_eq!(d.selected, vec![1, 2, 4, 6]);
        assert_eq!(d.provenance[&4], Provenance::Enforced);
    }

    /// `(n, rlb table, batteries, e_tr, enforced mask, rlb_min)`.
    type Instance = (usize, Vec<Vec<f64>>, Vec<f64>, Vec<f64>, u32, f64);

    fn instance() -> impl Strategy<Value = Instance> {
        (2usize..=7).prop_flat_map(|n| {
            (
                Just(n),
                proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, n), n),
                proptest::collection::vec(0.0f64..500.0, n),
                proptest::collection::vec(1.0f64..45.0, n),
                0u32..(1 << n),
                0.5f64..1.0,
            )
        })
    }

    proptest! {
        #[test]
        fn exact_dominates_fast(inst in instance()) {
            let (n, raw, batteries, costs, enforced_mask, rlb_min) = inst;
            let rows: Vec<Vec<f64>> = raw
                .into_iter()
                .map(|mut r| {
                    r.sort_by(f64::total_cmp);
                    r
                })
                .collect();
            let rel = complete(n, rows);
            let enforced: Vec<usize> = (0..n).filter(|i| enforced_mask >> i & 1 == 1).collect();
            let p = part(n, &enforced);
            let states: Vec<NodeState> = batteries.iter().zip(&costs).map(|(&b, &e)| NodeState { battery: b, e_tr: e }).collect();
            let input = SlotInput { interval: 3, partition: &p, states: &states, reliability: &rel, e_max: 45.0 };
            let cfg = SchedulerConfig { rlb_min, ..SchedulerConfig::default() };
            let f = fast_dts(&input, &cfg);
            let e = dts_exact(&input, &cfg).unwrap();
            prop_assert!(!f.infeasible);
            prop_assert!(!e.infeasible);
            prop_assert!(e.objective.unwrap() >= f.objective.unwrap() - 1e-9);
            for i in &enforced {
                prop_assert!(f.contains(*i) && e.contains(*i));
            }
            for (&i, &pv) in &f.provenance {
                if states[i].battery < cfg.b_exp {
                    prop_assert!(matches!(pv, Provenance::Enforced | Provenance::ReliabilityRescue));
                }
            }
        }
    }
}
