//! Run configuration, loaded from TOML and validated as a whole.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sweep::SweepGrid;
use crate::anomaly::{DetectorConfig, KalmanConfig};
use crate::compression::Quantizer;
use crate::correlation::{ChauvenetConfig, LINK_THRESHOLD};
use crate::energy::EnergyConfig;
use crate::estimation::EstimationConfig;
use crate::scheduler::{Algorithm, SchedulerConfig};
use crate::trace_gen::{
    expand_topology, AnomalyEvent, AnomalyShape, EventLocation, FlowProfile, NetworkTopology, PipeSegment,
    SamplingConfig, VirtualNodePlan,
};
use crate::{Error, NodeId, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    /// Seven-node tree fed from node 1.
    #[default]
    CaseStudy,
    /// 24-node meshed network; combine with `virtual_nodes` for 80 nodes.
    ScalabilityBase,
    /// `chain.nodes` nodes in a line.
    Chain,
    /// The network given in `custom`.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainSpec {
    pub nodes: u32,
    pub length_m: f64,
    pub diameter_m: f64,
    pub friction_factor: f64,
    pub wave_speed_mps: f64,
}

impl Default for ChainSpec {
    fn default() -> Self {
        Self {
            nodes: 3,
            length_m: 600.0,
            diameter_m: 0.3,
            friction_factor: 0.02,
            wave_speed_mps: 1100.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopologyConfig {
    pub kind: TopologyKind,
    pub chain: ChainSpec,
    pub custom: Option<NetworkTopology>,
    pub virtual_nodes: Option<VirtualNodePlan>,
}

impl TopologyConfig {
    pub fn build(&self) -> Result<NetworkTopology> {
        let base = match self.kind {
            TopologyKind::CaseStudy => NetworkTopology::case_study(),
            TopologyKind::ScalabilityBase => NetworkTopology::scalability_base(),
            TopologyKind::Chain => {
                let c = self.chain;
                if c.nodes < 2 {
                    return Err(Error::config("a chain needs at least 2 nodes"));
                }
                let pipe = PipeSegment::circular(c.length_m, c.diameter_m, c.friction_factor, c.wave_speed_mps)
                    .map_err(|e| Error::config(e.to_string()))?;
                NetworkTopology::chain(c.nodes, pipe)
            }
            TopologyKind::Custom => self
                .custom
                .clone()
                .ok_or_else(|| Error::config("topology.kind = \"custom\" requires topology.custom"))?,
        };
        match self.virtual_nodes {
            Some(plan) => expand_topology(&base, plan),
            None => Ok(base),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrelationConfig {
    pub threshold: f64,
    /// Intervals without fresh data after which a component requests a refresh.
    pub staleness: u64,
    pub chauvenet: ChauvenetConfig,
}

impl Default for CorrelationConfig {
    fn default() -> Self {
        Self {
            threshold: LINK_THRESHOLD,
            staleness: 8,
            chauvenet: ChauvenetConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnomalyConfig {
    pub quantizer: Quantizer,
    pub kalman: KalmanConfig,
    pub detector: DetectorConfig,
}

/// Which optional files a run writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub timeline: bool,
    pub decisions: bool,
    pub energy_log: bool,
    pub anomalies: bool,
    pub graph_snapshots: bool,
    pub model_dump: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            timeline: true,
            decisions: true,
            energy_log: true,
            anomalies: true,
            graph_snapshots: false,
            model_dump: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub format_version: u32,
    pub name: String,
    pub seed: u64,
    /// Number of intervals.
    pub duration: u64,
    pub topology: TopologyConfig,
    pub profile: FlowProfile,
    pub sampling: SamplingConfig,
    pub anomaly: AnomalyConfig,
    pub correlation: CorrelationConfig,
    pub estimation: EstimationConfig,
    pub energy: EnergyConfig,
    pub scheduler: SchedulerConfig,
    /// Algorithms compared on identical inputs; empty runs `scheduler.algorithm` only.
    pub algorithms: Vec<Algorithm>,
    pub output: OutputConfig,
    /// Grid used by parameter sweeps.
    pub sweep: SweepGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            format_version: FORMAT_VERSION,
            name: "run".into(),
            seed: 1,
            duration: 96,
            topology: TopologyConfig::default(),
            profile: FlowProfile::default(),
            sampling: SamplingConfig::default(),
            anomaly: AnomalyConfig::default(),
            correlation: CorrelationConfig::default(),
            estimation: EstimationConfig::default(),
            energy: EnergyConfig::default(),
            scheduler: SchedulerConfig::default(),
            algorithms: Vec::new(),
            output: OutputConfig::default(),
            sweep: SweepGrid::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Algorithms this configuration runs.
    pub fn algorithm_list(&self) -> Vec<Algorithm> {
        if self.algorithms.is_empty() {
            vec![self.scheduler.algorithm]
        } else {
            self.algorithms.clone()
        }
    }

    /// Validate every section; returns the built topology's node count.
    pub fn validate(&self) -> Result<usize> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::config(format!(
                "format_version {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.sampling.validate()?;
        self.profile.validate().map_err(as_config)?;
        self.anomaly.quantizer.validate().map_err(as_config)?;
        self.anomaly.kalman.validate().map_err(as_config)?;
        self.anomaly.detector.validate().map_err(as_config)?;
        self.estimation.validate()?;
        self.energy.validate()?;
        if self.duration < self.estimation.window as u64 {
            return Err(Error::config(format!(
                "duration ({}) must be >= the training window ({})",
                self.duration, self.estimation.window
            )));
        }
        if !(self.correlation.threshold > -1.0 && self.correlation.threshold <= 1.0) {
            return Err(Error::config("correlation threshold must lie in (-1, 1]"));
        }
        if self.sweep.b_exp.is_empty() || self.sweep.rlb_min.is_empty() {
            return Err(Error::config("sweep grid must be non-empty"));
        }
        if self.correlation.staleness < 1 {
            return Err(Error::config("correlation staleness must be >= 1"));
        }
        let n = self
            .topology
            .build()
            .map_err(as_config)?
            .resolve()
            .map_err(as_config)?
            .len();
        for a in self.algorithm_list() {
            SchedulerConfig {
                algorithm: a,
                ..self.scheduler
            }
            .validate(self.energy.b_max, n)?;
        }
        Ok(n)
    }

    /// Seven correlated nodes over 1.5 days.
    pub fn case_study() -> Self {
        Self {
            name: "case_study".into(),
            seed: 7,
            duration: 144,
            algorithms: vec![
                Algorithm::FastDts,
                Algorithm::Rg,
                Algorithm::Eg(3),
                Algorithm::Eg(6),
                Algorithm::Rr(3),
                Algorithm::Rr(6),
            ],
            ..Self::default()
        }
    }

    /// 80 nodes (24 real plus 56 virtual) over 30 days at 1 Hz.
    pub fn scalability() -> Self {
        Self {
            name: "scalability".into(),
            seed: 80,
            duration: 30 * 96,
            topology: TopologyConfig {
                kind: TopologyKind::ScalabilityBase,
                virtual_nodes: Some(VirtualNodePlan { per_edge: 2, extra: 8 }),
                ..TopologyConfig::default()
            },
            sampling: SamplingConfig {
                sample_rate_hz: 1.0,
                ..SamplingConfig::default()
            },
            algorithms: vec![
                Algorithm::FastDts,
                Algorithm::Rg,
                Algorithm::Eg(40),
                Algorithm::Eg(70),
                Algorithm::Rr(40),
                Algorithm::Rr(70),
            ],
            output: OutputConfig {
                timeline: false,
                energy_log: false,
                decisions: false,
                ..OutputConfig::default()
            },
            ..Self::default()
        }
    }

    /// Three nodes in a line; a valve near node 3 is throttled mid-run and
    /// later reopened.
    pub fn anomaly_replay() -> Self {
        let sampling = SamplingConfig {
            sample_rate_hz: 8.0,
            ..SamplingConfig::default()
        };
        let spi = sampling.samples_per_interval() as u64;
        Self {
            name: "anomaly_replay".into(),
            seed: 3,
            duration: 72,
            topology: TopologyConfig {
                kind: TopologyKind::Chain,
                chain: ChainSpec::default(),
                ..TopologyConfig::default()
            },
            profile: FlowProfile {
                anomaly_events: vec![AnomalyEvent {
                    location: EventLocation::Node { id: NodeId(3) },
                    start_sample: 24 * spi + spi / 3,
                    duration_samples: Some(12 * spi),
                    magnitude: 2.0,
                    shape: AnomalyShape::Oscillation,
                }],
                ..FlowProfile::default()
            },
            sampling,
            correlation: CorrelationConfig {
                chauvenet: ChauvenetConfig { small_n_fallback: true },
                ..CorrelationConfig::default()
            },
            algorithms: vec![Algorithm::FastDts],
            ..Self::default()
        }
    }
}

fn as_config(e: Error) -> Error {
    if e.is_config() {
        e
    } else {
        Error::config(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        assert_eq!(RunConfig::case_study().validate().unwrap(), 7);
        assert_eq!(RunConfig::scalability().validate().unwrap(), 80);
        assert_eq!(RunConfig::anomaly_replay().validate().unwrap(), 3);
    }

    #[test]
    fn toml_round_trip() {
        for cfg in [
            RunConfig::case_study(),
            RunConfig::scalability(),
            RunConfig::anomaly_replay(),
        ] {
            let text = cfg.to_toml_string().unwrap();
            assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn partial_files_use_defaults() {
        let cfg = RunConfig::from_toml_str("duration = 10\n[scheduler]\nb_exp = 200.0\n").unwrap();
        assert_eq!(cfg.duration, 10);
        assert_eq!(cfg.scheduler.b_exp, 200.0);
        assert_eq!(cfg.scheduler.rlb_min, 0.98);
        assert_eq!(cfg.energy.b_max, 500.0);
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        let short = RunConfig {
            duration: 3,
            ..RunConfig::default()
        };
        assert!(short.validate().unwrap_err().is_config());
        let bad_version = RunConfig {
            format_version: 9,
            ..RunConfig::default()
        };
        assert!(bad_version.validate().unwrap_err().is_config());
        let too_many = RunConfig {
            algorithms: vec![Algorithm::Eg(8)],
            ..RunConfig::default()
        };
        assert!(too_many.validate().unwrap_err().is_config());
        assert!(RunConfig::from_toml_str("duration = \"x\"").unwrap_err().is_config());
        let custom = RunConfig {
            topology: TopologyConfig {
                kind: TopologyKind::Custom,
                ..TopologyConfig::default()
            },
            ..RunConfig::default()
        };
        assert!(custom.validate().unwrap_err().is_config());
    }
}
