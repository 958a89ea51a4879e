//! File output: metrics, timelines, decision and energy logs, anomaly
//! reports, traces, graph snapshots, model dumps and run metadata.
//!
//! Every file is a pure function of the configuration, so two runs with the
//! same configuration and seed write identical bytes.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{RunConfig, FORMAT_VERSION};
use super::metrics::RunMetrics;
use super::scenario::Scenario;
use super::sim::RunOutput;
use crate::correlation::EnforceReason;
use crate::scheduler::Provenance;
use crate::trace_gen::{SamplingConfig, TraceSet};
use crate::{Error, NodeId, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Write `rows` to `dir/stem.{csv,json}`.
pub fn write_rows<T: Serialize>(dir: &Path, stem: &str, rows: &[T], format: Format) -> Result<PathBuf> {
    write_rows_with_header(dir, stem, rows, &[], format)
}

/// As [`write_rows`]; an empty CSV still gets `header` so readers see the schema.
pub fn write_rows_with_header<T: Serialize>(
    dir: &Path,
    stem: &str,
    rows: &[T],
    header: &[&str],
    format: Format,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{stem}.{}", format.extension()));
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_path(&path)?;
            if rows.is_empty() && !header.is_empty() {
                w.write_record(header)?;
            }
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut w = BufWriter::new(File::create(&path)?);
            serde_json::to_writer_pretty(&mut w, rows)?;
            writeln!(w)?;
            w.flush()?;
        }
    }
    Ok(path)
}

pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?),
        _ => csv::Reader::from_path(path)?
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(Error::from),
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub algorithm: String,
    pub reliability_pct: f64,
    #[serde(rename = "wasted_kJ")]
    pub wasted_kj: f64,
    pub gaps: u64,
    pub gaps_per_1000: f64,
    pub transmit_pct: f64,
    pub infeasible_intervals: u64,
}

impl From<&RunMetrics> for MetricsRow {
    fn from(m: &RunMetrics) -> Self {
        Self {
            algorithm: m.algorithm.to_string(),
            reliability_pct: round6(m.reliability_pct),
            wasted_kj: round6(m.wasted_kj),
            gaps: m.gaps,
            gaps_per_1000: round6(m.gaps_per_1000),
            transmit_pct: round6(m.transmit_pct),
            infeasible_intervals: m.infeasible_intervals,
        }
    }
}

pub fn write_metrics(dir: &Path, metrics: &[&RunMetrics], format: Format) -> Result<PathBuf> {
    let rows: Vec<MetricsRow> = metrics.iter().map(|m| MetricsRow::from(*m)).collect();
    write_rows(dir, "metrics", &rows, format)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub algorithm: String,
    pub interval: u64,
    pub node_id: NodeId,
    pub battery_before: f64,
    pub battery_after: f64,
    pub harvest: f64,
    pub e_tr: f64,
    pub e_in: f64,
    pub y: u8,
    pub delivered: u8,
    pub gap: u8,
    pub wasted: f64,
    pub reliability: f64,
    pub provenance: String,
    pub enforced: String,
    pub anomalies: u32,
}

fn label<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|j| j.as_str().map(str::to_owned))
        .unwrap_or_default()
}

fn reasons_label(r: &[EnforceReason]) -> String {
    r.iter().map(label).collect::<Vec<_>>().join("|")
}

pub fn timeline_rows(out: &RunOutput) -> Vec<TimelineRow> {
    let alg = out.algorithm.to_string();
    let mut rows = Vec::new();
    for r in &out.records {
        for x in &r.nodes {
            rows.push(TimelineRow {
                algorithm: alg.clone(),
                interval: r.interval,
                node_id: out.ids[x.node],
                battery_before: x.step.b_before,
                battery_after: x.step.b_after,
                harvest: x.step.h,
                e_tr: x.step.e_tr,
                e_in: x.step.e_in,
                y: x.step.y as u8,
                delivered: x.delivered as u8,
                gap: x.step.gap() as u8,
                wasted: x.step.wasted,
                reliability: x.reliability,
                provenance: x.provenance.as_ref().map(label).unwrap_or_default(),
                enforced: reasons_label(&x.enforced),
                anomalies: x.anomalies,
            });
        }
    }
    rows
}

/// Energy log row: battery at the start of the interval and the step's terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub node_id: NodeId,
    pub interval: u64,
    #[serde(rename = "B")]
    pub b: f64,
    pub h: f64,
    #[serde(rename = "E_tr")]
    pub e_tr: f64,
    #[serde(rename = "E_in")]
    pub e_in: f64,
    pub y: u8,
    pub wasted: f64,
    pub gap_flag: u8,
}

pub fn energy_rows(out: &RunOutput) -> Vec<EnergyRow> {
    let mut rows = Vec::new();
    for r in &out.records {
        for x in &r.nodes {
            rows.push(EnergyRow {
                node_id: out.ids[x.node],
                interval: r.interval,
                b: x.step.b_before,
                h: x.step.h,
                e_tr: x.step.e_tr,
                e_in: x.step.e_in,
                y: x.step.y as u8,
                wasted: x.step.wasted,
                gap_flag: x.step.gap() as u8,
            });
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRow {
    pub interval: u64,
    pub algorithm: String,
    #[serde(rename = "Y_json")]
    pub y_json: String,
    pub provenance_json: String,
    pub objective: Option<f64>,
    pub infeasible_flag: u8,
    #[serde(rename = "L_t")]
    pub l_t: f64,
}

pub fn decision_rows(out: &RunOutput) -> Result<Vec<DecisionRow>> {
    out.records
        .iter()
        .map(|r| {
            let y: Vec<NodeId> = r.selected.iter().map(|&i| out.ids[i]).collect();
            let prov: std::collections::BTreeMap<String, Provenance> = r
                .provenance
                .iter()
                .map(|(&i, &p)| (out.ids[i].to_string(), p))
                .collect();
            Ok(DecisionRow {
                interval: r.interval,
                algorithm: out.algorithm.to_string(),
                y_json: serde_json::to_string(&y)?,
                provenance_json: serde_json::to_string(&prov)?,
                objective: r.objective,
                infeasible_flag: r.infeasible as u8,
                l_t: r.lyapunov,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyRow {
    pub node_id: NodeId,
    pub interval: u64,
    pub count: u32,
    pub timestamps_json: String,
}

pub const ANOMALY_HEADER: [&str; 4] = ["node_id", "interval", "count", "timestamps_json"];

pub fn anomaly_rows(scenario: &Scenario) -> Result<Vec<AnomalyRow>> {
    scenario
        .anomalies
        .iter()
        .map(|a| {
            Ok(AnomalyRow {
                node_id: a.node_id,
                interval: a.interval,
                count: a.count,
                timestamps_json: serde_json::to_string(&a.timestamps_us)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub node_id: NodeId,
    pub timestamp_us: u64,
    pub sample_index: u64,
    pub pressure_m: f64,
}

/// Write traces as one combined file or one file per node.
pub fn write_traces(dir: &Path, traces: &TraceSet, per_node: bool, format: Format) -> Result<Vec<PathBuf>> {
    let rows_for = |i: usize| -> Vec<TraceRow> {
        traces.samples[i]
            .iter()
            .enumerate()
            .map(|(k, &p)| TraceRow {
                node_id: traces.ids[i],
                timestamp_us: traces.sampling.timestamp_us(k as u64),
                sample_index: k as u64,
                pressure_m: p,
            })
            .collect()
    };
    if per_node {
        (0..traces.ids.len())
            .map(|i| write_rows(dir, &format!("trace_node_{}", traces.ids[i]), &rows_for(i), format))
            .collect()
    } else {
        let rows: Vec<TraceRow> = (0..traces.ids.len()).flat_map(rows_for).collect();
        Ok(vec![write_rows(dir, "traces", &rows, format)?])
    }
}

/// Read traces written by [`write_traces`] (one or more files).
pub fn read_traces(paths: &[PathBuf], sampling: SamplingConfig) -> Result<TraceSet> {
    let mut by_node: std::collections::BTreeMap<NodeId, Vec<(u64, f64)>> = Default::default();
    for p in paths {
        for r in read_rows::<TraceRow>(p)? {
            by_node
                .entry(r.node_id)
                .or_default()
                .push((r.sample_index, r.pressure_m));
        }
    }
    let mut ids = Vec::new();
    let mut samples = Vec::new();
    for (id, mut v) in by_node {
        v.sort_by_key(|x| x.0);
        if v.iter().enumerate().any(|(k, x)| x.0 != k as u64) {
            return Err(Error::input(format!(
                "trace of node {id} has missing or duplicate samples"
            )));
        }
        ids.push(id);
        samples.push(v.into_iter().map(|x| x.1).collect());
    }
    Ok(TraceSet {
        ids,
        sampling,
        samples,
        negative_heads: 0,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub crate_name: String,
    pub crate_version: String,
    pub format_version: u32,
    pub nodes: Vec<NodeId>,
    pub algorithms: Vec<String>,
    pub negative_heads: usize,
    pub config: RunConfig,
}

pub fn write_run_meta(dir: &Path, cfg: &RunConfig, scenario: &Scenario) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let meta = RunMeta {
        crate_name: env!("CARGO_PKG_NAME").into(),
        crate_version: env!("CARGO_PKG_VERSION").into(),
        format_version: FORMAT_VERSION,
        nodes: scenario.ids.clone(),
        algorithms: cfg.algorithm_list().iter().map(ToString::to_string).collect(),
        negative_heads: scenario.negative_heads,
        config: cfg.clone(),
    };
    let path = dir.join("run_meta.json");
    let mut w = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut w, &meta)?;
    writeln!(w)?;
    w.flush()?;
    Ok(path)
}

/// Write everything a run produced according to `cfg.output`.
pub fn write_run(
    dir: &Path,
    cfg: &RunConfig,
    scenario: &Scenario,
    outputs: &[RunOutput],
    format: Format,
) -> Result<Vec<PathBuf>> {
    let mut paths = vec![write_run_meta(dir, cfg, scenario)?];
    let metrics: Vec<&RunMetrics> = outputs.iter().map(|o| &o.metrics).collect();
    paths.push(write_metrics(dir, &metrics, format)?);
    let o = cfg.output;
    if o.anomalies {
        paths.push(write_rows_with_header(
            dir,
            "anomalies",
            &anomaly_rows(scenario)?,
            &ANOMALY_HEADER,
            format,
        )?);
    }
    if o.timeline {
        let rows: Vec<TimelineRow> = outputs.iter().flat_map(timeline_rows).collect();
        paths.push(write_rows(dir, "timeline", &rows, format)?);
    }
    if o.decisions {
        let mut rows = Vec::new();
        for out in outputs {
            rows.extend(decision_rows(out)?);
        }
        paths.push(write_rows(dir, "decisions", &rows, format)?);
    }
    if o.energy_log {
        for out in outputs {
            paths.push(write_rows(
                dir,
                &format!("energy_{}", out.algorithm),
                &energy_rows(out),
                format,
            )?);
        }
    }
    for out in outputs {
        if o.graph_snapshots {
            let gdir = dir.join(format!("graph_{}", out.algorithm));
            fs::create_dir_all(&gdir)?;
            for s in &out.snapshots {
                let path = gdir.join(format!("interval_{:06}.json", s.interval));
                fs::write(&path, serde_json::to_string_pretty(s)? + "\n")?;
            }
            paths.push(gdir);
        }
        if o.model_dump {
            let path = dir.join(format!("models_{}.json", out.algorithm));
            fs::write(&path, serde_json::to_string_pretty(&out.models)? + "\n")?;
            paths.push(path);
        }
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_gen::{generate_traces, FlowProfile, NetworkTopology};

    #[test]
    fn traces_round_trip_in_both_layouts() {
        let dir = tempfile::tempdir().unwrap();
        let s = SamplingConfig {
            sample_rate_hz: 1.0,
            interval_length_s: 200.0,
            chunk_len: 100,
        };
        let tr = generate_traces(&NetworkTopology::case_study(), &FlowProfile::default(), s, 2, 9).unwrap();
        for (per_node, format) in [(false, Format::Csv), (true, Format::Csv), (false, Format::Json)] {
            let sub = dir.path().join(format!("{per_node}_{}", format.extension()));
            let paths = write_traces(&sub, &tr, per_node, format).unwrap();
            let back = read_traces(&paths, s).unwrap();
            assert_eq!(back.ids, tr.ids);
            assert_eq!(back.samples, tr.samples);
        }
    }

    #[test]
    fn trace_header_matches_schema() {
        let dir = tempfile::tempdir().unwrap();
        let s = SamplingConfig {
            sample_rate_hz: 1.0,
            interval_length_s: 100.0,
            chunk_len: 100,
        };
        let tr = generate_traces(&NetworkTopology::case_study(), &FlowProfile::default(), s, 1, 9).unwrap();
        let p = write_traces(dir.path(), &tr, false, Format::Csv).unwrap();
        let text = fs::read_to_string(&p[0]).unwrap();
        assert!(text.starts_with("node_id,timestamp_us,sample_index,pressure_m\n"));
    }
}
