//! Command-line front end: trace generation, runs, sweeps, the anomaly replay
//! and metrics reports. Exit status 0 on success, 1 for configuration errors,
//! 2 for runtime errors and 3 when more than half of a run's intervals were
//! infeasible.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hydrosched::harness::io::{self, MetricsRow};
use hydrosched::harness::{self, Format, RunConfig, Scenario};
use hydrosched::scheduler::Algorithm;
use hydrosched::trace_gen::generate_traces;
use hydrosched::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "hydrosched",
    version,
    about = "Sustainable raw-data scheduling for water network sensors"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// TOML run configuration; defaults to the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in configuration used when --config is absent.
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Algorithms to run, comma separated (FDTS, DTS, RG, EG<m>, RR<m>).
    #[arg(long, global = true, value_delimiter = ',')]
    algorithm: Vec<Algorithm>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    CaseStudy,
    Scalability,
    AnomalyReplay,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate pressure traces and write them to the output directory.
    Generate {
        /// One file per node instead of one combined file.
        #[arg(long)]
        per_node: bool,
    },
    /// Run the configured algorithms and write metrics and logs.
    Run {
        /// Ingest these trace files instead of generating traces.
        #[arg(long, num_args = 1..)]
        traces: Vec<PathBuf>,
    },
    /// Sweep FAST-DTS over a B_exp × rlb_min grid.
    Sweep {
        /// B_exp values, comma separated; defaults to the configured grid.
        #[arg(long, value_delimiter = ',')]
        b_exp: Vec<f64>,
        /// rlb_min values, comma separated; defaults to the configured grid.
        #[arg(long, value_delimiter = ',')]
        rlb_min: Vec<f64>,
    },
    /// Replay the anomaly-adaptation scenario and report its event sequence.
    Replay,
    /// Print a metrics file written by `run`.
    Report {
        /// A metrics file or a directory holding one; defaults to --out-dir.
        input: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { harness::EXIT_CONFIG as u8 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}

fn load_config(g: &Global, fallback: Preset) -> Result<RunConfig> {
    let mut cfg = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => match g.preset.unwrap_or(fallback) {
            Preset::CaseStudy => RunConfig::case_study(),
            Preset::Scalability => RunConfig::scalability(),
            Preset::AnomalyReplay => RunConfig::anomaly_replay(),
        },
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if !g.algorithm.is_empty() {
        cfg.algorithms = g.algorithm.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<i32> {
    let g = &cli.global;
    match cli.command {
        Command::Generate { per_node } => {
            let cfg = load_config(g, Preset::CaseStudy)?;
            let topo = cfg.topology.build()?;
            let traces = generate_traces(&topo, &cfg.profile, cfg.sampling, cfg.duration, cfg.seed)?;
            for p in io::write_traces(&g.out_dir, &traces, per_node, g.format)? {
                println!("wrote {}", p.display());
            }
            Ok(harness::EXIT_OK)
        }
        Command::Run { traces } => {
            let cfg = load_config(g, Preset::CaseStudy)?;
            let scenario = if traces.is_empty() {
                Scenario::build(&cfg)?
            } else {
                Scenario::from_traces(&cfg, &io::read_traces(&traces, cfg.sampling)?)?
            };
            let outputs = harness::run_scenario(&scenario, &cfg)?;
            io::write_run(&g.out_dir, &cfg, &scenario, &outputs, g.format)?;
            let rows: Vec<MetricsRow> = outputs.iter().map(|o| MetricsRow::from(&o.metrics)).collect();
            print_metrics(&rows);
            Ok(harness::outcome_code(&outputs))
        }
        Command::Sweep { b_exp, rlb_min } => {
            let mut cfg = load_config(g, Preset::CaseStudy)?;
            if !b_exp.is_empty() {
                cfg.sweep.b_exp = b_exp;
            }
            if !rlb_min.is_empty() {
                cfg.sweep.rlb_min = rlb_min;
            }
            let result = harness::sweep(&cfg, &cfg.sweep)?;
            io::write_rows(&g.out_dir, "sweep", &result.cells, g.format)?;
            write_json(&g.out_dir.join("sweep_analysis.json"), &result.analysis)?;
            println!(
                "{:>8} {:>8} {:>12} {:>10} {:>6}",
                "B_exp", "rlb_min", "reliability%", "wasted_kJ", "gaps"
            );
            for c in &result.cells {
                println!(
                    "{:>8} {:>8} {:>12.3} {:>10.3} {:>6}",
                    c.b_exp, c.rlb_min, c.reliability_pct, c.wasted_kj, c.gaps
                );
            }
            let a = &result.analysis;
            println!(
                "gaps vs rlb_min: rho={:.3} p={:.2e}; waste vs B_exp: rho={:.3} p={:.2e}; interior reliability peak: {}",
                a.gaps_vs_rlb_min.rho,
                a.gaps_vs_rlb_min.p_value,
                a.waste_vs_b_exp.rho,
                a.waste_vs_b_exp.p_value,
                a.reliability_peak_interior
            );
            Ok(harness::EXIT_OK)
        }
        Command::Replay => {
            let cfg = load_config(g, Preset::AnomalyReplay)?;
            let report = harness::replay_anomaly_scenario(&cfg)?;
            io::write_rows(&g.out_dir, "replay_timeline", &report.timeline_rows(), g.format)?;
            write_json(&g.out_dir.join("replay_report.json"), &report)?;
            for e in &report.events {
                println!("interval {:>4}  node {}  {}", e.interval, e.node, e.kind);
            }
            println!(
                "ordering outlier -> enforced -> removed -> restored: {}",
                if report.ordering_ok { "ok" } else { "not observed" }
            );
            println!(
                "divergent samples: {} received raw, {} estimated",
                report.divergent_raw_samples, report.divergent_estimated_samples
            );
            Ok(harness::EXIT_OK)
        }
        Command::Report { input } => {
            let input = input.unwrap_or_else(|| g.out_dir.clone());
            let path = if input.is_dir() { find_metrics(&input)? } else { input };
            let rows: Vec<MetricsRow> = io::read_rows(&path)?;
            print_metrics(&rows);
            Ok(harness::EXIT_OK)
        }
    }
}

fn find_metrics(dir: &Path) -> Result<PathBuf> {
    ["metrics.csv", "metrics.json"]
        .iter()
        .map(|f| dir.join(f))
        .find(|p| p.is_file())
        .ok_or_else(|| Error::InvalidInput(format!("no metrics file in {}", dir.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn print_metrics(rows: &[MetricsRow]) {
    println!(
        "{:<8} {:>12} {:>10} {:>6} {:>14} {:>10}",
        "algo", "reliability%", "wasted_kJ", "gaps", "gaps/1000", "transmit%"
    );
    for r in rows {
        println!(
            "{:<8} {:>12.3} {:>10.3} {:>6} {:>14.3} {:>10.2}",
            r.algorithm, r.reliability_pct, r.wasted_kj, r.gaps, r.gaps_per_1000, r.transmit_pct
        );
    }
}
