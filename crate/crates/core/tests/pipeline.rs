//! End-to-end behaviour of the simulation harness on short runs.

use hydrosched::harness::{
    self, io, outcome_code, replay_anomaly_scenario, simulate, Format, RunConfig, Scenario, EXIT_CONFIG,
    EXIT_INFEASIBLE, EXIT_OK, EXIT_RUNTIME,
};
use hydrosched::scheduler::Algorithm;
use hydrosched::trace_gen::generate_traces;
use hydrosched::Error;

fn short_case_study(duration: u64) -> RunConfig {
    RunConfig {
        duration,
        ..RunConfig::case_study()
    }
}

#[test]
fn metrics_agree_with_interval_records() {
    let cfg = short_case_study(32);
    let (scenario, outputs) = harness::run_all(&cfg).unwrap();
    assert_eq!(outputs.len(), 6);
    for out in &outputs {
        let m = &out.metrics;
        let nodes: Vec<_> = out.records.iter().flat_map(|r| &r.nodes).collect();
        assert_eq!(nodes.len() as u64, m.node_intervals);
        assert_eq!(m.node_intervals, (scenario.node_count() * 32) as u64);
        let gaps = nodes.iter().filter(|x| x.step.y && x.step.depleted).count() as u64;
        assert_eq!(gaps, m.gaps, "{}", out.algorithm);
        let wasted: f64 = nodes.iter().map(|x| x.step.wasted).sum();
        assert!((wasted / 1000.0 - m.wasted_kj).abs() < 1e-9);
        let rel: f64 = nodes.iter().map(|x| x.reliability).sum();
        assert!((100.0 * rel / nodes.len() as f64 - m.reliability_pct).abs() < 1e-9);
        for r in &out.records {
            for x in &r.nodes {
                assert!((0.0..=1.0).contains(&x.reliability));
                if x.delivered {
                    assert_eq!(x.reliability, 1.0);
                    assert!(r.selected.contains(&x.node));
                }
                if x.step.gap() {
                    assert_eq!(x.reliability, 0.0);
                    assert!(!x.delivered);
                }
            }
        }
    }
}

#[test]
fn parallel_runs_match_individual_runs() {
    let cfg = short_case_study(16);
    let scenario = Scenario::build(&cfg).unwrap();
    let together = harness::run_scenario(&scenario, &cfg).unwrap();
    for (out, alg) in together.iter().zip(cfg.algorithm_list()) {
        assert_eq!(out.algorithm, alg);
        let alone = simulate(&scenario, &cfg, alg).unwrap();
        assert_eq!(alone.records, out.records);
        assert_eq!(alone.metrics, out.metrics);
    }
}

#[test]
fn ingested_traces_reproduce_generated_run() {
    let cfg = RunConfig {
        algorithms: vec![Algorithm::FastDts, Algorithm::Rg],
        ..short_case_study(8)
    };
    let topo = cfg.topology.build().unwrap();
    let traces = generate_traces(&topo, &cfg.profile, cfg.sampling, cfg.duration, cfg.seed).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = io::write_traces(dir.path(), &traces, true, Format::Csv).unwrap();
    let read = io::read_traces(&paths, cfg.sampling).unwrap();
    assert_eq!(read.samples, traces.samples);
    let from_file = harness::run_scenario(&Scenario::from_traces(&cfg, &read).unwrap(), &cfg).unwrap();
    let generated = harness::run_all(&cfg).unwrap().1;
    for (a, b) in from_file.iter().zip(&generated) {
        assert_eq!(a.metrics, b.metrics);
    }
}

#[test]
fn short_traces_are_rejected() {
    let cfg = short_case_study(8);
    let topo = cfg.topology.build().unwrap();
    let traces = generate_traces(&topo, &cfg.profile, cfg.sampling, 4, cfg.seed).unwrap();
    assert!(matches!(
        Scenario::from_traces(&cfg, &traces),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn replay_without_node_event_reports_nothing() {
    let mut cfg = RunConfig::anomaly_replay();
    cfg.profile.anomaly_events.clear();
    cfg.duration = 16;
    let report = replay_anomaly_scenario(&cfg).unwrap();
    assert_eq!(report.target, None);
    assert!(report.events.is_empty());
    assert!(report.timeline_rows().is_empty());
    assert!(!report.ordering_ok);
    assert_eq!(report.divergent_raw_samples + report.divergent_estimated_samples, 0);
}

#[test]
fn replay_timeline_counts_divergent_samples() {
    let cfg = RunConfig::anomaly_replay();
    let report = replay_anomaly_scenario(&cfg).unwrap();
    let event = &cfg.profile.anomaly_events[0];
    let total: u64 = report.timeline.iter().map(|s| s.divergent_samples).sum();
    assert_eq!(Some(total), event.duration_samples);
    assert_eq!(total, report.divergent_raw_samples + report.divergent_estimated_samples);
}

#[test]
fn exit_codes_follow_outcome() {
    assert_eq!(harness::exit_code(&Error::Config("x".into())), EXIT_CONFIG);
    assert_eq!(harness::exit_code(&Error::InvalidInput("x".into())), EXIT_RUNTIME);
    let cfg = RunConfig {
        algorithms: vec![Algorithm::FastDts],
        ..short_case_study(4)
    };
    let (_, mut outputs) = harness::run_all(&cfg).unwrap();
    assert_eq!(outcome_code(&outputs), EXIT_OK);
    outputs[0].metrics.infeasible_intervals = 3;
    assert_eq!(outcome_code(&outputs), EXIT_INFEASIBLE);
    outputs[0].metrics.infeasible_intervals = 2;
    assert_eq!(outcome_code(&outputs), EXIT_OK);
}

#[test]
fn invalid_configs_fail_before_running() {
    let mut cfg = short_case_study(4);
    cfg.scheduler.b_exp = 600.0;
    assert!(harness::run_all(&cfg).unwrap_err().is_config());
    let mut cfg = short_case_study(4);
    cfg.algorithms = vec![Algorithm::Eg(9)];
    assert!(harness::run_all(&cfg).unwrap_err().is_config());
}
