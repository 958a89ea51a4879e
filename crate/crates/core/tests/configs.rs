//! The shipped configuration files load, validate and match the built-in presets.

use std::path::PathBuf;

use hydrosched::harness::RunConfig;

fn load(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
    cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    cfg
}

#[test]
fn shipped_configs_match_presets() {
    assert_eq!(load("case_study.toml"), RunConfig::case_study());
    assert_eq!(load("scalability.toml"), RunConfig::scalability());
    assert_eq!(load("anomaly_replay.toml"), RunConfig::anomaly_replay());
    let sweep = load("sweep.toml");
    assert_eq!(
        RunConfig {
            name: "case_study".into(),
            ..sweep.clone()
        },
        RunConfig::case_study()
    );
    assert_eq!(sweep.sweep.b_exp.len(), 5);
    assert_eq!(sweep.sweep.rlb_min.len(), 5);
}

#[test]
fn presets_survive_toml_round_trip() {
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
fn partial_config_fills_defaults() {
    let cfg = RunConfig::from_toml_str("name = \"short\"\nduration = 8\n").unwrap();
    assert_eq!(cfg.duration, 8);
    assert_eq!(cfg.energy, RunConfig::default().energy);
}
