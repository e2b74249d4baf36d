use std::path::Path;
use std::process::{Command, Output};

use epicontrol::control::{PlannerKind, RunConfig};
use serde_json::Value;

fn small_config(dir: &Path) -> std::path::PathBuf {
    let mut cfg = RunConfig::desk();
    cfg.planner = PlannerKind::Random;
    cfg.horizon_days = 30;
    cfg.lookahead = 20;
    cfg.posterior_draws = 3;
    cfg.replicates = 2;
    cfg.smc2.n_theta = 20;
    cfg.smc2.n_x = 16;
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn epicontrol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epicontrol")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_then_summarize_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let (cfg, out_s) = (cfg.to_str().unwrap(), out.to_str().unwrap());

    let res = epicontrol(&["--config", cfg, "--planner", "random,historical", "--out", out_s, "run"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("random") && stdout.contains("historical"));
    for stem in ["random_00", "random_01", "historical_00", "historical_01"] {
        assert!(out.join("traces").join(format!("{stem}.csv")).exists());
        assert!(out.join("traces").join(format!("{stem}.json")).exists());
    }
    let series = read_json(&out.join("series.json"));
    assert_eq!(series["random"].as_array().unwrap().len(), 2);
    assert_eq!(series["random"][0]["day"].as_array().unwrap().len(), 30);
    let metrics = read_json(&out.join("metrics.json"));
    assert_eq!(metrics.as_array().unwrap().len(), 2);

    let again = dir.path().join("again");
    let res = epicontrol(&[
        "--config",
        cfg,
        "--out",
        again.to_str().unwrap(),
        "summarize",
        "--traces",
        out.join("traces").to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(read_json(&again.join("metrics.json")), metrics);
}

#[test]
fn validate_writes_bands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    let res = epicontrol(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "validate", "--paths", "20"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let v = read_json(&out.join("validation.json"));
    assert_eq!(v["paths"], 20);
    let c = v["coverage"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&c));
    assert!(out.join("validation.csv").exists());
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let res = epicontrol(&["--config", cfg.to_str().unwrap(), "--planner", "oracle", "run"]);
    assert!(!res.status.success());
    let res = epicontrol(&["--config", dir.path().join("missing.json").to_str().unwrap(), "run"]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("missing.json"));
}
