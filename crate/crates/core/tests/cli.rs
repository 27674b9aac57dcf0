use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn run(dir: &Path, config: &str, extra: &[&str]) -> (i32, Option<Value>) {
    let cfg = dir.join("config.json");
    fs::write(&cfg, config).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_fhdyn"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir)
        .args(extra)
        .status()
        .unwrap();
    let report = fs::read_to_string(dir.join("report.json"))
        .ok()
        .map(|s| serde_json::from_str(&s).unwrap());
    (status.code().unwrap(), report)
}

#[test]
fn lp_mode_convergent_and_divergent() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run(
        dir.path(),
        r#"{"command": "check-fh", "mode": "lp", "horizon": 100,
            "weight": {"family": "exp_abs", "rate": 1.0}}"#,
        &[],
    );
    assert_eq!(code, 0);
    let r = report.unwrap();
    assert_eq!(r["verdict"], "convergent_at_horizon");
    let e = (-1f64).exp();
    assert!((r["partial_sum"].as_f64().unwrap() - (1.0 + 2.0 * e / (1.0 - e))).abs() < 1e-6);
    assert_eq!(r["horizon"], 100);
    assert!(r["tolerances"]["tail"].is_number());

    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run(
        dir.path(),
        r#"{"command": "check-fh", "mode": "lp", "horizon": 100,
            "weight": {"family": "constant", "c": 1.0}}"#,
        &[],
    );
    assert_eq!(code, 1);
    assert_eq!(report.unwrap()["verdict"], "divergent_at_horizon");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), r#"{"command": "check-fh", "mode": "lp"}"#, &[]).0, 2);
    assert_eq!(run(dir.path(), r#"{"command": "plot"}"#, &[]).0, 2);
    assert_eq!(run(dir.path(), "not json", &[]).0, 2);
    let status = Command::new(env!("CARGO_BIN_EXE_fhdyn"))
        .args(["--config", "/nonexistent/config.json"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn reports_are_deterministic_and_carry_the_seed() {
    let cfg = r#"{"command": "series-check", "horizon": 200, "trials": 100, "seed": 5,
                  "weight": {"family": "exp_abs", "rate": 1.0}}"#;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run(a.path(), cfg, &[]).0, 0);
    assert_eq!(run(b.path(), cfg, &[]).0, 0);
    let ra = fs::read(a.path().join("report.json")).unwrap();
    assert_eq!(ra, fs::read(b.path().join("report.json")).unwrap());

    let (_, r) = run(b.path(), cfg, &["--seed", "11", "--threads", "2"]);
    let r = r.unwrap();
    assert_eq!(r["seed"], 11);
    assert_eq!(r["series"]["seed"], 11);
}

#[test]
fn build_then_extract_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let common = r#""horizon": 20000, "alpha": [2.0, 256.0],
        "weight": {"family": "pow_abs", "base": 2.0, "step": true},
        "shift": {"kind": "induced"},
        "frequency": {"p_max": 2, "gap": 40, "m": [16.0, 16384.0]}"#;
    let (code, report) = run(
        dir.path(),
        &format!(r#"{{"command": "build-vector", {common}, "output": {{"csv": "orbit.csv"}}}}"#),
        &[],
    );
    assert_eq!(code, 0, "{report:?}");
    let csv = fs::read_to_string(dir.path().join("orbit.csv")).unwrap();
    assert!(csv.starts_with("# schema=1\nn,distance_1,distance_2\n"));
    assert_eq!(csv.lines().count(), 2 + 20000);

    let vector = dir.path().join("vector.json");
    let (code, report) = run(
        dir.path(),
        &format!(
            r#"{{"command": "extract-sets", {common}, "vector_path": {}}}"#,
            serde_json::to_string(&vector).unwrap()
        ),
        &[],
    );
    assert_eq!(code, 0, "{report:?}");
    let sets = &report.unwrap()["extraction"]["sets"]["sets"];
    assert!(!sets[0]["prefix"].as_array().unwrap().is_empty());
}

#[test]
fn other_commands() {
    let dir = tempfile::tempdir().unwrap();
    let (code, r) = run(
        dir.path(),
        r#"{"command": "verify-conjugacy", "trials": 10,
            "weight": {"family": "exp_abs", "rate": 1.0, "step": true}}"#,
        &[],
    );
    assert_eq!(code, 0, "{r:?}");

    // the conjugacy needs a step weight
    let (code, _) = run(
        dir.path(),
        r#"{"command": "verify-conjugacy", "weight": {"family": "exp_abs", "rate": 1.0}}"#,
        &[],
    );
    assert_eq!(code, 1);

    let (code, r) = run(
        dir.path(),
        r#"{"command": "check-weight", "horizon": 40, "weight": {"family": "exp_square", "rate": 1.0}}"#,
        &[],
    );
    assert_eq!(code, 1);
    assert_eq!(r.unwrap()["admissibility"]["verdict"], "refuted");

    let (code, r) = run(
        dir.path(),
        r#"{"command": "check-fh", "mode": "c0", "horizon": 2000,
            "weight": {"family": "exp_abs", "rate": 1.0},
            "frequency": {"p_max": 3, "gap": 12, "m": [2.0, 3.0, 4.0]}}"#,
        &[],
    );
    assert_eq!(code, 0, "{r:?}");

    let (code, r) = run(
        dir.path(),
        r#"{"command": "simulate-orbit", "horizon": 5000, "levels": 2,
            "weight": {"family": "pow_abs", "base": 2.0, "step": true},
            "shift": {"kind": "induced"},
            "frequency": {"p_max": 2, "gap": 40, "m": [1e6, 1e9]}}"#,
        &[],
    );
    assert_eq!(code, 0, "{r:?}");
    assert!(dir.path().join("orbit.csv").exists());
}
