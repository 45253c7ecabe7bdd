use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SMALL: &str = r#"{"grid": {"nodes_per_axis": 17, "time_steps": 12}}"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orthotropic"))
        .current_dir(dir)
        .env_remove("ORTHOTROPIC_OUT")
        .args(args)
        .output()
        .unwrap()
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), config).unwrap();
    dir
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn verify_lemmas_passes() {
    let dir = setup(SMALL);
    let out = run(dir.path(), &["verify-lemmas", "--config", "cfg.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&dir.path().join("o"));
    assert_eq!(s["passed"], true);
    let suites: usize = s["outcomes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["metrics"].as_array().map_or(0, |a| a.len()))
        .sum();
    assert_eq!(suites, 4);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.matches(": PASS").count(), 4);
}

#[test]
fn invalid_delta_exits_2_without_output() {
    let dir = setup(r#"{"problem": {"delta": [-1.0, 1.0]}}"#);
    let out = run(dir.path(), &["all", "--config", "cfg.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("delta"));
    assert!(!dir.path().join("o").exists());
    let out = run(dir.path(), &["solve", "--out", "o", "--epsilon", "-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = setup(r#"{"grid": {"nodes": 17}}"#);
    let out = run(dir.path(), &["verify-lemmas", "--config", "cfg.json", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn moser_ledger_for_three_dimensions() {
    let dir = setup(SMALL);
    let out = run(
        dir.path(),
        &["moser", "--n", "3", "--jmax", "5", "--config", "cfg.json", "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o/moser_ledger.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 7);
    for row in &rows[2..] {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[1], "3");
        assert_eq!(cols[7], "4/7");
        assert_eq!(cols[8], "3/7");
        assert_eq!(cols[9], "true");
    }
}

#[test]
fn summary_is_deterministic_and_config_echo_reproduces() {
    let dir = setup(SMALL);
    let args = |o: &'static str| ["all", "--config", "cfg.json", "--out", o, "--seed", "7"];
    assert_eq!(run(dir.path(), &args("a")).status.code(), Some(0));
    let out = run(dir.path(), &["all", "--config", "cfg.json", "--out", "b", "--seed", "7", "--threads", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let a = std::fs::read(dir.path().join("a/summary.json")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b/summary.json")).unwrap());
    assert_eq!(
        std::fs::read(dir.path().join("a/effective_config.json")).unwrap(),
        std::fs::read(dir.path().join("b/effective_config.json")).unwrap()
    );
    for table in ["energy.csv", "convergence.csv", "caccioppoli.csv", "ledger_n2.csv"] {
        assert!(dir.path().join("a").join(table).exists(), "{table}");
    }

    let out = run(dir.path(), &["all", "--config", "a/effective_config.json", "--out", "c"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(a, std::fs::read(dir.path().join("c/summary.json")).unwrap());
    let meta: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("c/metadata.json")).unwrap()).unwrap();
    assert!(meta["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn solve_writes_field_and_diagnostics() {
    let dir = setup(SMALL);
    let out = Command::new(env!("CARGO_BIN_EXE_orthotropic"))
        .current_dir(dir.path())
        .env("ORTHOTROPIC_OUT", "env_out")
        .args(["solve", "--config", "cfg.json", "--epsilon", "0.1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("env_out");
    let s = summary(&o);
    assert_eq!(s["converged"], true);
    assert_eq!(s["epsilon"], 0.1);
    assert_eq!(s["steps"], 12);
    let jsonl = std::fs::read_to_string(o.join("diagnostics.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 12);
    assert_eq!(std::fs::metadata(o.join("solution.bin")).unwrap().len(), 17 * 17 * 13 * 8);
    assert!(o.join("solution.json").exists());
}
