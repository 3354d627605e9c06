use std::path::Path;
use std::process::{Command, Output};

use stockflow::io::{self, Document};
use stockflow::models;

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stockflow"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn export(dir: &Path) {
    let out = run(&["catalog", "--export", "."], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn catalog_lists_every_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["catalog"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for entry in models::catalog() {
        assert!(text.contains(entry.name), "{} missing from listing", entry.name);
    }
}

#[test]
fn validate_accepts_catalog_and_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    export(dir.path());
    let out = run(&["validate", "covid_composite.json"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("OK"));

    std::fs::write(dir.path().join("bad.json"), r#"{"kind": "stockflow", "version": 1}"#).unwrap();
    let out = run(&["validate", "bad.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/stocks"));

    std::fs::write(dir.path().join("v2.json"), r#"{"kind": "stockflow", "version": 2}"#).unwrap();
    assert_eq!(run(&["validate", "v2.json"], dir.path()).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&[], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["simulate", "x.json"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(2));
}

#[test]
fn compose_reproduces_catalog_composite() {
    let dir = tempfile::tempdir().unwrap();
    export(dir.path());
    let out = run(
        &[
            "compose",
            "covid_pattern.json",
            "--box",
            "seirh=covid_seirh.json",
            "--box",
            "vaccination=covid_vaccination.json",
            "--box",
            "asymptomatic=covid_asymptomatic.json",
            "-o",
            "glued.json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let glued = io::load(dir.path().join("glued.json")).unwrap();
    assert_eq!(glued, Document::Open(models::covid_composite()));
}

#[test]
fn compose_with_missing_box_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    export(dir.path());
    let out = run(
        &["compose", "covid_pattern.json", "--box", "seirh=covid_seirh.json", "-o", "glued.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("glued.json").exists());
}

#[test]
fn simulate_with_observe_adds_variable_columns() {
    let dir = tempfile::tempdir().unwrap();
    export(dir.path());
    let out = run(
        &["simulate", "sir.json", "--scenario", "sir.scenario.json", "-o", "sir.csv", "--observe"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("sir.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(&header[..4], ["t", "Susceptible", "Infective", "Recovered"]);
    let total = header.iter().position(|h| h == "Total Population").expect("sum variable column");
    for rec in rdr.records() {
        let v: f64 = rec.unwrap()[total].parse().unwrap();
        assert!((v - 1e6).abs() < 1e-6, "total population drifted to {v}");
    }
}

#[test]
fn simulate_batch_writes_one_csv_per_scenario() {
    let dir = tempfile::tempdir().unwrap();
    export(dir.path());
    let scenarios = dir.path().join("runs");
    std::fs::create_dir(&scenarios).unwrap();
    for name in ["a", "b"] {
        std::fs::copy(dir.path().join("sir_simple.scenario.json"), scenarios.join(format!("{name}.json"))).unwrap();
    }
    let out = run(&["simulate", "sir_simple.json", "--scenario-dir", "runs", "--out-dir", "out"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a = std::fs::read(dir.path().join("out/a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("out/b.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn simulate_unbound_parameter_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    export(dir.path());
    std::fs::write(
        dir.path().join("empty.json"),
        r#"{"kind": "scenario", "version": 1, "initial": {"S": 1, "I": 1, "R": 0}, "params": {}, "t1": 1, "dt": 0.1}"#,
    )
    .unwrap();
    let out = run(&["simulate", "sir_simple.json", "--scenario", "empty.json", "-o", "x.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta"));
}

#[test]
fn simulate_blow_up_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("blow.json"),
        r#"{"kind": "stockflow", "version": 1, "stocks": ["x", "y"],
            "flows": [{"name": "f", "up": "x", "down": "y", "function": "-(x * x)"}],
            "links": [{"src": "x", "tgt": "f"}]}"#,
    )
    .unwrap();
    std::fs::write(
        dir.path().join("sc.json"),
        r#"{"kind": "scenario", "version": 1, "initial": {"x": 1, "y": 0}, "params": {}, "t1": 2, "dt": 0.01}"#,
    )
    .unwrap();
    let out = run(&["simulate", "blow.json", "--scenario", "sc.json", "-o", "x.csv"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite"));
}

#[test]
fn equations_prints_one_line_per_stock() {
    let dir = tempfile::tempdir().unwrap();
    export(dir.path());
    let out = run(&["equations", "covid_composite.json"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let heads: Vec<&str> = text.lines().map(|l| l.split(" = ").next().unwrap()).collect();
    assert_eq!(
        heads,
        ["dS/dt", "dE/dt", "dI/dt", "dR/dt", "dHICU/dt", "dHNICU/dt", "dVP/dt", "dVF/dt", "dIA/dt"]
    );
}

#[test]
fn export_dot_writes_a_digraph() {
    let dir = tempfile::tempdir().unwrap();
    export(dir.path());
    let out = run(&["export-dot", "sird.json", "-o", "sird.dot"], dir.path());
    assert!(out.status.success());
    let dot = std::fs::read_to_string(dir.path().join("sird.dot")).unwrap();
    assert!(dot.starts_with("digraph"));
    assert!(dot.contains("shape=box"));
}

#[test]
fn check_morphism_passes_and_detects_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    export(dir.path());
    let args = [
        "check-morphism",
        "sird_lumping.json",
        "--from",
        "sird.json",
        "--to",
        "sird_lumped.json",
        "--scenario",
        "sird.scenario.json",
    ];
    let out = run(&args, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sird_lumped.json")).unwrap()).unwrap();
    let f = doc["flows"][1]["function"].as_str().unwrap().to_string();
    doc["flows"][1]["function"] = serde_json::Value::String(format!("{f} + 1"));
    std::fs::write(dir.path().join("sird_lumped.json"), serde_json::to_string(&doc).unwrap()).unwrap();
    let out = run(&args, dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
}
