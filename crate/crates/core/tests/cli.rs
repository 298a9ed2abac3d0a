//! End-to-end runs of the `treefront` binary.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_treefront");

fn run(sub: &str, config: &str, out: &Path, extra: &[&str]) -> Output {
    let cfg = out.with_extension("json");
    fs::write(&cfg, config).unwrap();
    Command::new(BIN)
        .arg(sub)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn stderr_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().expect("error JSON on stderr");
    serde_json::from_str(line).unwrap()
}

const TREE: &str = r#""tree": {"homogeneous": {"b": 2, "r": 1.0}}"#;

fn spectrum_cfg() -> String {
    format!(
        r#"{{{TREE}, "spectral": {{"tol": 1e-12, "l_max": 3, "truncations": [2, 4], "cells_per_edge": 16}}}}"#
    )
}

fn simulate_cfg(dt: f64) -> String {
    format!(
        r#"{{{TREE}, "f": {{"family": "logistic", "a": 0.5}},
            "u0": {{"kind": "indicator", "radius": 1.0, "amplitude": 0.2}},
            "sim": {{"generations": 10, "cells_per_edge": 4,
                     "solve": {{"t_final": 2.0, "dt": {dt}, "snapshot_every": 1.0}}}}}}"#
    )
}

#[test]
fn spectrum_outputs_are_listed_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spec");
    let o = run("spectrum", &spectrum_cfg(), &out, &["--plots"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["experiment"], "spectrum");
    let listed: BTreeSet<String> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["path"].as_str().unwrap().to_string())
        .collect();
    let on_disk: BTreeSet<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    assert_eq!(listed, on_disk);
    assert!(listed.iter().any(|p| p.ends_with(".svg")));
    // defaults are filled into the recorded config
    assert_eq!(m["config"]["level"], 0.5);
}

#[test]
fn identical_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run("simulate", &simulate_cfg(0.05), out, &[]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut compared = 0;
    for entry in fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        if name == "manifest.json" {
            continue;
        }
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name:?}"
        );
        compared += 1;
    }
    assert!(compared >= 3);
    let csv = fs::read_to_string(a.join("snapshots.csv")).unwrap();
    assert!(!csv.contains('\r'));
}

#[test]
fn unknown_key_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(r#"{{{TREE}, "spectrall": {{}}}}"#);
    let o = run("spectrum", &cfg, &dir.path().join("x"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!(e["category"], "config");
    let msg = e["message"].as_str().unwrap();
    assert!(msg.contains("spectrall") && msg.contains(":1:"), "{msg}");
}

#[test]
fn monotonicity_guard_exits_3_and_still_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bad");
    let o = run("simulate", &simulate_cfg(5.0), &out, &[]);
    assert_eq!(o.status.code(), Some(3));
    let m = manifest(&out);
    assert_eq!(m["status"], "error");
    assert_eq!(m["exit_code"], 3);
    assert!(m["error"]["message"].as_str().unwrap().contains("dt"));
}

#[test]
fn shooting_budget_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    // c ≈ 0.16 č has no admissible (μ, N) for N ≤ 8
    let cfg = format!(
        r#"{{{TREE}, "f": {{"family": "logistic", "a": 1.0}},
            "barriers": [{{"kind": "psi", "c": 0.3, "n": 1, "n_budget": 8}}]}}"#
    );
    let o = run("barriers", &cfg, &dir.path().join("psi"), &[]);
    assert_eq!(
        o.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(stderr_json(&o)["category"], "budget");
}

#[test]
fn tree_over_edge_budget_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        r#"{"tree": {"homogeneous": {"b": 3, "r": 1.0}}, "f": {"family": "logistic", "a": 0.5},
            "edge_budget": 1000,
            "u0": {"kind": "zero"},
            "sim": {"generations": 12, "cells_per_edge": 2,
                     "solve": {"t_final": 1.0, "dt": 0.1, "snapshot_every": 1.0}}}"#
            .to_string();
    let o = run("simulate-tree", &cfg, &dir.path().join("t"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["message"]
        .as_str()
        .unwrap()
        .contains("edge_budget"));
}

#[test]
fn validate_barriers_accepts_declared_defect() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v");
    let cfg = format!(r#"{{{TREE}, "f": {{"family": "logistic", "a": 1.0}}}}"#);
    let o = run("validate-barriers", &cfg, &out, &["--threads", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("validation.csv")).unwrap();
    assert!(csv.lines().count() > 2);
    let res: Value =
        serde_json::from_str(&fs::read_to_string(out.join("residuals.json")).unwrap()).unwrap();
    let expected: u64 = res
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["report"]["expected_failures"].as_u64().unwrap_or(0))
        .sum();
    assert!(
        expected >= 1,
        "the verbatim m continuity defect should be reported"
    );
}

#[test]
fn scan_runs_in_parallel_and_reports_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan");
    let cfg = format!(
        r#"{{{TREE}, "f": {{"family": "logistic", "a": 1.0}},
            "a_values": [0.05, 0.5],
            "u0": {{"kind": "indicator", "radius": 1.0, "amplitude": 0.1}},
            "sim": {{"generations": 40, "cells_per_edge": 4,
                     "solve": {{"t_final": 150.0, "dt": 0.1, "snapshot_every": 5.0}}}}}}"#
    );
    let o = run("scan", &cfg, &out, &["--threads", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("scan.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].contains("EXTINCT"), "{csv}");
    assert!(rows[1].contains("PROPAGATING"), "{csv}");
    assert_eq!(manifest(&out)["threads"], 2);
}
