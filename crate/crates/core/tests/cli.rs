use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use subunitary::cli::{validate, CompareReport, RunConfig};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subunitary")).args(args).output().unwrap()
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_owned()
}

fn csv_rows(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_owned();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn bounds_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"measure": {"atoms": [[0.25, 0.5], [1.0, 0.5]]}}"#);
    let out = run(&["bounds", "--config", &cfg]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((v["r_outer"].as_f64().unwrap() - 0.625f64.sqrt()).abs() < 1e-15);
    assert!((v["r_inner"].as_f64().unwrap() - 0.4f64.sqrt()).abs() < 1e-15);
}

#[test]
fn asymptotic_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"measure": {"truncated": {"mu": 0.5}}, "grid": {"points": 21, "r_min": 0.0, "r_max": 0.6}}"#);
    let out_dir = dir.path().join("out");
    let out = run(&["asymptotic", "--config", &cfg, "--output", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&out_dir.join("radial_solution.csv"));
    assert_eq!(header, "r,s,y,rho_s,nu_area");
    assert_eq!(rows.len(), 21);
    let row = &rows[10];
    assert!((row[2] - 0.5 / (1.0 - row[1])).abs() < 1e-12);
}

#[test]
fn exact_writes_density_and_normalization() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{"measure": {{"uniform": {{"a": 0.1, "b": 0.9, "points": 32}}}}, "sample": {{"N": 4, "samples": 1, "seed": 0}},
                "grid": {{"points": 30, "r_min": 0.01, "r_max": 0.99}}, "output": {:?}}}"#,
            out_dir
        ),
    );
    let out = run(&["exact", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!((summary["normalization"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    let (header, rows) = csv_rows(&out_dir.join("exact_density.csv"));
    assert_eq!(header, "s,density");
    assert!(rows.iter().all(|r| r[1] >= -1e-10));
}

#[test]
fn sample_deterministic_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"measure": {"truncated": {"mu": 0.5}}, "sample": {"N": 12, "samples": 25, "seed": 42}}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&["sample", "--config", &cfg, "--output", a.to_str().unwrap(), "--threads", "1"]).status.success());
    assert!(run(&["sample", "--config", &cfg, "--output", b.to_str().unwrap(), "--threads", "2"]).status.success());
    assert_eq!(fs::read(a.join("moduli.csv")).unwrap(), fs::read(b.join("moduli.csv")).unwrap());
    let prov: Value = serde_json::from_slice(&fs::read(a.join("moduli_provenance.json")).unwrap()).unwrap();
    assert_eq!(prov["seed"], 42);
    assert_eq!(prov["N"], 12);
    assert_eq!(prov["zero_fraction"], 0.5);
}

#[test]
fn compare_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"measure": {"uniform": {"a": 0.1, "b": 0.9, "points": 32}}, "sample": {"N": 4, "samples": 50, "seed": 3},
            "grid": {"points": 25}}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = run(&["compare", "--config", &cfg, "--output", d.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let text = fs::read_to_string(a.join("compare_report.json")).unwrap();
    let report: CompareReport = serde_json::from_str(&text).unwrap();
    assert!(report.skipped.is_empty());
    assert!(report.metrics.sup_cdf_distance_exact.is_some());
    assert!(report.metrics.ks_empirical.is_some());
    assert!(report.metrics.saddle_max_relative_error.unwrap() < 1e-8);
    assert!((report.metrics.exact_normalization.unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(report.table.len(), 25);
    assert_eq!(report.provenance.version, env!("CARGO_PKG_VERSION"));

    let mut echoed = report.provenance.config.clone();
    echoed.output = None;
    let original = RunConfig::load(Path::new(&cfg)).unwrap();
    assert_eq!(echoed, original);
    assert_eq!(fs::read(a.join("compare_table.csv")).unwrap(), fs::read(b.join("compare_table.csv")).unwrap());
    let text_b = fs::read_to_string(b.join("compare_report.json")).unwrap();
    assert_eq!(text.replace(a.to_str().unwrap(), ""), text_b.replace(b.to_str().unwrap(), ""));
}

#[test]
fn compare_skips_large_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"measure": {"truncated": {"mu": 0.5}}, "sample": {"N": 8, "samples": 5, "seed": 1}, "exact_max_n": 4, "grid": {"points": 9}}"#,
    );
    let out_dir = dir.path().join("out");
    assert!(run(&["compare", "--config", &cfg, "--output", out_dir.to_str().unwrap()]).status.success());
    let report: CompareReport = serde_json::from_slice(&fs::read(out_dir.join("compare_report.json")).unwrap()).unwrap();
    assert_eq!(report.skipped.len(), 1);
    assert_eq!(report.skipped[0].route, "exact");
    assert!(report.metrics.sup_cdf_distance_exact.is_none());
    assert!(report.table.iter().all(|r| r.y_exact.is_none() && r.y_empirical.is_some()));
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    for bad in [
        r#"{"measure": {"truncated": {"mu": 1.5}}}"#,
        r#"{"measure": {"uniform": {"a": 0.6, "b": 0.2, "points": 8}}}"#,
        r#"{"measure": {"truncated": {"mu": 0.5}}, "unexpected": true}"#,
        r#"{"measure": {"atoms": [[1.2, 1.0]]}}"#,
        "not json",
    ] {
        let cfg = write_config(dir.path(), bad);
        let out = run(&["asymptotic", "--config", &cfg, "--output", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{bad}");
        let diag: Value = serde_json::from_slice(&out.stderr).unwrap();
        assert!(diag["error"].is_string());
    }
    assert!(!out_dir.exists());
}

#[test]
fn missing_output_is_a_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"measure": {"truncated": {"mu": 0.5}}}"#);
    assert_eq!(run(&["asymptotic", "--config", &cfg]).status.code(), Some(1));
    assert_eq!(run(&["exact", "--config", &cfg, "--output", "x"]).status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_two_and_cleans_up() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    // two levels at 0.25 and 0.81: the grid radius 0.5 lands on the pole s = 0.25
    let cfg = write_config(
        dir.path(),
        r#"{"measure": {"atoms": [[0.25, 1.0], [0.81, 1.0]]}, "sample": {"N": 2, "samples": 1, "seed": 0},
            "grid": {"points": 5, "r_min": 0.3, "r_max": 0.7}}"#,
    );
    let out = run(&["exact", "--config", &cfg, "--output", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let diag: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(diag["numerical"], true);
    assert!(!out_dir.join("exact_density.csv").exists());
}

#[test]
fn validate_lists_every_problem() {
    let c = RunConfig::from_json(
        r#"{"measure": {"truncated": {"mu": 0.0}}, "grid": {"points": 1}, "quad": {"panels": 0}}"#,
    )
    .unwrap();
    let keys: Vec<String> = validate(&c).into_iter().map(|v| v.key).collect();
    assert!(keys.len() >= 3, "{keys:?}");
}
