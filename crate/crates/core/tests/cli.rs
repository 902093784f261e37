use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn clsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clsel")).args(args).output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn simulate(dir: &Path, extra: &[&str]) -> String {
    let out = dir.to_string_lossy().into_owned();
    let mut args = vec!["simulate", "--out", &out];
    args.extend_from_slice(extra);
    let o = clsel(&args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    dir.join("data.csv").to_string_lossy().into_owned()
}

#[test]
fn simulate_writes_requested_shape_and_repeats_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["--model", "common-location", "--d", "10", "--d-star", "8", "--rho", "0.9", "--n", "100", "--seed", "7"];
    let a = simulate(&tmp.path().join("a"), &args);
    let b = simulate(&tmp.path().join("b"), &args);
    let text = std::fs::read_to_string(&a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 101);
    assert!(lines.iter().all(|l| l.split(',').count() == 10));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let m = json(&tmp.path().join("a/manifest.json"));
    assert_eq!(m["config"]["d_star"], 8);
    assert_eq!(m["seed"], 7);
}

#[test]
fn out_of_range_rho_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_string_lossy().into_owned();
    let o = clsel(&["simulate", "--model", "exchangeable", "--d", "4", "--rho", "1.2", "--n", "10", "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("rho") && err.contains("[0, 1)"), "{err}");
    assert!(!tmp.path().join("data.csv").exists());
}

#[test]
fn unparseable_data_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("bad.csv");
    std::fs::write(&data, "a,b\n1,2\n3,x\n").unwrap();
    let out = tmp.path().join("out").to_string_lossy().into_owned();
    let o = clsel(&["select", "--data", &data.to_string_lossy(), "--model", "common-location", "--out", &out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn select_manifest_shows_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(&tmp.path().join("sim"), &["--model", "exchangeable", "--d", "4", "--rho", "0.5", "--n", "40"]);
    let out = tmp.path().join("sel").to_string_lossy().into_owned();
    let o = clsel(&["select", "--data", &data, "--model", "exchangeable", "--out", &out]);
    assert!(matches!(o.status.code(), Some(0 | 3)));
    let m = json(&tmp.path().join("sel/manifest.json"));
    let s = &m["config"]["sampler"];
    assert_eq!(s["tau"], 4.0);
    assert_eq!(s["sweeps"], 40);
    assert_eq!(s["burn_in"], 20);
    assert_eq!(s["xi"], 0.7);
    assert_eq!(s["b"], 10f64.sqrt());
    let r = json(&tmp.path().join("sel/report.json"));
    assert_eq!(r["schema_version"], 1);
    assert_eq!(r["components"], 6);
    let trace = std::fs::read_to_string(tmp.path().join("sel/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 41);
}

#[test]
fn rules_differ_only_in_selection_without_penalty() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(&tmp.path().join("sim"), &["--model", "common-location", "--d", "8", "--rho", "0.9", "--n", "60"]);
    let mut reports = Vec::new();
    for alg in ["cls1", "cls2"] {
        let out = tmp.path().join(alg).to_string_lossy().into_owned();
        let o = clsel(&["select", "--data", &data, "--model", "common-location", "--algorithm", alg, "--lambda", "0", "--out", &out]);
        assert!(matches!(o.status.code(), Some(0 | 3)));
        reports.push(json(&tmp.path().join(alg).join("report.json")));
    }
    let (a, b) = (reports[0].as_object().unwrap(), reports[1].as_object().unwrap());
    let differing: Vec<&String> = a.keys().filter(|k| a[*k] != b[*k]).collect();
    assert_eq!(differing, ["selection"]);
    assert_eq!(
        std::fs::read(tmp.path().join("cls1/trace.csv")).unwrap(),
        std::fs::read(tmp.path().join("cls2/trace.csv")).unwrap()
    );
}

#[test]
fn ordinal_selection_reports_estimate_and_standard_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = simulate(
        &tmp.path().join("sim"),
        &["--model", "ordinal", "--d", "20", "--n", "333", "--case-fraction", "0.2012", "--theta", "-0.3", "--rho", "0.3", "--seed", "5"],
    );
    let text = std::fs::read_to_string(&data).unwrap();
    let cases = text.lines().skip(1).filter(|l| l.ends_with(",1")).count();
    assert_eq!(cases, 67);
    let out = tmp.path().join("sel").to_string_lossy().into_owned();
    let o = clsel(&["select", "--data", &data, "--model", "ordinal", "--out", &out]);
    assert!(matches!(o.status.code(), Some(0 | 3)), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&tmp.path().join("sel/report.json"));
    let est = &r["selection"]["estimate"];
    assert!(est["theta"][0].is_f64());
    assert!(est["jackknife_se"][0].as_f64().unwrap() > 0.0);
    assert_eq!(est["se_delete"], 10);
    assert!(est["size"].as_u64().unwrap() < 20);
    assert_eq!(r["thresholds"].as_array().unwrap().len(), 20);
}

#[test]
fn single_replicate_bench_marks_standard_errors_unavailable() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = tmp.path().join("p.plan");
    std::fs::write(&plan, "experiment = \"table3\"\nreplicates = 1\nn = [20]\nd = [4]\nrho = [0.5]\n").unwrap();
    let out = tmp.path().join("b").to_string_lossy().into_owned();
    let o = clsel(&["bench", "--plan", &plan.to_string_lossy(), "--seed", "1", "--out", &out]);
    assert_eq!(o.status.code(), Some(0));
    let summary = std::fs::read_to_string(tmp.path().join("b/summary.csv")).unwrap();
    let mut lines = summary.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "var_se").unwrap();
    for l in lines {
        assert_eq!(l.split(',').nth(col), Some("NA"));
    }
    for f in ["meta.json", "timing.json"] {
        assert!(tmp.path().join("b").join(f).exists());
    }
    // no temporary files left behind
    assert_eq!(std::fs::read_dir(tmp.path().join("b")).unwrap().count(), 3);
}

#[test]
fn bench_requires_a_seed() {
    let o = clsel(&["bench", "--plan", "x.plan", "--out", "y"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_reports_structural_optimum() {
    let o = clsel(&["oracle", "g0", "--d", "10", "--d-star", "8", "--rho", "0.5"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!((v["uncorrelated"].as_u64(), v["correlated"].as_u64()), (Some(2), Some(2)));
    let o = clsel(&["oracle", "brute", "--d", "10", "--d-star", "8", "--rho", "0.5"]);
    let b: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((b["g0"].as_f64().unwrap() - v["g0"].as_f64().unwrap()).abs() < 1e-12);
    let o = clsel(&["oracle", "brute", "--d", "25", "--d-star", "8", "--rho", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
}
