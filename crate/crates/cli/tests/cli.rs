use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rtme(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtme"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_then_fit_round_trips_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("x.csv");
    let csv = csv.to_str().unwrap();
    let out = rtme(&["generate", "--p", "4", "--n", "30", "--seed", "9", "--out", csv]);
    assert!(out.status.success());

    let again = rtme(&["generate", "--p", "4", "--n", "30", "--seed", "9"]);
    assert_eq!(std::fs::read(csv).unwrap(), again.stdout);

    let rows = rtme::io::load_csv_samples(Path::new(csv), false, false).unwrap();
    let spec = rtme::EllipticalSpec::toeplitz(4, 30, 0.5, rtme::RadialLaw::Cauchy, 9).unwrap();
    assert_eq!(rows.rows(), rtme::sample_elliptical(&spec).unwrap().rows());

    let report = dir.path().join("fit.json");
    let out = rtme(&["fit", "--input", csv, "--alpha", "0.4", "--out", report.to_str().unwrap()]);
    assert!(out.status.success());
    let v = json_file(&report);
    assert_eq!(v["estimate"].as_array().unwrap().len(), 4);
    assert_eq!(v["manifest"]["command"], "fit");
    assert_eq!(v["manifest"]["input_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn select_alpha_reports_call_counts() {
    let out = rtme(&["select-alpha", "--p", "5", "--n", "12", "--grid", "4", "--method", "exact"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["total_rfpi_calls"], 48);
    assert_eq!(v["method"], "exact");

    let out = rtme(&["select-alpha", "--p", "5", "--n", "12", "--grid", "0.2,0.5,0.8"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["total_rfpi_calls"], 3);
    assert_eq!(v["manifest"]["seed"], 1);

    let out = rtme(&["select-alpha", "--p", "5", "--n", "12", "--bisect", "0.05", "0.95", "--eps", "0.01"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["iterations"].as_u64().unwrap() <= 9);
}

#[test]
fn nmse_sweep_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("sweep");
    let out = rtme(&["nmse-sweep", "--p", "5", "--n", "20", "--grid", "5", "--out", stem.to_str().unwrap()]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(stem.with_extension("csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("alpha,nmse,nmse_raw,acvl"));
    let marked: usize = lines.map(|l| l.ends_with(",1") as usize).sum();
    assert_eq!(marked, 1);
    let v = json_file(&stem.with_extension("json"));
    assert_eq!(v["points"].as_array().unwrap().len(), 5);
    assert_eq!(v["selected"][0]["label"], "acvl");
}

#[test]
fn bench_guard_and_report() {
    let out = rtme(&["bench", "--n", "1001"]);
    assert_eq!(out.status.code(), Some(2));

    let out = rtme(&["bench", "--p", "4", "--n", "16", "--grid", "3"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["exact_calls"], 48);
    assert_eq!(v["approx_calls"], 3);
    assert_eq!(v["setting"]["radial"]["law"], "cauchy");
}

#[test]
fn reproduce_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = rtme(&[
        "reproduce", "curves", "--p", "4", "--ns", "12,8", "--gammas", "0.5", "--m", "4", "--out", d,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("curves_p4_n12_g0.5.csv").exists());
    assert!(dir.path().join("curves_p4_n8_g0.5.csv").exists());
    let summary = json_file(&dir.path().join("curves_summary.json"));
    assert_eq!(summary["outcomes"].as_array().unwrap().len(), 2);
    assert_eq!(summary["manifest"]["command"], "reproduce");
    let checks = std::fs::read_to_string(dir.path().join("curves_checks.txt")).unwrap();
    assert_eq!(checks.lines().count(), 2);
}

#[test]
fn exit_codes() {
    assert_eq!(rtme(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(rtme(&["fit"]).status.code(), Some(2));
    assert_eq!(rtme(&["--version"]).status.code(), Some(0));
    assert_eq!(rtme(&["fit", "--input", "/nonexistent/x.csv"]).status.code(), Some(4));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "1,0\n0,a\n").unwrap();
    let out = rtme(&["fit", "--input", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("column 2"));

    let square = dir.path().join("square.csv");
    std::fs::write(&square, "1,0\n0,1\n").unwrap();
    assert_eq!(rtme(&["fit", "--input", square.to_str().unwrap()]).status.code(), Some(3));
    assert_eq!(
        rtme(&["fit", "--input", square.to_str().unwrap(), "--alpha", "1.5"]).status.code(),
        Some(2)
    );
}
