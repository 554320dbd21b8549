use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn barrierkit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_barrierkit"))
        .env("BARRIERKIT_REPORT_DIR", dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(dir: &Path, command: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(format!("{command}.json"))).expect("report written");
    serde_json::from_str(&text).expect("valid json")
}

#[test]
fn barrier_example_and_report_fields() {
    let dir = tempfile::tempdir().unwrap();
    let out = barrierkit(
        dir.path(),
        &["barrier", "--c", "0", "--ell", "2", "--lam1", "1", "--lam2", "1", "--h", "0", "--R", "1"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "barrier");
    for key in ["command", "version", "inputs", "outputs", "verdict", "provenance", "output_hash", "wall_clock_ms"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    let db = r["outputs"]["certificate"]["delta_bar"].as_f64().unwrap();
    assert!((db - (-1.0f64).exp() / 2.0).abs() < 1e-15);
    // stdout carries the outputs
    let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stdout, r["outputs"]);
}

#[test]
fn enclosure_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = barrierkit(dir.path(), &["enclosure", "--lam", "0.5", "--H", "0.1", "--c", "1", "--dist-boundary", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "enclosure");
    let bound = r["outputs"]["bound"].as_f64().unwrap();
    assert!((bound - 0.4).abs() < 1e-12, "{bound}");
    assert_eq!(r["outputs"]["case"], "B");
}

#[test]
fn growth_dichotomy_examples() {
    let dir = tempfile::tempdir().unwrap();
    let out = barrierkit(dir.path(), &["growth", "--sample", "catenoid3d", "--radii", "10:100:10", "--csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "growth");
    let k = r["outputs"]["exponent"].as_f64().unwrap();
    assert!((k - 3.0).abs() <= 0.15, "{k}");
    assert_eq!(r["outputs"]["parabolic"]["value"], Value::Bool(false));
    let csv = std::fs::read_to_string(dir.path().join("growth.csv")).unwrap();
    assert!(csv.lines().count() >= 11);

    let out = barrierkit(dir.path(), &["growth", "--sample", "catenoid2d", "--radii", "10:100:10"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path(), "growth");
    let k = r["outputs"]["exponent"].as_f64().unwrap();
    assert!((k - 2.0).abs() <= 0.1, "{k}");
    assert_eq!(r["outputs"]["parabolic"]["value"], Value::Bool(true));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = barrierkit(dir.path(), &["varifold-check", "--sample", "sphere", "--h", "1"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(report(dir.path(), "varifold-check")["verdict"], "consistent");

    let violated = barrierkit(dir.path(), &["varifold-check", "--sample", "sphere", "--h", "0.5", "--inward-field"]);
    assert_eq!(violated.status.code(), Some(2));
    assert_eq!(report(dir.path(), "varifold-check")["verdict"], "violated");

    // h above lambda_ell is refused
    let err = barrierkit(
        dir.path(),
        &["barrier", "--c", "0", "--ell", "2", "--lam1", "1", "--lam2", "1", "--h", "2", "--R", "1"],
    );
    assert_eq!(err.status.code(), Some(1));
    assert!(!err.stderr.is_empty());

    let bad_file = dir.path().join("bad.txt");
    std::fs::write(&bad_file, "varifold m=3 ell=2 n=1\n0 0 | 1 | 1 0 0 ; 0 1 0 | 0\n").unwrap();
    let err = barrierkit(dir.path(), &["varifold-check", "--input", bad_file.to_str().unwrap(), "--h", "0"]);
    assert_eq!(err.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&err.stderr).contains("line 2"));
}

#[test]
fn reports_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["varifold-check", "--sample", "sphere", "--resolution", "3000", "--h", "1", "--seed", "5"];
    barrierkit(a.path(), &args);
    barrierkit(b.path(), &args);
    let (ra, rb) = (report(a.path(), "varifold-check"), report(b.path(), "varifold-check"));
    assert_eq!(ra["output_hash"], rb["output_hash"]);
    assert_eq!(ra["outputs"], rb["outputs"]);
    // a different seed gives different fields
    barrierkit(b.path(), &["varifold-check", "--sample", "sphere", "--resolution", "3000", "--h", "1", "--seed", "6"]);
    assert_ne!(ra["output_hash"], report(b.path(), "varifold-check")["output_hash"]);
}

#[test]
fn sample_round_trips_through_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("disk.txt");
    let out = barrierkit(
        dir.path(),
        &["sample", "--sample", "disk", "--resolution", "30", "--output", file.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0));
    let out = barrierkit(dir.path(), &["varifold-check", "--input", file.to_str().unwrap(), "--h", "0"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn maximum_principle_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = barrierkit(
        dir.path(),
        &[
            "maxprin", "--sample", "plane", "--radius", "0.99", "--domain", r#"{"kind":"euclidean_ball","rho":1}"#,
            "--R", "0.5", "--level-distance", "0.4",
        ],
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let out = barrierkit(
        dir.path(),
        &[
            "maxprin", "--sample", "catenoid3d", "--extent", "20", "--resolution", "40", "--domain",
            r#"{"kind":"slab","width":4}"#,
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn spectrum_floor() {
    let dir = tempfile::tempdir().unwrap();
    let out = barrierkit(dir.path(), &["spectrum", "--eps", "0.05"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path(), "spectrum");
    assert!(r["outputs"]["discrete_inf"].as_f64().unwrap() >= 0.95 * r["outputs"]["floor"].as_f64().unwrap());
}
