use std::path::Path;
use std::process::{Command, Output};

fn epsw(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epsw")).args(args).current_dir(dir).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn not_core_exits_two_with_explanation() {
    let dir = tempfile::tempdir().unwrap();
    let out = epsw(&["nongroup", "--scenario", "uniform2", "--w1", "0.5"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["result"]["is_core"], false);
    assert!((v["result"]["w1_star"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-9);
    assert!(v["result"]["explanation"].as_str().unwrap().contains("w1*"));
}

#[test]
fn core_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = epsw(&["nongroup", "--scenario", "uniform2", "--w1", "0.2"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = &json(&out)["result"];
    assert!((r["core"]["w2"].as_f64().unwrap() - 0.6).abs() < 1e-9);
    let out = epsw(&["group-verify", "--scenario", "fig2", "--w1", "completed", "--w2", "linear:0.5"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_scenario_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = epsw(&["group-verify", "--scenario", "nope"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
    assert!(out.stdout.is_empty());
}

#[test]
fn phi_curve_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = epsw(&["phi-curve", "--scenario", "fig2", "--out", "phi.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("phi.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("epsilon,phi,w1hat_inv,ndc_slack"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert!((first[1] - 0.456435464588).abs() < 1e-11);
    assert_eq!(csv.lines().count(), 2050);

    let side: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("phi.csv.manifest.json")).unwrap()).unwrap();
    let m = &side["manifest"];
    assert_eq!(m["command"], "phi-curve");
    assert_eq!(m["scenario"], "fig2");
    assert_eq!(m["tolerances"]["grid"], 2049);
    assert!(m["wall_time"].is_null());
    assert_eq!(m["scenario_hash"].as_str().unwrap().len(), 64);
    assert!((side["summary"]["eps_star"].as_f64().unwrap() - 0.247).abs() < 5e-4);
}

#[test]
fn record_time_fills_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = epsw(&["bertrand", "--scenario", "fig2", "--record-time"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["manifest"]["wall_time"].as_f64().is_some());
}

#[test]
fn scenario_file_errors_are_located() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "name = \"bad\"\nregime = \"bias\"\nlambda = 1.5\n\n[market]\nbeta = 0.5\n\
         dist_a = { kind = \"uniform\" }\ndist_b = { kind = \"uniform\" }\n",
    )
    .unwrap();
    let out = epsw(&["bias-interval", "--scenario", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("beta must be >= 1"), "{err}");
    assert!(err.contains("lambda outside (0,1)"), "{err}");
    assert!(err.contains("bad.toml:3"), "{err}");
    assert!(err.contains("bad.toml:6"), "{err}");
}

#[test]
fn scenario_file_runs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    std::fs::write(
        &path,
        "name = \"s\"\nregime = \"group\"\n\n[market]\nbeta = 2.0\ndist_a = { kind = \"uniform\" }\n\
         dist_b = { kind = \"power\", k = 2 }\n\n[wages]\nw1 = \"completed\"\nw2 = \"linear:0.5\"\n",
    )
    .unwrap();
    let out = epsw(&["group-exists", "--scenario", "s.toml"], dir.path());
    assert!(matches!(out.status.code(), Some(0) | Some(2)), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["manifest"]["scenario"], "s");
}
