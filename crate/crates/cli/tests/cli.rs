use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn quasibell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasibell"))
        .args(args)
        .env_remove("QUASIBELL_WORKERS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn line_count(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn single_photon_violates_at_perfect_parameters() {
    let v = json(&quasibell(&["ch-optimize", "--state", "single-photon", "--eta", "1", "--xi", "1", "--pdark", "1"]));
    let value = v["result"]["value"].as_f64().unwrap();
    assert!(value > 0.15, "{value}");
    assert_eq!(v["config"]["state"], "single-photon");
}

#[test]
fn squeezed_vacuum_below_threshold_does_not_violate() {
    let v = json(&quasibell(&["ch-optimize", "--state", "tmsv", "--eta", "0.6", "--xi", "1"]));
    assert!(v["result"]["value"].as_f64().unwrap() <= 0.0);
    assert_eq!(v["result"]["converged"], true);
}

#[test]
fn floats_carry_seventeen_digits() {
    let out = quasibell(&["visibility", "--xi", "0.5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("6.6666666666666663e-1"), "{text}");
    let v = json(&quasibell(&["visibility", "--visibility", "0.8"]));
    assert!((v["xi"].as_f64().unwrap() - 0.8 / 1.2).abs() < 1e-15);
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(quasibell(&["ch-optimize", "--eta", "0.9"]).status.code(), Some(2));
    assert_eq!(quasibell(&["ch-optimize", "--state", "qubit"]).status.code(), Some(2));
    assert_eq!(quasibell(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(quasibell(&["ch-optimize", "--config", "/nonexistent.toml", "--state", "tmsv"]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_with_three() {
    let out = quasibell(&["ch-optimize", "--state", "tmsv", "--eta", "1.5"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eta_tilde"));
    assert_eq!(quasibell(&["verify", "--suite", "oracle", "--dim", "8"]).status.code(), Some(3));
}

#[test]
fn threshold_without_violation_reports_no_sign_change() {
    let out = quasibell(&["threshold", "--state", "single-photon", "--xi", "0.01"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no sign change"));
}

#[test]
fn threshold_for_squeezed_vacuum() {
    let v = json(&quasibell(&["threshold", "--state", "tmsv", "--xi", "1", "--pdark", "1", "--tol", "1e-3"]));
    let eta = v["result"]["eta_threshold"].as_f64().unwrap();
    assert!((eta - 0.71).abs() <= 0.01, "{eta}");
}

#[test]
fn default_sweep_has_one_line_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    let out = quasibell(&["sweep", "--state", "single-photon", "--restarts", "1", "--output", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(line_count(&path), 2501);
    let echo: Value = serde_json::from_slice(&fs::read(dir.path().join("grid.csv.run.json")).unwrap()).unwrap();
    assert_eq!(echo["sweep"]["resolution"], 50);
    assert_eq!(echo["simplex"]["restarts"], 1);
}

#[test]
fn sweeps_are_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, workers: &str| {
        let path = dir.path().join(name);
        let out = quasibell(&[
            "sweep",
            "--state",
            "tmsv",
            "--resolution",
            "10",
            "--seed",
            "11",
            "--workers",
            workers,
            "--output",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        path
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "1");
    let c = run("c.csv", "2");
    assert_eq!(line_count(&a), 101);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    let header = fs::read_to_string(&a).unwrap().lines().next().unwrap().to_string();
    assert!(header.ends_with(",r,mask"), "{header}");
}

#[test]
fn json_sweep_reads_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.json");
    let out = quasibell(&[
        "sweep",
        "--state",
        "single-photon",
        "--resolution",
        "4",
        "--format",
        "json",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (grid, offset) = quasibell::sweep::read_grid_json(&fs::read(&path).unwrap()).unwrap();
    assert_eq!(grid.cells.len(), 4);
    assert_eq!(offset, quasibell::sweep::CONTOUR_OFFSET);
    assert!(grid.cells[3][3].value > 0.15);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "state = \"tmsv\"\n[setup]\neta_tilde = 0.6\n[simplex]\nrestarts = 8\n").unwrap();
    let from_file = json(&quasibell(&["ch-optimize", "--config", cfg.to_str().unwrap()]));
    assert_eq!(from_file["config"]["setup"]["eta_tilde"], 0.6);
    assert_eq!(from_file["config"]["simplex"]["restarts"], 8);
    assert!(from_file["result"]["value"].as_f64().unwrap() <= 0.0);
    let overridden = json(&quasibell(&["ch-optimize", "--config", cfg.to_str().unwrap(), "--eta", "1"]));
    assert_eq!(overridden["config"]["setup"]["eta_tilde"], 1.0);
    assert_eq!(overridden["config"]["state"], "tmsv");
    assert!(overridden["result"]["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn output_file_gets_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("opt.json");
    let out = quasibell(&["ch-optimize", "--state", "single-photon", "-o", path.to_str().unwrap()]);
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    let echo: Value = serde_json::from_slice(&fs::read(dir.path().join("opt.json.run.json")).unwrap()).unwrap();
    assert_eq!(report["config"], echo);
}

#[test]
fn verify_runs_every_suite() {
    let out = quasibell(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    for suite in ["oracle", "factorization", "transform", "lhv"] {
        assert!(text.contains(&format!("PASS {suite}:")), "{text}");
    }
}

#[test]
fn verify_single_suites() {
    let lhv = String::from_utf8(quasibell(&["verify", "--suite", "lhv"]).stdout).unwrap();
    assert!(lhv.contains("kernel max 2.0"), "{lhv}");
    let oracle = quasibell(&["verify", "--suite", "oracle"]);
    assert!(oracle.status.success());
    let text = String::from_utf8(oracle.stdout).unwrap();
    let deviation: f64 = text.split("max deviation ").nth(1).unwrap().split(' ').next().unwrap().parse().unwrap();
    assert!(deviation < 1e-8, "{text}");
}

#[test]
fn pi_s_reads_count_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("counts.csv");
    fs::write(&path, "n,p\n0,0.5\n1,0.25\n2,0.25\n").unwrap();
    let v = json(&quasibell(&["pi-s", "--input", path.to_str().unwrap(), "--s", "-1", "--s", "-0.5", "--s", "0"]));
    let values = v["values"].as_array().unwrap();
    assert_eq!(values[0]["pi"], 0.5);
    // weights ((s+1)/(s-1))^n: -1/3 at s = -0.5, -1 at s = 0
    assert!((values[1]["pi"].as_f64().unwrap() - (0.5 - 0.25 / 3.0 + 0.25 / 9.0)).abs() < 1e-15);
    assert!((values[2]["pi"].as_f64().unwrap() - 0.5).abs() < 1e-15);
    fs::write(&path, "0,0.5\n2,0.5\n").unwrap();
    assert_eq!(quasibell(&["pi-s", "--input", path.to_str().unwrap()]).status.code(), Some(2));
}
