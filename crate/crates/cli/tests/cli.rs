//! End-to-end runs of the `thermoshield` binary.

use std::process::{Command, Output};

use serde_json::Value;

fn thermoshield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thermoshield"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

const CONVECTION_1: &str = r#"{"type":"convection","beta":1}"#;

#[test]
fn radial_ball_energy() {
    let v = json_stdout(&thermoshield(&["radial", "--n", "2", "--law", CONVECTION_1, "--R", "1"]));
    assert!((v["total"].as_f64().unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    assert_eq!(v["dirichlet"].as_f64().unwrap(), 0.0);
}

#[test]
fn law_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("law.json");
    std::fs::write(&path, CONVECTION_1).unwrap();
    let v = json_stdout(&thermoshield(&["radial", "--n", "2", "--law", path.to_str().unwrap(), "--R", "1"]));
    assert!((v["total"].as_f64().unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn regime_c_keeps_the_body_bare() {
    let v = json_stdout(&thermoshield(&["regime", "--n", "3", "--beta", "0.8", "--rmax", "5"]));
    assert_eq!(v["regime"], "c");
    assert_eq!(v["optimal_radius"].as_f64().unwrap(), 1.0);
}

#[test]
fn verify_regimes_passes() {
    let v = json_stdout(&thermoshield(&["verify", "regimes", "--n", "2", "--beta", "0.5", "--rmax", "3"]));
    assert_eq!(v["passed"], true);
    assert_eq!(v["measured"]["optimal_radius"].as_f64().unwrap(), 1.0);
    assert!((v["measured"]["threshold_radius"].as_f64().unwrap() - 4.92).abs() < 0.01);
}

#[test]
fn verify_perturbation_defaults() {
    let v = json_stdout(&thermoshield(&["verify", "perturbation"]));
    assert_eq!(v["passed"], true);
}

#[test]
fn verify_truncation_on_small_mesh() {
    let v = json_stdout(&thermoshield(&["verify", "truncation", "--mesh", "16,64", "--levels", "16"]));
    assert_eq!(v["passed"], true);
}

#[test]
fn invalid_inputs_exit_2() {
    let cases: &[&[&str]] = &[
        &["radial", "--n", "1", "--law", CONVECTION_1, "--R", "1"],
        &["radial", "--n", "2", "--law", "{not json", "--R", "1"],
        &["radial", "--n", "2", "--law", CONVECTION_1, "--R", "0.5"],
        &["regime", "--n", "2", "--beta", "-1", "--rmax", "3"],
        &["verify", "unknown"],
        &["solve", "--pair", "{}", "--law", CONVECTION_1],
        &["frobnicate"],
    ];
    for args in cases {
        let out = thermoshield(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn solver_budget_exhaustion_exits_3() {
    let out = thermoshield(&[
        "solve",
        "--pair",
        r#"{"inner":{"a0":1},"outer":{"a0":2,"cos":[0.1]}}"#,
        "--law",
        CONVECTION_1,
        "--mesh",
        "16,64",
        "--max-iters",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("did not converge"));
}

fn circles_json(r1: f64, r2: f64) -> String {
    format!(r#"{{"inner":{{"a0":{r1},"cos":[],"sin":[]}},"outer":{{"a0":{r2},"cos":[],"sin":[]}}}}"#)
}

#[test]
fn solve_writes_field() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("u.csv");
    let v = json_stdout(&thermoshield(&[
        "solve",
        "--pair",
        &circles_json(1.0, 2.0),
        "--law",
        CONVECTION_1,
        "--mesh",
        "16,64",
        "--out-field",
        field.to_str().unwrap(),
    ]));
    let radial = json_stdout(&thermoshield(&["radial", "--n", "2", "--law", CONVECTION_1, "--R", "2"]));
    let exact = radial["total"].as_f64().unwrap();
    assert!((v["energy"]["total"].as_f64().unwrap() / exact - 1.0).abs() < 1e-2);
    let text = std::fs::read_to_string(&field).unwrap();
    assert!(text.starts_with("16,64,0,1,2\n"));
    assert_eq!(text.lines().count(), 1 + 16);
}

#[test]
fn sweep_rows_follow_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let spec = r#"{"axis":"R","lo":1,"hi":3,"count":5,"n":2,"law":{"type":"convection","beta":1}}"#;
    let status = thermoshield(&["sweep", "--spec", spec, "--out", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,total,dirichlet,boundary,penalty,trace"));
    let xs: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(xs, vec![1.0, 1.5, 2.0, 2.5, 3.0]);
}

#[test]
fn sweep_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"{"axis":"beta","lo":0.1,"hi":5,"count":40,"scale":"log","n":3,"R":2.5}"#;
    let mut outputs = Vec::new();
    for threads in ["1", "4"] {
        let path = dir.path().join(format!("s{threads}.csv"));
        let out = Command::new(env!("CARGO_BIN_EXE_thermoshield"))
            .env("THERMOSHIELD_THREADS", threads)
            .args(["sweep", "--spec", spec, "--out", path.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn sweep_rejects_bad_specs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    for spec in [
        r#"{"axis":"R","lo":3,"hi":1,"count":5,"law":{"type":"convection","beta":1}}"#,
        r#"{"axis":"R","lo":1,"hi":3,"count":1,"law":{"type":"convection","beta":1}}"#,
        r#"{"axis":"R","lo":1,"hi":3,"count":4}"#,
        r#"{"axis":"volume","lo":1,"hi":3,"count":4}"#,
    ] {
        let r = thermoshield(&["sweep", "--spec", spec, "--out", out.to_str().unwrap()]);
        assert_eq!(r.status.code(), Some(2), "{spec}");
    }
}

#[test]
fn optimize_emits_pair_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let v = json_stdout(&thermoshield(&[
        "optimize",
        "--mode",
        "penalized",
        "--law",
        CONVECTION_1,
        "--lambda",
        "0.1",
        "--init",
        &circles_json(1.0, 1.8),
        "--mesh",
        "12,48",
        "--order",
        "2",
        "--max-iters",
        "3",
        "--trace",
        trace.to_str().unwrap(),
    ]));
    assert!(v["pair"]["outer"]["a0"].as_f64().unwrap() > 1.0);
    assert!(v["energy"]["total"].as_f64().unwrap().is_finite());
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.lines().count() >= 2);
}

#[test]
fn optimize_mode_needs_its_parameter() {
    let out = thermoshield(&[
        "optimize", "--mode", "constrained", "--law", CONVECTION_1, "--lambda", "0.1", "--init", &circles_json(1.0, 2.0),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = thermoshield(&[
        "optimize", "--mode", "spherical", "--law", CONVECTION_1, "--M", "20", "--init", &circles_json(1.0, 2.0),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
