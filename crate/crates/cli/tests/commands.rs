use std::fs;
use std::path::Path;
use std::process::Command;

use simplicial::problem::{builtin, serialize_problem};
use simplicial_cli::RunReport;

fn run(args: &[&str]) -> (i32, String, String) {
    run_env(args, &[])
}

fn run_env(args: &[&str], env: &[(&str, &str)]) -> (i32, String, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_simplicial"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn write_builtin(dir: &Path, name: &str) -> String {
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, serialize_problem(&builtin::by_name(name, 0.1).unwrap()).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn report(stdout: &str) -> RunReport {
    serde_json::from_str(stdout).unwrap()
}

#[test]
fn solve_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_builtin(dir.path(), "example31");
    let (code, out, _) = run(&["--json", "solve", &file, "--w", "0.5,0.5,0", "--w", "1,0,0"]);
    assert_eq!(code, 0);
    let rep = report(&out);
    let points = rep.summary["points"].as_array().unwrap();
    let x: Vec<f64> = serde_json::from_value(points[0]["x"].clone()).unwrap();
    assert!((x[0] + 0.25).abs() < 1e-12 && (x[1] + 0.25).abs() < 1e-12 && x[2].abs() < 1e-12);
    let origin: Vec<f64> = serde_json::from_value(points[1]["x"].clone()).unwrap();
    assert!(origin.iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn solve_ridge_vertex_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_builtin(dir.path(), "ridge");
    let (code, out, _) = run(&["--json", "solve", &file, "--w", "0,1"]);
    assert_eq!(code, 0);
    let x: Vec<f64> = serde_json::from_value(report(&out).summary["points"][0]["x"].clone()).unwrap();
    assert_eq!(x, vec![0.0; 5]);
}

#[test]
fn json_report_round_trips_and_is_deterministic() {
    let args = ["--json", "verify", "--builtin", "example32", "--resolution", "10"];
    let (code, first, _) = run(&args);
    assert_eq!(code, 0);
    let (_, second, _) = run_env(&args, &[("SIMPLICIAL_THREADS", "1")]);
    assert_eq!(first, second);
    let rep = report(&first);
    assert_eq!(serde_json::to_string_pretty(&rep).unwrap(), first.trim_end());
    assert_eq!(rep.inputs_digest.len(), 64);
    assert_eq!(rep.exit_status, 0);
    let (_, other, _) = run(&["--json", "verify", "--builtin", "example32", "--resolution", "11"]);
    assert_ne!(report(&other).inputs_digest, rep.inputs_digest);
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"family\": \"example31\",").unwrap();
    let (code, _, err) = run(&["solve", bad.to_str().unwrap(), "--w", "1,0,0"]);
    assert_eq!(code, 2);
    assert!(err.contains("line"));
    assert_eq!(run(&["atlas", "--builtin", "example31", "--resolution", "0"]).0, 2);
    assert_eq!(run(&["solve", "--builtin", "example31", "--w", "0.5,0.6,0"]).0, 2);
    assert_eq!(run(&["solve", "--builtin", "nope", "--w", "1"]).0, 2);
    assert_eq!(run(&["perturb", "--builtin", "example31", "--track"]).0, 2);
    assert_eq!(run(&["solve", "missing.json", "--w", "1,0,0"]).0, 2);
}

#[test]
fn mismatched_declared_dimensions_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.json");
    fs::write(&file, r#"{"family": "example32", "n": 4}"#).unwrap();
    let (code, _, err) = run(&["solve", file.to_str().unwrap(), "--w", "1,0,0"]);
    assert_eq!(code, 2);
    assert!(err.contains("dimension"));
}

#[test]
fn solver_failure_exits_3() {
    let (code, _, err) = run(&["solve", "--builtin", "example32", "--w", "0.2,0.3,0.5", "--max-iter", "1", "--grad-tol", "1e-30"]);
    assert_eq!(code, 3, "{err}");
}

#[test]
fn verify_dumps_origin_witness() {
    let (code, out, _) = run(&["verify", "--builtin", "example31"]);
    assert_eq!(code, 1);
    assert!(out.contains("simplicial certificate: FAIL"));
    assert!(out.contains("corank 2 at node 0 w = [1.0,0.0,0.0]"));
}

#[test]
fn atlas_exports_and_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = run(&["atlas", "--builtin", "example31", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(out.contains("NOT injective"));
    let csv = fs::read_to_string(dir.path().join("atlas.csv")).unwrap();
    assert!(csv.starts_with("node,w1,w2,w3,x1,x2,x3,f1,f2,f3,residual,corank,face,status"));
    assert_eq!(csv.lines().count(), 232);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("atlas.json")).unwrap()).unwrap();
    assert_eq!(doc["diagnostics"]["corank"]["max_corank"], 2);
    let (_, out, _) = run(&["atlas", "--builtin", "example32", "--resolution", "20"]);
    assert!(out.contains("simplicial certificate: PASS"));
}

#[test]
fn perturb_commands() {
    let dir = tempfile::tempdir().unwrap();
    let file = write_builtin(dir.path(), "example31");
    let (code, out, _) = run(&["--json", "perturb", &file, "--trials", "20", "--scale", "0.1", "--seed", "7"]);
    assert_eq!(code, 0);
    assert_eq!(report(&out).summary["trials_with_corank2"], 0);
    let g = write_builtin(dir.path(), "remark_g");
    let (code, out, _) = run(&["perturb", &g, "--track", "--scale", "1e-3"]);
    assert_eq!(code, 0);
    assert!(out.contains("persists in 20 of 20 trials"));
    let (code, out, _) = run(&["perturb", "--builtin", "example32", "--stability", "--resolution", "8"]);
    assert_eq!(code, 0);
    assert!(out.contains("monotone: true"));
}

#[test]
fn locate_reports_general_position() {
    let (code, out, _) = run(&["locate", "--points", "0,0;1,1;2,2", "--resolution", "6"]);
    assert_eq!(code, 0);
    assert!(out.contains("general position: false"));
    assert!(out.contains("hull membership: 100.0%"));
    assert_eq!(run(&["locate", "--builtin", "example32"]).0, 2);
}

#[test]
fn ridge_to_stdout() {
    let (code, out, _) = run(&["ridge", "--builtin", "ridge", "--resolution", "4", "--standardize"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("w1,w2,lambda,theta_1"));
    assert!(out.contains("0,1,inf,"));
}

#[test]
fn zero_threads_rejected() {
    assert_eq!(run_env(&["verify", "--builtin", "example32"], &[("SIMPLICIAL_THREADS", "0")]).0, 2);
}
