//! End-to-end tests against the compiled binary: artifact layout, exit
//! codes, stderr error shape, and byte-level reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_peergrad"))
}

fn run_args(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    assert_eq!(text.trim_end().lines().count(), 1, "stderr not one line: {text}");
    serde_json::from_str(text.trim_end()).expect("stderr is JSON")
}

const EXPERIMENT: &str = r#"
[graph]
kind = "geometric"
n = 10
radius = 0.5
seed = 3

[objective]
kind = "quadratic"
components = 6
dim = 3
data_seed = 2

[algorithm]
id = "gt-saga"

[schedule]
kind = "constant"
alpha = 0.05

[budget]
rounds = 300

[seeds]
master = 21
"#;

const COMPARISON: &str = r#"
[graph]
kind = "ring"
n = 6

[objective]
kind = "quadratic"
components = 4
dim = 2
data_seed = 5

[seeds]
master = 3

[[runs]]
label = "plain"
algorithm = { id = "dsgd" }
schedule = { kind = "constant", alpha = 0.02 }
budget = { rounds = 200 }

[[runs]]
label = "tracked"
algorithm = { id = "gt-saga" }
schedule = { kind = "constant", alpha = 0.05 }
budget = { rounds = 200 }
"#;

#[test]
fn gen_graph_writes_artifacts_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    for out in [&out1, &out2] {
        let r = run_args(&[
            "gen-graph",
            "--n",
            "15",
            "--radius",
            "0.45",
            "--seed",
            "6",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        let summary = stdout_json(&r);
        assert_eq!(summary["n"], 15);
        assert!(summary["lambda"].as_f64().unwrap() < 1.0);
    }
    for name in ["graph.txt", "coords.txt", "weights.csv"] {
        let a = fs::read(out1.join(name)).unwrap();
        let b = fs::read(out2.join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} differs between identical invocations");
    }
    // edge list: node count then one edge per line
    let graph = fs::read_to_string(out1.join("graph.txt")).unwrap();
    assert_eq!(graph.lines().next().unwrap(), "15");
}

#[test]
fn gen_graph_ring_has_no_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let r = run_args(&["gen-graph", "--kind", "ring", "--n", "8", "--out", out.to_str().unwrap()]);
    assert!(r.status.success());
    assert!(out.join("graph.txt").exists());
    assert!(!out.join("coords.txt").exists());
}

#[test]
fn gen_data_writes_balanced_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let r = run_args(&[
        "gen-data",
        "--samples",
        "30",
        "--dim",
        "4",
        "--separation",
        "1.5",
        "--seed",
        "9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(r.status.success());
    let summary = stdout_json(&r);
    assert_eq!(summary["samples"], 30);
    assert_eq!(summary["positives"], 15);
    let text = fs::read_to_string(out.join("data.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "label,x_1,x_2,x_3,x_4");
    assert_eq!(text.lines().count(), 31);
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_trace_and_is_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), EXPERIMENT);
    let out1 = dir.path().join("r1");
    let out2 = dir.path().join("r2");
    for out in [&out1, &out2] {
        let r = run_args(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        let summary = stdout_json(&r);
        assert_eq!(summary["rounds"], 300);
        assert!(summary["final_residual"].as_f64().unwrap() < 1e-10);
    }
    let a = fs::read(out1.join("trace.csv")).unwrap();
    let b = fs::read(out2.join("trace.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "round,epochs,avg_residual,consensus_error,tracking_error,grad_evals"
    );
    assert_eq!(text.lines().count(), 302); // header + rounds 0..=300
}

#[test]
fn set_overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), EXPERIMENT);
    let out = dir.path().join("r");
    let r = run_args(&[
        "run",
        "--config",
        &config,
        "--set",
        "budget.rounds=50",
        "--set",
        "trace.cadence=10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(r.status.success());
    let text = fs::read_to_string(out.join("trace.csv")).unwrap();
    // rounds 0, 10, 20, 30, 40, 50 plus header
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn solve_ref_writes_minimizer_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), EXPERIMENT);
    let out = dir.path().join("s");
    let r = run_args(&["solve-ref", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let summary = stdout_json(&r);
    assert!(summary["grad_norm"].as_f64().unwrap() <= 1e-10);
    assert_eq!(summary["total_components"], 60);

    let theta = fs::read_to_string(out.join("theta_star.csv")).unwrap();
    assert_eq!(theta.lines().next().unwrap(), "theta_star");
    assert_eq!(theta.lines().count(), 4); // header + 3 coordinates

    let stats: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("stats.json")).unwrap()).unwrap();
    assert!(stats["mu"].as_f64().unwrap() > 0.0);
    assert!(stats["kappa"].as_f64().unwrap() >= 1.0);
}

#[test]
fn compare_writes_per_run_and_aligned_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), COMPARISON);
    let out = dir.path().join("c");
    let r = run_args(&["compare", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let summary = stdout_json(&r);
    assert_eq!(summary["runs"].as_array().unwrap().len(), 2);

    assert!(out.join("plain.csv").exists());
    assert!(out.join("tracked.csv").exists());
    let table = fs::read_to_string(out.join("comparison.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "epochs,plain,tracked");
    // every row: an epoch column plus one cell per run (possibly empty)
    for line in lines {
        assert_eq!(line.split(',').count(), 3, "bad row {line:?}");
    }
}

#[test]
fn validation_failures_exit_one_with_json_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), EXPERIMENT);
    let out = dir.path().join("x");

    // unknown config key
    let r = run_args(&[
        "run",
        "--config",
        &config,
        "--set",
        "budget.runds=50",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(1));
    let err = stderr_json(&r);
    assert_eq!(err["kind"], "validation");
    assert!(err["error"].as_str().unwrap().contains("runds"));

    // missing config file
    let r = run_args(&["run", "--config", "/nonexistent.toml", "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(1));
    assert_eq!(stderr_json(&r)["kind"], "validation");

    // malformed command line
    let r = run_args(&["run", "--config"]);
    assert_eq!(r.status.code(), Some(1));
    assert_eq!(stderr_json(&r)["kind"], "validation");
}

#[test]
fn runtime_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), EXPERIMENT);
    let out = dir.path().join("x");
    let r = run_args(&[
        "run",
        "--config",
        &config,
        "--set",
        "schedule.alpha=1e9",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(2));
    let err = stderr_json(&r);
    assert_eq!(err["kind"], "runtime");
    assert!(!out.join("trace.csv").exists(), "no trace on failure");
}

#[test]
fn help_exits_zero() {
    let r = run_args(&["--help"]);
    assert!(r.status.success());
    assert!(String::from_utf8_lossy(&r.stdout).contains("gen-graph"));
}
