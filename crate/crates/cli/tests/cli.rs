//! End-to-end tests of the `dald` binary: exit codes, file outputs, and the
//! replay guarantee.

use std::path::Path;
use std::process::{Command, Output};

fn dald(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dald"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn counterexample_with_cap_three_converges_to_the_origin() {
    let dir = tempfile::tempdir().unwrap();
    let out = dald(&[
        "run",
        "--problem", "counterexample",
        "--criterion", "B4",
        "--vmax", "3",
        "--x0", "1,1,1",
        "--eps-dual", "1e-6",
        "--max-inner", "100000",
        "--max-outer", "100000",
        "--solver", "analytic-linear",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&dir.path().join("summary.json"));
    assert_eq!(summary["status"], "converged");
    let x: Vec<f64> = serde_json::from_value(summary["x"].clone()).unwrap();
    assert!(x.iter().all(|v| v.abs() <= 1e-3), "final x {x:?}");
}

#[test]
fn counterexample_with_cap_one_fails_within_300_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dald(&[
        "run",
        "--problem", "counterexample",
        "--criterion", "B4",
        "--vmax", "1",
        "--x0", "1,1,1",
        "--max-inner", "300",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let summary = read_json(&dir.path().join("summary.json"));
    assert_ne!(summary["status"], "converged");
    assert!(summary["primal_inf"].as_f64().unwrap() > 1e-3);
}

#[test]
fn lnf_run_matches_oracle_within_a_tenth_percent() {
    let dir = tempfile::tempdir().unwrap();
    let out = dald(&[
        "run",
        "--problem", "lnf",
        "--rows", "6",
        "--cols", "6",
        "--parts", "4",
        "--seed", "50",
        "--criterion", "B4",
        "--vmax", "2",
        "--max-inner", "100000",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&dir.path().join("summary.json"));
    assert_eq!(summary["status"], "converged");
    assert!(summary["oracle_gap"].as_f64().unwrap() <= 1e-3);
}

#[test]
fn replay_from_summary_reproduces_the_trace_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let out = dald(&[
        "run",
        "--problem", "lnf",
        "--rows", "6",
        "--cols", "6",
        "--parts", "4",
        "--seed", "3",
        "--criterion", "B4",
        "--vmax", "2",
        "--max-inner", "100000",
        "--out", first.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = dald(&[
        "run",
        "--config", first.join("summary.json").to_str().unwrap(),
        "--out", second.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let a = std::fs::read(first.join("trace.csv")).unwrap();
    let b = std::fs::read(second.join("trace.csv")).unwrap();
    assert_eq!(a, b, "replayed trace differs");
}

#[test]
fn trace_csv_header_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    dald(&[
        "run",
        "--problem", "counterexample",
        "--vmax", "2",
        "--max-inner", "50",
        "--out", dir.path().to_str().unwrap(),
    ]);
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("k,v,cum_inner,objective,al_value,primal_inf,dual_inf"));
}

#[test]
fn sweep_vmax_writes_the_grid_and_rejects_empty_lists() {
    let dir = tempfile::tempdir().unwrap();
    let out = dald(&[
        "sweep-vmax",
        "--problem", "counterexample",
        "--x0", "1,1,1",
        "--eps-dual", "1e-6",
        "--max-inner", "20000",
        "--max-outer", "100000",
        "--solver", "analytic-linear",
        "--vmax-list", "1,3",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("vmax,seed,status,cumulative_inner,outer_iters,objective"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("1,0,diverged") || rows[0].starts_with("1,0,max-"), "{}", rows[0]);
    assert!(rows[1].starts_with("3,0,converged"), "{}", rows[1]);

    let out = dald(&["sweep-vmax", "--problem", "counterexample", "--vmax-list", "", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gen_lnf_emits_replayable_files() {
    let dir = tempfile::tempdir().unwrap();
    let dot = dir.path().join("grid.dot");
    let out = dald(&[
        "gen-lnf",
        "--rows", "6",
        "--cols", "6",
        "--parts", "4",
        "--seed", "7",
        "--out", dir.path().to_str().unwrap(),
        "--dot", dot.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let instance = read_json(&dir.path().join("instance.json"));
    assert_eq!(instance["nodes"].as_array().unwrap().len(), 36);
    let problem = read_json(&dir.path().join("problem.json"));
    assert_eq!(problem["blocks"].as_array().unwrap().len(), 4);
    assert!(std::fs::read_to_string(dot).unwrap().starts_with("digraph"));

    // the generated problem file runs directly
    let run_dir = dir.path().join("run");
    let out = dald(&[
        "run",
        "--problem", dir.path().join("problem.json").to_str().unwrap(),
        "--vmax", "2",
        "--max-inner", "100000",
        "--out", run_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn validate_accepts_the_reference_matrix_and_flags_problems() {
    let dir = tempfile::tempdir().unwrap();
    dald(&["gen-lnf", "--rows", "6", "--cols", "6", "--parts", "4", "--seed", "7", "--out", dir.path().to_str().unwrap()]);
    let problem = dir.path().join("problem.json");

    let good = dir.path().join("chain.json");
    std::fs::write(&good, "[[3,1,1,1],[0,2,1,1],[0,0,1,1],[0,0,0,0]]").unwrap();
    let out = dald(&["validate", problem.to_str().unwrap(), good.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("no stage-coupling warnings"));

    // bad diagonal: hard violation, exit 1
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "[[2,1,1,1],[0,2,1,1],[0,0,1,1],[0,0,0,0]]").unwrap();
    let out = dald(&["validate", problem.to_str().unwrap(), bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diagonal"));

    // coupled blocks sharing a stage: warning text, still exit 0
    let parallel = dir.path().join("parallel.json");
    std::fs::write(&parallel, "[[1,0,1,0],[0,1,1,0],[0,0,1,1],[0,0,0,0]]").unwrap();
    let out = dald(&["validate", problem.to_str().unwrap(), parallel.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("warning:"));

    // malformed JSON: exit 1
    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{not json").unwrap();
    let out = dald(&["validate", problem.to_str().unwrap(), garbage.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_problem_is_a_usage_error() {
    let out = dald(&["run", "--problem", "nonesuch", "--out", "/tmp"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown builtin"));
}

#[test]
fn output_root_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dald"))
        .env("DALD_OUT_DIR", dir.path())
        .args([
            "run",
            "--problem", "counterexample",
            "--vmax", "1",
            "--max-inner", "10",
            "--out", "nested/run1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("nested/run1/trace.csv").exists());
}
