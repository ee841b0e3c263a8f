use std::path::PathBuf;
use std::process::Command;

use cosmoplan_core::Plan;

fn data(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel).to_string_lossy().into_owned()
}

fn run(args: &[&str], solver: Option<&str>) -> (i32, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cosmoplan"));
    cmd.args(args);
    if let Some(s) = solver {
        cmd.env("COSMOPLAN_SOLVER", s);
    }
    let out = cmd.output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn solver_ready() -> bool {
    Command::new("z3").arg("-version").output().is_ok()
}

#[test]
fn decompose_succeeds_and_writes_locals() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (code, err) = run(
        &["decompose", "--mission", &data("warehouse/global.json"), "--alphabets", &data("warehouse/alphabets.json"), "--out", out],
        None,
    );
    assert_eq!(code, 0, "{err}");
    assert!(dir.path().join("k1.json").exists() && dir.path().join("k2.json").exists());
}

#[test]
fn unreadable_input_is_an_environment_error() {
    let (code, err) = run(&["decompose", "--mission", "/nonexistent.json", "--alphabets", &data("warehouse/alphabets.json")], None);
    assert_eq!(code, 3);
    assert!(err.contains("/nonexistent.json"));
}

#[test]
fn missing_solver_is_an_environment_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = run(
        &[
            "plan",
            "--scene",
            &data("warehouse/scene.json"),
            "--locals",
            &data("warehouse/expected/k2.json"),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        Some("/no/such/solver"),
    );
    assert_eq!(code, 3, "{err}");
}

#[test]
fn corrupted_plan_fails_check_with_the_instant() {
    if !solver_ready() {
        eprintln!("skipping: no solver");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let k2 = data("warehouse/expected/k2.json");
    let scene = data("warehouse/scene.json");
    let (code, err) = run(&["plan", "--scene", &scene, "--locals", &k2, "--robot", "1", "--out", out], None);
    assert_eq!(code, 0, "{err}");

    let good = dir.path().join("plan1.json");
    let (code, err) = run(&["check", "--scene", &scene, "--plan", good.to_str().unwrap(), "--mission", &k2], None);
    assert_eq!(code, 0, "{err}");

    let mut plan = Plan::load(&good).unwrap();
    plan.steps[0].pose = [0.0, 1000.0, 0.0];
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, plan.to_json_string()).unwrap();
    let (code, err) = run(&["check", "--scene", &scene, "--plan", bad.to_str().unwrap(), "--mission", &k2], None);
    assert_eq!(code, 2);
    assert!(err.contains("violated at instant"), "{err}");
}

#[test]
fn empty_plans_simulate_to_an_empty_run() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.json");
    std::fs::write(&empty, Plan { robot: 1, steps: vec![], options: Default::default() }.to_json_string()).unwrap();
    let (code, err) = run(
        &[
            "simulate",
            "--scene",
            &data("warehouse/scene.json"),
            "--plans",
            empty.to_str().unwrap(),
            "--out",
            dir.path().to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(code, 0, "{err}");
    assert!(dir.path().join("sim_log.csv").exists());
}
