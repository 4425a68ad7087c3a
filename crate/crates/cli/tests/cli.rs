use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// Writes a coarse copy of the desk scenario with `edit` applied.
fn scenario(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let text = std::fs::read_to_string(scenarios().join("desk_case2.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["milp"]["t_s"] = 0.1.into();
    v["milp"]["dt_u"] = 0.5.into();
    edit(&mut v);
    let p = dir.join("scenario.json");
    std::fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p
}

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridstl")).args(args).current_dir(cwd).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn schedule_simulate_verify_round() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), |_| {});
    let out = dir.path().join("out");
    let o = run(&["schedule", "--scenario", s(&sc), "--out", s(&out)], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sched = out.join("schedule.json");
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(&sched).unwrap()).unwrap();
    assert_eq!(doc["status"], "optimal");

    let o = run(&["simulate", "--scenario", s(&sc), "--out", s(&out), "--schedule", s(&sched)], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("trace_linear.csv")).unwrap();
    assert!(csv.starts_with("time,x1,"));
    assert!(!csv.contains('\r'));

    let o = run(
        &["simulate", "--scenario", s(&sc), "--out", s(&out), "--schedule", s(&sched), "--fidelity", "nonlinear"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("trace_nonlinear.csv").is_file());

    let o = run(
        &["verify", "--scenario", s(&sc), "--out", s(&out), "--schedule", s(&sched), "--samples", "6", "--seed", "3"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("verification_linear.json")).unwrap()).unwrap();
    assert_eq!(v["encoding_mismatches"], 0);
    assert_eq!(v["seed"], 3);
}

#[test]
fn case_and_export_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), |_| {});
    let out = dir.path().join("c1");
    let o = run(&["case", "case1", "--scenario", s(&sc), "--out", s(&out)], dir.path());
    for f in ["schedule.json", "trace_linear.csv", "trace_nonlinear.csv", "report.json", "model.lp"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    // the exit code reports the replay verdicts
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(r["linear"]["satisfied"], true);
    let ok = r["nonlinear"]["satisfied"] == true;
    assert_eq!(code(&o), if ok { 0 } else { 2 }, "{}", String::from_utf8_lossy(&o.stdout));
    let o = run(&["export-lp", "--scenario", s(&sc), "--out", s(&out)], dir.path());
    assert_eq!(code(&o), 0);
    let lp = std::fs::read_to_string(out.join("model.lp")).unwrap();
    assert!(lp.contains("Subject To") && lp.contains("Binary"));
}

#[test]
fn default_output_directory_is_relative() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), |v| v["name"] = "tiny".into());
    let o = run(&["export-lp", "--scenario", s(&sc)], dir.path());
    assert_eq!(code(&o), 0);
    assert!(dir.path().join("out/export/model.lp").is_file());
}

#[test]
fn reduce_writes_the_reduced_models() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = run(&["reduce", "--out", s(&out)], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("reduction.json")).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert!(v[0]["reduced"]["a_rd"].as_f64().unwrap() < 0.0);
}

#[test]
fn calibration_without_mismatch_keeps_zero() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), |_| {});
    let out = dir.path().join("cal");
    let o = run(&["calibrate-eps", "--scenario", s(&sc), "--out", s(&out), "--fidelity", "linear"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("calibration.json")).unwrap()).unwrap();
    assert_eq!(v["eps"], 0.0);
}

#[test]
fn infeasible_limits_exit_with_violation() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), |v| v["milp"]["df_d_lim"] = 0.05.into());
    let o = run(&["schedule", "--scenario", s(&sc), "--out", s(dir.path())], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("frequency_limit"));
}

#[test]
fn node_limit_exits_with_solver_limit() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario(dir.path(), |v| {
        v["milp"]["t_s"] = 0.05.into();
        v["milp"]["dt_u"] = 0.2.into();
        v["milp"]["node_limit"] = 2.into();
    });
    let o = run(&["schedule", "--scenario", s(&sc), "--out", s(dir.path())], dir.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn input_errors_exit_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["schedule", "--scenario", "no/such/file.json"], dir.path());
    assert_eq!(code(&o), 4);

    let sc = scenario(dir.path(), |v| v["foo"] = 1.into());
    let o = run(&["schedule", "--scenario", s(&sc)], dir.path());
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("foo"));

    let o = run(&["schedule", "--fidelity", "quantum"], dir.path());
    assert_eq!(code(&o), 4);
    let o = run(&["case", "case9"], dir.path());
    assert_eq!(code(&o), 4);
}
