mod common;

use common::{desk_case2, scenario_path, trace};
use gridstl::cases::{apply_case, run_case, CASE3_EPS};
use gridstl::io::{parse_trace_csv, read_trace_csv, trace_to_csv, write_atomic, write_trace_csv};
use gridstl::scenario::{builtin, parse_scenario};
use gridstl::Error;
use proptest::prelude::*;

fn scenario_err(src: &str) -> (String, String) {
    match parse_scenario(src) {
        Err(Error::Scenario { path, message }) => (path, message),
        other => panic!("expected a scenario error, got {other:?}"),
    }
}

#[test]
fn desk_scenario_values() {
    let c = desk_case2();
    assert_eq!(c.milp.t_s, 0.05);
    assert_eq!(c.milp.dt_u, 0.2);
    assert_eq!(c.milp.dp_d, 0.7);
    assert_eq!(c.milp.u_c, -0.05);
    assert_eq!(c.milp.f_c, 0.45);
    assert_eq!(c.milp.t_a, 1.0);
    assert_eq!((c.n_steps().unwrap(), c.block_steps().unwrap()), (80, 4));
    let w = &c.reduced_models().unwrap()[0];
    assert_eq!((w.a_rd, w.b_rd, w.c_rd, w.d_rd), (-0.2771, 2.5741, 0.255, -2.3343));
    assert!(c.plants().is_some());
}

#[test]
fn empty_document_lists_required_fields() {
    let (path, msg) = scenario_err("{}");
    assert_eq!(path, "$");
    assert!(msg.contains("wtg") && msg.contains("milp"), "{msg}");
    let (_, msg) = scenario_err(r#"{"wtg": [{}, {}], "milp": {"t_s": 0.05}}"#);
    for f in ["milp.horizon", "milp.dp_d", "milp.w1", "milp.w2", "milp.df_d_lim", "milp.u_c"] {
        assert!(msg.contains(f), "{f} missing from `{msg}`");
    }
    assert!(!msg.contains("milp.t_s"));
}

#[test]
fn unknown_keys_are_named() {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(scenario_path("desk_case2.json")).unwrap()).unwrap();
    v["foo"] = 1.into();
    let (path, msg) = scenario_err(&v.to_string());
    assert!(msg.contains("foo"), "{path}: {msg}");

    v.as_object_mut().unwrap().remove("foo");
    v["milp"]["horizn"] = 4.into();
    let (path, msg) = scenario_err(&v.to_string());
    assert!(path.contains("milp") && msg.contains("horizn"), "{path}: {msg}");
}

#[test]
fn off_grid_values_are_rejected() {
    let mut c = desk_case2();
    c.milp.dt_u = 0.12;
    assert!(matches!(c.validate(), Err(Error::Scenario { path, .. }) if path == "milp.dt_u"));
    let mut c = desk_case2();
    c.milp.horizon = 4.03;
    assert!(matches!(c.validate(), Err(Error::Scenario { path, .. }) if path == "milp.horizon"));
    let mut c = desk_case2();
    c.milp.eps = 0.01;
    assert!(c.validate().is_err());
    // rounding noise inside the grid tolerance is accepted
    let mut c = desk_case2();
    c.milp.horizon = 4.0 + 1e-12;
    c.validate().unwrap();
}

#[test]
fn fingerprint_tracks_content() {
    let a = desk_case2();
    let b = desk_case2();
    assert_eq!(a.fingerprint(), b.fingerprint());
    assert_eq!(a.fingerprint().len(), 64);
    let mut c = a.clone();
    c.milp.w2 = 9.0;
    assert_ne!(a.fingerprint(), c.fingerprint());
    let again = parse_scenario(&a.canonical_json()).unwrap();
    assert_eq!(again.fingerprint(), a.fingerprint());
}

#[test]
fn builtin_cases() {
    let c1 = builtin("case1").unwrap();
    let c2 = builtin("case2").unwrap();
    let c3 = builtin("case3").unwrap();
    assert!(c1.formula().unwrap().is_none());
    assert!(c2.formula().unwrap().is_some());
    assert_eq!(c2.milp.eps, 0.0);
    assert_eq!(c3.milp.eps, CASE3_EPS);
    assert!(builtin("case4").is_err());
    let d = desk_case2();
    assert!(apply_case(&d, "case1").unwrap().formula().unwrap().is_none());
    assert_eq!(apply_case(&d, "case3").unwrap().milp.eps, CASE3_EPS);
    assert_eq!(apply_case(&d, "case3").unwrap().name, "desk_case3");
    assert!(apply_case(&d, "bogus").is_err());
}

#[test]
fn two_sample_csv_layout() {
    let tr = trace(0.05, &[("x1", vec![0.0, -0.1]), ("x4", vec![1.0 / 3.0, 2.5e-7])]);
    let text = String::from_utf8(trace_to_csv(&tr).unwrap()).unwrap();
    let want = "time,x1,x4\n\
        0.0000000000000000e0,0.0000000000000000e0,3.3333333333333331e-1\n\
        5.0000000000000003e-2,-1.0000000000000001e-1,2.4999999999999999e-7\n";
    assert_eq!(text, want);
    assert!(!text.contains('\r'));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trips_exactly(vals in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 1..30)) {
        let tr = trace(0.02, &[("a", vals.clone()), ("b", vals.iter().map(|v| -v).collect())]);
        let bytes = trace_to_csv(&tr).unwrap();
        let back = parse_trace_csv(&bytes, "mem").unwrap();
        prop_assert_eq!(back.channel("a").unwrap(), &vals[..]);
        prop_assert_eq!(trace_to_csv(&back).unwrap(), bytes);
    }
}

#[test]
fn atomic_writes_replace_whole_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("nested/out.csv");
    write_atomic(&p, b"first version, rather long\n").unwrap();
    write_atomic(&p, b"second\n").unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), b"second\n");
    let leftovers: Vec<_> = std::fs::read_dir(p.parent().unwrap()).unwrap().collect();
    assert_eq!(leftovers.len(), 1);

    let tr = trace(0.1, &[("x1", vec![0.25, 0.5, 0.75])]);
    write_trace_csv(&tr, &p).unwrap();
    assert_eq!(read_trace_csv(&p).unwrap().channel("x1").unwrap(), &[0.25, 0.5, 0.75]);
}

#[test]
fn case_bundle_holds_a_satisfying_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::coarse_scenario();
    let run = run_case("case2", &cfg, dir.path()).unwrap();
    assert!(run.report.linear.robustness.unwrap() >= 0.0);
    for f in ["schedule.json", "trace_linear.csv", "trace_nonlinear.csv", "report.json", "model.lp"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let lin = read_trace_csv(&dir.path().join("trace_linear.csv")).unwrap();
    assert_eq!(lin.names()[0], "x1");
    assert_eq!(lin.len(), cfg.n_steps().unwrap() + 1);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["case"], "case2");
    assert_eq!(report["schedule"]["fingerprint"], apply_case(&cfg, "case2").unwrap().fingerprint());
}
