mod common;

use common::{coarse_scenario, desk_case2};
use gridstl::controller::{
    apply_schedule, build_problem, calibrate_epsilon, closed_loop, detect_trigger, milp_admits, replay_violation,
    schedule, solve_problem, Fidelity,
};
use gridstl::scenario::TriggerConfig;
use gridstl::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn trig() -> TriggerConfig {
    TriggerConfig {
        threshold: 0.1,
        consecutive: 2,
        channel: "x1".into(),
    }
}

#[test]
fn trigger_debounces_samples() {
    let mut v = vec![0.0; 10];
    v.extend([-0.2; 10]);
    assert_eq!(detect_trigger(&v, &trig()), Some(11));
    assert_eq!(detect_trigger(&[0.0, 0.15, 0.0, 0.15, 0.0], &trig()), None);
    let one = TriggerConfig { consecutive: 1, ..trig() };
    assert_eq!(detect_trigger(&[0.0, 0.0, 0.1], &one), Some(2));
}

#[test]
fn schedule_follows_the_trigger() {
    let cfg = coarse_scenario();
    let s = schedule(&cfg).unwrap();
    let n = 200;
    let at0 = apply_schedule(&s, 0, n);
    let at15 = apply_schedule(&s, 15, n);
    for k in 0..15 {
        assert_eq!(at15[k], [0.0; 2]);
    }
    for k in 0..n - 15 {
        assert_eq!(at15[k + 15], at0[k]);
    }
    // the offset aligns the trigger sample with its block
    for k in 0..s.n_steps - s.offset_steps {
        let j = (k + s.offset_steps) / s.block_steps;
        for i in 0..2 {
            let want = if s.b[i][j] != 0 { s.u_c } else { 0.0 };
            assert_eq!(at0[k][i], want);
        }
    }
    assert!(at0[s.n_steps..].iter().all(|u| *u == [0.0; 2]));
}

#[test]
fn no_contingency_needs_no_support() {
    let mut cfg = coarse_scenario();
    cfg.milp.dp_d = 0.0;
    let s = schedule(&cfg).unwrap();
    assert_eq!(s.total_on(), 0);
    assert_eq!(s.objective, 0.0);
    assert_eq!(s.offset_steps, s.n_steps);
}

#[test]
fn desk_schedule_replays_within_tolerance() {
    let cfg = desk_case2();
    let p = build_problem(&cfg).unwrap();
    let (s, sol) = solve_problem(&cfg, &p).unwrap();
    assert_eq!(sol.gap, 0.0);
    assert!(replay_violation(&p, &s.b).unwrap() <= 1e-5);
    let (tr, rep) = closed_loop(&cfg, &s, Fidelity::Linear).unwrap();
    assert!(rep.robustness.unwrap() >= 0.0);
    assert!(rep.satisfied);
    assert_eq!(rep.trigger_index, Some(s.offset_steps));
    assert!(tr.channel("x1").unwrap().iter().all(|v| v.abs() <= 0.5));
}

#[test]
fn onset_delay_shifts_the_whole_response() {
    let cfg = coarse_scenario();
    let s = schedule(&cfg).unwrap();
    let (tr0, r0) = closed_loop(&cfg, &s, Fidelity::Linear).unwrap();
    let mut late = cfg.clone();
    late.plant.onset = 1.5;
    let (tr1, r1) = closed_loop(&late, &s, Fidelity::Linear).unwrap();
    assert_eq!(r1.onset_index, 15);
    assert_eq!(r1.trigger_index.unwrap(), r0.trigger_index.unwrap() + 15);
    let (a, b) = (tr0.channel("x1").unwrap(), tr1.channel("x1").unwrap());
    for k in 0..a.len() {
        assert!((a[k] - b[k + 15]).abs() <= 1e-12);
    }
    assert!(b[..15].iter().all(|v| *v == 0.0));
    assert!((r0.robustness.unwrap() - r1.robustness.unwrap()).abs() <= 1e-12);
}

#[test]
fn exact_model_needs_no_robust_factor() {
    let cfg = desk_case2();
    let cal = calibrate_epsilon(&cfg, Fidelity::Linear, -0.06, 3).unwrap();
    assert_eq!(cal.eps, 0.0);
    assert_eq!(cal.probes.len(), 1);
}

#[test]
fn linear_bias_is_absorbed_by_calibration() {
    let mut cfg = coarse_scenario();
    cfg.plant.bias = 0.02;
    let cal = calibrate_epsilon(&cfg, Fidelity::Linear, -0.06, 3).unwrap();
    assert!(cal.eps < 0.0);
    let mut c = cfg.clone();
    c.milp.eps = cal.eps;
    let (_, rep) = closed_loop(&c, &cal.schedule, Fidelity::Linear).unwrap();
    assert!(rep.robustness.unwrap() >= 0.0);
    // at eps = 0 the same plant misses the specification
    assert!(cal.probes[0].robustness.is_none_or(|r| r < 0.0));
}

#[test]
fn impossible_limit_names_the_family() {
    let mut cfg = coarse_scenario();
    cfg.milp.df_d_lim = 0.05;
    match schedule(&cfg) {
        Err(Error::Infeasible { family, .. }) => assert_eq!(family, "frequency_limit"),
        other => panic!("expected infeasibility, got {other:?}"),
    }
    let mut cfg = coarse_scenario();
    cfg.milp.f_c = 0.15;
    cfg.milp.t_a = 0.2;
    match schedule(&cfg) {
        Err(Error::Infeasible { family, .. }) => assert_eq!(family, "specification"),
        other => panic!("expected infeasibility, got {other:?}"),
    }
}

#[test]
fn random_switches_agree_with_replay() {
    let cfg = coarse_scenario();
    let p = build_problem(&cfg).unwrap();
    let nb = p.encoding.n_blocks;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut admitted = 0;
    for _ in 0..40 {
        let density = rng.random_range(0.3..1.0);
        let b: [Vec<u8>; 2] = std::array::from_fn(|_| (0..nb).map(|_| u8::from(rng.random_bool(density))).collect());
        let worst = replay_violation(&p, &b).unwrap();
        if worst.abs() <= 1e-5 {
            continue;
        }
        let ok = milp_admits(&p, &b).unwrap();
        assert_eq!(ok, worst < 0.0, "b = {b:?}, worst = {worst}");
        admitted += usize::from(ok);
    }
    assert!(admitted > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn tighter_factor_never_lowers_the_objective(e1 in -0.04f64..0.0, e2 in -0.04f64..0.0, w2 in prop::sample::select(vec![0.0, 10.0])) {
        let (loose, tight) = if e1 >= e2 { (e1, e2) } else { (e2, e1) };
        let mut cfg = coarse_scenario();
        cfg.milp.w2 = w2;
        cfg.milp.eps = loose;
        let a = schedule(&cfg);
        cfg.milp.eps = tight;
        let b = schedule(&cfg);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert!(b.objective >= a.objective - 1e-9);
                if w2 == 0.0 {
                    prop_assert!(b.total_on() >= a.total_on());
                }
            }
            (Err(_), Ok(_)) => prop_assert!(false, "looser factor infeasible, tighter feasible"),
            _ => {}
        }
    }

    #[test]
    fn solved_schedules_meet_the_model(dp in 0.3f64..0.8, w1 in 0.5f64..2.0, w2 in 0.0f64..10.0, f_c in 0.35f64..0.5) {
        let mut cfg = coarse_scenario();
        cfg.milp.dp_d = dp;
        cfg.milp.w1 = w1;
        cfg.milp.w2 = w2;
        cfg.milp.f_c = f_c;
        let p = build_problem(&cfg).unwrap();
        if let Ok((s, _)) = solve_problem(&cfg, &p) {
            prop_assert!(replay_violation(&p, &s.b).unwrap() <= 1e-4);
            let (_, rep) = closed_loop(&cfg, &s, Fidelity::Linear).unwrap();
            prop_assert!(rep.robustness.unwrap() >= -1e-4);
        }
    }
}
