mod common;

use common::{random_formula, random_trace, rob, sat, trace};
use gridstl::stl::{parse, StlFormula};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const T_S: f64 = 0.1;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a.is_infinite() && a == b) || (a - b).abs() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn monitor_matches_pointwise_semantics(seed in any::<u64>(), len in 1usize..14) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_formula(&mut rng, 3, T_S);
        let tr = random_trace(&mut rng, T_S, len);
        let bools = phi.satisfaction_signal(&tr).unwrap();
        let robs = phi.robustness_signal(&tr).unwrap();
        for k in 0..len {
            prop_assert_eq!(bools[k], sat(&phi, &tr, k), "k = {}, phi = {}", k, phi);
            prop_assert!(close(robs[k], rob(&phi, &tr, k), 1e-12), "k = {}, phi = {}", k, phi);
        }
    }

    #[test]
    fn verdict_agrees_with_robustness_sign(seed in any::<u64>(), len in 1usize..14) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_formula(&mut rng, 3, T_S);
        let tr = random_trace(&mut rng, T_S, len);
        let r = phi.robustness(&tr, 0).unwrap();
        if r.abs() > 1e-9 {
            prop_assert_eq!(phi.evaluate_bool(&tr, 0).unwrap(), r > 0.0, "phi = {}, rho = {}", phi, r);
        }
    }

    #[test]
    fn desugaring_preserves_meaning(seed in any::<u64>(), len in 1usize..14) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_formula(&mut rng, 3, T_S);
        let nnf = phi.desugar();
        prop_assert!(nnf.is_nnf());
        let tr = random_trace(&mut rng, T_S, len);
        prop_assert_eq!(phi.satisfaction_signal(&tr).unwrap(), nnf.satisfaction_signal(&tr).unwrap());
        let (a, b) = (phi.robustness_signal(&tr).unwrap(), nnf.robustness_signal(&tr).unwrap());
        for k in 0..len {
            prop_assert!(close(a[k], b[k], 1e-12));
        }
    }

    #[test]
    fn tightening_shifts_robustness(seed in any::<u64>(), len in 1usize..14, eps in -0.3f64..0.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_formula(&mut rng, 3, T_S);
        let tr = random_trace(&mut rng, T_S, len);
        let a = phi.robustness_signal(&tr).unwrap();
        let b = phi.tighten(eps).robustness_signal(&tr).unwrap();
        for k in 0..len {
            prop_assert!(close(b[k], a[k] + eps, 1e-9), "{} vs {} + {}", b[k], a[k], eps);
        }
    }

    #[test]
    fn tightened_satisfaction_implies_original(seed in any::<u64>(), len in 1usize..14, delta in 0.0f64..0.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_formula(&mut rng, 3, T_S);
        let tight = phi.tighten(-delta);
        let tr = random_trace(&mut rng, T_S, len);
        let (st, so) = (tight.satisfaction_signal(&tr).unwrap(), phi.satisfaction_signal(&tr).unwrap());
        for k in 0..len {
            prop_assert!(!st[k] || so[k], "k = {}, phi = {}", k, phi);
        }
    }

    #[test]
    fn display_parses_back(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = random_formula(&mut rng, 3, T_S);
        let again = parse(&phi.to_string()).unwrap();
        let tr = random_trace(&mut rng, T_S, 10);
        prop_assert_eq!(phi.satisfaction_signal(&tr).unwrap(), again.satisfaction_signal(&tr).unwrap());
    }
}

fn dip(len_s: f64) -> gridstl::trace::Trace {
    let t_s = 0.05;
    let x: Vec<f64> = (0..120)
        .map(|k| {
            let t = k as f64 * t_s;
            if (1.0..1.0 + len_s - 1e-9).contains(&t) { -0.6 } else { -0.2 }
        })
        .collect();
    trace(t_s, &[("x1", x)])
}

#[test]
fn recovery_rejects_long_dips() {
    let phi = StlFormula::recovery("x1", 0.45, 1.0).unwrap();
    let long = dip(1.5);
    let short = dip(0.8);
    assert!(!phi.evaluate_bool(&long, 0).unwrap());
    assert!(!sat(&phi, &long, 0));
    assert!(phi.evaluate_bool(&short, 0).unwrap());
    assert!(sat(&phi, &short, 0));
    assert!(phi.robustness(&short, 0).unwrap() > 0.0);
    assert!(phi.robustness(&long, 0).unwrap() < 0.0);
}

#[test]
fn always_robustness_example() {
    let phi = parse("G (y <= 0.5)").unwrap();
    let tr = trace(1.0, &[("y", vec![0.1, 0.3, 0.6])]);
    assert!((phi.robustness(&tr, 0).unwrap() + 0.1).abs() < 1e-12);
}

#[test]
fn recovery_text_and_horizon() {
    let phi = parse("G (abs(x1) >= 0.45 -> F[0, 1] G abs(x1) <= 0.45)").unwrap();
    assert_eq!(phi, StlFormula::recovery("x1", 0.45, 1.0).unwrap());
    assert!(phi.horizon().is_infinite());
    assert_eq!(parse("G[0, 0.5] F[0, 0.2] x <= 1").unwrap().horizon(), 0.7);
}

#[test]
fn missing_channel_is_reported() {
    let phi = parse("G (z <= 1)").unwrap();
    let tr = trace(0.1, &[("x", vec![0.0; 3])]);
    let err = phi.robustness(&tr, 0).unwrap_err().to_string();
    assert!(err.contains('z'), "{err}");
}
