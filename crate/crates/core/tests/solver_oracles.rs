mod common;

use common::random_milp;
use gridstl::milp::{MilpModel, Sense, VarKind};
use gridstl::solver::{enumerate_oracle, solve_lp, solve_milp, solve_milp_warm, Limits, SolveStatus};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Solves `M y = r` by Gaussian elimination with partial pivoting.
fn solve_dense(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))?;
        if m[p][c].abs() < 1e-9 {
            return None;
        }
        m.swap(c, p);
        r.swap(c, p);
        for i in c + 1..n {
            let f = m[i][c] / m[c][c];
            if f != 0.0 {
                for k in c..n {
                    m[i][k] -= f * m[c][k];
                }
                r[i] -= f * r[c];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * y[k]).sum();
        y[i] = (r[i] - s) / m[i][i];
    }
    Some(y)
}

/// Minimum of `c·x` over `A x <= b, x >= 0` by visiting every basic solution.
fn vertex_oracle(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> f64 {
    let n = c.len();
    // constraint i < m is a row of A, i >= m is x_(i-m) >= 0 written -x <= 0
    let m = a.len();
    let row = |i: usize| -> (Vec<f64>, f64) {
        if i < m {
            (a[i].clone(), b[i])
        } else {
            let mut e = vec![0.0; n];
            e[i - m] = -1.0;
            (e, 0.0)
        }
    };
    let total = m + n;
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let (mm, rr): (Vec<Vec<f64>>, Vec<f64>) = idx.iter().map(|&i| row(i)).unzip();
        if let Some(x) = solve_dense(mm, rr) {
            let ok = (0..total).all(|i| {
                let (r, h) = row(i);
                r.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= h + 1e-9
            });
            if ok {
                best = best.min(c.iter().zip(&x).map(|(p, q)| p * q).sum());
            }
        }
        // next combination
        let mut i = n;
        while i > 0 && idx[i - 1] == total - n + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return best;
        }
        idx[i - 1] += 1;
        for k in i..n {
            idx[k] = idx[k - 1] + 1;
        }
    }
}

#[test]
fn random_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for inst in 0..100 {
        let n = 10;
        // first row caps the sum so every instance is bounded
        let mut a = vec![vec![1.0; n]];
        for _ in 1..10 {
            a.push((0..n).map(|_| rng.random_range(-0.5..1.0)).collect());
        }
        let b: Vec<f64> = (0..10).map(|i| if i == 0 { 10.0 } else { rng.random_range(0.5..5.0) }).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..0.3)).collect();
        let oracle = vertex_oracle(&a, &b, &c);

        let mut m = MilpModel::new();
        for j in 0..n {
            m.add_continuous(format!("x{j}"), 0.0, f64::INFINITY).unwrap();
        }
        for (i, r) in a.iter().enumerate() {
            m.add_constraint(format!("r{i}"), r.iter().cloned().enumerate().collect(), Sense::Le, b[i]).unwrap();
        }
        m.set_objective(c.iter().cloned().enumerate().collect());
        let sol = solve_lp(&m);
        assert_eq!(sol.status, SolveStatus::Optimal, "instance {inst}");
        assert!((sol.objective - oracle).abs() <= 1e-6, "instance {inst}: {} vs {oracle}", sol.objective);
        assert!(m.max_violation(&sol.x).0 <= 1e-6);
    }
}

#[test]
fn binary_toy() {
    let mut m = MilpModel::new();
    let x = m.add_binary("x").unwrap();
    let y = m.add_binary("y").unwrap();
    m.add_constraint("c", vec![(x, 1.0), (y, 1.0)], Sense::Le, 1.5).unwrap();
    m.set_objective(vec![(x, -1.0), (y, -1.0)]);
    let sol = solve_milp(&m, &Limits::default());
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!((sol.objective + 1.0).abs() < 1e-9);
}

#[test]
fn knapsacks_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for inst in 0..50 {
        let w: Vec<f64> = (0..10).map(|_| rng.random_range(1..20) as f64).collect();
        let v: Vec<f64> = (0..10).map(|_| rng.random_range(1..30) as f64).collect();
        let cap = w.iter().sum::<f64>() * rng.random_range(0.2..0.7);
        let mut best = 0.0f64;
        for mask in 0..1u32 << 10 {
            let (mut ww, mut vv) = (0.0, 0.0);
            for i in 0..10 {
                if mask >> i & 1 == 1 {
                    ww += w[i];
                    vv += v[i];
                }
            }
            if ww <= cap {
                best = best.max(vv);
            }
        }
        let mut m = MilpModel::new();
        for i in 0..10 {
            m.add_binary(format!("item{i}")).unwrap();
        }
        m.add_constraint("cap", w.iter().cloned().enumerate().collect(), Sense::Le, cap).unwrap();
        m.set_objective(v.iter().map(|x| -x).enumerate().collect());
        let sol = solve_milp(&m, &Limits::default());
        let orc = enumerate_oracle(&m).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective + best).abs() <= 1e-6, "instance {inst}: {} vs {}", sol.objective, -best);
        assert!((orc.objective + best).abs() <= 1e-6);
    }
}

fn assert_valid(m: &MilpModel, x: &[f64]) {
    assert!(m.max_violation(x).0 <= 1e-6);
    for (v, xv) in m.vars.iter().zip(x) {
        if v.kind == VarKind::Binary {
            assert!(xv.abs() <= 1e-6 || (xv - 1.0).abs() <= 1e-6, "{} = {xv}", v.name);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn branch_and_bound_matches_enumeration(seed in any::<u64>(), n_bin in 1usize..=8, n_cont in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_milp(&mut rng, n_bin, n_cont, 6);
        let sol = solve_milp(&m, &Limits::default());
        let orc = enumerate_oracle(&m).unwrap();
        prop_assert_eq!(sol.status, orc.status);
        prop_assert_eq!(sol.status, SolveStatus::Optimal);
        prop_assert!((sol.objective - orc.objective).abs() <= 1e-6, "{} vs {}", sol.objective, orc.objective);
        assert_valid(&m, &sol.x);
        let lp = solve_lp(&m);
        prop_assert!(lp.objective <= sol.objective + 1e-6);
    }

    #[test]
    fn solves_are_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_milp(&mut rng, 10, 3, 8);
        let a = solve_milp(&m, &Limits::default());
        let b = solve_milp(&m, &Limits::default());
        prop_assert_eq!(a.x, b.x);
        prop_assert_eq!(a.nodes, b.nodes);
    }

    #[test]
    fn warm_start_keeps_the_optimum(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_milp(&mut rng, 8, 2, 6);
        let cold = solve_milp(&m, &Limits::default());
        let warm = solve_milp_warm(&m, &Limits::default(), Some(&cold.x));
        prop_assert_eq!(warm.status, SolveStatus::Optimal);
        prop_assert!((warm.objective - cold.objective).abs() <= 1e-9);
        // a poor but feasible start does not change the optimum either
        let orc = enumerate_oracle(&m).unwrap();
        let seeded = solve_milp_warm(&m, &Limits::default(), Some(&orc.x));
        prop_assert!((seeded.objective - cold.objective).abs() <= 1e-6);
    }
}

#[test]
fn infeasible_binaries_are_reported() {
    let mut m = MilpModel::new();
    let x = m.add_binary("x").unwrap();
    let y = m.add_binary("y").unwrap();
    m.add_constraint("c", vec![(x, 2.0), (y, 2.0)], Sense::Eq, 1.0).unwrap();
    assert_eq!(solve_milp(&m, &Limits::default()).status, SolveStatus::Infeasible);
    assert_eq!(solve_lp(&m).status, SolveStatus::Optimal);
}

#[test]
fn node_limit_is_reported() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = random_milp(&mut rng, 16, 2, 10);
    let lim = Limits { nodes: 1, ..Limits::default() };
    let sol = solve_milp(&m, &lim);
    assert!(matches!(sol.status, SolveStatus::LimitReached | SolveStatus::Optimal));
    if sol.status == SolveStatus::LimitReached && sol.has_assignment() && !sol.x.is_empty() {
        assert_valid(&m, &sol.x);
    }
}
