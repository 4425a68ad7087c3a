//! Helpers shared by the integration tests.
#![allow(dead_code)]

use gridstl::stl::{Interval, Predicate, Relation, StlFormula};
use gridstl::trace::Trace;
use rand::Rng;

pub const VARS: [&str; 2] = ["x", "y"];

pub fn trace(t_s: f64, chans: &[(&str, Vec<f64>)]) -> Trace {
    let mut tr = Trace::new(t_s).unwrap();
    for (n, v) in chans {
        tr.push_channel(*n, v.clone()).unwrap();
    }
    tr
}

pub fn random_trace<R: Rng>(rng: &mut R, t_s: f64, len: usize) -> Trace {
    let chans: Vec<(&str, Vec<f64>)> = VARS
        .iter()
        .map(|v| (*v, (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()))
        .collect();
    trace(t_s, &chans)
}

fn random_interval<R: Rng>(rng: &mut R, t_s: f64) -> Interval {
    let a = rng.random_range(0..4) as f64 * t_s;
    if rng.random_bool(0.25) {
        Interval::new(a, f64::INFINITY).unwrap()
    } else {
        Interval::new(a, a + rng.random_range(0..5) as f64 * t_s).unwrap()
    }
}

fn random_pred<R: Rng>(rng: &mut R) -> StlFormula {
    let rel = [Relation::Le, Relation::Lt, Relation::Ge, Relation::Gt][rng.random_range(0..4)];
    let mut terms = vec![(VARS[rng.random_range(0..2)].to_string(), rng.random_range(-2.0..2.0))];
    if rng.random_bool(0.3) {
        let other = if terms[0].0 == "x" { "y" } else { "x" };
        terms.push((other.to_string(), rng.random_range(-2.0..2.0)));
    }
    StlFormula::Pred(Predicate::new(terms, rel, rng.random_range(-1.0..1.0)))
}

/// Random formula over `x` and `y` using every operator.
pub fn random_formula<R: Rng>(rng: &mut R, depth: usize, t_s: f64) -> StlFormula {
    if depth == 0 || rng.random_bool(0.2) {
        return random_pred(rng);
    }
    let sub = |rng: &mut R| random_formula(rng, depth - 1, t_s);
    match rng.random_range(0..8) {
        0 => StlFormula::not(sub(rng)),
        1 => StlFormula::And(vec![sub(rng), sub(rng)]),
        2 => StlFormula::Or(vec![sub(rng), sub(rng)]),
        3 => StlFormula::implies(sub(rng), sub(rng)),
        4 => StlFormula::always(random_interval(rng, t_s), sub(rng)),
        5 => StlFormula::eventually(random_interval(rng, t_s), sub(rng)),
        6 => StlFormula::until(random_interval(rng, t_s), sub(rng), sub(rng)),
        _ => StlFormula::Release(random_interval(rng, t_s), Box::new(sub(rng)), Box::new(sub(rng))),
    }
}

/// Sample window of an interval evaluated at `k`, clipped to the trace end.
fn window(i: &Interval, k: usize, n: usize, t_s: f64) -> Vec<usize> {
    let lo = (i.a / t_s - 1e-9).ceil() as usize;
    let hi = if i.b.is_infinite() { usize::MAX } else { (i.b / t_s + 1e-9).floor() as usize };
    (0..n).filter(|&j| j >= k + lo && j - k <= hi).collect()
}

fn lhs(p: &Predicate, tr: &Trace, k: usize) -> f64 {
    p.terms.iter().map(|(v, c)| c * tr.channel(v).unwrap()[k]).sum()
}

/// Pointwise Boolean semantics written straight from the definitions.
pub fn sat(f: &StlFormula, tr: &Trace, k: usize) -> bool {
    let n = tr.len();
    let t_s = tr.t_s();
    match f {
        StlFormula::Pred(p) => {
            let v = lhs(p, tr, k);
            match p.rel {
                Relation::Le => v <= p.threshold,
                Relation::Lt => v < p.threshold,
                Relation::Ge => v >= p.threshold,
                Relation::Gt => v > p.threshold,
            }
        }
        StlFormula::Not(g) => !sat(g, tr, k),
        StlFormula::And(gs) => gs.iter().all(|g| sat(g, tr, k)),
        StlFormula::Or(gs) => gs.iter().any(|g| sat(g, tr, k)),
        StlFormula::Implies(p, q) => !sat(p, tr, k) || sat(q, tr, k),
        StlFormula::Always(i, g) => window(i, k, n, t_s).into_iter().all(|j| sat(g, tr, j)),
        StlFormula::Eventually(i, g) => window(i, k, n, t_s).into_iter().any(|j| sat(g, tr, j)),
        StlFormula::Until(i, l, r) => window(i, k, n, t_s)
            .into_iter()
            .any(|j| sat(r, tr, j) && (k..j).all(|m| sat(l, tr, m))),
        StlFormula::Release(i, l, r) => window(i, k, n, t_s)
            .into_iter()
            .all(|j| sat(r, tr, j) || (k..j).any(|m| sat(l, tr, m))),
    }
}

/// Pointwise robustness written straight from the definitions.
pub fn rob(f: &StlFormula, tr: &Trace, k: usize) -> f64 {
    let n = tr.len();
    let t_s = tr.t_s();
    let inf = f64::INFINITY;
    match f {
        StlFormula::Pred(p) => {
            let v = lhs(p, tr, k);
            if matches!(p.rel, Relation::Le | Relation::Lt) {
                p.threshold - v
            } else {
                v - p.threshold
            }
        }
        StlFormula::Not(g) => -rob(g, tr, k),
        StlFormula::And(gs) => gs.iter().map(|g| rob(g, tr, k)).fold(inf, f64::min),
        StlFormula::Or(gs) => gs.iter().map(|g| rob(g, tr, k)).fold(-inf, f64::max),
        StlFormula::Implies(p, q) => (-rob(p, tr, k)).max(rob(q, tr, k)),
        StlFormula::Always(i, g) => window(i, k, n, t_s).into_iter().map(|j| rob(g, tr, j)).fold(inf, f64::min),
        StlFormula::Eventually(i, g) => window(i, k, n, t_s).into_iter().map(|j| rob(g, tr, j)).fold(-inf, f64::max),
        StlFormula::Until(i, l, r) => window(i, k, n, t_s)
            .into_iter()
            .map(|j| (k..j).map(|m| rob(l, tr, m)).fold(rob(r, tr, j), f64::min))
            .fold(-inf, f64::max),
        StlFormula::Release(i, l, r) => window(i, k, n, t_s)
            .into_iter()
            .map(|j| (k..j).map(|m| rob(l, tr, m)).fold(rob(r, tr, j), f64::max))
            .fold(inf, f64::min),
    }
}

/// Random feasible MILP: `n_bin` binaries, `n_cont` continuous columns in
/// [0, 5], and rows built around a random point so the model is never empty.
pub fn random_milp<R: Rng>(rng: &mut R, n_bin: usize, n_cont: usize, n_rows: usize) -> gridstl::milp::MilpModel {
    use gridstl::milp::{MilpModel, Sense};
    let mut m = MilpModel::new();
    let mut point = Vec::new();
    for i in 0..n_bin {
        m.add_binary(format!("b{i}")).unwrap();
        point.push(if rng.random_bool(0.5) { 1.0 } else { 0.0 });
    }
    for i in 0..n_cont {
        m.add_continuous(format!("c{i}"), 0.0, 5.0).unwrap();
        point.push(rng.random_range(0.0..5.0));
    }
    let n = n_bin + n_cont;
    for r in 0..n_rows {
        let mut coefs = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.6) {
                let c = (rng.random_range(-5.0f64..5.0) * 4.0).round() / 4.0;
                if c != 0.0 {
                    coefs.push((j, c));
                }
            }
        }
        if coefs.is_empty() {
            continue;
        }
        let act: f64 = coefs.iter().map(|(j, c)| c * point[*j]).sum();
        let slack = rng.random_range(0.0..3.0);
        let (sense, rhs) = match rng.random_range(0..5) {
            0 => (Sense::Ge, act - slack),
            1 if n_cont > 0 && coefs.iter().any(|(j, _)| *j >= n_bin) => (Sense::Eq, act),
            _ => (Sense::Le, act + slack),
        };
        m.add_constraint(format!("r{r}"), coefs, sense, rhs).unwrap();
    }
    let obj = (0..n).map(|j| (j, (rng.random_range(-10.0f64..10.0) * 4.0).round() / 4.0)).collect();
    m.set_objective(obj);
    m
}

pub fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn desk_case2() -> gridstl::scenario::ScenarioConfig {
    gridstl::scenario::load_scenario(&scenario_path("desk_case2.json")).unwrap()
}

/// Coarse variant of the desk scenario: 40 steps of 0.1 s, 0.5 s blocks.
pub fn coarse_scenario() -> gridstl::scenario::ScenarioConfig {
    let mut c = desk_case2();
    c.name = "coarse".into();
    c.milp.t_s = 0.1;
    c.milp.dt_u = 0.5;
    c.validate().unwrap();
    c
}
