//! Signal temporal logic over sampled traces.
//!
//! Semantics are pointwise on a finite trace: an interval `[a, b]` covers the
//! sample offsets `ceil(a/t_s) ..= floor(b/t_s)` clipped at the last sample.
//! An empty window makes `G` true and `F` false. Robustness is the usual
//! min/max recursion, so its sign agrees with the Boolean verdict whenever it
//! is nonzero.

mod parse;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::Trace;

pub use parse::parse;

/// Tolerance used when mapping interval endpoints onto the sample grid.
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Lt,
    Ge,
    Gt,
}

impl Relation {
    pub fn negate(self) -> Self {
        match self {
            Relation::Le => Relation::Gt,
            Relation::Lt => Relation::Ge,
            Relation::Ge => Relation::Lt,
            Relation::Gt => Relation::Le,
        }
    }

    /// Upper-bound relations (`<=`, `<`).
    pub fn is_upper(self) -> bool {
        matches!(self, Relation::Le | Relation::Lt)
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Relation::Lt | Relation::Gt)
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Ge => ">=",
            Relation::Gt => ">",
        }
    }
}

/// `Σ coef·var  rel  threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub terms: Vec<(String, f64)>,
    pub rel: Relation,
    pub threshold: f64,
}

impl Predicate {
    pub fn new(terms: Vec<(String, f64)>, rel: Relation, threshold: f64) -> Self {
        Self { terms, rel, threshold }
    }

    /// Single-variable predicate `var rel threshold`.
    pub fn var(name: &str, rel: Relation, threshold: f64) -> Self {
        Self::new(vec![(name.to_string(), 1.0)], rel, threshold)
    }

    fn lhs(&self, tr: &Trace, k: usize) -> Result<f64> {
        let mut v = 0.0;
        for (name, c) in &self.terms {
            v += c * tr.value(name, k)?;
        }
        Ok(v)
    }

    /// Signed margin, positive when satisfied.
    pub fn margin_of(&self, lhs: f64) -> f64 {
        if self.rel.is_upper() {
            self.threshold - lhs
        } else {
            lhs - self.threshold
        }
    }

    pub fn holds_for(&self, lhs: f64) -> bool {
        match self.rel {
            Relation::Le => lhs <= self.threshold,
            Relation::Lt => lhs < self.threshold,
            Relation::Ge => lhs >= self.threshold,
            Relation::Gt => lhs > self.threshold,
        }
    }

    fn negated(&self) -> Self {
        Self {
            rel: self.rel.negate(),
            ..self.clone()
        }
    }
}

/// Time interval in seconds; `b` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0) || !(b >= a) || a.is_infinite() {
            return Err(Error::Domain(format!("invalid interval [{a}, {b}]")));
        }
        Ok(Self { a, b })
    }

    pub fn unbounded() -> Self {
        Self { a: 0.0, b: f64::INFINITY }
    }

    /// Sample offsets covered by the interval, before clipping.
    pub fn offsets(&self, t_s: f64) -> (usize, Option<usize>) {
        let lo = (self.a / t_s - GRID_TOL).ceil().max(0.0) as usize;
        let hi = if self.b.is_infinite() {
            None
        } else {
            Some((self.b / t_s + GRID_TOL).floor() as usize)
        };
        (lo, hi)
    }

    /// Absolute sample window `[k + lo, min(k + hi, n - 1)]`, or `None` when empty.
    pub fn window(&self, k: usize, n: usize, t_s: f64) -> Option<(usize, usize)> {
        let (lo, hi) = self.offsets(t_s);
        let start = k + lo;
        let end = match hi {
            Some(h) => (k + h).min(n.saturating_sub(1)),
            None => n.saturating_sub(1),
        };
        if n == 0 || start > end || hi.is_some_and(|h| h < lo) {
            None
        } else {
            Some((start, end))
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.b.is_infinite() {
            write!(f, "[{},inf]", self.a)
        } else {
            write!(f, "[{},{}]", self.a, self.b)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StlFormula {
    Pred(Predicate),
    Not(Box<StlFormula>),
    And(Vec<StlFormula>),
    Or(Vec<StlFormula>),
    Implies(Box<StlFormula>, Box<StlFormula>),
    Always(Interval, Box<StlFormula>),
    Eventually(Interval, Box<StlFormula>),
    /// `left U right`: `right` holds at some sample in the window and `left`
    /// holds at every sample from the evaluation point up to it.
    Until(Interval, Box<StlFormula>, Box<StlFormula>),
    /// Dual of `Until`, produced by pushing negations inward.
    Release(Interval, Box<StlFormula>, Box<StlFormula>),
}

use StlFormula as F;

impl StlFormula {
    pub fn pred(p: Predicate) -> Self {
        F::Pred(p)
    }

    pub fn not(f: StlFormula) -> Self {
        F::Not(Box::new(f))
    }

    pub fn implies(p: StlFormula, q: StlFormula) -> Self {
        F::Implies(Box::new(p), Box::new(q))
    }

    pub fn always(i: Interval, f: StlFormula) -> Self {
        F::Always(i, Box::new(f))
    }

    pub fn eventually(i: Interval, f: StlFormula) -> Self {
        F::Eventually(i, Box::new(f))
    }

    pub fn until(i: Interval, l: StlFormula, r: StlFormula) -> Self {
        F::Until(i, Box::new(l), Box::new(r))
    }

    /// `|var| <= c` as a conjunction.
    pub fn abs_le(var: &str, c: f64) -> Self {
        F::And(vec![
            F::Pred(Predicate::var(var, Relation::Le, c)),
            F::Pred(Predicate::new(vec![(var.to_string(), -1.0)], Relation::Le, c)),
        ])
    }

    /// `|var| >= c` as a disjunction.
    pub fn abs_ge(var: &str, c: f64) -> Self {
        F::Or(vec![
            F::Pred(Predicate::var(var, Relation::Ge, c)),
            F::Pred(Predicate::new(vec![(var.to_string(), -1.0)], Relation::Ge, c)),
        ])
    }

    /// Frequency recovery requirement: whenever `|var|` reaches `f_c`, within
    /// `t_a` seconds it returns below `f_c` and stays there.
    pub fn recovery(var: &str, f_c: f64, t_a: f64) -> Result<Self> {
        Ok(F::always(
            Interval::unbounded(),
            F::implies(
                F::abs_ge(var, f_c),
                F::eventually(Interval::new(0.0, t_a)?, F::always(Interval::unbounded(), F::abs_le(var, f_c))),
            ),
        ))
    }

    /// Removes implications and pushes negations onto predicates.
    pub fn desugar(&self) -> StlFormula {
        self.nnf(false)
    }

    fn nnf(&self, neg: bool) -> StlFormula {
        match self {
            F::Pred(p) => F::Pred(if neg { p.negated() } else { p.clone() }),
            F::Not(f) => f.nnf(!neg),
            F::And(fs) => {
                let kids = fs.iter().map(|f| f.nnf(neg)).collect();
                if neg {
                    F::Or(kids)
                } else {
                    F::And(kids)
                }
            }
            F::Or(fs) => {
                let kids = fs.iter().map(|f| f.nnf(neg)).collect();
                if neg {
                    F::And(kids)
                } else {
                    F::Or(kids)
                }
            }
            F::Implies(p, q) => {
                let kids = vec![p.nnf(!neg), q.nnf(neg)];
                if neg {
                    F::And(kids)
                } else {
                    F::Or(kids)
                }
            }
            F::Always(i, f) => {
                if neg {
                    F::Eventually(*i, Box::new(f.nnf(true)))
                } else {
                    F::Always(*i, Box::new(f.nnf(false)))
                }
            }
            F::Eventually(i, f) => {
                if neg {
                    F::Always(*i, Box::new(f.nnf(true)))
                } else {
                    F::Eventually(*i, Box::new(f.nnf(false)))
                }
            }
            F::Until(i, l, r) => {
                if neg {
                    F::Release(*i, Box::new(l.nnf(true)), Box::new(r.nnf(true)))
                } else {
                    F::Until(*i, Box::new(l.nnf(false)), Box::new(r.nnf(false)))
                }
            }
            F::Release(i, l, r) => {
                if neg {
                    F::Until(*i, Box::new(l.nnf(true)), Box::new(r.nnf(true)))
                } else {
                    F::Release(*i, Box::new(l.nnf(false)), Box::new(r.nnf(false)))
                }
            }
        }
    }

    pub fn is_nnf(&self) -> bool {
        match self {
            F::Pred(_) => true,
            F::Not(_) | F::Implies(..) => false,
            F::And(fs) | F::Or(fs) => fs.iter().all(|f| f.is_nnf()),
            F::Always(_, f) | F::Eventually(_, f) => f.is_nnf(),
            F::Until(_, l, r) | F::Release(_, l, r) => l.is_nnf() && r.is_nnf(),
        }
    }

    /// Latest time (s) after the evaluation point that the verdict depends on.
    pub fn horizon(&self) -> f64 {
        match self {
            F::Pred(_) => 0.0,
            F::Not(f) => f.horizon(),
            F::And(fs) | F::Or(fs) => fs.iter().map(|f| f.horizon()).fold(0.0, f64::max),
            F::Implies(p, q) => p.horizon().max(q.horizon()),
            F::Always(i, f) | F::Eventually(i, f) => i.b + f.horizon(),
            F::Until(i, l, r) | F::Release(i, l, r) => i.b + l.horizon().max(r.horizon()),
        }
    }

    /// Variable names referenced anywhere in the formula, in first-use order.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit_preds(&mut |p| {
            for (v, _) in &p.terms {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        });
        out
    }

    pub fn visit_preds(&self, visit: &mut dyn FnMut(&Predicate)) {
        match self {
            F::Pred(p) => visit(p),
            F::Not(f) | F::Always(_, f) | F::Eventually(_, f) => f.visit_preds(visit),
            F::And(fs) | F::Or(fs) => fs.iter().for_each(|f| f.visit_preds(visit)),
            F::Implies(a, b) | F::Until(_, a, b) | F::Release(_, a, b) => {
                a.visit_preds(visit);
                b.visit_preds(visit);
            }
        }
    }

    /// Shifts every threshold so the robustness of the result is the
    /// robustness of `self` plus `eps`. A negative `eps` shrinks the set of
    /// satisfying traces: upper bounds in positive position move down, lower
    /// bounds up, and the reverse under negation or in an antecedent.
    pub fn tighten(&self, eps: f64) -> StlFormula {
        self.shift(eps, true)
    }

    fn shift(&self, eps: f64, positive: bool) -> StlFormula {
        let b = |f: &StlFormula, pos: bool| Box::new(f.shift(eps, pos));
        match self {
            F::Pred(p) => {
                let s = if p.rel.is_upper() == positive { eps } else { -eps };
                F::Pred(Predicate {
                    threshold: p.threshold + s,
                    ..p.clone()
                })
            }
            F::Not(f) => F::Not(b(f, !positive)),
            F::And(fs) => F::And(fs.iter().map(|f| f.shift(eps, positive)).collect()),
            F::Or(fs) => F::Or(fs.iter().map(|f| f.shift(eps, positive)).collect()),
            F::Implies(p, q) => F::Implies(b(p, !positive), b(q, positive)),
            F::Always(i, f) => F::Always(*i, b(f, positive)),
            F::Eventually(i, f) => F::Eventually(*i, b(f, positive)),
            F::Until(i, l, r) => F::Until(*i, b(l, positive), b(r, positive)),
            F::Release(i, l, r) => F::Release(*i, b(l, positive), b(r, positive)),
        }
    }

    fn check_vars(&self, tr: &Trace) -> Result<()> {
        for v in self.variables() {
            tr.channel_or_err(&v)?;
        }
        Ok(())
    }

    /// Boolean verdict at every sample of the trace.
    pub fn satisfaction_signal(&self, tr: &Trace) -> Result<Vec<bool>> {
        self.check_vars(tr)?;
        let n = tr.len();
        let t_s = tr.t_s();
        Ok(match self {
            F::Pred(p) => (0..n)
                .map(|k| p.lhs(tr, k).map(|v| p.holds_for(v)))
                .collect::<Result<_>>()?,
            F::Not(f) => f.satisfaction_signal(tr)?.into_iter().map(|v| !v).collect(),
            F::And(fs) => {
                let sigs = fs.iter().map(|f| f.satisfaction_signal(tr)).collect::<Result<Vec<_>>>()?;
                (0..n).map(|k| sigs.iter().all(|s| s[k])).collect()
            }
            F::Or(fs) => {
                let sigs = fs.iter().map(|f| f.satisfaction_signal(tr)).collect::<Result<Vec<_>>>()?;
                (0..n).map(|k| sigs.iter().any(|s| s[k])).collect()
            }
            F::Implies(p, q) => {
                let (sp, sq) = (p.satisfaction_signal(tr)?, q.satisfaction_signal(tr)?);
                (0..n).map(|k| !sp[k] || sq[k]).collect()
            }
            F::Always(i, f) => {
                let s = f.satisfaction_signal(tr)?;
                (0..n)
                    .map(|k| i.window(k, n, t_s).is_none_or(|(lo, hi)| s[lo..=hi].iter().all(|v| *v)))
                    .collect()
            }
            F::Eventually(i, f) => {
                let s = f.satisfaction_signal(tr)?;
                (0..n)
                    .map(|k| i.window(k, n, t_s).is_some_and(|(lo, hi)| s[lo..=hi].iter().any(|v| *v)))
                    .collect()
            }
            F::Until(i, l, r) => {
                let (sl, sr) = (l.satisfaction_signal(tr)?, r.satisfaction_signal(tr)?);
                (0..n)
                    .map(|k| {
                        i.window(k, n, t_s)
                            .is_some_and(|(lo, hi)| (lo..=hi).any(|j| sr[j] && sl[k..j].iter().all(|v| *v)))
                    })
                    .collect()
            }
            F::Release(i, l, r) => {
                let (sl, sr) = (l.satisfaction_signal(tr)?, r.satisfaction_signal(tr)?);
                (0..n)
                    .map(|k| {
                        i.window(k, n, t_s)
                            .is_none_or(|(lo, hi)| (lo..=hi).all(|j| sr[j] || sl[k..j].iter().any(|v| *v)))
                    })
                    .collect()
            }
        })
    }

    /// Robustness at every sample; empty windows give `+inf` (always) and
    /// `-inf` (eventually).
    pub fn robustness_signal(&self, tr: &Trace) -> Result<Vec<f64>> {
        self.check_vars(tr)?;
        let n = tr.len();
        let t_s = tr.t_s();
        let min = |s: &[f64]| s.iter().copied().fold(f64::INFINITY, f64::min);
        let max = |s: &[f64]| s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(match self {
            F::Pred(p) => (0..n)
                .map(|k| p.lhs(tr, k).map(|v| p.margin_of(v)))
                .collect::<Result<_>>()?,
            F::Not(f) => f.robustness_signal(tr)?.into_iter().map(|v| -v).collect(),
            F::And(fs) => {
                let sigs = fs.iter().map(|f| f.robustness_signal(tr)).collect::<Result<Vec<_>>>()?;
                (0..n).map(|k| sigs.iter().map(|s| s[k]).fold(f64::INFINITY, f64::min)).collect()
            }
            F::Or(fs) => {
                let sigs = fs.iter().map(|f| f.robustness_signal(tr)).collect::<Result<Vec<_>>>()?;
                (0..n).map(|k| sigs.iter().map(|s| s[k]).fold(f64::NEG_INFINITY, f64::max)).collect()
            }
            F::Implies(p, q) => {
                let (sp, sq) = (p.robustness_signal(tr)?, q.robustness_signal(tr)?);
                (0..n).map(|k| (-sp[k]).max(sq[k])).collect()
            }
            F::Always(i, f) => {
                let s = f.robustness_signal(tr)?;
                (0..n)
                    .map(|k| i.window(k, n, t_s).map_or(f64::INFINITY, |(lo, hi)| min(&s[lo..=hi])))
                    .collect()
            }
            F::Eventually(i, f) => {
                let s = f.robustness_signal(tr)?;
                (0..n)
                    .map(|k| i.window(k, n, t_s).map_or(f64::NEG_INFINITY, |(lo, hi)| max(&s[lo..=hi])))
                    .collect()
            }
            F::Until(i, l, r) => {
                let (sl, sr) = (l.robustness_signal(tr)?, r.robustness_signal(tr)?);
                (0..n)
                    .map(|k| {
                        i.window(k, n, t_s).map_or(f64::NEG_INFINITY, |(lo, hi)| {
                            (lo..=hi).map(|j| sr[j].min(min(&sl[k..j]))).fold(f64::NEG_INFINITY, f64::max)
                        })
                    })
                    .collect()
            }
            F::Release(i, l, r) => {
                let (sl, sr) = (l.robustness_signal(tr)?, r.robustness_signal(tr)?);
                (0..n)
                    .map(|k| {
                        i.window(k, n, t_s).map_or(f64::INFINITY, |(lo, hi)| {
                            (lo..=hi).map(|j| sr[j].max(max(&sl[k..j]))).fold(f64::INFINITY, f64::min)
                        })
                    })
                    .collect()
            }
        })
    }

    pub fn evaluate_bool(&self, tr: &Trace, k: usize) -> Result<bool> {
        if k >= tr.len() {
            return Err(Error::Domain(format!("sample {k} outside trace of length {}", tr.len())));
        }
        Ok(self.satisfaction_signal(tr)?[k])
    }

    pub fn robustness(&self, tr: &Trace, k: usize) -> Result<f64> {
        if k >= tr.len() {
            return Err(Error::Domain(format!("sample {k} outside trace of length {}", tr.len())));
        }
        Ok(self.robustness_signal(tr)?[k])
    }
}

pub fn evaluate_bool(phi: &StlFormula, tr: &Trace, k: usize) -> Result<bool> {
    phi.evaluate_bool(tr, k)
}

pub fn robustness(phi: &StlFormula, tr: &Trace, k: usize) -> Result<f64> {
    phi.robustness(tr, k)
}

pub fn tighten(phi: &StlFormula, eps: f64) -> StlFormula {
    phi.tighten(eps)
}

pub fn horizon(phi: &StlFormula) -> f64 {
    phi.horizon()
}

fn fmt_terms(f: &mut fmt::Formatter<'_>, terms: &[(String, f64)]) -> fmt::Result {
    if terms.is_empty() {
        return write!(f, "0");
    }
    for (i, (v, c)) in terms.iter().enumerate() {
        let mag = c.abs();
        let neg = c.is_sign_negative();
        match (i, neg) {
            (0, true) => write!(f, "-")?,
            (0, false) => {}
            (_, true) => write!(f, " - ")?,
            (_, false) => write!(f, " + ")?,
        }
        if mag == 1.0 {
            write!(f, "{v}")?;
        } else {
            write!(f, "{mag}*{v}")?;
        }
    }
    Ok(())
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_terms(f, &self.terms)?;
        write!(f, " {} {}", self.rel.symbol(), self.threshold)
    }
}

impl fmt::Display for StlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, fs: &[StlFormula], op: &str| -> fmt::Result {
            write!(f, "(")?;
            for (i, g) in fs.iter().enumerate() {
                if i > 0 {
                    write!(f, " {op} ")?;
                }
                write!(f, "{g}")?;
            }
            write!(f, ")")
        };
        match self {
            F::Pred(p) => write!(f, "({p})"),
            F::Not(g) => write!(f, "!{g}"),
            F::And(fs) if fs.is_empty() => write!(f, "true"),
            F::Or(fs) if fs.is_empty() => write!(f, "false"),
            F::And(fs) => join(f, fs, "&"),
            F::Or(fs) => join(f, fs, "|"),
            F::Implies(p, q) => write!(f, "({p} -> {q})"),
            F::Always(i, g) => write!(f, "G{i} {g}"),
            F::Eventually(i, g) => write!(f, "F{i} {g}"),
            F::Until(i, l, r) => write!(f, "({l} U{i} {r})"),
            F::Release(i, l, r) => write!(f, "({l} R{i} {r})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn trace(t_s: f64, y: &[f64]) -> Trace {
        let mut tr = Trace::new(t_s).unwrap();
        tr.push_channel("y", y.to_vec()).unwrap();
        tr
    }

    #[test]
    fn always_upper_bound() {
        let phi = parse("G (y <= 0.5)").unwrap();
        let tr = trace(1.0, &[0.1, 0.3, 0.6]);
        assert!(!phi.evaluate_bool(&tr, 0).unwrap());
        assert_abs_diff_eq!(phi.robustness(&tr, 0).unwrap(), -0.1, epsilon = 1e-12);
    }

    #[test]
    fn eventually_reaches_window_end() {
        let phi = parse("F[0,1] (y >= 0.5)").unwrap();
        let tr = trace(0.5, &[0.0, 0.2, 0.7]);
        assert!(phi.evaluate_bool(&tr, 0).unwrap());
    }

    #[test]
    fn boundary_robustness_is_zero() {
        let phi = parse("y >= 0").unwrap();
        let tr = trace(1.0, &[0.0]);
        assert_eq!(phi.robustness(&tr, 0).unwrap(), 0.0);
        assert!(phi.evaluate_bool(&tr, 0).unwrap());
    }

    #[test]
    fn empty_windows() {
        let tr = trace(1.0, &[0.0, 0.0]);
        let g = parse("G[5,6] (y >= 1)").unwrap();
        let f = parse("F[5,6] (y <= 1)").unwrap();
        assert!(g.evaluate_bool(&tr, 0).unwrap());
        assert!(!f.evaluate_bool(&tr, 0).unwrap());
        assert_eq!(g.robustness(&tr, 0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn grid_rounding_is_inward() {
        // 0.3/0.1 is slightly above 3 in floating point
        let i = Interval::new(0.3, 0.7).unwrap();
        assert_eq!(i.offsets(0.1), (3, Some(7)));
        let j = Interval::new(0.25, 0.75).unwrap();
        assert_eq!(j.offsets(0.1), (3, Some(7)));
    }

    #[test]
    fn horizons() {
        assert_eq!(parse("y <= 1").unwrap().horizon(), 0.0);
        assert_eq!(parse("F[0,1] G (y <= 1)").unwrap().horizon(), f64::INFINITY);
        assert_eq!(parse("F[0,1] G[0,2] (y <= 1)").unwrap().horizon(), 3.0);
    }

    #[test]
    fn tighten_case3_threshold() {
        let phi = parse("G (y <= 0.45)").unwrap();
        assert_eq!(phi.tighten(0.0), phi);
        let t = phi.tighten(-0.015);
        match t {
            F::Always(_, g) => match *g {
                F::Pred(p) => assert_abs_diff_eq!(p.threshold, 0.435, epsilon = 1e-15),
                _ => panic!(),
            },
            _ => panic!(),
        }
    }

    #[test]
    fn tighten_recovery_moves_every_threshold_inward() {
        let phi = StlFormula::recovery("x1", 0.45, 1.0).unwrap().tighten(-0.015);
        phi.visit_preds(&mut |p| assert_abs_diff_eq!(p.threshold, 0.435, epsilon = 1e-15));
    }

    #[test]
    fn until_semantics() {
        let phi = parse("(y <= 1) U[0,2] (y >= 5)").unwrap();
        assert!(phi.evaluate_bool(&trace(1.0, &[0.0, 1.0, 6.0]), 0).unwrap());
        assert!(!phi.evaluate_bool(&trace(1.0, &[0.0, 2.0, 6.0]), 0).unwrap());
        assert!(!phi.evaluate_bool(&trace(1.0, &[0.0, 0.0, 0.0, 6.0]), 0).unwrap());
    }

    #[test]
    fn desugar_removes_implication_and_negation() {
        let phi = StlFormula::recovery("x1", 0.45, 1.0).unwrap();
        let d = phi.desugar();
        assert!(d.is_nnf());
        assert_eq!(d.desugar(), d);
    }

    #[test]
    fn unknown_variable() {
        let phi = parse("z <= 1").unwrap();
        assert!(matches!(phi.evaluate_bool(&trace(1.0, &[0.0]), 0), Err(Error::UnknownVariable(_))));
    }
}
