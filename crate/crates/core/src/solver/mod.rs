//! LP and MILP solver for desk-scale scheduling models.
//!
//! [`solve_lp`] runs the dual simplex of [`simplex`] on the presolved model.
//! [`solve_milp`] adds branch and bound: an initial depth-first dive until the
//! first incumbent, then best-first on the parent bound with ties to the older
//! node. It branches on the most fractional binary (lowest index on ties) and
//! warm-starts every node from the previous basis. When every objective
//! coefficient sits on a binary and is integral, bounds are rounded up before
//! pruning, and nonbasic binaries whose reduced cost alone would exceed the
//! incumbent are fixed in the children. Among equal objectives the
//! lexicographically smallest binary assignment is kept.

mod presolve;
mod simplex;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::milp::{MilpModel, Sense, VarKind};
use presolve::{presolve, Outcome, Reduced};
use simplex::{DualSimplex, LpStatus};

/// Largest constraint violation and distance from {0, 1} accepted in a
/// reported solution.
pub const SOLUTION_TOL: f64 = 1e-6;
pub const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    LimitReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpSolution {
    pub status: SolveStatus,
    /// Objective of `x`; NaN when there is no assignment.
    pub objective: f64,
    /// Assignment in model order; empty when there is none.
    pub x: Vec<f64>,
    pub nodes: usize,
    pub wall_time: f64,
    /// Relative gap between the assignment and the best bound.
    pub gap: f64,
    pub best_bound: f64,
    pub lp_iterations: usize,
    pub diagnostics: Option<String>,
}

impl MilpSolution {
    fn empty(status: SolveStatus, start: Instant) -> Self {
        Self {
            status,
            objective: f64::NAN,
            x: Vec::new(),
            nodes: 0,
            wall_time: start.elapsed().as_secs_f64(),
            gap: f64::INFINITY,
            best_bound: f64::NAN,
            lp_iterations: 0,
            diagnostics: None,
        }
    }

    pub fn has_assignment(&self) -> bool {
        !self.x.is_empty() || matches!(self.status, SolveStatus::Optimal)
    }

    /// Value of a variable by name.
    pub fn value(&self, m: &MilpModel, name: &str) -> Option<f64> {
        m.var_index(name).and_then(|j| self.x.get(j).copied())
    }

    /// JSON dump: status, objective, gap, nodes and a name → value map.
    pub fn to_json(&self, m: &MilpModel) -> serde_json::Value {
        let values: BTreeMap<&str, f64> = m.vars.iter().zip(&self.x).map(|(v, x)| (v.name.as_str(), *x)).collect();
        let num = |v: f64| if v.is_finite() { serde_json::json!(v) } else { serde_json::Value::Null };
        serde_json::json!({
            "status": self.status,
            "objective": num(self.objective),
            "best_bound": num(self.best_bound),
            "gap": num(self.gap),
            "nodes": self.nodes,
            "lp_iterations": self.lp_iterations,
            "values": values,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    /// Wall-clock limit in seconds.
    pub time: Option<f64>,
    pub nodes: usize,
    /// Relative gap at which the search stops.
    pub gap: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            time: None,
            nodes: 2_000_000,
            gap: 0.0,
        }
    }
}

/// Scales every row to unit largest coefficient and builds the simplex.
fn build_lp(r: &Reduced) -> DualSimplex {
    let mut rows = Vec::with_capacity(r.rows.len());
    let mut lo = Vec::with_capacity(r.rows.len());
    let mut hi = Vec::with_capacity(r.rows.len());
    for (i, row) in r.rows.iter().enumerate() {
        let s = row.iter().fold(0.0f64, |m, e| m.max(e.1.abs()));
        let s = if s > 0.0 { s } else { 1.0 };
        rows.push(row.iter().map(|&(j, a)| (j, a / s)).collect());
        lo.push(r.row_lo[i] / s);
        hi.push(r.row_hi[i] / s);
    }
    DualSimplex::new(r.n(), rows, &r.cost, &r.lower, &r.upper, &lo, &hi)
}

fn max_iter(lp: &DualSimplex, rows: usize) -> usize {
    50 * (lp.n() + rows) + 1000
}

fn deadline(start: Instant, limits: &Limits) -> Option<Instant> {
    limits.time.map(|s| start + std::time::Duration::from_secs_f64(s.max(0.0)))
}

/// LP relaxation: binaries are treated as continuous in their bounds.
pub fn solve_lp(model: &MilpModel) -> MilpSolution {
    solve_lp_limited(model, &Limits::default())
}

pub fn solve_lp_limited(model: &MilpModel, limits: &Limits) -> MilpSolution {
    let start = Instant::now();
    let r = match presolve(model, true) {
        Outcome::Infeasible(why) => {
            let mut s = MilpSolution::empty(SolveStatus::Infeasible, start);
            s.diagnostics = Some(why);
            return s;
        }
        Outcome::Unbounded(why) => {
            let mut s = MilpSolution::empty(SolveStatus::Unbounded, start);
            s.diagnostics = Some(why);
            return s;
        }
        Outcome::Reduced(r) => r,
    };
    let mut lp = build_lp(&r);
    let status = lp.solve(max_iter(&lp, r.rows.len()), deadline(start, limits));
    let mut s = MilpSolution::empty(
        match status {
            LpStatus::Optimal => SolveStatus::Optimal,
            LpStatus::Infeasible => SolveStatus::Infeasible,
            LpStatus::Unbounded => SolveStatus::Unbounded,
            LpStatus::Limit => SolveStatus::LimitReached,
        },
        start,
    );
    s.lp_iterations = lp.iterations;
    s.diagnostics = lp.diagnostics.clone();
    if status == LpStatus::Optimal {
        s.x = r.postsolve(&lp.x());
        s.objective = model.objective_value(&s.x);
        s.best_bound = s.objective;
        s.gap = 0.0;
    }
    s.wall_time = start.elapsed().as_secs_f64();
    s
}

/// `a` precedes `b` when its binaries are lexicographically smaller.
fn lex_smaller(model: &MilpModel, a: &[f64], b: &[f64]) -> bool {
    for (j, v) in model.vars.iter().enumerate() {
        if v.kind != VarKind::Binary {
            continue;
        }
        let (x, y) = (a[j].round(), b[j].round());
        if x != y {
            return x < y;
        }
    }
    false
}

/// Accepts `x` when it satisfies the model to [`SOLUTION_TOL`].
fn check_assignment(model: &MilpModel, x: &[f64]) -> std::result::Result<(), String> {
    let (viol, frac) = model.max_violation(x);
    if viol > SOLUTION_TOL || frac > INTEGRALITY_TOL {
        Err(format!("assignment violates the model by {viol:.2e} (integrality {frac:.2e})"))
    } else {
        Ok(())
    }
}

#[derive(Debug)]
struct Node {
    id: usize,
    bound: f64,
    /// Per integer column: 0 free, 1 fixed to 0, 2 fixed to 1.
    fix: Box<[u8]>,
}

impl PartialEq for Node {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Node {
    /// Max-heap order: the smallest bound, then the smallest id, is greatest.
    fn cmp(&self, o: &Self) -> Ordering {
        o.bound.total_cmp(&self.bound).then(o.id.cmp(&self.id))
    }
}

struct Search<'a> {
    model: &'a MilpModel,
    r: Reduced,
    lp: DualSimplex,
    ints: Vec<usize>,
    applied: Vec<u8>,
    integral_obj: bool,
    incumbent: Option<(f64, Vec<f64>)>,
}

impl Search<'_> {
    /// Smallest objective an integer point below an LP value `z` can have.
    fn round_bound(&self, z: f64) -> f64 {
        if self.integral_obj {
            self.r.offset + (z - self.r.offset - 1e-6).ceil()
        } else {
            z
        }
    }

    fn cannot_improve(&self, z: f64) -> bool {
        match &self.incumbent {
            Some((inc, _)) => self.round_bound(z) >= inc - 1e-9 * inc.abs().max(1.0),
            None => false,
        }
    }

    fn apply(&mut self, fix: &[u8]) {
        for (q, &f) in fix.iter().enumerate() {
            if self.applied[q] == f {
                continue;
            }
            let j = self.ints[q];
            let (lo, hi) = match f {
                0 => (self.r.lower[j], self.r.upper[j]),
                1 => (0.0, 0.0),
                _ => (1.0, 1.0),
            };
            self.lp.set_col_bounds(j, lo, hi);
            self.applied[q] = f;
        }
    }

    fn offer(&mut self, x: Vec<f64>) -> std::result::Result<bool, String> {
        check_assignment(self.model, &x)?;
        let obj = self.model.objective_value(&x);
        let better = match &self.incumbent {
            None => true,
            Some((inc, best)) => {
                let tol = 1e-9 * inc.abs().max(1.0);
                obj < inc - tol || ((obj - inc).abs() <= tol && lex_smaller(self.model, &x, best))
            }
        };
        if better {
            self.incumbent = Some((obj, x));
        }
        Ok(better)
    }
}

/// Branch and bound with default limits.
pub fn solve_milp(model: &MilpModel, limits: &Limits) -> MilpSolution {
    solve_milp_warm(model, limits, None)
}

/// Branch and bound seeded with a known feasible assignment, if any.
pub fn solve_milp_warm(model: &MilpModel, limits: &Limits, start_point: Option<&[f64]>) -> MilpSolution {
    let start = Instant::now();
    let deadline = deadline(start, limits);
    let r = match presolve(model, false) {
        Outcome::Infeasible(why) => {
            let mut s = MilpSolution::empty(SolveStatus::Infeasible, start);
            s.diagnostics = Some(why);
            return s;
        }
        Outcome::Unbounded(why) => {
            let mut s = MilpSolution::empty(SolveStatus::Unbounded, start);
            s.diagnostics = Some(why);
            return s;
        }
        Outcome::Reduced(r) => r,
    };
    let ints: Vec<usize> = (0..r.n()).filter(|&j| r.integer[j]).collect();
    let integral_obj = r
        .cost
        .iter()
        .enumerate()
        .all(|(j, &c)| c == 0.0 || (r.integer[j] && c.fract() == 0.0));
    let lp = build_lp(&r);
    let n_rows = r.rows.len();
    let mut s = Search {
        model,
        applied: vec![0; ints.len()],
        ints,
        integral_obj,
        incumbent: None,
        lp,
        r,
    };
    let mut diagnostics = None;
    if let Some(x0) = start_point {
        if x0.len() == model.n_vars() {
            if let Err(e) = s.offer(x0.to_vec()) {
                diagnostics = Some(format!("start point rejected: {e}"));
            }
        }
    }
    let iter_cap = max_iter(&s.lp, n_rows);

    let mut nodes = 0usize;
    let mut next_id = 1usize;
    let mut incomplete = false;
    let mut root_bound = f64::NEG_INFINITY;
    let mut stack: Vec<Node> = vec![Node {
        id: 0,
        bound: f64::NEG_INFINITY,
        fix: vec![0; s.ints.len()].into_boxed_slice(),
    }];
    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut diving = s.incumbent.is_none();
    if !diving {
        heap.extend(stack.drain(..));
    }
    let mut stopped = false;

    loop {
        if diving && s.incumbent.is_some() {
            heap.extend(stack.drain(..));
            diving = false;
        }
        let node = if diving { stack.pop() } else { heap.pop() };
        let Some(node) = node else { break };
        if s.cannot_improve(node.bound) {
            continue;
        }
        if nodes >= limits.nodes || deadline.is_some_and(|d| Instant::now() >= d) {
            if diving {
                stack.push(node);
            } else {
                heap.push(node);
            }
            stopped = true;
            break;
        }
        if let Some((inc, _)) = &s.incumbent {
            if !diving {
                let lb = s.round_bound(node.bound);
                if inc - lb <= limits.gap * inc.abs().max(1.0) && limits.gap > 0.0 {
                    heap.push(node);
                    stopped = true;
                    break;
                }
            }
        }
        nodes += 1;
        s.apply(&node.fix);
        let status = s.lp.solve(iter_cap, deadline);
        match status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                if nodes == 1 {
                    let mut out = MilpSolution::empty(SolveStatus::Infeasible, start);
                    out.nodes = 1;
                    out.lp_iterations = s.lp.iterations;
                    return out;
                }
                continue;
            }
            LpStatus::Unbounded => {
                let mut out = MilpSolution::empty(SolveStatus::Unbounded, start);
                out.nodes = nodes;
                out.lp_iterations = s.lp.iterations;
                if nodes == 1 {
                    return out;
                }
                incomplete = true;
                diagnostics = Some("unbounded relaxation below the root".into());
                continue;
            }
            LpStatus::Limit => {
                incomplete = true;
                diagnostics = s.lp.diagnostics.clone();
                if deadline.is_some_and(|d| Instant::now() >= d) {
                    stopped = true;
                    if diving {
                        stack.push(node);
                    } else {
                        heap.push(node);
                    }
                    break;
                }
                continue;
            }
        }
        let z = s.lp.objective() + s.r.offset;
        if nodes == 1 {
            root_bound = z;
        }
        if s.cannot_improve(z) {
            continue;
        }
        let xr = s.lp.x();
        let mut branch: Option<(usize, f64)> = None;
        for (q, &j) in s.ints.iter().enumerate() {
            let f = xr[j] - xr[j].floor();
            let score = f.min(1.0 - f);
            if score > INTEGRALITY_TOL && branch.is_none_or(|(_, b)| score > b) {
                branch = Some((q, score));
            }
        }
        let Some((q, _)) = branch else {
            let mut xi = xr.clone();
            for &j in &s.ints {
                xi[j] = xi[j].round();
            }
            let full = s.r.postsolve(&xi);
            if let Err(e) = s.offer(full) {
                incomplete = true;
                diagnostics = Some(e);
            }
            continue;
        };

        let mut fix = node.fix.clone();
        if s.incumbent.is_some() {
            for (p, &j) in s.ints.iter().enumerate() {
                if fix[p] != 0 || p == q {
                    continue;
                }
                if let Some((d, at_upper)) = s.lp.reduced_cost(j) {
                    if !at_upper && d > 0.0 && s.cannot_improve(z + d) {
                        fix[p] = 1;
                    } else if at_upper && d < 0.0 && s.cannot_improve(z - d) {
                        fix[p] = 2;
                    }
                }
            }
        }
        let mut down = fix.clone();
        down[q] = 1;
        let mut up = fix;
        up[q] = 2;
        let down = Node {
            id: next_id,
            bound: z,
            fix: down,
        };
        let up = Node {
            id: next_id + 1,
            bound: z,
            fix: up,
        };
        next_id += 2;
        if diving {
            if xr[s.ints[q]] >= 0.5 {
                stack.push(down);
                stack.push(up);
            } else {
                stack.push(up);
                stack.push(down);
            }
        } else {
            heap.push(down);
            heap.push(up);
        }
    }

    let open_bound = stack
        .iter()
        .chain(heap.iter())
        .filter(|n| !s.cannot_improve(n.bound))
        .map(|n| n.bound.max(root_bound))
        .fold(f64::INFINITY, f64::min);
    let mut out = MilpSolution::empty(SolveStatus::LimitReached, start);
    out.nodes = nodes;
    out.lp_iterations = s.lp.iterations;
    out.diagnostics = diagnostics;
    match s.incumbent.take() {
        Some((obj, x)) => {
            let bound = if open_bound.is_finite() {
                s.round_bound(open_bound).min(obj)
            } else if incomplete {
                root_bound.min(obj)
            } else {
                obj
            };
            out.gap = (obj - bound).max(0.0) / obj.abs().max(1.0);
            out.best_bound = bound;
            out.status = if !stopped && !incomplete || out.gap <= 1e-6 && !incomplete {
                SolveStatus::Optimal
            } else {
                SolveStatus::LimitReached
            };
            out.objective = obj;
            out.x = x;
        }
        None => {
            out.status = if stopped || incomplete {
                SolveStatus::LimitReached
            } else {
                SolveStatus::Infeasible
            };
            out.best_bound = if open_bound.is_finite() { open_bound } else { root_bound };
        }
    }
    out.wall_time = start.elapsed().as_secs_f64();
    out
}

/// Exact optimum by solving the LP of every binary assignment (at most 20
/// binaries). The LP is built on the unreduced model.
pub fn enumerate_oracle(model: &MilpModel) -> Result<MilpSolution> {
    let start = Instant::now();
    let bins: Vec<usize> = (0..model.n_vars()).filter(|&j| model.vars[j].kind == VarKind::Binary).collect();
    if bins.len() > 20 {
        return Err(Error::Solver(format!("{} binaries exceed the enumeration limit of 20", bins.len())));
    }
    if bins.is_empty() {
        return Ok(solve_lp(model));
    }
    let n = model.n_vars();
    let rows: Vec<Vec<(usize, f64)>> = model.cons.iter().map(|c| c.coefs.clone()).collect();
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for c in &model.cons {
        let (l, u) = match c.sense {
            Sense::Le => (f64::NEG_INFINITY, c.rhs),
            Sense::Ge => (c.rhs, f64::INFINITY),
            Sense::Eq => (c.rhs, c.rhs),
        };
        lo.push(l);
        hi.push(u);
    }
    let mut cost = vec![0.0; n];
    for &(j, c) in &model.objective {
        cost[j] += c;
    }
    let lower: Vec<f64> = model.vars.iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = model.vars.iter().map(|v| v.upper).collect();
    let mut lp = DualSimplex::new(n, rows, &cost, &lower, &upper, &lo, &hi);
    let cap = 50 * (n + model.n_cons()) + 1000;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut unbounded = false;
    let mut limit = None;
    'leaf: for mask in 0u32..(1u32 << bins.len()) {
        for (q, &j) in bins.iter().enumerate() {
            let v = f64::from((mask >> q) & 1);
            if v < model.vars[j].lower || v > model.vars[j].upper {
                continue 'leaf;
            }
            lp.set_col_bounds(j, v, v);
        }
        match lp.solve(cap, None) {
            LpStatus::Optimal => {
                let x = lp.x();
                let obj = model.objective_value(&x);
                let better = match &best {
                    None => true,
                    Some((b, bx)) => {
                        let tol = 1e-9 * b.abs().max(1.0);
                        obj < b - tol || ((obj - b).abs() <= tol && lex_smaller(model, &x, bx))
                    }
                };
                if better {
                    best = Some((obj, x));
                }
            }
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => unbounded = true,
            LpStatus::Limit => limit = lp.diagnostics.clone(),
        }
    }
    let mut out = MilpSolution::empty(SolveStatus::Infeasible, start);
    out.nodes = 1 << bins.len();
    out.lp_iterations = lp.iterations;
    if unbounded {
        out.status = SolveStatus::Unbounded;
    } else if let Some(d) = limit {
        out.status = SolveStatus::LimitReached;
        out.diagnostics = Some(d);
    } else if let Some((obj, x)) = best {
        out.status = SolveStatus::Optimal;
        out.objective = obj;
        out.best_bound = obj;
        out.gap = 0.0;
        out.x = x;
    }
    out.wall_time = start.elapsed().as_secs_f64();
    Ok(out)
}
