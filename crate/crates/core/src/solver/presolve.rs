//! Reductions applied once before the LP/MILP search, and their undo stack.
//!
//! - fixed columns are replaced by constants;
//! - empty rows are checked and dropped, singleton rows become bounds;
//! - on equality rows a free continuous column is solved for and substituted
//!   everywhere (this condenses state recursions onto the inputs);
//! - rows implied by the column bounds are dropped;
//! - columns left without rows go to their cheapest bound.
//!
//! Every reduction stays valid when integer bounds are tightened later, so the
//! reduced problem can be reused by branch and bound.

use std::collections::BTreeSet;

use crate::milp::{MilpModel, Sense, VarKind};

const DROP_TOL: f64 = 1e-12;
const FEAS_TOL: f64 = 1e-9;
const INT_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
enum PostOp {
    Fix { col: usize, value: f64 },
    /// `x[col] = constant + Σ coef·x[k]`.
    Subst { col: usize, constant: f64, terms: Vec<(usize, f64)> },
}

#[derive(Debug)]
pub(crate) enum Outcome {
    Reduced(Reduced),
    Infeasible(String),
    Unbounded(String),
}

/// Problem left after presolve. Columns keep the relative order of the model.
#[derive(Debug, Clone)]
pub(crate) struct Reduced {
    pub n_orig: usize,
    /// Model column of each reduced column.
    pub cols: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integer: Vec<bool>,
    pub cost: Vec<f64>,
    pub offset: f64,
    /// Rows over reduced columns, sorted by column.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub row_lo: Vec<f64>,
    pub row_hi: Vec<f64>,
    /// Model row each reduced row came from (after substitutions).
    post: Vec<PostOp>,
}

impl Reduced {
    /// Model-space values from reduced-space values.
    pub fn postsolve(&self, xr: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_orig];
        for (k, &j) in self.cols.iter().enumerate() {
            x[j] = xr[k];
        }
        for op in self.post.iter().rev() {
            match op {
                PostOp::Fix { col, value } => x[*col] = *value,
                PostOp::Subst { col, constant, terms } => {
                    x[*col] = constant + terms.iter().map(|(k, a)| a * x[*k]).sum::<f64>();
                }
            }
        }
        x
    }

    pub fn n(&self) -> usize {
        self.cols.len()
    }
}

struct Work {
    lo: Vec<f64>,
    hi: Vec<f64>,
    integer: Vec<bool>,
    cost: Vec<f64>,
    offset: f64,
    alive: Vec<bool>,
    rows: Vec<Option<Vec<(usize, f64)>>>,
    rlo: Vec<f64>,
    rhi: Vec<f64>,
    col_rows: Vec<BTreeSet<usize>>,
    post: Vec<PostOp>,
}

fn coef_of(row: &[(usize, f64)], j: usize) -> Option<f64> {
    row.binary_search_by_key(&j, |e| e.0).ok().map(|p| row[p].1)
}

/// `row + f·expr`, both sorted by column.
fn axpy(row: &[(usize, f64)], f: f64, expr: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(row.len() + expr.len());
    let (mut i, mut k) = (0, 0);
    while i < row.len() || k < expr.len() {
        let next = match (row.get(i), expr.get(k)) {
            (Some(a), Some(b)) if a.0 == b.0 => {
                i += 1;
                k += 1;
                (a.0, a.1 + f * b.1)
            }
            (Some(a), Some(b)) if a.0 < b.0 => {
                i += 1;
                *a
            }
            (Some(a), None) => {
                i += 1;
                *a
            }
            (_, Some(b)) => {
                k += 1;
                (b.0, f * b.1)
            }
            (None, None) => unreachable!(),
        };
        let scale = 1.0f64.max(next.1.abs());
        if next.1.abs() > DROP_TOL * scale {
            out.push(next);
        }
    }
    out
}

impl Work {
    fn fix_col(&mut self, j: usize, v: f64) {
        for &r in &self.col_rows[j].clone() {
            let Some(row) = self.rows[r].as_mut() else { continue };
            if let Ok(p) = row.binary_search_by_key(&j, |e| e.0) {
                let a = row.remove(p).1;
                self.rlo[r] -= a * v;
                self.rhi[r] -= a * v;
            }
        }
        self.col_rows[j].clear();
        self.offset += self.cost[j] * v;
        self.cost[j] = 0.0;
        self.alive[j] = false;
        self.post.push(PostOp::Fix { col: j, value: v });
    }

    fn drop_row(&mut self, r: usize) {
        self.rows[r] = None;
    }

    /// Intersects the bounds of column `j`; false when they cross.
    fn tighten(&mut self, j: usize, mut l: f64, mut u: f64) -> bool {
        if self.integer[j] {
            l = (l - INT_TOL).ceil();
            u = (u + INT_TOL).floor();
        }
        let nl = self.lo[j].max(l);
        let nu = self.hi[j].min(u);
        if nl > nu + FEAS_TOL * 1f64.max(nu.abs()) {
            return false;
        }
        self.lo[j] = nl;
        self.hi[j] = nu.max(nl);
        true
    }

    fn activity_bounds(&self, row: &[(usize, f64)]) -> (f64, f64) {
        let (mut l, mut u) = (0.0, 0.0);
        for &(j, a) in row {
            if a > 0.0 {
                l += a * self.lo[j];
                u += a * self.hi[j];
            } else {
                l += a * self.hi[j];
                u += a * self.lo[j];
            }
        }
        (l, u)
    }

    fn substitute(&mut self, r: usize, j: usize) {
        let row = self.rows[r].take().expect("live row");
        let a = coef_of(&row, j).expect("column in row");
        let rhs = self.rlo[r];
        // x_j = rhs/a - Σ (a_k/a) x_k
        let expr: Vec<(usize, f64)> = row.iter().filter(|e| e.0 != j).map(|&(k, c)| (k, -c / a)).collect();
        let constant = rhs / a;
        for &rr in &self.col_rows[j].clone() {
            if rr == r {
                continue;
            }
            let Some(other) = self.rows[rr].as_ref() else { continue };
            let Some(f) = coef_of(other, j) else { continue };
            let without: Vec<(usize, f64)> = other.iter().copied().filter(|e| e.0 != j).collect();
            let merged = axpy(&without, f, &expr);
            self.rlo[rr] -= f * constant;
            self.rhi[rr] -= f * constant;
            for &(k, _) in &merged {
                self.col_rows[k].insert(rr);
            }
            self.rows[rr] = Some(merged);
        }
        let cj = self.cost[j];
        if cj != 0.0 {
            self.offset += cj * constant;
            for &(k, c) in &expr {
                self.cost[k] += cj * c;
            }
            self.cost[j] = 0.0;
        }
        self.col_rows[j].clear();
        self.alive[j] = false;
        self.post.push(PostOp::Subst {
            col: j,
            constant,
            terms: expr,
        });
    }
}

pub(crate) fn presolve(model: &MilpModel, relax: bool) -> Outcome {
    let n = model.n_vars();
    let mut w = Work {
        lo: model.vars.iter().map(|v| v.lower).collect(),
        hi: model.vars.iter().map(|v| v.upper).collect(),
        integer: model.vars.iter().map(|v| v.kind == VarKind::Binary && !relax).collect(),
        cost: vec![0.0; n],
        offset: 0.0,
        alive: vec![true; n],
        rows: Vec::with_capacity(model.n_cons()),
        rlo: Vec::with_capacity(model.n_cons()),
        rhi: Vec::with_capacity(model.n_cons()),
        col_rows: vec![BTreeSet::new(); n],
        post: Vec::new(),
    };
    for &(j, c) in &model.objective {
        w.cost[j] += c;
    }
    for j in 0..n {
        if !w.tighten(j, f64::NEG_INFINITY, f64::INFINITY) {
            return Outcome::Infeasible(format!("bounds of `{}` cross", model.vars[j].name));
        }
    }
    for (r, c) in model.cons.iter().enumerate() {
        let mut row = c.coefs.clone();
        row.sort_by_key(|e| e.0);
        for &(j, _) in &row {
            w.col_rows[j].insert(r);
        }
        w.rows.push(Some(row));
        let (l, u) = match c.sense {
            Sense::Le => (f64::NEG_INFINITY, c.rhs),
            Sense::Ge => (c.rhs, f64::INFINITY),
            Sense::Eq => (c.rhs, c.rhs),
        };
        w.rlo.push(l);
        w.rhi.push(u);
    }

    let mut changed = true;
    while changed {
        changed = false;
        for j in 0..n {
            if w.alive[j] && w.lo[j] == w.hi[j] {
                w.fix_col(j, w.lo[j]);
                changed = true;
            }
        }
        // equalities first, short ones leading, so links are substituted before they densify
        // longer rows and before inequality singletons bound the free columns
        let mut order: Vec<usize> = (0..w.rows.len()).filter(|&r| w.rows[r].is_some()).collect();
        order.sort_by_key(|&r| (w.rlo[r] != w.rhi[r], w.rows[r].as_ref().map_or(0, Vec::len)));
        for r in order {
            let Some(row) = w.rows[r].as_ref() else { continue };
            let tol = FEAS_TOL * 1f64.max(w.rlo[r].abs().min(w.rhi[r].abs()));
            match row.len() {
                0 => {
                    if w.rlo[r] > tol || w.rhi[r] < -tol {
                        return Outcome::Infeasible(format!("row `{}` cannot hold", model.cons[r].name));
                    }
                    w.drop_row(r);
                    changed = true;
                }
                1 => {
                    let (j, a) = row[0];
                    let (l, u) = if a > 0.0 {
                        (w.rlo[r] / a, w.rhi[r] / a)
                    } else {
                        (w.rhi[r] / a, w.rlo[r] / a)
                    };
                    if !w.tighten(j, l, u) {
                        return Outcome::Infeasible(format!(
                            "row `{}` contradicts the bounds of `{}`",
                            model.cons[r].name, model.vars[j].name
                        ));
                    }
                    w.drop_row(r);
                    changed = true;
                }
                _ => {
                    if w.rlo[r] == w.rhi[r] {
                        let amax = row.iter().fold(0.0f64, |m, e| m.max(e.1.abs()));
                        let pick = row
                            .iter()
                            .rev()
                            .find(|&&(j, a)| {
                                !w.integer[j]
                                    && w.lo[j] == f64::NEG_INFINITY
                                    && w.hi[j] == f64::INFINITY
                                    && a.abs() >= 0.1 * amax
                            })
                            .map(|e| e.0);
                        if let Some(j) = pick {
                            w.substitute(r, j);
                            changed = true;
                            continue;
                        }
                    }
                    let (al, au) = w.activity_bounds(row);
                    let scale = 1f64.max(w.rlo[r].abs().min(w.rhi[r].abs()));
                    if al > w.rhi[r] + 1e-7 * scale || au < w.rlo[r] - 1e-7 * scale {
                        return Outcome::Infeasible(format!("row `{}` cannot hold", model.cons[r].name));
                    }
                    if al >= w.rlo[r] - FEAS_TOL && au <= w.rhi[r] + FEAS_TOL {
                        w.drop_row(r);
                        changed = true;
                    }
                }
            }
        }
        // columns without rows go to their cheapest bound
        for j in 0..n {
            if !w.alive[j] {
                continue;
            }
            let used = w.col_rows[j].iter().any(|&r| w.rows[r].as_ref().is_some_and(|row| coef_of(row, j).is_some()));
            if used {
                continue;
            }
            let c = w.cost[j];
            let v = if c > 0.0 {
                w.lo[j]
            } else if c < 0.0 {
                w.hi[j]
            } else {
                0.0f64.clamp(w.lo[j], w.hi[j])
            };
            if !v.is_finite() {
                return Outcome::Unbounded(format!("`{}` can improve the objective without limit", model.vars[j].name));
            }
            w.fix_col(j, v);
            changed = true;
        }
    }

    let mut new_index = vec![usize::MAX; n];
    let cols: Vec<usize> = (0..n).filter(|&j| w.alive[j]).collect();
    for (k, &j) in cols.iter().enumerate() {
        new_index[j] = k;
    }
    let mut rows = Vec::new();
    let mut row_lo = Vec::new();
    let mut row_hi = Vec::new();
    for (r, row) in w.rows.iter().enumerate() {
        let Some(row) = row else { continue };
        rows.push(row.iter().map(|&(j, a)| (new_index[j], a)).collect());
        row_lo.push(w.rlo[r]);
        row_hi.push(w.rhi[r]);
    }
    Outcome::Reduced(Reduced {
        n_orig: n,
        lower: cols.iter().map(|&j| w.lo[j]).collect(),
        upper: cols.iter().map(|&j| w.hi[j]).collect(),
        integer: cols.iter().map(|&j| w.integer[j]).collect(),
        cost: cols.iter().map(|&j| w.cost[j]).collect(),
        cols,
        offset: w.offset,
        rows,
        row_lo,
        row_hi,
        post: w.post,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution_condenses_a_chain() {
        // x1 = x0 + u0, x2 = x1 + u1, x2 >= 1.5, u in [0,1], x0 = 0
        let mut m = MilpModel::new();
        let u0 = m.add_continuous("u0", 0.0, 1.0).unwrap();
        let u1 = m.add_continuous("u1", 0.0, 1.0).unwrap();
        let x0 = m.add_continuous("x0", 0.0, 0.0).unwrap();
        let x1 = m.add_continuous("x1", f64::NEG_INFINITY, f64::INFINITY).unwrap();
        let x2 = m.add_continuous("x2", f64::NEG_INFINITY, f64::INFINITY).unwrap();
        m.add_constraint("d0", vec![(x1, 1.0), (x0, -1.0), (u0, -1.0)], Sense::Eq, 0.0).unwrap();
        m.add_constraint("d1", vec![(x2, 1.0), (x1, -1.0), (u1, -1.0)], Sense::Eq, 0.0).unwrap();
        m.add_constraint("lim", vec![(x2, 1.0)], Sense::Ge, 1.5).unwrap();
        m.set_objective(vec![(x2, 1.0)]);
        let Outcome::Reduced(r) = presolve(&m, false) else { panic!() };
        assert_eq!(r.cols, vec![u0, u1]);
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.cost, vec![1.0, 1.0]);
        let x = r.postsolve(&[1.0, 0.5]);
        assert_eq!(x, vec![1.0, 0.5, 0.0, 1.0, 1.5]);
    }

    #[test]
    fn detects_contradictory_singletons() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 10.0).unwrap();
        m.add_constraint("a", vec![(x, 1.0)], Sense::Ge, 1.0).unwrap();
        m.add_constraint("b", vec![(x, 1.0)], Sense::Le, 0.0).unwrap();
        assert!(matches!(presolve(&m, false), Outcome::Infeasible(_)));
    }
}
