//! Bounded dual simplex on a dense tableau.
//!
//! Every row i gets a logical variable `r_i = a_i·x` carrying the row bounds,
//! so the all-logical basis is available from the start. Infinite bounds are
//! replaced by `±BIG`; with every variable boxed, placing each nonbasic at the
//! bound its reduced cost prefers makes the basis dual feasible and no phase 1
//! is needed. A solution that rests on an artificial bound means the LP is
//! unbounded.
//!
//! The tableau `T` expresses the basic variables in the nonbasic ones,
//! `x_B = T x_N`. It is updated by pivoting and recomputed from the original
//! rows every [`REFACTOR_EVERY`] pivots. The ratio test flips boxed variables
//! past their breakpoints while that still reduces the primal infeasibility,
//! and breaks near-ties towards the largest pivot. After a run of iterations
//! without progress the method switches to smallest-index choices.

use std::time::Instant;

use nalgebra::DMatrix;

pub(crate) const PIVOT_TOL: f64 = 1e-9;
pub(crate) const FEAS_TOL: f64 = 1e-7;
const DUAL_TOL: f64 = 1e-9;
const BIG: f64 = 1e7;
pub(crate) const REFACTOR_EVERY: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration or time limit, or numerical breakdown.
    Limit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Place {
    Lower,
    Upper,
    /// Free nonbasic held at zero.
    Zero,
}

enum Step {
    Optimal,
    Infeasible,
    Pivoted,
}

#[derive(Debug, Clone)]
pub(crate) struct DualSimplex {
    m: usize,
    n: usize,
    rows: Vec<Vec<(usize, f64)>>,
    /// Per variable (structurals then logicals).
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    head: Vec<usize>,
    nonb: Vec<usize>,
    /// Row of a basic variable, or `usize::MAX`.
    basic_row: Vec<usize>,
    /// Column of a nonbasic variable, or `usize::MAX`.
    nonb_col: Vec<usize>,
    place: Vec<Place>,
    t: Vec<f64>,
    d: Vec<f64>,
    beta: Vec<f64>,
    since_refactor: usize,
    pub iterations: usize,
    pub diagnostics: Option<String>,
}

impl DualSimplex {
    /// `rows` are sparse over `n` structural columns.
    pub fn new(
        n: usize,
        rows: Vec<Vec<(usize, f64)>>,
        cost: &[f64],
        lower: &[f64],
        upper: &[f64],
        row_lo: &[f64],
        row_hi: &[f64],
    ) -> Self {
        let m = rows.len();
        let mut t = vec![0.0; m * n];
        for (i, row) in rows.iter().enumerate() {
            for &(j, a) in row {
                t[i * n + j] += a;
            }
        }
        let mut c = cost.to_vec();
        c.resize(n + m, 0.0);
        let mut lo = lower.to_vec();
        lo.extend_from_slice(row_lo);
        let mut hi = upper.to_vec();
        hi.extend_from_slice(row_hi);
        let mut s = Self {
            m,
            n,
            rows,
            cost: c,
            lo,
            hi,
            head: (n..n + m).collect(),
            nonb: (0..n).collect(),
            basic_row: (0..n).map(|_| usize::MAX).chain(0..m).collect(),
            nonb_col: (0..n).chain((0..m).map(|_| usize::MAX)).collect(),
            place: vec![Place::Lower; n + m],
            t,
            d: cost.to_vec(),
            beta: vec![0.0; m],
            since_refactor: 0,
            iterations: 0,
            diagnostics: None,
        };
        s.place_nonbasics();
        s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn set_col_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lo[j] = lo;
        self.hi[j] = hi;
    }

    fn lo_eff(&self, v: usize) -> f64 {
        if self.lo[v] == f64::NEG_INFINITY {
            -BIG
        } else {
            self.lo[v]
        }
    }

    fn hi_eff(&self, v: usize) -> f64 {
        if self.hi[v] == f64::INFINITY {
            BIG
        } else {
            self.hi[v]
        }
    }

    fn is_free(&self, v: usize) -> bool {
        self.lo[v] == f64::NEG_INFINITY && self.hi[v] == f64::INFINITY
    }

    fn nb_value(&self, v: usize) -> f64 {
        match self.place[v] {
            Place::Lower => self.lo_eff(v),
            Place::Upper => self.hi_eff(v),
            Place::Zero => 0.0,
        }
    }

    fn place_nonbasics(&mut self) {
        for p in 0..self.n {
            let v = self.nonb[p];
            let d = self.d[p];
            self.place[v] = if self.lo[v] == self.hi[v] || d > DUAL_TOL {
                Place::Lower
            } else if d < -DUAL_TOL {
                Place::Upper
            } else if self.is_free(v) {
                Place::Zero
            } else if self.lo[v] == f64::NEG_INFINITY || (self.place[v] == Place::Upper && self.hi[v].is_finite()) {
                Place::Upper
            } else {
                Place::Lower
            };
        }
    }

    fn compute_beta(&mut self) {
        let xn: Vec<f64> = self.nonb.iter().map(|&v| self.nb_value(v)).collect();
        let n = self.n;
        for i in 0..self.m {
            let row = &self.t[i * n..(i + 1) * n];
            self.beta[i] = row.iter().zip(&xn).map(|(a, b)| a * b).sum();
        }
    }

    /// Values of the structural variables.
    pub fn x(&self) -> Vec<f64> {
        (0..self.n)
            .map(|v| {
                if self.basic_row[v] != usize::MAX {
                    self.beta[self.basic_row[v]]
                } else {
                    self.nb_value(v)
                }
            })
            .collect()
    }

    pub fn objective(&self) -> f64 {
        self.x().iter().zip(&self.cost).map(|(x, c)| x * c).sum()
    }

    /// Reduced cost of a nonbasic structural column and whether it sits at
    /// its upper bound; `None` for basic columns.
    pub fn reduced_cost(&self, j: usize) -> Option<(f64, bool)> {
        let p = self.nonb_col[j];
        (p != usize::MAX).then(|| (self.d[p], self.place[j] == Place::Upper))
    }

    /// Recomputes the tableau, reduced costs and basic values from the rows.
    fn refactor(&mut self) -> bool {
        let (m, n) = (self.m, self.n);
        let s_cols: Vec<usize> = self.head.iter().copied().filter(|&v| v < n).collect();
        let r_rows: Vec<usize> = self.nonb.iter().copied().filter(|&v| v >= n).map(|v| v - n).collect();
        let k = s_cols.len();
        debug_assert_eq!(k, r_rows.len());
        let mut s_index = vec![usize::MAX; n];
        for (q, &j) in s_cols.iter().enumerate() {
            s_index[j] = q;
        }
        // W = A_RS^{-1} [ -A_R,N | I ] over the nonbasic positions
        let mut w = DMatrix::<f64>::zeros(k, n);
        if k > 0 {
            let mut ars = DMatrix::<f64>::zeros(k, k);
            for (q, &i) in r_rows.iter().enumerate() {
                for &(j, a) in &self.rows[i] {
                    if s_index[j] != usize::MAX {
                        ars[(q, s_index[j])] += a;
                    } else {
                        let p = self.nonb_col[j];
                        w[(q, p)] -= a;
                    }
                }
                let p = self.nonb_col[n + i];
                w[(q, p)] += 1.0;
            }
            let lu = ars.lu();
            let u = lu.u();
            let umax = u.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let umin = u.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            if !(umin > 1e-11 * umax.max(1.0)) {
                self.diagnostics = Some(format!("basis matrix is singular (pivot ratio {:.1e})", umin / umax.max(1.0)));
                return false;
            }
            if !lu.solve_mut(&mut w) {
                self.diagnostics = Some("basis factorization failed".into());
                return false;
            }
        }
        let mut t = vec![0.0; m * n];
        for (ri, &v) in self.head.iter().enumerate() {
            let row = &mut t[ri * n..(ri + 1) * n];
            if v < n {
                let q = s_index[v];
                for p in 0..n {
                    row[p] = w[(q, p)];
                }
            } else {
                for &(j, a) in &self.rows[v - n] {
                    if s_index[j] != usize::MAX {
                        let q = s_index[j];
                        for p in 0..n {
                            row[p] += a * w[(q, p)];
                        }
                    } else {
                        row[self.nonb_col[j]] += a;
                    }
                }
            }
        }
        self.t = t;
        for p in 0..n {
            let mut d = self.cost[self.nonb[p]];
            for i in 0..m {
                let c = self.cost[self.head[i]];
                if c != 0.0 {
                    d += c * self.t[i * n + p];
                }
            }
            self.d[p] = d;
        }
        self.since_refactor = 0;
        self.place_nonbasics();
        self.compute_beta();
        true
    }

    fn pivot(&mut self, r: usize, q: usize, leaving_place: Place) {
        let n = self.n;
        let p = self.t[r * n + q];
        let inv = 1.0 / p;
        let mut prow: Vec<f64> = self.t[r * n..(r + 1) * n].iter().map(|v| -v * inv).collect();
        prow[q] = inv;
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * n + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * n..(i + 1) * n];
            for (a, b) in row.iter_mut().zip(&prow) {
                *a += f * b;
            }
            row[q] = f * inv;
        }
        let f = self.d[q];
        if f != 0.0 {
            for (a, b) in self.d.iter_mut().zip(&prow) {
                *a += f * b;
            }
        }
        self.d[q] = f * inv;
        self.t[r * n..(r + 1) * n].copy_from_slice(&prow);

        let entering = self.nonb[q];
        let leaving = self.head[r];
        self.head[r] = entering;
        self.nonb[q] = leaving;
        self.basic_row[entering] = r;
        self.nonb_col[entering] = usize::MAX;
        self.basic_row[leaving] = usize::MAX;
        self.nonb_col[leaving] = q;
        self.place[leaving] = leaving_place;
        self.since_refactor += 1;
    }

    fn iterate(&mut self, bland: bool) -> Step {
        let n = self.n;
        // leaving row
        let mut best: Option<(usize, f64, bool)> = None;
        for i in 0..self.m {
            let v = self.head[i];
            let b = self.beta[i];
            let (l, u) = (self.lo_eff(v), self.hi_eff(v));
            let (inf, inc) = if b < l - FEAS_TOL {
                (l - b, true)
            } else if b > u + FEAS_TOL {
                (b - u, false)
            } else {
                continue;
            };
            let better = match best {
                None => true,
                Some((bi, binf, _)) => {
                    if bland {
                        v < self.head[bi]
                    } else {
                        inf > binf
                    }
                }
            };
            if better {
                best = Some((i, inf, inc));
            }
        }
        let Some((r, delta, increase)) = best else {
            return Step::Optimal;
        };
        let s = if increase { 1.0 } else { -1.0 };
        let row = &self.t[r * n..(r + 1) * n];
        let mut cands: Vec<(f64, usize, f64)> = Vec::new();
        for p in 0..n {
            let v = self.nonb[p];
            if self.lo[v] == self.hi[v] {
                continue;
            }
            let alpha = s * row[p];
            let (ok, dd) = match self.place[v] {
                Place::Lower => (alpha > PIVOT_TOL, self.d[p].max(0.0)),
                Place::Upper => (alpha < -PIVOT_TOL, (-self.d[p]).max(0.0)),
                Place::Zero => (alpha.abs() > PIVOT_TOL, self.d[p].abs()),
            };
            if ok {
                cands.push((dd / alpha.abs(), p, alpha.abs()));
            }
        }
        if cands.is_empty() {
            return Step::Infeasible;
        }
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut flips = Vec::new();
        let chosen = if bland {
            let min = cands[0].0;
            cands
                .iter()
                .filter(|c| c.0 <= min + DUAL_TOL)
                .min_by_key(|c| self.nonb[c.1])
                .map(|c| c.1)
                .expect("nonempty")
        } else {
            let mut slope = delta;
            let mut stop = None;
            for (idx, &(_, p, aa)) in cands.iter().enumerate() {
                let v = self.nonb[p];
                let boxed = self.lo[v].is_finite() && self.hi[v].is_finite();
                let range = self.hi[v] - self.lo[v];
                if boxed && self.place[v] != Place::Zero && slope - aa * range > FEAS_TOL {
                    slope -= aa * range;
                    flips.push(p);
                    continue;
                }
                stop = Some(idx);
                break;
            }
            let Some(stop) = stop else {
                return Step::Infeasible;
            };
            let base = cands[stop].0;
            cands[stop..]
                .iter()
                .take_while(|c| c.0 <= base + DUAL_TOL)
                .fold(None::<(usize, f64)>, |acc, c| match acc {
                    Some((_, a)) if a >= c.2 => acc,
                    _ => Some((c.1, c.2)),
                })
                .map(|c| c.0)
                .expect("nonempty")
        };
        for &p in &flips {
            let v = self.nonb[p];
            let old = self.nb_value(v);
            self.place[v] = if self.place[v] == Place::Upper { Place::Lower } else { Place::Upper };
            let diff = self.nb_value(v) - old;
            for i in 0..self.m {
                self.beta[i] += self.t[i * n + p] * diff;
            }
        }
        let leaving_place = if increase { Place::Lower } else { Place::Upper };
        self.pivot(r, chosen, leaving_place);
        self.compute_beta();
        Step::Pivoted
    }

    /// Largest row residual and bound violation of the current point.
    fn primal_residual(&self) -> f64 {
        let x = self.x();
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lo[j] - v).max(v - self.hi[j]);
        }
        for (i, row) in self.rows.iter().enumerate() {
            let act: f64 = row.iter().map(|&(j, a)| a * x[j]).sum();
            worst = worst.max(self.lo[self.n + i] - act).max(act - self.hi[self.n + i]);
        }
        worst
    }

    fn rests_on_artificial_bound(&self) -> bool {
        (0..self.n + self.m).any(|v| {
            let x = if self.basic_row[v] != usize::MAX {
                self.beta[self.basic_row[v]]
            } else {
                self.nb_value(v)
            };
            (self.lo[v] == f64::NEG_INFINITY && x <= -0.5 * BIG) || (self.hi[v] == f64::INFINITY && x >= 0.5 * BIG)
        })
    }

    /// Runs dual simplex iterations from the current basis.
    pub fn solve(&mut self, max_iter: usize, deadline: Option<Instant>) -> LpStatus {
        self.diagnostics = None;
        self.place_nonbasics();
        self.compute_beta();
        let mut retried = false;
        let mut stall = 0;
        let mut last_obj = f64::NEG_INFINITY;
        let mut count = 0;
        loop {
            if self.since_refactor >= REFACTOR_EVERY && !self.refactor() {
                return LpStatus::Limit;
            }
            let bl = stall >= self.n + self.m;
            match self.iterate(bl) {
                Step::Optimal => {
                    if self.primal_residual() > 1e-6 && !retried {
                        retried = true;
                        if !self.refactor() {
                            return LpStatus::Limit;
                        }
                        continue;
                    }
                    if self.primal_residual() > 1e-6 {
                        self.diagnostics = Some(format!("residual {:.2e} after refactorization", self.primal_residual()));
                        return LpStatus::Limit;
                    }
                    return if self.rests_on_artificial_bound() {
                        LpStatus::Unbounded
                    } else {
                        LpStatus::Optimal
                    };
                }
                Step::Infeasible => {
                    if self.since_refactor > 0 && !retried {
                        retried = true;
                        if !self.refactor() {
                            return LpStatus::Limit;
                        }
                        continue;
                    }
                    return LpStatus::Infeasible;
                }
                Step::Pivoted => {}
            }
            self.iterations += 1;
            count += 1;
            let obj = self.objective();
            if obj > last_obj + 1e-12 * last_obj.abs().max(1.0) {
                stall = 0;
                last_obj = obj;
            } else {
                stall += 1;
            }
            if count >= max_iter {
                self.diagnostics = Some(format!("iteration limit {max_iter} reached"));
                return LpStatus::Limit;
            }
            if count % 64 == 0 && deadline.is_some_and(|d| Instant::now() >= d) {
                self.diagnostics = Some("time limit reached".into());
                return LpStatus::Limit;
            }
        }
    }
}
