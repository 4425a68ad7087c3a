//! Linearization of the DFIG and selective modal analysis.
//!
//! The state whose participation decides the retained mode is the rotor speed.
//! With the partition `x = [x_r; z]`, the fast states `z` are replaced by their
//! quasi-steady response to the retained mode `x_r(t) ~ e^{λ_r t}` and to the
//! (Boolean, piecewise-constant) input:
//!
//! ```text
//! A_rd = A11 + A12 (λ_r I - A22)^-1 A21      B_rd = B_r + A12 (-A22)^-1 B_z
//! C_rd = C_r + C_z (λ_r I - A22)^-1 A21      D_rd = D   + C_z (-A22)^-1 B_z
//! ```

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dfig::{self, DfigPlant, DfigState};
use crate::error::{Error, Result};
use crate::lti::{discretize_zoh, eigenvalues, LtiSystem, TimeDomain};

/// Eigenvector matrices with a larger condition number are refused.
pub const CONDITION_CAP: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Given,
    Computed { lambda_re: f64, lambda_im: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedWtg {
    pub a_rd: f64,
    pub b_rd: f64,
    pub c_rd: f64,
    pub d_rd: f64,
    pub provenance: Provenance,
}

impl ReducedWtg {
    /// Coefficients injected from data.
    pub fn given(a_rd: f64, b_rd: f64, c_rd: f64, d_rd: f64) -> Self {
        Self {
            a_rd,
            b_rd,
            c_rd,
            d_rd,
            provenance: Provenance::Given,
        }
    }

    pub fn lambda_r(&self) -> Option<Complex64> {
        match self.provenance {
            Provenance::Given => None,
            Provenance::Computed { lambda_re, lambda_im } => Some(Complex64::new(lambda_re, lambda_im)),
        }
    }

    pub fn dc_gain(&self) -> f64 {
        self.c_rd * (-self.b_rd / self.a_rd) + self.d_rd
    }

    pub fn as_system(&self) -> Result<LtiSystem> {
        LtiSystem::new(
            DMatrix::from_element(1, 1, self.a_rd),
            DMatrix::from_element(1, 1, self.b_rd),
            DMatrix::from_element(1, 1, self.c_rd),
            DMatrix::from_element(1, 1, self.d_rd),
            vec!["omega_r".into()],
            vec!["u_ie".into()],
            vec!["dP_g".into()],
            TimeDomain::Continuous,
        )
    }
}

fn fd_step(x: f64) -> f64 {
    (1e-6 * x.abs()).max(1e-8)
}

/// Central-difference derivative of a scalar function.
pub fn derivative(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = fd_step(x);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Central-difference Jacobian of `f` at `x`.
pub fn jacobian(f: &dyn Fn(&[f64]) -> Result<Vec<f64>>, x: &[f64]) -> Result<DMatrix<f64>> {
    let f0 = f(x)?;
    let mut jac = DMatrix::zeros(f0.len(), x.len());
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let h = fd_step(x[j]);
        xp[j] = x[j] + h;
        let fp = f(&xp)?;
        xp[j] = x[j] - h;
        let fm = f(&xp)?;
        xp[j] = x[j];
        for i in 0..f0.len() {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Output of a nonlinear system evaluated at `(x, u)`: derivative and output.
pub type NonlinearFn<'a> = dyn Fn(&[f64], &[f64]) -> Result<(Vec<f64>, Vec<f64>)> + 'a;

/// Linearizes `(ẋ, y) = f(x, u)` about `(x0, u0)`.
pub fn linearize_fn(
    f: &NonlinearFn<'_>,
    x0: &[f64],
    u0: &[f64],
    state_names: Vec<String>,
    input_names: Vec<String>,
    output_names: Vec<String>,
) -> Result<LtiSystem> {
    let n = x0.len();
    let wrt_x = |x: &[f64]| -> Result<Vec<f64>> {
        let (dx, y) = f(x, u0)?;
        Ok(dx.into_iter().chain(y).collect())
    };
    let wrt_u = |u: &[f64]| -> Result<Vec<f64>> {
        let (dx, y) = f(x0, u)?;
        Ok(dx.into_iter().chain(y).collect())
    };
    let jx = jacobian(&wrt_x, x0)?;
    let ju = jacobian(&wrt_u, u0)?;
    let p = jx.nrows() - n;
    LtiSystem::new(
        jx.rows(0, n).into_owned(),
        ju.rows(0, n).into_owned(),
        jx.rows(n, p).into_owned(),
        ju.rows(n, p).into_owned(),
        state_names,
        input_names,
        output_names,
        TimeDomain::Continuous,
    )
}

/// Linear model of a DFIG about an equilibrium with input `u_ie` and output
/// `dP_g`. Refuses points whose right-hand side exceeds 1e-10.
pub fn linearize(plant: &DfigPlant, eq: &DfigState) -> Result<LtiSystem> {
    let (dx, _) = plant.rhs(eq, plant.op.u_ie0)?;
    let res = dx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(res <= 1e-10) {
        return Err(Error::NoEquilibrium {
            iterations: 0,
            residual: res,
        });
    }
    let p_g0 = plant.op.p_g0;
    let f = |x: &[f64], u: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut arr = [0.0; 10];
        arr.copy_from_slice(x);
        let (dx, alg) = plant.rhs(&DfigState::from_array(&arr), u[0])?;
        Ok((dx.to_vec(), vec![alg.p_g - p_g0]))
    };
    linearize_fn(
        &f,
        &eq.to_array(),
        &[plant.op.u_ie0],
        dfig::STATE_NAMES.iter().map(|s| s.to_string()).collect(),
        vec!["u_ie".into()],
        vec!["dP_g".into()],
    )
}

fn cmat(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|v| Complex64::new(v, 0.0))
}

/// Right eigenvectors by inverse iteration, one column per eigenvalue.
/// Repeated eigenvalues get vectors orthogonalized within their cluster.
fn eigenvectors(a: &DMatrix<f64>, lambdas: &[Complex64]) -> Result<DMatrix<Complex64>> {
    let n = a.nrows();
    let ac = cmat(a);
    let scale = a.amax().max(1.0);
    let mut v = DMatrix::<Complex64>::zeros(n, n);
    for (i, &lam) in lambdas.iter().enumerate() {
        let cluster: Vec<usize> = (0..i).filter(|&j| (lambdas[j] - lam).norm() <= 1e-8 * scale).collect();
        let shift = lam + Complex64::new(1e-10 * scale, 0.0);
        let m = &ac - DMatrix::<Complex64>::identity(n, n) * shift;
        let lu = m.lu();
        // deterministic start vector that differs between cluster members
        let mut x = DVector::<Complex64>::from_fn(n, |k, _| {
            Complex64::new(1.0 + ((k * 7 + i * 3) % 11) as f64 / 11.0, ((k + 2 * i) % 5) as f64 / 7.0)
        });
        for _ in 0..4 {
            for &j in &cluster {
                let c = v.column(j).into_owned();
                let proj = c.dotc(&x);
                x -= c * proj;
            }
            let y = lu
                .solve(&x)
                .ok_or(Error::IllConditioned(f64::INFINITY))?;
            let nrm = y.norm();
            if !(nrm.is_finite() && nrm > 0.0) {
                return Err(Error::IllConditioned(f64::INFINITY));
            }
            x = y / Complex64::new(nrm, 0.0);
        }
        for &j in &cluster {
            let c = v.column(j).into_owned();
            let proj = c.dotc(&x);
            x -= c * proj;
        }
        let nrm = x.norm();
        if !(nrm > 1e-12) {
            return Err(Error::IllConditioned(f64::INFINITY));
        }
        let x = x / Complex64::new(nrm, 0.0);
        // a defective eigenvalue leaves a generalized eigenvector here
        let resid = (&ac * &x - &x * lam).norm();
        if !(resid <= 1e-6 * scale) {
            return Err(Error::IllConditioned(f64::INFINITY));
        }
        v.set_column(i, &x);
    }
    Ok(v)
}

/// Eigenvalues with their participation matrix (rows: states, columns: modes).
pub fn modal_participation(a: &DMatrix<f64>) -> Result<(Vec<Complex64>, DMatrix<f64>)> {
    if !a.is_square() {
        return Err(Error::Dimension(format!("participation needs a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    let n = a.nrows();
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite matrix entry".into()));
    }
    let lambdas = eigenvalues(a);
    let v = eigenvectors(a, &lambdas)?;
    let sv = v.clone().singular_values();
    let cond = sv.max() / sv.min();
    if !(cond <= CONDITION_CAP) {
        return Err(Error::IllConditioned(cond));
    }
    let w = v
        .clone()
        .try_inverse()
        .ok_or(Error::IllConditioned(f64::INFINITY))?;
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut sum = 0.0;
        for k in 0..n {
            let val = (v[(k, i)] * w[(i, k)]).norm();
            p[(k, i)] = val;
            sum += val;
        }
        for k in 0..n {
            p[(k, i)] /= sum;
        }
    }
    Ok((lambdas, p))
}

pub fn participation_factors(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    modal_participation(a).map(|(_, p)| p)
}

/// Index of the mode in which state `k` participates most; near-ties go to the
/// slower mode, then to the mode with non-negative imaginary part.
fn dominant_mode(lambdas: &[Complex64], p: &DMatrix<f64>, k: usize) -> usize {
    let mut best = 0;
    for i in 1..lambdas.len() {
        let (pi, pb) = (p[(k, i)], p[(k, best)]);
        let better = if (pi - pb).abs() <= 1e-9 {
            let (ri, rb) = (lambdas[i].re.abs(), lambdas[best].re.abs());
            ri < rb - 1e-12 || ((ri - rb).abs() <= 1e-12 && lambdas[i].im > lambdas[best].im)
        } else {
            pi > pb
        };
        if better {
            best = i;
        }
    }
    best
}

/// Inverts `m` unless it is numerically singular.
fn invert_checked(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    let sv = m.clone().singular_values();
    if !(sv.min() > 1e-12 * sv.max().max(1.0)) {
        return Err(Error::TimeScale(format!("{what} is singular (smallest singular value {:.3e})", sv.min())));
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::TimeScale(format!("{what} is singular")))
}

/// The four reduced matrices for an arbitrary input/output count.
#[derive(Debug, Clone, PartialEq)]
pub struct SmaResult {
    pub a_rd: f64,
    pub b_rd: DMatrix<f64>,
    pub c_rd: DMatrix<f64>,
    pub d_rd: DMatrix<f64>,
    pub lambda_r: Complex64,
    pub warnings: Vec<String>,
}

pub fn sma_reduce_general(sys: &LtiSystem, relevant_state: &str) -> Result<SmaResult> {
    if sys.time != TimeDomain::Continuous {
        return Err(Error::Domain("modal reduction needs a continuous-time system".into()));
    }
    let r = sys.state_index(relevant_state)?;
    let n = sys.n_states();
    let (lambdas, p) = modal_participation(&sys.a)?;
    let lam = lambdas[dominant_mode(&lambdas, &p, r)];
    let mut warnings = Vec::new();
    if lam.im.abs() > 1e-9 {
        let msg = format!(
            "dominant mode for `{relevant_state}` is complex ({:.6} {:+.6}j); using its real part",
            lam.re, lam.im
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let lam_r = lam.re;

    let z: Vec<usize> = (0..n).filter(|&i| i != r).collect();
    let a11 = sys.a[(r, r)];
    let a12 = DMatrix::from_fn(1, z.len(), |_, j| sys.a[(r, z[j])]);
    let a21 = DMatrix::from_fn(z.len(), 1, |i, _| sys.a[(z[i], r)]);
    let a22 = DMatrix::from_fn(z.len(), z.len(), |i, j| sys.a[(z[i], z[j])]);
    let b_r = sys.b.rows(r, 1).into_owned();
    let b_z = DMatrix::from_fn(z.len(), sys.n_inputs(), |i, j| sys.b[(z[i], j)]);
    let c_r = sys.c.columns(r, 1).into_owned();
    let c_z = DMatrix::from_fn(sys.n_outputs(), z.len(), |i, j| sys.c[(i, z[j])]);

    let neg_a22_inv = invert_checked(&(-&a22), "A22")?;
    let shifted = DMatrix::identity(z.len(), z.len()) * lam_r - &a22;
    let shifted_inv = invert_checked(&shifted, "(lambda_r I - A22)")?;

    if !z.is_empty() {
        let fast = eigenvalues(&a22).iter().map(|l| l.re.abs()).fold(f64::INFINITY, f64::min);
        if lam_r.abs() > 0.2 * fast {
            let msg = format!(
                "weak time-scale separation: |Re lambda_r| = {:.4} vs slowest eliminated mode {:.4}",
                lam_r.abs(),
                fast
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }

    let a_rd = a11 + (&a12 * &shifted_inv * &a21)[(0, 0)];
    let b_rd = &b_r + &a12 * &neg_a22_inv * &b_z;
    let c_rd = &c_r + &c_z * &shifted_inv * &a21;
    let d_rd = &sys.d + &c_z * &neg_a22_inv * &b_z;
    Ok(SmaResult {
        a_rd,
        b_rd,
        c_rd,
        d_rd,
        lambda_r: lam,
        warnings,
    })
}

/// First-order model retaining the mode with the largest participation of
/// `relevant_state`. The system must have one input and one output.
pub fn sma_reduce(sys: &LtiSystem, relevant_state: &str) -> Result<ReducedWtg> {
    if sys.n_inputs() != 1 || sys.n_outputs() != 1 {
        return Err(Error::Dimension(format!(
            "reduced WTG model needs one input and one output, got {} and {}",
            sys.n_inputs(),
            sys.n_outputs()
        )));
    }
    let res = sma_reduce_general(sys, relevant_state)?;
    if !(res.a_rd < 0.0) {
        return Err(Error::Domain(format!("retained mode is not stable (A_rd = {})", res.a_rd)));
    }
    Ok(ReducedWtg {
        a_rd: res.a_rd,
        b_rd: res.b_rd[(0, 0)],
        c_rd: res.c_rd[(0, 0)],
        d_rd: res.d_rd[(0, 0)],
        provenance: Provenance::Computed {
            lambda_re: res.lambda_r.re,
            lambda_im: res.lambda_r.im,
        },
    })
}

const FIT_STEPS: usize = 4000;

/// Step responses of a SISO system from rest, sampled on `FIT_STEPS + 1` points.
fn step_response(sys: &LtiSystem, u_step: f64, horizon: f64) -> Result<Vec<f64>> {
    let dt = horizon / FIT_STEPS as f64;
    let d = discretize_zoh(sys, dt)?;
    let u = DVector::from_element(1, u_step);
    let bu = &d.b * &u;
    let du = (&d.d * &u)[0];
    let mut x = DVector::zeros(d.n_states());
    let mut y = Vec::with_capacity(FIT_STEPS + 1);
    for _ in 0..=FIT_STEPS {
        y.push((&d.c * &x)[0] + du);
        x = &d.a * &x + &bu;
    }
    Ok(y)
}

/// RMS of the output mismatch between `full` and `red` under a step of size
/// `u_step`, divided by the peak magnitude of the full response.
pub fn fit_quality(full: &LtiSystem, red: &ReducedWtg, u_step: f64, horizon: f64) -> Result<f64> {
    if full.n_inputs() != 1 || full.n_outputs() != 1 {
        return Err(Error::Dimension("fit quality compares single-input single-output systems".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::Domain("horizon must be positive".into()));
    }
    if !full.is_stable() || !(red.a_rd < 0.0) {
        return Err(Error::Domain("fit quality needs stable systems".into()));
    }
    let yf = step_response(full, u_step, horizon)?;
    let yr = step_response(&red.as_system()?, u_step, horizon)?;
    let peak = yf.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(peak > 0.0) {
        return Err(Error::Domain("full response has zero peak".into()));
    }
    let mse = yf.iter().zip(&yr).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / yf.len() as f64;
    Ok(mse.sqrt() / peak)
}

/// Everything derived on the way from machine parameters to the reduced model.
#[derive(Debug, Clone, Serialize)]
pub struct ReductionReport {
    pub equilibrium: DfigState,
    pub t_m: f64,
    pub eigenvalues: Vec<(f64, f64)>,
    pub lambda_r: (f64, f64),
    pub reduced: ReducedWtg,
    pub fit_quality: f64,
    pub warnings: Vec<String>,
}

/// Equilibrium, linearization and reduction for one machine.
pub fn derive_wtg(params: &dfig::DfigParams, op: &dfig::OperatingPoint) -> Result<(LtiSystem, ReductionReport)> {
    let (plant, x_eq, alg) = DfigPlant::at_equilibrium(*params, *op)?;
    let sys = linearize(&plant, &x_eq)?;
    let general = sma_reduce_general(&sys, "omega_r")?;
    let reduced = sma_reduce(&sys, "omega_r")?;
    let fit = fit_quality(&sys, &reduced, -0.05, 4.0)?;
    let report = ReductionReport {
        equilibrium: x_eq,
        t_m: alg.t_m,
        eigenvalues: sys.eigenvalues().iter().map(|l| (l.re, l.im)).collect(),
        lambda_r: (general.lambda_r.re, general.lambda_r.im),
        reduced,
        fit_quality: fit,
        warnings: general.warnings,
    };
    Ok((sys, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn scalar_derivative() {
        assert_abs_diff_eq!(derivative(|x| x * x, 3.0), 6.0, epsilon = 1e-6);
    }

    #[test]
    fn diagonal_participation_is_identity() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0, -5.0]));
        let p = participation_factors(&a).unwrap();
        let (lam, _) = modal_participation(&a).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                let expect = if (lam[i].re - a[(k, k)]).abs() < 1e-12 { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(p[(k, i)], expect, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn rotation_generator_participation() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let p = participation_factors(&a).unwrap();
        for v in p.iter() {
            assert_abs_diff_eq!(*v, 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn defective_matrix_refused() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]);
        assert!(matches!(participation_factors(&a), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn two_state_hand_formulas() {
        let sys = LtiSystem::from_matrices(
            DMatrix::from_row_slice(2, 2, &[-0.3, 0.1, 0.2, -10.0]),
            DMatrix::from_row_slice(2, 1, &[1.0, 0.5]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DMatrix::zeros(1, 1),
            TimeDomain::Continuous,
        )
        .unwrap();
        let red = sma_reduce(&sys, "x0").unwrap();
        // slow eigenvalue of [[-0.3, 0.1], [0.2, -10]]
        let tr: f64 = -10.3;
        let det: f64 = 3.0 - 0.02;
        let lam = (tr + (tr * tr - 4.0 * det).sqrt()) / 2.0;
        assert_abs_diff_eq!(red.lambda_r().unwrap().re, lam, epsilon = 1e-12);
        assert_abs_diff_eq!(red.a_rd, -0.3 + 0.1 * 0.2 / (lam + 10.0), epsilon = 1e-12);
        assert_abs_diff_eq!(red.b_rd, 1.0 + 0.1 * 0.5 / 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(red.c_rd, 1.0 + 0.2 / (lam + 10.0), epsilon = 1e-12);
        assert_abs_diff_eq!(red.d_rd, 0.5 / 10.0, epsilon = 1e-12);
    }

    #[test]
    fn singular_a22_is_a_time_scale_error() {
        let sys = LtiSystem::from_matrices(
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::zeros(1, 1),
            TimeDomain::Continuous,
        )
        .unwrap();
        assert!(matches!(sma_reduce(&sys, "x0"), Err(Error::TimeScale(_))));
    }

    #[test]
    fn first_order_fit_is_exact() {
        let w = ReducedWtg::given(-0.2771, 2.5741, 0.2550, -2.3343);
        let sys = w.as_system().unwrap();
        assert!(fit_quality(&sys, &w, -0.05, 4.0).unwrap() <= 1e-12);
        let red = sma_reduce(&sys, "omega_r").unwrap();
        assert!(fit_quality(&sys, &red, -0.05, 4.0).unwrap() <= 1e-9);
    }

    #[test]
    fn zero_peak_rejected() {
        let w = ReducedWtg::given(-1.0, 0.0, 0.0, 0.0);
        assert!(fit_quality(&w.as_system().unwrap(), &w, -0.05, 4.0).is_err());
    }
}
