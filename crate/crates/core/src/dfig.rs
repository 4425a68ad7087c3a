//! Doubly-fed induction generator with field-oriented rotor-side converter
//! control, written as an index-1 differential-algebraic system.
//!
//! Fluxes and currents are per unit in the synchronous dq frame with motor
//! reference directions; `P_g` and `Q_g` are reported positive for generation.
//! Converter inner loops are idealized, so the rotor voltage commands are
//! applied instantly. The mechanical torque is held at its equilibrium value.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::Trace;

pub const STATE_NAMES: [&str; 10] = [
    "psi_qs",
    "psi_ds",
    "psi_qr",
    "psi_dr",
    "omega_r",
    "omega_f_star",
    "x1",
    "x2",
    "x3",
    "x4",
];

/// Position of the rotor speed in the state vector.
pub const OMEGA_R: usize = 4;

/// Rotor speeds outside this band abort a simulation.
pub const SPEED_BAND: (f64, f64) = (0.5, 1.5);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DfigParams {
    pub r_s: f64,
    pub r_r: f64,
    pub l_ls: f64,
    pub l_lr: f64,
    pub l_m: f64,
    pub h_t: f64,
    pub omega_bar: f64,
    pub omega_s: f64,
    pub psi_s: f64,
    pub omega_c: f64,
    pub k_p_t: f64,
    pub k_i_t: f64,
    pub k_p_q: f64,
    pub k_i_q: f64,
    pub k_p_c: f64,
    pub k_i_c: f64,
    pub eta: f64,
}

impl Default for DfigParams {
    fn default() -> Self {
        Self {
            r_s: 0.023,
            r_r: 0.016,
            l_ls: 0.18,
            l_lr: 0.16,
            l_m: 2.9,
            h_t: 4.0,
            omega_bar: 2.0 * std::f64::consts::PI * 60.0,
            omega_s: 1.0,
            psi_s: 1.0,
            omega_c: 0.6,
            k_p_t: 3.0,
            k_i_t: 0.6,
            k_p_q: 1.0,
            k_i_q: 5.0,
            k_p_c: 0.3,
            k_i_c: 8.0,
            // keeps η·P_g = 0.6 inside the MPPT band at P_g = 0.8
            eta: 0.75,
        }
    }
}

impl DfigParams {
    pub fn l_s(&self) -> f64 {
        self.l_ls + self.l_m
    }

    pub fn l_r(&self) -> f64 {
        self.l_lr + self.l_m
    }

    pub fn sigma_l_r(&self) -> f64 {
        self.l_r() - self.l_m * self.l_m / self.l_s()
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.r_s,
            self.r_r,
            self.l_ls,
            self.l_lr,
            self.l_m,
            self.h_t,
            self.omega_bar,
            self.omega_s,
            self.psi_s,
            self.omega_c,
            self.k_p_t,
            self.k_i_t,
            self.k_p_q,
            self.k_i_q,
            self.k_p_c,
            self.k_i_c,
            self.eta,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite DFIG parameter".into()));
        }
        if !(self.l_ls > 0.0 && self.l_lr > 0.0 && self.l_m > 0.0) {
            return Err(Error::DegenerateMachine("inductances must be positive".into()));
        }
        if !(self.sigma_l_r() > 0.0) {
            return Err(Error::DegenerateMachine(format!(
                "leakage term sigma*L_r = {} must be positive",
                self.sigma_l_r()
            )));
        }
        if !(self.h_t > 0.0) || !(self.eta > 0.0) || !(self.psi_s > 0.0) {
            return Err(Error::Domain("H_T, eta and Psi_s must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DfigState {
    pub psi_qs: f64,
    pub psi_ds: f64,
    pub psi_qr: f64,
    pub psi_dr: f64,
    pub omega_r: f64,
    pub omega_f_star: f64,
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub x4: f64,
}

impl DfigState {
    pub fn to_array(&self) -> [f64; 10] {
        [
            self.psi_qs,
            self.psi_ds,
            self.psi_qr,
            self.psi_dr,
            self.omega_r,
            self.omega_f_star,
            self.x1,
            self.x2,
            self.x3,
            self.x4,
        ]
    }

    pub fn from_array(v: &[f64; 10]) -> Self {
        Self {
            psi_qs: v[0],
            psi_ds: v[1],
            psi_qr: v[2],
            psi_dr: v[3],
            omega_r: v[4],
            omega_f_star: v[5],
            x1: v[6],
            x2: v[7],
            x3: v[8],
            x4: v[9],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DfigAlgebraic {
    pub i_qs: f64,
    pub i_ds: f64,
    pub i_qr: f64,
    pub i_dr: f64,
    pub v_qr: f64,
    pub v_dr: f64,
    pub p_g: f64,
    pub q_g: f64,
    pub i_qr_star: f64,
    pub i_dr_star: f64,
    pub t_e: f64,
    pub t_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatingPoint {
    /// Wind speed (m/s). Informational: the aerodynamic model is replaced by a
    /// constant mechanical torque.
    pub v_wind: f64,
    pub p_g0: f64,
    pub q_g0: f64,
    pub v_ds: f64,
    pub v_qs: f64,
    pub q_g_star: f64,
    pub u_ie0: f64,
}

impl Default for OperatingPoint {
    fn default() -> Self {
        Self {
            v_wind: 10.0,
            p_g0: 0.8,
            q_g0: 0.0,
            v_ds: 0.0,
            v_qs: 1.0,
            q_g_star: 0.0,
            u_ie0: 0.0,
        }
    }
}

impl OperatingPoint {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_qs * self.v_qs + self.v_ds * self.v_ds > 0.0) {
            return Err(Error::Domain("terminal voltage must be nonzero".into()));
        }
        let all = [self.v_wind, self.p_g0, self.q_g0, self.v_ds, self.v_qs, self.q_g_star, self.u_ie0];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite operating point entry".into()));
        }
        Ok(())
    }
}

/// Maximum power point speed reference for the scaled power `η·P_g`,
/// clamped to the curve's validity band [0.8, 1.2].
pub fn mppt_speed(p_scaled: f64) -> Result<f64> {
    if !p_scaled.is_finite() {
        return Err(Error::Domain(format!("MPPT input must be finite, got {p_scaled}")));
    }
    let raw = -0.67 * p_scaled * p_scaled + 1.42 * p_scaled + 0.51;
    Ok(raw.clamp(0.8, 1.2))
}

pub fn electromagnetic_torque(state: &DfigState, alg: &DfigAlgebraic, params: &DfigParams) -> f64 {
    params.l_m / params.l_s() * (state.psi_qs * alg.i_dr - state.psi_ds * alg.i_qr)
}

/// Recovers stator and rotor currents from flux linkages.
fn currents(state: &DfigState, params: &DfigParams) -> Result<[f64; 4]> {
    let (ls, lr, lm) = (params.l_s(), params.l_r(), params.l_m);
    let det = ls * lr - lm * lm;
    if !(det.abs() > 1e-12) {
        return Err(Error::DegenerateMachine(format!("flux-current matrix is singular (det = {det:e})")));
    }
    let i_qs = (lr * state.psi_qs - lm * state.psi_qr) / det;
    let i_qr = (ls * state.psi_qr - lm * state.psi_qs) / det;
    let i_ds = (lr * state.psi_ds - lm * state.psi_dr) / det;
    let i_dr = (ls * state.psi_dr - lm * state.psi_ds) / det;
    Ok([i_qs, i_ds, i_qr, i_dr])
}

/// Closes the algebraic loop at a given differential state.
///
/// Order: currents from fluxes, the q-axis reference, the q-axis rotor voltage,
/// then the scalar loop linking `Q_g`, `i_dr*` and `v_dr`, and finally `P_g`.
pub fn solve_algebraic(
    state: &DfigState,
    op: &OperatingPoint,
    params: &DfigParams,
    u_ie: f64,
    t_m: f64,
) -> Result<DfigAlgebraic> {
    let p = params;
    let [i_qs, i_ds, i_qr, i_dr] = currents(state, p)?;
    let (ls, lm) = (p.l_s(), p.l_m);
    let slip = p.omega_s - state.omega_r;
    let sig = p.sigma_l_r();

    let i_qr_star = -ls / (lm * p.psi_s) * (state.x1 + p.k_p_t * (state.omega_f_star - state.omega_r + u_ie));
    let v_qr = state.x3 + p.k_p_c * (i_qr_star - i_qr) + slip * (sig * i_dr + p.psi_s * lm / ls);

    let q0 = -(op.v_qs * i_ds - op.v_ds * i_qs + v_qr * i_dr);
    let v0 = state.x4 - p.k_p_c * i_dr - slip * sig * i_qr;
    let den = 1.0 + i_qr * p.k_p_c * p.k_p_q;
    if !(den.abs() > 1e-9) {
        return Err(Error::DegenerateMachine("reactive power loop is algebraically singular".into()));
    }
    let q_g = (q0 + i_qr * (v0 + p.k_p_c * state.x2 + p.k_p_c * p.k_p_q * op.q_g_star)) / den;
    let i_dr_star = state.x2 + p.k_p_q * (op.q_g_star - q_g);
    let v_dr = v0 + p.k_p_c * i_dr_star;
    let p_g = -(op.v_qs * i_qs + op.v_ds * i_ds + v_qr * i_qr + v_dr * i_dr);
    let t_e = lm / ls * (state.psi_qs * i_dr - state.psi_ds * i_qr);
    let alg = DfigAlgebraic {
        i_qs,
        i_ds,
        i_qr,
        i_dr,
        v_qr,
        v_dr,
        p_g,
        q_g,
        i_qr_star,
        i_dr_star,
        t_e,
        t_m,
    };
    if [p_g, q_g, v_qr, v_dr, t_e].iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateMachine("non-finite algebraic solution".into()));
    }
    Ok(alg)
}

/// Residuals of the flux, power and rotor-voltage relations at a solved point.
pub fn algebraic_residuals(
    state: &DfigState,
    alg: &DfigAlgebraic,
    op: &OperatingPoint,
    params: &DfigParams,
    u_ie: f64,
) -> [f64; 10] {
    let p = params;
    let (ls, lr, lm) = (p.l_s(), p.l_r(), p.l_m);
    let slip = p.omega_s - state.omega_r;
    let sig = p.sigma_l_r();
    let i_qr_star = -ls / (lm * p.psi_s) * (state.x1 + p.k_p_t * (state.omega_f_star - state.omega_r + u_ie));
    let i_dr_star = state.x2 + p.k_p_q * (op.q_g_star - alg.q_g);
    [
        -state.psi_qs + ls * alg.i_qs + lm * alg.i_qr,
        -state.psi_ds + ls * alg.i_ds + lm * alg.i_dr,
        -state.psi_qr + lr * alg.i_qr + lm * alg.i_qs,
        -state.psi_dr + lr * alg.i_dr + lm * alg.i_ds,
        alg.p_g + (op.v_qs * alg.i_qs + op.v_ds * alg.i_ds) + (alg.v_qr * alg.i_qr + alg.v_dr * alg.i_dr),
        alg.q_g + (op.v_qs * alg.i_ds - op.v_ds * alg.i_qs) + (alg.v_qr * alg.i_dr - alg.v_dr * alg.i_qr),
        -alg.v_qr + state.x3 + p.k_p_c * (i_qr_star - alg.i_qr) + slip * (sig * alg.i_dr + p.psi_s * lm / ls),
        -alg.v_dr + state.x4 + p.k_p_c * (i_dr_star - alg.i_dr) - slip * sig * alg.i_qr,
        alg.i_qr_star - i_qr_star,
        alg.i_dr_star - i_dr_star,
    ]
}

/// A DFIG at fixed terminal conditions with its mechanical torque pinned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DfigPlant {
    pub params: DfigParams,
    pub op: OperatingPoint,
    pub t_m: f64,
}

impl DfigPlant {
    pub fn new(params: DfigParams, op: OperatingPoint, t_m: f64) -> Result<Self> {
        params.validate()?;
        op.validate()?;
        Ok(Self { params, op, t_m })
    }

    /// Builds the plant at its equilibrium and returns it with the
    /// equilibrium state.
    pub fn at_equilibrium(params: DfigParams, op: OperatingPoint) -> Result<(Self, DfigState, DfigAlgebraic)> {
        let (x, alg) = equilibrium(&op, &params)?;
        Ok((Self::new(params, op, alg.t_m)?, x, alg))
    }

    pub fn algebraic(&self, state: &DfigState, u_ie: f64) -> Result<DfigAlgebraic> {
        solve_algebraic(state, &self.op, &self.params, u_ie, self.t_m)
    }

    /// Right-hand side of the differential equations after closing the
    /// algebraic loop.
    pub fn rhs(&self, state: &DfigState, u_ie: f64) -> Result<([f64; 10], DfigAlgebraic)> {
        let alg = self.algebraic(state, u_ie)?;
        Ok((rhs_with(state, &alg, &self.op, &self.params, u_ie)?, alg))
    }

    /// Fixed-step RK4 with the algebraic loop solved at every stage.
    pub fn simulate(
        &self,
        x0: &DfigState,
        u_ie: &dyn Fn(f64) -> f64,
        duration: f64,
        dt: f64,
    ) -> Result<Trace> {
        if !(dt > 0.0) || !(duration >= dt) {
            return Err(Error::Domain(format!("need dt > 0 and duration >= dt (dt = {dt}, duration = {duration})")));
        }
        let steps = (duration / dt).round() as usize;
        let p_g0 = self.op.p_g0;
        let mut cols: Vec<Vec<f64>> = (0..10 + 6).map(|_| Vec::with_capacity(steps + 1)).collect();
        let mut x = x0.to_array();
        for k in 0..=steps {
            let t = k as f64 * dt;
            let u = u_ie(t);
            let s = DfigState::from_array(&x);
            let alg = self
                .algebraic(&s, u)
                .map_err(|e| Error::AlgebraicFailure { time: t, reason: e.to_string() })?;
            for (i, v) in x.iter().enumerate() {
                cols[i].push(*v);
            }
            for (i, v) in [alg.p_g, alg.q_g, alg.t_e, alg.p_g - p_g0, u, alg.i_qr].iter().enumerate() {
                cols[10 + i].push(*v);
            }
            if k == steps {
                break;
            }
            x = self.rk4_step(&x, u, dt, t)?;
        }
        let mut tr = Trace::new(dt)?;
        let extra = ["P_g", "Q_g", "T_e", "dP_g", "u_ie", "i_qr"];
        for (name, col) in STATE_NAMES.iter().chain(extra.iter()).zip(cols) {
            tr.push_channel(*name, col)?;
        }
        Ok(tr)
    }

    /// One RK4 step with the input held over the step.
    pub fn rk4_step(&self, x: &[f64; 10], u: f64, dt: f64, t: f64) -> Result<[f64; 10]> {
        let f = |x: &[f64; 10]| -> Result<[f64; 10]> {
            let s = DfigState::from_array(x);
            self.rhs(&s, u)
                .map(|(d, _)| d)
                .map_err(|e| Error::AlgebraicFailure { time: t, reason: e.to_string() })
        };
        let add = |x: &[f64; 10], k: &[f64; 10], h: f64| {
            let mut out = *x;
            for i in 0..10 {
                out[i] += h * k[i];
            }
            out
        };
        let k1 = f(x)?;
        let k2 = f(&add(x, &k1, dt / 2.0))?;
        let k3 = f(&add(x, &k2, dt / 2.0))?;
        let k4 = f(&add(x, &k3, dt))?;
        let mut out = *x;
        for i in 0..10 {
            out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let w = out[OMEGA_R];
        if !(SPEED_BAND.0..=SPEED_BAND.1).contains(&w) {
            return Err(Error::AlgebraicFailure {
                time: t + dt,
                reason: format!("rotor speed {w:.4} pu left the sanity band"),
            });
        }
        Ok(out)
    }
}

fn rhs_with(
    s: &DfigState,
    a: &DfigAlgebraic,
    op: &OperatingPoint,
    p: &DfigParams,
    u_ie: f64,
) -> Result<[f64; 10]> {
    let wb = p.omega_bar;
    let slip = p.omega_s - s.omega_r;
    Ok([
        wb * (op.v_qs - p.r_s * a.i_qs - p.omega_s * s.psi_ds),
        wb * (op.v_ds - p.r_s * a.i_ds + p.omega_s * s.psi_qs),
        wb * (a.v_qr - p.r_r * a.i_qr - slip * s.psi_dr),
        wb * (a.v_dr - p.r_r * a.i_dr + slip * s.psi_qr),
        // motor-convention electromagnetic torque: T_e < T_m decelerates
        (a.t_e - a.t_m) / (2.0 * p.h_t),
        p.omega_c * (mppt_speed(p.eta * a.p_g)? - s.omega_f_star),
        p.k_i_t * (s.omega_f_star - s.omega_r + u_ie),
        p.k_i_q * (op.q_g_star - a.q_g),
        p.k_i_c * (a.i_qr_star - a.i_qr),
        p.k_i_c * (a.i_dr_star - a.i_dr),
    ])
}

const NEWTON_MAX_ITER: usize = 50;

/// Solves `g(v) = 0` by damped Newton with a central-difference Jacobian.
fn newton(
    g: &dyn Fn(&DVector<f64>) -> Result<DVector<f64>>,
    mut v: DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>> {
    let n = v.len();
    let mut r = g(&v)?;
    for _ in 0..NEWTON_MAX_ITER {
        let norm = r.amax();
        if norm <= tol {
            return Ok(v);
        }
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = (1e-7 * v[j].abs()).max(1e-8);
            let mut vp = v.clone();
            let mut vm = v.clone();
            vp[j] += h;
            vm[j] -= h;
            let col = (g(&vp)? - g(&vm)?) / (2.0 * h);
            jac.set_column(j, &col);
        }
        let step = jac
            .lu()
            .solve(&(-&r))
            .ok_or(Error::NoEquilibrium { iterations: 0, residual: norm })?;
        let mut alpha = 1.0;
        loop {
            let cand = &v + &step * alpha;
            if let Ok(rc) = g(&cand) {
                if rc.amax() < norm || alpha < 1e-4 {
                    v = cand;
                    r = rc;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-6 {
                return Err(Error::NoEquilibrium {
                    iterations: NEWTON_MAX_ITER,
                    residual: norm,
                });
            }
        }
    }
    let residual = r.amax();
    if residual <= tol {
        Ok(v)
    } else {
        Err(Error::NoEquilibrium {
            iterations: NEWTON_MAX_ITER,
            residual,
        })
    }
}

/// Steady state at the scheduled active/reactive output with the speed on the
/// MPPT curve. The mechanical torque is returned in `DfigAlgebraic::t_m`.
pub fn equilibrium(op: &OperatingPoint, params: &DfigParams) -> Result<(DfigState, DfigAlgebraic)> {
    params.validate()?;
    op.validate()?;
    if (op.q_g0 - op.q_g_star).abs() > 1e-12 {
        return Err(Error::Domain("reactive reference must equal the scheduled Q_g at equilibrium".into()));
    }
    let p = *params;
    let (ls, lr, lm) = (p.l_s(), p.l_r(), p.l_m);
    let sig = p.sigma_l_r();
    let w_r = mppt_speed(p.eta * op.p_g0)?;
    let slip = p.omega_s - w_r;

    // unknowns: i_qs, i_ds, i_qr, i_dr, v_qr, v_dr
    let reduced = |v: &DVector<f64>| -> Result<DVector<f64>> {
        let (i_qs, i_ds, i_qr, i_dr, v_qr, v_dr) = (v[0], v[1], v[2], v[3], v[4], v[5]);
        let psi_qs = ls * i_qs + lm * i_qr;
        let psi_ds = ls * i_ds + lm * i_dr;
        let psi_qr = lr * i_qr + lm * i_qs;
        let psi_dr = lr * i_dr + lm * i_ds;
        Ok(DVector::from_vec(vec![
            op.v_qs - p.r_s * i_qs - p.omega_s * psi_ds,
            op.v_ds - p.r_s * i_ds + p.omega_s * psi_qs,
            v_qr - p.r_r * i_qr - slip * psi_dr,
            v_dr - p.r_r * i_dr + slip * psi_qr,
            -(op.v_qs * i_qs + op.v_ds * i_ds + v_qr * i_qr + v_dr * i_dr) - op.p_g0,
            -(op.v_qs * i_ds - op.v_ds * i_qs + v_qr * i_dr - v_dr * i_qr) - op.q_g_star,
        ]))
    };
    let vmag2 = op.v_qs * op.v_qs + op.v_ds * op.v_ds;
    let i_qs0 = -op.p_g0 * op.v_qs / vmag2;
    let i_ds0 = -op.p_g0 * op.v_ds / vmag2;
    let guess = DVector::from_vec(vec![
        i_qs0,
        i_ds0,
        -ls * i_qs0 / lm,
        (op.v_qs / p.omega_s - ls * i_ds0) / lm,
        0.0,
        0.0,
    ]);
    let v = newton(&reduced, guess, 1e-13)?;
    let (i_qs, i_ds, i_qr, i_dr, v_qr, v_dr) = (v[0], v[1], v[2], v[3], v[4], v[5]);
    let state = DfigState {
        psi_qs: ls * i_qs + lm * i_qr,
        psi_ds: ls * i_ds + lm * i_dr,
        psi_qr: lr * i_qr + lm * i_qs,
        psi_dr: lr * i_dr + lm * i_ds,
        omega_r: w_r,
        omega_f_star: w_r - op.u_ie0,
        x1: -lm * p.psi_s * i_qr / ls - p.k_p_t * 0.0,
        x2: i_dr,
        x3: v_qr - slip * (sig * i_dr + p.psi_s * lm / ls),
        x4: v_dr + slip * sig * i_qr,
    };
    let t_e0 = lm / ls * (state.psi_qs * i_dr - state.psi_ds * i_qr);
    let plant = DfigPlant::new(p, *op, t_e0)?;

    // polish on the full system with T_m as an extra unknown pinned by P_g = P_g0
    let full = |v: &DVector<f64>| -> Result<DVector<f64>> {
        let mut x = [0.0; 10];
        x.copy_from_slice(&v.as_slice()[..10]);
        let pl = DfigPlant { t_m: v[10], ..plant };
        let (dx, alg) = pl.rhs(&DfigState::from_array(&x), op.u_ie0)?;
        let mut out = dx.to_vec();
        out.push(alg.p_g - op.p_g0);
        Ok(DVector::from_vec(out))
    };
    let mut v0 = state.to_array().to_vec();
    v0.push(t_e0);
    let v = newton(&full, DVector::from_vec(v0), 1e-12)?;
    let mut x = [0.0; 10];
    x.copy_from_slice(&v.as_slice()[..10]);
    let state = DfigState::from_array(&x);
    let plant = DfigPlant { t_m: v[10], ..plant };
    let alg = plant.algebraic(&state, op.u_ie0)?;
    Ok((state, alg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mppt_curve_and_clamp() {
        assert_abs_diff_eq!(mppt_speed(0.5).unwrap(), 1.0525, epsilon = 1e-12);
        assert_abs_diff_eq!(mppt_speed(0.8).unwrap(), 1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(mppt_speed(0.0).unwrap(), 0.8, epsilon = 1e-12);
        assert!(mppt_speed(f64::NAN).is_err());
        assert!(mppt_speed(f64::INFINITY).is_err());
    }

    #[test]
    fn torque_examples() {
        let p = DfigParams::default();
        let zero = DfigState::default();
        let alg = DfigAlgebraic {
            i_dr: 0.3,
            i_qr: -0.7,
            ..Default::default()
        };
        assert_eq!(electromagnetic_torque(&zero, &alg, &p), 0.0);

        // psi_qs*i_dr == psi_ds*i_qr cancels
        let s = DfigState {
            psi_qs: 0.5,
            psi_ds: 0.25,
            ..Default::default()
        };
        let alg = DfigAlgebraic {
            i_dr: 0.2,
            i_qr: 0.4,
            ..Default::default()
        };
        assert_abs_diff_eq!(electromagnetic_torque(&s, &alg, &p), 0.0, epsilon = 1e-15);

        // L_m/L_s = 0.9
        let p9 = DfigParams {
            l_m: 0.9,
            l_ls: 0.1,
            ..Default::default()
        };
        let s = DfigState {
            psi_qs: 1.0,
            ..Default::default()
        };
        let alg = DfigAlgebraic {
            i_dr: 0.5,
            ..Default::default()
        };
        assert_abs_diff_eq!(electromagnetic_torque(&s, &alg, &p9), 0.45, epsilon = 1e-15);
    }

    #[test]
    fn zero_flux_gives_zero_currents() {
        let op = OperatingPoint {
            v_qs: 1.0,
            ..Default::default()
        };
        let alg = solve_algebraic(&DfigState::default(), &op, &DfigParams::default(), 0.0, 0.0).unwrap();
        for i in [alg.i_qs, alg.i_ds, alg.i_qr, alg.i_dr] {
            assert_eq!(i, 0.0);
        }
    }

    #[test]
    fn currents_recovered_from_constructed_fluxes() {
        let p = DfigParams::default();
        let (ls, lr, lm) = (p.l_s(), p.l_r(), p.l_m);
        let i = [-0.61, 0.13, 0.72, 0.27];
        let s = DfigState {
            psi_qs: ls * i[0] + lm * i[2],
            psi_ds: ls * i[1] + lm * i[3],
            psi_qr: lr * i[2] + lm * i[0],
            psi_dr: lr * i[3] + lm * i[1],
            omega_r: 1.1,
            ..Default::default()
        };
        let alg = solve_algebraic(&s, &OperatingPoint::default(), &p, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(alg.i_qs, i[0], epsilon = 1e-12);
        assert_abs_diff_eq!(alg.i_ds, i[1], epsilon = 1e-12);
        assert_abs_diff_eq!(alg.i_qr, i[2], epsilon = 1e-12);
        assert_abs_diff_eq!(alg.i_dr, i[3], epsilon = 1e-12);
    }

    #[test]
    fn degenerate_inductances_rejected() {
        let p = DfigParams {
            l_ls: 0.0,
            ..Default::default()
        };
        assert!(matches!(p.validate(), Err(Error::DegenerateMachine(_))));
        assert!(matches!(
            equilibrium(&OperatingPoint::default(), &p),
            Err(Error::DegenerateMachine(_))
        ));
    }

    #[test]
    fn equilibrium_at_paper_operating_point() {
        let p = DfigParams::default();
        let op = OperatingPoint::default();
        let (x, alg) = equilibrium(&op, &p).unwrap();
        let plant = DfigPlant::new(p, op, alg.t_m).unwrap();
        let (dx, alg2) = plant.rhs(&x, 0.0).unwrap();
        let res = dx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(res <= 1e-10, "residual {res:e}");
        assert_abs_diff_eq!(alg2.p_g, op.p_g0, epsilon = 1e-8);
        assert_abs_diff_eq!(x.omega_r, mppt_speed(p.eta * op.p_g0).unwrap(), epsilon = 1e-8);
        let r = algebraic_residuals(&x, &alg2, &op, &p, 0.0);
        assert!(r.iter().all(|v| v.abs() <= 1e-9), "{r:?}");
        // same inputs, same answer
        let (x2, _) = equilibrium(&op, &p).unwrap();
        assert_eq!(x, x2);
    }

    #[test]
    fn simulation_argument_checks() {
        let (plant, x0, _) = DfigPlant::at_equilibrium(DfigParams::default(), OperatingPoint::default()).unwrap();
        assert!(plant.simulate(&x0, &|_| 0.0, 1.0, 0.0).is_err());
        assert!(plant.simulate(&x0, &|_| 0.0, 0.0005, 0.001).is_err());
    }
}
