//! Augmented frequency response model: diesel governor/engine/swing dynamics
//! coupled with two first-order wind turbine models.
//!
//! State order is fixed: `x1 = Δω_d` (Hz), `x2 = ΔP_m`, `x3 = ΔP_v` (pu on the
//! diesel base), `x4 = Δω_r1`, `x5 = Δω_r2` (pu). Inputs are the two supportive
//! commands `u_s1`, `u_s2` followed by the contingency `dP_d` in MW.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{discretize_zoh, simulate_discrete, LtiSystem, TimeDomain};
use crate::reduction::ReducedWtg;
use crate::trace::Trace;

pub const STATE_NAMES: [&str; 5] = ["x1", "x2", "x3", "x4", "x5"];
pub const INPUT_NAMES: [&str; 3] = ["u_s1", "u_s2", "dP_d"];
pub const OUTPUT_NAMES: [&str; 2] = ["dP_g1", "dP_g2"];

/// Index of the frequency deviation state.
pub const FREQ: usize = 0;
/// Indices of the wind turbine speed deviation states.
pub const WTG_SPEED: [usize; 2] = [3, 4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DieselParams {
    /// Inertia constant (s).
    pub h_d: f64,
    /// Engine time constant (s).
    pub tau_d: f64,
    /// Governor time constant (s).
    pub tau_g: f64,
    /// Droop (pu).
    pub r_d: f64,
    /// Nominal frequency (Hz).
    pub f_bar: f64,
}

impl Default for DieselParams {
    fn default() -> Self {
        Self {
            h_d: 4.0,
            tau_d: 0.1,
            tau_g: 0.5,
            r_d: 0.05,
            f_bar: 60.0,
        }
    }
}

impl DieselParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("h_d", self.h_d),
            ("tau_d", self.tau_d),
            ("tau_g", self.tau_g),
            ("r_d", self.r_d),
            ("f_bar", self.f_bar),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("diesel parameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Power bases in MVA.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bases {
    pub s_d: f64,
    pub s_w1: f64,
    pub s_w2: f64,
}

impl Default for Bases {
    fn default() -> Self {
        Self {
            s_d: 5.0,
            s_w1: 1.11,
            s_w2: 1.11,
        }
    }
}

impl Bases {
    pub fn k_d(&self) -> f64 {
        1.0 / self.s_d
    }

    pub fn k_dw(&self) -> [f64; 2] {
        [self.s_w1 / self.s_d, self.s_w2 / self.s_d]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AfrModel {
    pub system: LtiSystem,
    pub diesel: DieselParams,
    pub wtg: [ReducedWtg; 2],
    pub bases: Bases,
}

pub fn assemble_afr(dg: &DieselParams, wtg1: &ReducedWtg, wtg2: &ReducedWtg, bases: &Bases) -> Result<AfrModel> {
    dg.validate()?;
    for (i, w) in [wtg1, wtg2].iter().enumerate() {
        if !(w.a_rd < 0.0) {
            return Err(Error::Domain(format!("reduced model of WTG {} is not stable (A_rd = {})", i + 1, w.a_rd)));
        }
    }
    let k_d = bases.k_d();
    let k_dw = bases.k_dw();
    if !(k_d > 0.0 && k_dw[0] > 0.0 && k_dw[1] > 0.0) || !k_d.is_finite() {
        return Err(Error::Domain("power bases must be positive".into()));
    }
    let g = dg.f_bar / (2.0 * dg.h_d);
    let wtgs = [wtg1, wtg2];

    let mut a = DMatrix::zeros(5, 5);
    let mut b = DMatrix::zeros(5, 3);
    a[(0, 1)] = g;
    a[(1, 1)] = -1.0 / dg.tau_d;
    a[(1, 2)] = 1.0 / dg.tau_d;
    a[(2, 0)] = -1.0 / (dg.f_bar * dg.r_d * dg.tau_g);
    a[(2, 2)] = -1.0 / dg.tau_g;
    b[(0, 2)] = -g * k_d;
    let mut c = DMatrix::zeros(2, 5);
    let mut d = DMatrix::zeros(2, 3);
    for i in 0..2 {
        let s = WTG_SPEED[i];
        a[(0, s)] = g * k_dw[i] * wtgs[i].c_rd;
        b[(0, i)] = g * k_dw[i] * wtgs[i].d_rd;
        a[(s, s)] = wtgs[i].a_rd;
        b[(s, i)] = wtgs[i].b_rd;
        c[(i, s)] = wtgs[i].c_rd;
        d[(i, i)] = wtgs[i].d_rd;
    }
    let labels = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let system = LtiSystem::new(
        a,
        b,
        c,
        d,
        labels(&STATE_NAMES),
        labels(&INPUT_NAMES),
        labels(&OUTPUT_NAMES),
        TimeDomain::Continuous,
    )?;
    Ok(AfrModel {
        system,
        diesel: *dg,
        wtg: [wtg1.clone(), wtg2.clone()],
        bases: *bases,
    })
}

impl AfrModel {
    pub fn discretize(&self, t_s: f64) -> Result<LtiSystem> {
        discretize_zoh(&self.system, t_s)
    }

    /// Analytic steady-state frequency deviation for constant inputs.
    pub fn steady_state_frequency(&self, u: [f64; 2], dp_d: f64) -> Result<f64> {
        let rhs = -(&self.system.b * DVector::from_vec(vec![u[0], u[1], dp_d]));
        let x = self
            .system
            .a
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Domain("AFR state matrix is singular".into()))?;
        Ok(x[FREQ])
    }
}

/// Simulates the discretized AFR under per-step commands and contingency.
pub fn simulate_afr(dsys: &LtiSystem, u: &[[f64; 2]], dp_d: &[f64], x0: &[f64; 5]) -> Result<Trace> {
    if u.len() != dp_d.len() {
        return Err(Error::Dimension(format!(
            "{} command steps but {} disturbance steps",
            u.len(),
            dp_d.len()
        )));
    }
    if dsys.n_inputs() != 3 || dsys.n_states() != 5 {
        return Err(Error::Dimension("not an AFR system".into()));
    }
    let inputs: Vec<DVector<f64>> = u
        .iter()
        .zip(dp_d)
        .map(|(u, d)| DVector::from_vec(vec![u[0], u[1], *d]))
        .collect();
    simulate_discrete(dsys, &inputs, &DVector::from_row_slice(x0))
}
