//! State-space systems, matrix exponential and zero-order-hold discretization.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeDomain {
    Continuous,
    Discrete { t_s: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub state_names: Vec<String>,
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
    pub time: TimeDomain,
}

fn unique(labels: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l) {
            return Err(Error::Dimension(format!("duplicate {what} label `{l}`")));
        }
    }
    Ok(())
}

impl LtiSystem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        state_names: Vec<String>,
        input_names: Vec<String>,
        output_names: Vec<String>,
        time: TimeDomain,
    ) -> Result<Self> {
        let n = a.nrows();
        let m = b.ncols();
        let p = c.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n || d.nrows() != p || d.ncols() != m {
            return Err(Error::Dimension(format!(
                "A {}x{}, B {}x{}, C {}x{}, D {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        if state_names.len() != n || input_names.len() != m || output_names.len() != p {
            return Err(Error::Dimension("label count does not match matrix sizes".into()));
        }
        unique(&state_names, "state")?;
        unique(&input_names, "input")?;
        unique(&output_names, "output")?;
        if let TimeDomain::Discrete { t_s } = time {
            if !(t_s > 0.0) {
                return Err(Error::Domain(format!("discrete sample time must be positive, got {t_s}")));
            }
        }
        if a.iter().chain(b.iter()).chain(c.iter()).chain(d.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite matrix entry".into()));
        }
        Ok(Self {
            a,
            b,
            c,
            d,
            state_names,
            input_names,
            output_names,
            time,
        })
    }

    /// Builds a system with generated labels `x0.., u0.., y0..`.
    pub fn from_matrices(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        time: TimeDomain,
    ) -> Result<Self> {
        let labels = |prefix: &str, k: usize| (0..k).map(|i| format!("{prefix}{i}")).collect();
        let (n, m, p) = (a.nrows(), b.ncols(), c.nrows());
        Self::new(a, b, c, d, labels("x", n), labels("u", m), labels("y", p), time)
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn state_index(&self, name: &str) -> Result<usize> {
        self.state_names
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        eigenvalues(&self.a)
    }

    /// Continuous: every eigenvalue in the open left half plane.
    /// Discrete: spectral radius below one.
    pub fn is_stable(&self) -> bool {
        let ev = self.eigenvalues();
        match self.time {
            TimeDomain::Continuous => ev.iter().all(|l| l.re < 0.0),
            TimeDomain::Discrete { .. } => ev.iter().all(|l| l.norm() < 1.0),
        }
    }

    /// Fixed-step RK4 under piecewise-constant inputs, one input row per step.
    /// Returns states at k = 0..=N.
    pub fn simulate_rk4(&self, x0: &DVector<f64>, inputs: &[DVector<f64>], dt: f64, substeps: usize) -> Result<Vec<DVector<f64>>> {
        if self.time != TimeDomain::Continuous {
            return Err(Error::Domain("RK4 simulation requires a continuous system".into()));
        }
        let h = dt / substeps.max(1) as f64;
        let mut x = x0.clone();
        let mut out = vec![x.clone()];
        for u in inputs {
            let bu = &self.b * u;
            let f = |x: &DVector<f64>| &self.a * x + &bu;
            for _ in 0..substeps.max(1) {
                let k1 = f(&x);
                let k2 = f(&(&x + &k1 * (h / 2.0)));
                let k3 = f(&(&x + &k2 * (h / 2.0)));
                let k4 = f(&(&x + &k3 * h));
                x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            }
            out.push(x.clone());
        }
        Ok(out)
    }
}

pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|c| Complex64::new(c.re, c.im))
        .collect()
}

/// Diagonal Padé coefficients of order 8.
const PADE8: [f64; 9] = [
    1.0,
    0.5,
    0.116_666_666_666_666_67,
    0.016_666_666_666_666_666,
    1.602_564_102_564_102_6e-3,
    1.068_376_068_376_068_4e-4,
    4.856_254_856_254_856e-6,
    1.387_501_387_501_387_5e-7,
    1.927_085_260_418_593_7e-9,
];

/// Matrix exponential by scaling and squaring with an [8/8] Padé approximant.
pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension("expm needs a square matrix".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite matrix entry in expm".into()));
    }
    let norm = (0..n)
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0i32;
    if norm > 0.5 {
        s = (norm / 0.5).log2().ceil() as i32;
    }
    let scaled = a / 2f64.powi(s);
    let id = DMatrix::<f64>::identity(n, n);
    let mut num = id.clone() * PADE8[0];
    let mut den = id.clone() * PADE8[0];
    let mut power = id;
    for (k, &c) in PADE8.iter().enumerate().skip(1) {
        power = &power * &scaled;
        num += &power * c;
        if k % 2 == 0 {
            den += &power * c;
        } else {
            den -= &power * c;
        }
    }
    let mut e = den
        .lu()
        .solve(&num)
        .ok_or_else(|| Error::Domain("singular Padé denominator".into()))?;
    for _ in 0..s {
        e = &e * &e;
    }
    Ok(e)
}

/// Exact zero-order-hold discretization through the augmented exponential
/// `exp([[A, B], [0, 0]] t_s)`.
pub fn discretize_zoh(sys: &LtiSystem, t_s: f64) -> Result<LtiSystem> {
    if sys.time != TimeDomain::Continuous {
        return Err(Error::Domain("system is already discrete".into()));
    }
    if !(t_s > 0.0) || !t_s.is_finite() {
        return Err(Error::Domain(format!("sample time must be positive, got {t_s}")));
    }
    let n = sys.n_states();
    let m = sys.n_inputs();
    let mut aug = DMatrix::<f64>::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&sys.a * t_s));
    aug.view_mut((0, n), (n, m)).copy_from(&(&sys.b * t_s));
    let e = expm(&aug)?;
    let ad = e.view((0, 0), (n, n)).into_owned();
    let bd = e.view((0, n), (n, m)).into_owned();
    LtiSystem::new(
        ad,
        bd,
        sys.c.clone(),
        sys.d.clone(),
        sys.state_names.clone(),
        sys.input_names.clone(),
        sys.output_names.clone(),
        TimeDomain::Discrete { t_s },
    )
}

/// Runs the exact recursion `x(k+1) = A x(k) + B u(k)`.
///
/// The trace holds N+1 samples. Outputs at the final sample reuse the last input.
pub fn simulate_discrete(dsys: &LtiSystem, inputs: &[DVector<f64>], x0: &DVector<f64>) -> Result<Trace> {
    let TimeDomain::Discrete { t_s } = dsys.time else {
        return Err(Error::Domain("simulate_discrete requires a discrete system".into()));
    };
    if x0.len() != dsys.n_states() {
        return Err(Error::Dimension(format!(
            "initial state has {} entries, system has {} states",
            x0.len(),
            dsys.n_states()
        )));
    }
    if let Some(u) = inputs.iter().find(|u| u.len() != dsys.n_inputs()) {
        return Err(Error::Dimension(format!(
            "input vector has {} entries, system has {} inputs",
            u.len(),
            dsys.n_inputs()
        )));
    }
    let n_samples = inputs.len() + 1;
    let mut states = vec![Vec::with_capacity(n_samples); dsys.n_states()];
    let mut outputs = vec![Vec::with_capacity(n_samples); dsys.n_outputs()];
    let zero = DVector::zeros(dsys.n_inputs());
    let mut x = x0.clone();
    for k in 0..n_samples {
        let u = inputs.get(k).or_else(|| inputs.last()).unwrap_or(&zero);
        let y = &dsys.c * &x + &dsys.d * u;
        for (i, v) in x.iter().enumerate() {
            states[i].push(*v);
        }
        for (i, v) in y.iter().enumerate() {
            outputs[i].push(*v);
        }
        if k < inputs.len() {
            x = &dsys.a * &x + &dsys.b * u;
        }
    }
    let mut tr = Trace::new(t_s)?;
    for (name, vals) in dsys.state_names.iter().zip(states) {
        tr.push_channel(name.clone(), vals)?;
    }
    for (name, vals) in dsys.output_names.iter().zip(outputs) {
        tr.push_channel(name.clone(), vals)?;
    }
    Ok(tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar(a: f64, b: f64) -> LtiSystem {
        LtiSystem::from_matrices(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
            TimeDomain::Continuous,
        )
        .unwrap()
    }

    #[test]
    fn zero_dynamics_discretize_to_identity() {
        let sys = LtiSystem::from_matrices(
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 1, &[1.0, -2.0]),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
            TimeDomain::Continuous,
        )
        .unwrap();
        let d = discretize_zoh(&sys, 0.3).unwrap();
        assert_eq!(d.a, DMatrix::identity(2, 2));
        assert_eq!(d.b, DMatrix::from_row_slice(2, 1, &[0.3, -0.6]));
    }

    #[test]
    fn scalar_zoh_matches_closed_form() {
        let (a, b, ts) = (-0.2771, 2.5741, 0.02);
        let d = discretize_zoh(&scalar(a, b), ts).unwrap();
        assert_abs_diff_eq!(d.a[(0, 0)], (a * ts).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(d.b[(0, 0)], b / a * ((a * ts).exp() - 1.0), epsilon = 1e-14);
    }

    #[test]
    fn expm_of_rotation_generator() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, -3.0, 0.0]);
        let e = expm(&a).unwrap();
        assert_abs_diff_eq!(e[(0, 0)], 3f64.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(e[(0, 1)], 3f64.sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(e[(1, 0)], -3f64.sin(), epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_dimensions_and_labels() {
        let r = LtiSystem::from_matrices(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(3, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
            TimeDomain::Continuous,
        );
        assert!(r.is_err());
        let r = LtiSystem::new(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
            vec!["a".into(), "a".into()],
            vec!["u".into()],
            vec!["y".into()],
            TimeDomain::Continuous,
        );
        assert!(r.is_err());
        assert!(discretize_zoh(&scalar(-1.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn discrete_simulation_rejects_length_mismatch() {
        let d = discretize_zoh(&scalar(-1.0, 1.0), 0.1).unwrap();
        let bad = vec![DVector::from_vec(vec![1.0, 2.0])];
        assert!(simulate_discrete(&d, &bad, &DVector::zeros(1)).is_err());
        assert!(simulate_discrete(&d, &[], &DVector::zeros(2)).is_err());
    }
}
