//! Scheduling MILP: discrete dynamics, magnitude limits, Boolean input
//! linking, start-up costs and the frequency specification.
//!
//! With N steps, blocks of `blk` steps, `nb = N / blk` blocks, n_x states and
//! two controlled inputs, the model has
//!
//! | family | rows |
//! |--------|------|
//! | `dyn`  | n_x·N |
//! | `dlim` | 2·N (when the frequency limit is finite) |
//! | `wlim` | 4·N (when the WTG speed limit is finite) |
//! | `link` | 2·N |
//! | `su`   | 6·max(nb − 2, 0) |
//! | `stl`  | see [`super::encode_stl`] |
//!
//! and columns: 2·nb block switches `b`, 2·max(nb − 2, 0) start-up slacks
//! `z`, 2·N inputs, n_x·(N+1) states and the STL indicators. Start-ups are
//! counted for blocks 1 ..= nb − 2.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::model::{MilpModel, Sense};
use super::stl_enc::{encode_stl, Channel, StlEncoding};
use crate::afr;
use crate::error::{Error, Result};
use crate::lti::{LtiSystem, TimeDomain};
use crate::stl::StlFormula;

/// Columns created by [`encode_dynamics`].
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsVars {
    /// `x[k][i]`, k = 0 ..= N.
    pub x: Vec<Vec<usize>>,
    /// `u[k][i]`, k = 0 .. N, controlled inputs only.
    pub u: Vec<Vec<usize>>,
}

/// Adds `x(k+1) = A x(k) + B_u u(k) + B_d d` for k = 0 .. N with `x(0)` fixed.
///
/// The last input of `dsys` is the disturbance, held at `d`; the others become
/// free columns named `<input>_<k>`. States are named `<state>_<k>`.
pub fn encode_dynamics(m: &mut MilpModel, dsys: &LtiSystem, n_steps: usize, x0: &[f64], d: f64) -> Result<DynamicsVars> {
    if n_steps == 0 {
        return Err(Error::Encoding("horizon must have at least one step".into()));
    }
    if !matches!(dsys.time, TimeDomain::Discrete { .. }) {
        return Err(Error::Encoding("dynamics must be discrete".into()));
    }
    let nx = dsys.n_states();
    let ni = dsys.n_inputs();
    if x0.len() != nx || ni == 0 {
        return Err(Error::Dimension(format!(
            "initial state has {} entries for {nx} states, system has {ni} inputs",
            x0.len()
        )));
    }
    let nu = ni - 1;
    let mut u = Vec::with_capacity(n_steps);
    for k in 0..n_steps {
        let mut row = Vec::with_capacity(nu);
        for i in 0..nu {
            let name = &dsys.input_names[i];
            let j = m.add_continuous(format!("{name}_{k}"), f64::NEG_INFINITY, f64::INFINITY)?;
            m.set_tag(j, name.clone(), k);
            row.push(j);
        }
        u.push(row);
    }
    let mut x = Vec::with_capacity(n_steps + 1);
    for k in 0..=n_steps {
        let mut row = Vec::with_capacity(nx);
        for i in 0..nx {
            let name = &dsys.state_names[i];
            let (lo, hi) = if k == 0 { (x0[i], x0[i]) } else { (f64::NEG_INFINITY, f64::INFINITY) };
            let j = m.add_continuous(format!("{name}_{k}"), lo, hi)?;
            m.set_tag(j, name.clone(), k);
            row.push(j);
        }
        x.push(row);
    }
    for k in 0..n_steps {
        for i in 0..nx {
            let mut coefs = vec![(x[k + 1][i], 1.0)];
            for l in 0..nx {
                coefs.push((x[k][l], -dsys.a[(i, l)]));
            }
            for l in 0..nu {
                coefs.push((u[k][l], -dsys.b[(i, l)]));
            }
            let rhs = dsys.b[(i, nu)] * d;
            m.add_constraint(format!("dyn_{}_{k}", dsys.state_names[i]), coefs, Sense::Eq, rhs)?;
        }
    }
    Ok(DynamicsVars { x, u })
}

/// Scheduling problem on the discretized AFR model.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcSpec {
    /// Discrete AFR system (5 states; inputs u_s1, u_s2, dP_d).
    pub dsys: LtiSystem,
    pub n_steps: usize,
    /// Steps per Boolean control block.
    pub block_steps: usize,
    pub x0: [f64; 5],
    /// Leading steps during which both commands are held at zero.
    pub hold_steps: usize,
    /// Contingency in the units of the disturbance input.
    pub dp_d: f64,
    /// Supplementary input applied while a WTG is switched on.
    pub u_c: f64,
    pub w1: f64,
    pub w2: f64,
    /// Bound on |x1|; infinite to drop the rows.
    pub df_d_lim: f64,
    /// Bound on |x4| and |x5|; infinite to drop the rows.
    pub df_w_lim: f64,
    pub phi: Option<StlFormula>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingSize {
    pub variables: usize,
    pub binaries: usize,
    pub constraints: usize,
    pub stl_binaries: usize,
    pub stl_continuous: usize,
    pub stl_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcEncoding {
    pub model: MilpModel,
    pub n_blocks: usize,
    pub b: [Vec<usize>; 2],
    /// Start-up slack of block `j` sits at index `j - 1`.
    pub z: [Vec<usize>; 2],
    pub dynamics: DynamicsVars,
    pub stl: Option<StlEncoding>,
}

impl MpcEncoding {
    pub fn size(&self) -> EncodingSize {
        let s = self.stl.as_ref();
        EncodingSize {
            variables: self.model.n_vars(),
            binaries: self.model.n_binaries(),
            constraints: self.model.n_cons(),
            stl_binaries: s.map_or(0, |s| s.predicate_binaries),
            stl_continuous: s.map_or(0, |s| s.continuous_indicators),
            stl_rows: s.map_or(0, |s| s.rows),
        }
    }

    /// Rounded block switches of both WTGs from a solution vector.
    pub fn switches(&self, x: &[f64]) -> [Vec<u8>; 2] {
        let get = |cols: &Vec<usize>| cols.iter().map(|&j| u8::from(x[j] > 0.5)).collect();
        [get(&self.b[0]), get(&self.b[1])]
    }
}

/// Total number of on-blocks.
pub fn on_count(b: &[u8]) -> usize {
    b.iter().filter(|v| **v != 0).count()
}

/// Switch-ons `b(j)·(1 − b(j−1))` over blocks 1 ..= len − 2.
pub fn startup_count(b: &[u8]) -> usize {
    if b.len() < 3 {
        return 0;
    }
    (1..b.len() - 1).filter(|&j| b[j] != 0 && b[j - 1] == 0).count()
}

/// Affine reachable map `x(k) = c_k + G_k·b` of the states in the block
/// switches (WTG 1 blocks first).
fn reachable_map(spec: &MpcSpec, nb: usize) -> (Vec<DVector<f64>>, Vec<nalgebra::DMatrix<f64>>) {
    let a = &spec.dsys.a;
    let b = &spec.dsys.b;
    let mut c = vec![DVector::from_row_slice(&spec.x0)];
    let mut g = vec![nalgebra::DMatrix::zeros(5, 2 * nb)];
    for k in 0..spec.n_steps {
        let j = k / spec.block_steps;
        let cn = a * &c[k] + b.column(2) * spec.dp_d;
        let mut gn = a * &g[k];
        for i in 0..2 {
            if k < spec.hold_steps {
                break;
            }
            let mut col = gn.column_mut(i * nb + j);
            col += b.column(i) * spec.u_c;
        }
        c.push(cn);
        g.push(gn);
    }
    (c, g)
}

/// Builds the scheduling MILP.
pub fn encode_mpc(spec: &MpcSpec) -> Result<MpcEncoding> {
    let n = spec.n_steps;
    let blk = spec.block_steps;
    if n == 0 || blk == 0 || !n.is_multiple_of(blk) {
        return Err(Error::Encoding(format!(
            "horizon of {n} steps is not a whole number of {blk}-step blocks"
        )));
    }
    let t_s = match spec.dsys.time {
        TimeDomain::Discrete { t_s } => t_s,
        TimeDomain::Continuous => return Err(Error::Encoding("dynamics must be discrete".into())),
    };
    if spec.dsys.n_states() != 5 || spec.dsys.n_inputs() != 3 {
        return Err(Error::Dimension("scheduling requires the 5-state AFR system".into()));
    }
    for (what, v) in [("u_C", spec.u_c), ("w1", spec.w1), ("w2", spec.w2), ("dP_d", spec.dp_d)] {
        if !v.is_finite() {
            return Err(Error::Encoding(format!("{what} must be finite")));
        }
    }
    for (what, v) in [("frequency limit", spec.df_d_lim), ("speed limit", spec.df_w_lim)] {
        if !(v > 0.0) {
            return Err(Error::Encoding(format!("{what} must be positive")));
        }
    }
    let nb = n / blk;
    let mut m = MilpModel::new();
    let mut b: [Vec<usize>; 2] = Default::default();
    for (i, bi) in b.iter_mut().enumerate() {
        for j in 0..nb {
            let v = m.add_binary(format!("b{}_{j}", i + 1))?;
            m.set_tag(v, format!("b{}", i + 1), j);
            bi.push(v);
        }
    }
    let mut z: [Vec<usize>; 2] = Default::default();
    for (i, zi) in z.iter_mut().enumerate() {
        for j in 1..nb.saturating_sub(1) {
            let v = m.add_binary(format!("z{}_{j}", i + 1))?;
            m.set_tag(v, format!("z{}", i + 1), j);
            zi.push(v);
        }
    }
    let dynamics = encode_dynamics(&mut m, &spec.dsys, n, &spec.x0, spec.dp_d)?;
    let x = &dynamics.x;

    for i in 0..2 {
        let name = &spec.dsys.input_names[i];
        for k in 0..n {
            let mut coefs = vec![(dynamics.u[k][i], 1.0)];
            if k >= spec.hold_steps {
                coefs.push((b[i][k / blk], -spec.u_c));
            }
            m.add_constraint(format!("link_{name}_{k}"), coefs, Sense::Eq, 0.0)?;
        }
    }

    let mut limits = vec![(afr::FREQ, "dlim", spec.df_d_lim)];
    limits.extend(afr::WTG_SPEED.iter().map(|&s| (s, "wlim", spec.df_w_lim)));
    for &(s, fam, lim) in &limits {
        if lim.is_infinite() {
            continue;
        }
        let name = &spec.dsys.state_names[s];
        for k in 1..=n {
            m.add_constraint(format!("{fam}_{name}_{k}_hi"), vec![(x[k][s], 1.0)], Sense::Le, lim)?;
            m.add_constraint(format!("{fam}_{name}_{k}_lo"), vec![(x[k][s], 1.0)], Sense::Ge, -lim)?;
        }
    }

    for i in 0..2 {
        for (zz, j) in z[i].iter().zip(1..) {
            let (bj, bp) = (b[i][j], b[i][j - 1]);
            let w = i + 1;
            m.add_constraint(format!("su_b{w}_{j}_a"), vec![(*zz, 1.0), (bj, -1.0)], Sense::Le, 0.0)?;
            m.add_constraint(format!("su_b{w}_{j}_b"), vec![(*zz, 1.0), (bp, -1.0)], Sense::Le, 0.0)?;
            m.add_constraint(format!("su_b{w}_{j}_c"), vec![(bj, 1.0), (bp, 1.0), (*zz, -1.0)], Sense::Le, 1.0)?;
        }
    }

    let mut obj = Vec::new();
    for i in 0..2 {
        obj.extend(b[i].iter().map(|&v| (v, spec.w1)));
        for (zz, j) in z[i].iter().zip(1..) {
            obj.push((b[i][j], spec.w2));
            obj.push((*zz, -spec.w2));
        }
    }
    m.set_objective(obj);

    let stl = match &spec.phi {
        None => None,
        Some(phi) => {
            let (c, g) = reachable_map(spec, nb);
            let mut chans = BTreeMap::new();
            for s in 0..5 {
                let lim = limits.iter().find(|l| l.0 == s).map_or(f64::INFINITY, |l| l.2);
                let bounds = (0..=n)
                    .map(|k| {
                        let row = g[k].row(s);
                        let lo = c[k][s] + row.iter().filter(|v| **v < 0.0).sum::<f64>();
                        let hi = c[k][s] + row.iter().filter(|v| **v > 0.0).sum::<f64>();
                        if k == 0 {
                            (lo, hi)
                        } else {
                            (lo.max(-lim), hi.min(lim))
                        }
                    })
                    .collect();
                let columns = (0..=n).map(|k| x[k][s]).collect();
                chans.insert(spec.dsys.state_names[s].clone(), Channel { columns, bounds });
            }
            Some(encode_stl(&mut m, phi, &chans, n + 1, t_s)?)
        }
    };

    Ok(MpcEncoding {
        model: m,
        n_blocks: nb,
        b,
        z,
        dynamics,
        stl,
    })
}
