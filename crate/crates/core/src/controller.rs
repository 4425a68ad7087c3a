//! Scheduling and triggering levels of the supportive-mode controller, plus
//! closed-loop verification and calibration of the robust factor.
//!
//! The scheduling MILP starts at contingency onset with `x(0) = 0`. At run time
//! the schedule can only start once the trigger fires, so the commands are
//! held at zero for the first `offset` steps, where `offset` is the sample at
//! which the trigger fires on the model's own uncontrolled response. For the
//! design contingency this makes scheduled time and plant time coincide.

use serde::{Deserialize, Serialize};

use crate::afr::{simulate_afr, AfrModel, FREQ, WTG_SPEED};
use crate::dfig::{DfigPlant, DfigState};
use crate::error::{Error, Result};
use crate::lti::LtiSystem;
use crate::milp::{encode_mpc, on_count, startup_count, MpcEncoding, MpcSpec};
use crate::scenario::{PlantConfig, ScenarioConfig, TriggerConfig};
use crate::solver::{solve_milp, Limits, MilpSolution, SolveStatus};
use crate::stl::StlFormula;
use crate::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fidelity {
    Linear,
    Nonlinear,
}

/// Boolean supportive-mode sequences for both turbines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub t_s: f64,
    pub dt_u: f64,
    pub block_steps: usize,
    pub n_steps: usize,
    /// Steps between contingency onset and the predicted trigger.
    pub offset_steps: usize,
    pub b: [Vec<u8>; 2],
    pub u_c: f64,
    pub eps: f64,
    pub objective: f64,
    pub status: SolveStatus,
    pub gap: f64,
    pub nodes: usize,
    pub on_time: usize,
    pub startups: usize,
    pub fingerprint: String,
}

impl Schedule {
    pub fn n_blocks(&self) -> usize {
        self.b[0].len()
    }

    /// Total on-blocks of both turbines.
    pub fn total_on(&self) -> usize {
        on_count(&self.b[0]) + on_count(&self.b[1])
    }
}

/// Everything needed to solve one scenario.
#[derive(Debug, Clone)]
pub struct Problem {
    pub afr: AfrModel,
    pub dsys: LtiSystem,
    /// Specification as written.
    pub phi: Option<StlFormula>,
    /// Specification tightened by the robust factor, as encoded.
    pub phi_design: Option<StlFormula>,
    pub spec: MpcSpec,
    pub encoding: MpcEncoding,
    pub limits: Limits,
}

/// First sample at which `|v| ≥ threshold` has held for `consecutive` samples.
pub fn detect_trigger(samples: &[f64], cfg: &TriggerConfig) -> Option<usize> {
    let mut run = 0;
    for (k, v) in samples.iter().enumerate() {
        if v.abs() >= cfg.threshold {
            run += 1;
            if run >= cfg.consecutive {
                return Some(k);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Commands per plant sample: zero before the trigger, then the schedule with
/// the trigger aligned to its offset, then zero after the last block.
pub fn apply_schedule(sched: &Schedule, trigger: usize, n_samples: usize) -> Vec<[f64; 2]> {
    (0..n_samples)
        .map(|k| {
            if k < trigger {
                return [0.0; 2];
            }
            let j = (k - trigger + sched.offset_steps) / sched.block_steps;
            let mut u = [0.0; 2];
            for (i, ui) in u.iter_mut().enumerate() {
                if sched.b[i].get(j).is_some_and(|v| *v != 0) {
                    *ui = sched.u_c;
                }
            }
            u
        })
        .collect()
}

fn zero_inputs(n: usize) -> Vec<[f64; 2]> {
    vec![[0.0; 2]; n]
}

/// Assembles the model, predicts the trigger offset and encodes the MILP.
pub fn build_problem(cfg: &ScenarioConfig) -> Result<Problem> {
    cfg.validate()?;
    let afr = cfg.afr()?;
    let m = &cfg.milp;
    let dsys = afr.discretize(m.t_s)?;
    let n = cfg.n_steps()?;
    let uncontrolled = simulate_afr(&dsys, &zero_inputs(n), &vec![m.dp_d; n], &[0.0; 5])?;
    let offset = detect_trigger(uncontrolled.channel_or_err(&cfg.trigger.channel)?, &cfg.trigger).unwrap_or(n);
    let phi = cfg.formula()?;
    let phi_design = phi.as_ref().map(|p| p.tighten(m.eps));
    let spec = MpcSpec {
        dsys: dsys.clone(),
        n_steps: n,
        block_steps: cfg.block_steps()?,
        x0: [0.0; 5],
        hold_steps: offset.min(n),
        dp_d: m.dp_d,
        u_c: m.u_c,
        w1: m.w1,
        w2: m.w2,
        df_d_lim: m.df_d_lim,
        df_w_lim: m.df_w_lim,
        phi: phi_design.clone(),
    };
    let encoding = encode_mpc(&spec)?;
    Ok(Problem {
        afr,
        dsys,
        phi,
        phi_design,
        spec,
        encoding,
        limits: Limits {
            time: Some(m.time_limit),
            nodes: m.node_limit,
            gap: 0.0,
        },
    })
}

fn feasible(spec: &MpcSpec, limits: &Limits) -> Result<bool> {
    let s = solve_milp(&encode_mpc(spec)?.model, limits);
    Ok(s.has_assignment() || s.status == SolveStatus::LimitReached)
}

/// Names the constraint family whose removal restores feasibility.
fn diagnose(spec: &MpcSpec, limits: &Limits) -> Result<Error> {
    let mut relaxed = spec.clone();
    relaxed.phi = None;
    if spec.phi.is_some() && feasible(&relaxed, limits)? {
        return Ok(Error::Infeasible {
            family: "specification".into(),
            detail: "feasible once the temporal-logic specification is dropped".into(),
        });
    }
    relaxed.df_d_lim = f64::INFINITY;
    if feasible(&relaxed, limits)? {
        let mut no_speed = spec.clone();
        no_speed.phi = None;
        no_speed.df_w_lim = f64::INFINITY;
        let detail = if spec.df_w_lim.is_finite() && feasible(&no_speed, limits)? {
            format!(
                "|x1| <= {} cannot hold together with |x4|, |x5| <= {}",
                spec.df_d_lim, spec.df_w_lim
            )
        } else {
            format!("|x1| <= {} cannot hold at every step", spec.df_d_lim)
        };
        return Ok(Error::Infeasible {
            family: "frequency_limit".into(),
            detail,
        });
    }
    Ok(Error::Infeasible {
        family: "speed_limit".into(),
        detail: format!("|x4|, |x5| <= {} cannot hold at every step", spec.df_w_lim),
    })
}

/// Solves an encoded problem and extracts the schedule.
pub fn solve_problem(cfg: &ScenarioConfig, p: &Problem) -> Result<(Schedule, MilpSolution)> {
    let sol = solve_milp(&p.encoding.model, &p.limits);
    match sol.status {
        SolveStatus::Infeasible => return Err(diagnose(&p.spec, &p.limits)?),
        SolveStatus::Unbounded => return Err(Error::Solver("scheduling problem is unbounded".into())),
        SolveStatus::LimitReached if !sol.has_assignment() => return Err(Error::NoIncumbent { nodes: sol.nodes }),
        _ => {}
    }
    let b = p.encoding.switches(&sol.x);
    let sched = Schedule {
        t_s: cfg.milp.t_s,
        dt_u: cfg.milp.dt_u,
        block_steps: p.spec.block_steps,
        n_steps: p.spec.n_steps,
        offset_steps: p.spec.hold_steps,
        on_time: on_count(&b[0]) + on_count(&b[1]),
        startups: startup_count(&b[0]) + startup_count(&b[1]),
        b,
        u_c: cfg.milp.u_c,
        eps: cfg.milp.eps,
        objective: sol.objective,
        status: sol.status,
        gap: sol.gap,
        nodes: sol.nodes,
        fingerprint: cfg.fingerprint(),
    };
    Ok((sched, sol))
}

/// Builds and solves the scheduling problem of a scenario.
pub fn schedule(cfg: &ScenarioConfig) -> Result<Schedule> {
    let p = build_problem(cfg)?;
    solve_problem(cfg, &p).map(|(s, _)| s)
}

/// Outcome of replaying a schedule on a plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub fidelity: Fidelity,
    pub trigger_index: Option<usize>,
    pub trigger_time: Option<f64>,
    pub offset_steps: usize,
    pub onset_index: usize,
    pub max_abs_frequency: f64,
    /// `Δf_d,lim − max |x1|` after onset.
    pub frequency_margin: f64,
    /// `Δf_w,lim − max |x4|`, `Δf_w,lim − max |x5|` after onset.
    pub speed_margin: [f64; 2],
    /// Robustness of the specification as written, at onset.
    pub robustness: Option<f64>,
    /// Robustness of the tightened specification, at onset.
    pub robustness_tightened: Option<f64>,
    pub eps: f64,
    pub satisfied: bool,
}

/// Contingency input per step: zero before onset, `dp_d` after.
fn disturbance(cfg: &ScenarioConfig, n: usize, onset: usize) -> Vec<f64> {
    (0..n).map(|k| if k >= onset { cfg.milp.dp_d } else { 0.0 }).collect()
}

fn bias_direction(dp_d: f64) -> f64 {
    if dp_d < 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Runs the plant of the requested fidelity under per-step commands.
pub fn run_plant(cfg: &ScenarioConfig, afr: &AfrModel, fidelity: Fidelity, u: &[[f64; 2]], d: &[f64]) -> Result<Trace> {
    let t_s = cfg.milp.t_s;
    let mut tr = match fidelity {
        Fidelity::Linear => simulate_afr(&afr.discretize(t_s)?, u, d, &[0.0; 5])?,
        Fidelity::Nonlinear => {
            let plants = cfg
                .plants()
                .ok_or_else(|| Error::Domain("nonlinear fidelity needs a `plant` block for both turbines".into()))?;
            simulate_nonlinear(afr, &plants, t_s, cfg.plant.dt, u, d)?
        }
    };
    let last = u.last().copied().unwrap_or([0.0; 2]);
    for i in 0..2 {
        let vals = (0..tr.len()).map(|k| u.get(k).unwrap_or(&last)[i]).collect();
        tr.push_channel(format!("u_s{}", i + 1), vals)?;
    }
    if cfg.plant.bias != 0.0 {
        let shift = bias_direction(cfg.milp.dp_d) * cfg.plant.bias;
        if let Some(x1) = tr.channel_mut("x1") {
            x1.iter_mut().for_each(|v| *v += shift);
        }
    }
    Ok(tr)
}

/// Diesel model from the AFR with both turbines replaced by full machines.
///
/// Turbine powers enter the swing equation with the same base scaling as in
/// the AFR. Speeds are reported as deviations from equilibrium (pu).
pub fn simulate_nonlinear(
    afr: &AfrModel,
    plants: &[PlantConfig; 2],
    t_s: f64,
    dt: f64,
    u: &[[f64; 2]],
    d: &[f64],
) -> Result<Trace> {
    if u.len() != d.len() {
        return Err(Error::Dimension(format!("{} command steps but {} disturbance steps", u.len(), d.len())));
    }
    let sub = (t_s / dt - 1e-9).ceil().max(1.0) as usize;
    let h = t_s / sub as f64;
    let mut machines = Vec::with_capacity(2);
    for p in plants {
        let (plant, x_eq, alg) = DfigPlant::at_equilibrium(p.params, p.operating_point)?;
        machines.push((plant, x_eq, alg.p_g));
    }
    let a = &afr.system.a;
    let b_dist = afr.system.b.column(2);
    let g = afr.diesel.f_bar / (2.0 * afr.diesel.h_d);
    let k_dw = afr.bases.k_dw();
    let u_ie0 = [plants[0].operating_point.u_ie0, plants[1].operating_point.u_ie0];

    // state: diesel (3) + machine 1 (10) + machine 2 (10)
    let rhs = |x: &[f64; 23], uk: &[f64; 2], dk: f64, t: f64| -> Result<([f64; 23], [f64; 2])> {
        let mut dx = [0.0; 23];
        let mut dp_g = [0.0; 2];
        for i in 0..2 {
            let (plant, _, p_g0) = &machines[i];
            let s: &[f64; 10] = x[3 + 10 * i..13 + 10 * i].try_into().expect("slice of 10");
            let (ds, alg) = plant
                .rhs(&DfigState::from_array(s), u_ie0[i] + uk[i])
                .map_err(|e| Error::AlgebraicFailure { time: t, reason: e.to_string() })?;
            dx[3 + 10 * i..13 + 10 * i].copy_from_slice(&ds);
            dp_g[i] = alg.p_g - p_g0;
        }
        for r in 0..3 {
            dx[r] = (0..3).map(|c| a[(r, c)] * x[c]).sum::<f64>() + b_dist[r] * dk;
        }
        dx[0] += g * (k_dw[0] * dp_g[0] + k_dw[1] * dp_g[1]);
        Ok((dx, dp_g))
    };
    let axpy = |x: &[f64; 23], k: &[f64; 23], s: f64| {
        let mut o = *x;
        for i in 0..23 {
            o[i] += s * k[i];
        }
        o
    };

    let mut x = [0.0; 23];
    for (i, (_, x_eq, _)) in machines.iter().enumerate() {
        x[3 + 10 * i..13 + 10 * i].copy_from_slice(&x_eq.to_array());
    }
    let omega_eq = [machines[0].1.omega_r, machines[1].1.omega_r];
    let n = u.len();
    let mut cols: Vec<Vec<f64>> = (0..7).map(|_| Vec::with_capacity(n + 1)).collect();
    for k in 0..=n {
        let uk = u.get(k).or(u.last()).copied().unwrap_or([0.0; 2]);
        let dk = d.get(k).or(d.last()).copied().unwrap_or(0.0);
        let t = k as f64 * t_s;
        let (_, dp_g) = rhs(&x, &uk, dk, t)?;
        let row = [
            x[0],
            x[1],
            x[2],
            x[3 + crate::dfig::OMEGA_R] - omega_eq[0],
            x[13 + crate::dfig::OMEGA_R] - omega_eq[1],
            dp_g[0],
            dp_g[1],
        ];
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
        if k == n {
            break;
        }
        for s in 0..sub {
            let ts = t + s as f64 * h;
            let k1 = rhs(&x, &uk, dk, ts)?.0;
            let k2 = rhs(&axpy(&x, &k1, h / 2.0), &uk, dk, ts)?.0;
            let k3 = rhs(&axpy(&x, &k2, h / 2.0), &uk, dk, ts)?.0;
            let k4 = rhs(&axpy(&x, &k3, h), &uk, dk, ts)?.0;
            for i in 0..23 {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::AlgebraicFailure {
                    time: ts,
                    reason: "state diverged".into(),
                });
            }
        }
    }
    let mut tr = Trace::new(t_s)?;
    for (name, c) in ["x1", "x2", "x3", "x4", "x5", "dP_g1", "dP_g2"].iter().zip(cols) {
        tr.push_channel(*name, c)?;
    }
    Ok(tr)
}

fn max_abs_after(v: &[f64], from: usize) -> f64 {
    v.iter().skip(from).fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Replays a schedule on the plant, with the trigger detected on the plant's
/// own uncontrolled measurement.
pub fn closed_loop(cfg: &ScenarioConfig, sched: &Schedule, fidelity: Fidelity) -> Result<(Trace, VerificationReport)> {
    let afr = cfg.afr()?;
    closed_loop_with(cfg, &afr, sched, fidelity)
}

pub fn closed_loop_with(
    cfg: &ScenarioConfig,
    afr: &AfrModel,
    sched: &Schedule,
    fidelity: Fidelity,
) -> Result<(Trace, VerificationReport)> {
    let onset = cfg.onset_steps()?;
    let n = onset + cfg.n_steps()?;
    let d = disturbance(cfg, n, onset);
    let free = run_plant(cfg, afr, fidelity, &zero_inputs(n), &d)?;
    let trigger = detect_trigger(free.channel_or_err(&cfg.trigger.channel)?, &cfg.trigger);
    let u = match trigger {
        Some(k) => apply_schedule(sched, k, n),
        None => zero_inputs(n),
    };
    let tr = run_plant(cfg, afr, fidelity, &u, &d)?;
    let report = verify(cfg, &tr, fidelity, trigger, sched.offset_steps, onset)?;
    Ok((tr, report))
}

/// Margins and robustness of a closed-loop trace.
pub fn verify(
    cfg: &ScenarioConfig,
    tr: &Trace,
    fidelity: Fidelity,
    trigger: Option<usize>,
    offset_steps: usize,
    onset: usize,
) -> Result<VerificationReport> {
    let m = &cfg.milp;
    let max_f = max_abs_after(tr.channel_or_err("x1")?, onset);
    let speed = [
        m.df_w_lim - max_abs_after(tr.channel_or_err("x4")?, onset),
        m.df_w_lim - max_abs_after(tr.channel_or_err("x5")?, onset),
    ];
    let phi = cfg.formula()?;
    let robustness = phi.as_ref().map(|p| p.robustness(tr, onset)).transpose()?;
    let robustness_tightened = phi.as_ref().map(|p| p.tighten(m.eps).robustness(tr, onset)).transpose()?;
    let frequency_margin = m.df_d_lim - max_f;
    let satisfied = frequency_margin >= 0.0
        && speed.iter().all(|s| *s >= 0.0 || s.is_nan())
        && robustness.is_none_or(|r| r >= 0.0);
    Ok(VerificationReport {
        fidelity,
        trigger_index: trigger,
        trigger_time: trigger.map(|k| tr.time(k)),
        offset_steps,
        onset_index: onset,
        max_abs_frequency: max_f,
        frequency_margin,
        speed_margin: speed,
        robustness,
        robustness_tightened,
        eps: m.eps,
        satisfied,
    })
}

/// Largest violation of the encoded limits and of the encoded specification
/// when block switches `b` are replayed on the AFR from onset.
pub fn replay_violation(p: &Problem, b: &[Vec<u8>; 2]) -> Result<f64> {
    let n = p.spec.n_steps;
    let u: Vec<[f64; 2]> = (0..n)
        .map(|k| {
            let mut u = [0.0; 2];
            if k >= p.spec.hold_steps {
                for i in 0..2 {
                    if b[i][k / p.spec.block_steps] != 0 {
                        u[i] = p.spec.u_c;
                    }
                }
            }
            u
        })
        .collect();
    let tr = simulate_afr(&p.dsys, &u, &vec![p.spec.dp_d; n], &p.spec.x0)?;
    let mut worst = f64::NEG_INFINITY;
    let mut check = |ch: usize, lim: f64| -> Result<()> {
        if lim.is_finite() {
            let v = tr.channel_or_err(&p.dsys.state_names[ch])?;
            for x in v.iter().skip(1) {
                worst = worst.max(x.abs() - lim);
            }
        }
        Ok(())
    };
    check(FREQ, p.spec.df_d_lim)?;
    for s in WTG_SPEED {
        check(s, p.spec.df_w_lim)?;
    }
    if let Some(phi) = &p.phi_design {
        worst = worst.max(-phi.robustness(&tr, 0)?);
    }
    Ok(worst)
}

/// Whether the MILP admits the block switches `b` once they are fixed.
pub fn milp_admits(p: &Problem, b: &[Vec<u8>; 2]) -> Result<bool> {
    let mut m = p.encoding.model.clone();
    for i in 0..2 {
        if b[i].len() != p.encoding.b[i].len() {
            return Err(Error::Dimension(format!(
                "{} switches given for {} blocks",
                b[i].len(),
                p.encoding.b[i].len()
            )));
        }
        for (&j, &v) in p.encoding.b[i].iter().zip(&b[i]) {
            m.set_bounds(j, f64::from(v), f64::from(v));
        }
    }
    let s = solve_milp(&m, &p.limits);
    Ok(s.has_assignment())
}

/// One probe of the robust-factor search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub eps: f64,
    /// Robustness of the untightened specification on the plant, if a
    /// schedule was found.
    pub robustness: Option<f64>,
    pub on_time: Option<usize>,
    pub objective: Option<f64>,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub eps: f64,
    pub fidelity: Fidelity,
    pub probes: Vec<Probe>,
    pub schedule: Schedule,
}

fn probe(cfg: &ScenarioConfig, eps: f64, fidelity: Fidelity) -> Result<(Probe, Option<Schedule>)> {
    let mut c = cfg.clone();
    c.milp.eps = eps;
    match schedule(&c) {
        Ok(s) => {
            let (_, rep) = closed_loop(&c, &s, fidelity)?;
            Ok((
                Probe {
                    eps,
                    robustness: rep.robustness,
                    on_time: Some(s.on_time),
                    objective: Some(s.objective),
                    outcome: format!("{:?}", s.status).to_lowercase(),
                },
                Some(s),
            ))
        }
        Err(e @ (Error::Infeasible { .. } | Error::NoIncumbent { .. })) => Ok((
            Probe {
                eps,
                robustness: None,
                on_time: None,
                objective: None,
                outcome: e.to_string(),
            },
            None,
        )),
        Err(e) => Err(e),
    }
}

fn passes(p: &Probe) -> bool {
    p.robustness.is_some_and(|r| r >= 0.0)
}

/// Bisection for the largest robust factor in `[eps_min, 0]` whose schedule
/// satisfies the untightened specification on the plant.
///
/// Probes lie on the dyadic grid `eps_min·i/2^max_iter`.
pub fn calibrate_epsilon(cfg: &ScenarioConfig, fidelity: Fidelity, eps_min: f64, max_iter: usize) -> Result<Calibration> {
    if !(eps_min < 0.0) || !eps_min.is_finite() {
        return Err(Error::Domain(format!("eps_min must be negative, got {eps_min}")));
    }
    if cfg.formula()?.is_none() {
        return Err(Error::Domain("calibration needs a specification".into()));
    }
    let mut probes = Vec::new();
    let (p0, s0) = probe(cfg, 0.0, fidelity)?;
    let ok0 = passes(&p0);
    probes.push(p0);
    if ok0 {
        return Ok(Calibration {
            eps: 0.0,
            fidelity,
            probes,
            schedule: s0.expect("passing probe has a schedule"),
        });
    }
    let (pm, sm) = probe(cfg, eps_min, fidelity)?;
    let okm = passes(&pm);
    probes.push(pm);
    if !okm {
        let best = probes
            .iter()
            .max_by(|a, b| {
                let ra = a.robustness.unwrap_or(f64::NEG_INFINITY);
                let rb = b.robustness.unwrap_or(f64::NEG_INFINITY);
                ra.total_cmp(&rb)
            })
            .expect("two probes");
        return Err(Error::Calibration {
            eps_min,
            best_eps: best.eps,
            best_robustness: best.robustness.unwrap_or(f64::NEG_INFINITY),
        });
    }
    let mut good = (eps_min, sm.expect("passing probe has a schedule"));
    let mut bad = 0.0;
    for _ in 0..max_iter {
        let mid = 0.5 * (good.0 + bad);
        let (p, s) = probe(cfg, mid, fidelity)?;
        let ok = passes(&p);
        probes.push(p);
        if ok {
            good = (mid, s.expect("passing probe has a schedule"));
        } else {
            bad = mid;
        }
    }
    Ok(Calibration {
        eps: good.0,
        fidelity,
        probes,
        schedule: good.1,
    })
}
