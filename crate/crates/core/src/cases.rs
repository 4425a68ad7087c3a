//! End-to-end case runs: schedule, linear and nonlinear replay, artifacts.

use std::path::Path;

use serde::Serialize;

use crate::controller::{build_problem, closed_loop_with, solve_problem, Fidelity, Schedule, VerificationReport};
use crate::error::{Error, Result};
use crate::io::{write_atomic, write_json, write_trace_csv};
use crate::milp::{to_lp_string, EncodingSize};
use crate::scenario::ScenarioConfig;
use crate::solver::SolveStatus;
use crate::trace::Trace;

pub const VERSION: &str = concat!("gridstl ", env!("CARGO_PKG_VERSION"));

/// Robust factor of the third case (Hz).
pub const CASE3_EPS: f64 = -0.015;

/// Applies a case's overrides: `case1` drops the specification, `case2` runs
/// without a robust factor, `case3` uses [`CASE3_EPS`]. `custom` leaves the
/// scenario untouched.
pub fn apply_case(cfg: &ScenarioConfig, case: &str) -> Result<ScenarioConfig> {
    let mut c = cfg.clone();
    match case {
        "case1" => c.formula = "none".into(),
        "case2" => {
            if c.formula == "none" {
                c.formula = "recovery".into();
            }
            c.milp.eps = 0.0;
        }
        "case3" => {
            if c.formula == "none" {
                c.formula = "recovery".into();
            }
            c.milp.eps = CASE3_EPS;
        }
        "custom" => {}
        other => {
            return Err(Error::Scenario {
                path: "case".into(),
                message: format!("unknown case `{other}` (expected case1, case2, case3 or custom)"),
            })
        }
    }
    if case != "custom" {
        c.name = case_name(&c.name, case);
    }
    c.validate()?;
    Ok(c)
}

fn case_name(base: &str, case: &str) -> String {
    match base.rsplit_once('_') {
        Some((stem, last)) if last.starts_with("case") => format!("{stem}_{case}"),
        _ if base.is_empty() => case.to_string(),
        _ => format!("{base}_{case}"),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseReport {
    pub version: String,
    pub case: String,
    pub scenario: ScenarioConfig,
    pub encoding: EncodingSize,
    pub schedule: Schedule,
    pub linear: VerificationReport,
    pub nonlinear: Option<VerificationReport>,
}

impl CaseReport {
    /// True when every replayed fidelity meets the limits and the specification.
    pub fn satisfied(&self) -> bool {
        self.linear.satisfied && self.nonlinear.as_ref().is_none_or(|r| r.satisfied)
    }

    pub fn solver_limited(&self) -> bool {
        self.schedule.status == SolveStatus::LimitReached
    }
}

pub struct CaseRun {
    pub report: CaseReport,
    pub linear: Trace,
    pub nonlinear: Option<Trace>,
    pub lp: String,
}

/// Schedules and replays a scenario without touching the file system.
pub fn run_scenario(case: &str, cfg: &ScenarioConfig) -> Result<CaseRun> {
    let p = build_problem(cfg)?;
    let lp = to_lp_string(&p.encoding.model);
    let (sched, _) = solve_problem(cfg, &p)?;
    let (lin_tr, lin_rep) = closed_loop_with(cfg, &p.afr, &sched, Fidelity::Linear)?;
    let (nl_tr, nl_rep) = if cfg.plants().is_some() {
        let (t, r) = closed_loop_with(cfg, &p.afr, &sched, Fidelity::Nonlinear)?;
        (Some(t), Some(r))
    } else {
        (None, None)
    };
    Ok(CaseRun {
        report: CaseReport {
            version: VERSION.into(),
            case: case.into(),
            scenario: cfg.clone(),
            encoding: p.encoding.size(),
            schedule: sched,
            linear: lin_rep,
            nonlinear: nl_rep,
        },
        linear: lin_tr,
        nonlinear: nl_tr,
        lp,
    })
}

/// Runs a case and writes `schedule.json`, `trace_linear.csv`,
/// `trace_nonlinear.csv` (when plants are given), `report.json` and `model.lp`.
pub fn run_case(case: &str, cfg: &ScenarioConfig, out: &Path) -> Result<CaseRun> {
    let cfg = apply_case(cfg, case)?;
    let run = run_scenario(case, &cfg)?;
    std::fs::create_dir_all(out)?;
    write_json(&out.join("schedule.json"), &run.report.schedule)?;
    write_trace_csv(&run.linear, &out.join("trace_linear.csv"))?;
    if let Some(t) = &run.nonlinear {
        write_trace_csv(t, &out.join("trace_nonlinear.csv"))?;
    }
    write_json(&out.join("report.json"), &run.report)?;
    write_atomic(&out.join("model.lp"), run.lp.as_bytes())?;
    Ok(run)
}
