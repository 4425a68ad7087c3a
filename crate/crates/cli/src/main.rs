//! Command-line front end.
//!
//! Exit codes: 0 success, 1 internal failure, 2 specification violated,
//! 3 solver limit reached, 4 input error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use gridstl::cases::{apply_case, run_case};
use gridstl::controller::{
    build_problem, calibrate_epsilon, closed_loop_with, milp_admits, replay_violation, solve_problem, Fidelity,
    Schedule,
};
use gridstl::io::{write_atomic, write_json, write_trace_csv};
use gridstl::milp::to_lp_string;
use gridstl::reduction::derive_wtg;
use gridstl::scenario::{builtin, load_scenario, PlantConfig, ScenarioConfig};
use gridstl::solver::SolveStatus;
use gridstl::Error;

const OK: u8 = 0;
const INTERNAL: u8 = 1;
const VIOLATION: u8 = 2;
const SOLVER_LIMIT: u8 = 3;
const INPUT: u8 = 4;

#[derive(Parser)]
#[command(name = "gridstl", version, about = "Schedule grid-supportive wind turbine modes under frequency specifications")]
struct Cli {
    /// Scenario file (JSON). Defaults to the shipped second case.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Plant used for replay.
    #[arg(long, global = true, value_enum)]
    fidelity: Option<FidelityArg>,
    /// Seed of the randomized checks run by `verify --samples`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FidelityArg {
    Linear,
    Nonlinear,
}

impl From<FidelityArg> for Fidelity {
    fn from(f: FidelityArg) -> Self {
        match f {
            FidelityArg::Linear => Fidelity::Linear,
            FidelityArg::Nonlinear => Fidelity::Nonlinear,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium, linearization and reduction of both turbines.
    Reduce,
    /// Solve the scheduling problem and write schedule.json.
    Schedule,
    /// Replay a schedule on the plant and write the trace.
    Simulate {
        /// Schedule to replay; solved from the scenario when absent.
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Replay a schedule and check limits and specification.
    Verify {
        #[arg(long)]
        schedule: Option<PathBuf>,
        /// Random schedules checked for agreement between the MILP and the monitor.
        #[arg(long, default_value_t = 0)]
        samples: usize,
    },
    /// Run one of the three cases end to end.
    Case {
        #[arg(value_parser = ["case1", "case2", "case3", "custom"])]
        name: String,
    },
    /// Search the robust factor for the plant.
    CalibrateEps {
        #[arg(long, default_value_t = -0.06, allow_hyphen_values = true)]
        eps_min: f64,
        #[arg(long, default_value_t = 4)]
        max_iter: usize,
    },
    /// Write the scheduling MILP in CPLEX-LP format.
    ExportLp,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Scenario { .. } | Error::Parse { .. } | Error::Json(_) | Error::UnknownVariable(_) => INPUT,
            Error::Infeasible { .. } | Error::Calibration { .. } => VIOLATION,
            Error::NoIncumbent { .. } => SOLVER_LIMIT,
            _ => INTERNAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = std::result::Result<u8, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { INPUT } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn scenario(cli: &Cli, default_case: &str) -> Result<ScenarioConfig, Failure> {
    Ok(match &cli.scenario {
        Some(p) => load_scenario(p)?,
        None => builtin(default_case)?,
    })
}

fn out_dir(cli: &Cli, cfg: &ScenarioConfig, fallback: &str) -> Result<PathBuf, Failure> {
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(fallback));
    std::fs::create_dir_all(&dir).map_err(|e| Failure {
        code: INPUT,
        message: format!("cannot create {}: {e}", dir.display()),
    })?;
    Ok(dir)
}

fn read_schedule(path: &Path) -> Result<Schedule, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        code: INPUT,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    serde_json::from_str(&text).map_err(|e| Failure {
        code: INPUT,
        message: format!("{}: {e}", path.display()),
    })
}

fn limit_code(s: &Schedule) -> u8 {
    if s.status == SolveStatus::LimitReached {
        SOLVER_LIMIT
    } else {
        OK
    }
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Reduce => reduce(cli),
        Command::Schedule => {
            let cfg = scenario(cli, "case2")?;
            let p = build_problem(&cfg)?;
            let (s, _) = solve_problem(&cfg, &p)?;
            let dir = out_dir(cli, &cfg, "schedule")?;
            write_json(&dir.join("schedule.json"), &s)?;
            println!(
                "objective {} ({:?}), on-time {} blocks, start-ups {}, {} nodes",
                s.objective, s.status, s.on_time, s.startups, s.nodes
            );
            Ok(limit_code(&s))
        }
        Command::Simulate { schedule } | Command::Verify { schedule, .. } => {
            let cfg = scenario(cli, "case2")?;
            let fidelity: Fidelity = cli.fidelity.unwrap_or(FidelityArg::Linear).into();
            let p = build_problem(&cfg)?;
            let sched = match schedule {
                Some(path) => read_schedule(path)?,
                None => solve_problem(&cfg, &p)?.0,
            };
            let (tr, rep) = closed_loop_with(&cfg, &p.afr, &sched, fidelity)?;
            let tag = match fidelity {
                Fidelity::Linear => "linear",
                Fidelity::Nonlinear => "nonlinear",
            };
            if let Command::Verify { samples, .. } = &cli.command {
                let dir = out_dir(cli, &cfg, "verify")?;
                let mismatches = random_consistency(&p, *samples, cli.seed)?;
                write_json(
                    &dir.join(format!("verification_{tag}.json")),
                    &json!({ "report": rep, "random_samples": samples, "seed": cli.seed, "encoding_mismatches": mismatches }),
                )?;
                println!(
                    "{tag}: max |x1| {:.6} Hz, robustness {}, {}",
                    rep.max_abs_frequency,
                    rep.robustness.map_or("n/a".into(), |r| format!("{r:.6}")),
                    if rep.satisfied { "satisfied" } else { "VIOLATED" }
                );
                if *samples > 0 {
                    println!("{samples} random schedules, {mismatches} encoder/monitor mismatches");
                }
                if !rep.satisfied || mismatches > 0 {
                    return Ok(VIOLATION);
                }
            } else {
                let dir = out_dir(cli, &cfg, "simulate")?;
                write_trace_csv(&tr, &dir.join(format!("trace_{tag}.csv")))?;
                println!("{} samples written", tr.len());
            }
            Ok(limit_code(&sched))
        }
        Command::Case { name } => {
            let base = match (&cli.scenario, name.as_str()) {
                (Some(p), _) => load_scenario(p)?,
                (None, "custom") => builtin("case2")?,
                (None, n) => builtin(n)?,
            };
            let cfg = apply_case(&base, name)?;
            let dir = out_dir(cli, &cfg, name)?;
            let run = run_case(name, &cfg, &dir)?;
            let r = &run.report;
            println!(
                "{}: objective {}, on-time {} blocks, linear {}, nonlinear {}",
                name,
                r.schedule.objective,
                r.schedule.on_time,
                verdict(Some(r.linear.satisfied)),
                verdict(r.nonlinear.as_ref().map(|n| n.satisfied))
            );
            info!("artifacts in {}", dir.display());
            if r.solver_limited() {
                Ok(SOLVER_LIMIT)
            } else if !r.satisfied() {
                Ok(VIOLATION)
            } else {
                Ok(OK)
            }
        }
        Command::CalibrateEps { eps_min, max_iter } => {
            let cfg = scenario(cli, "case3")?;
            let fidelity: Fidelity = cli.fidelity.unwrap_or(FidelityArg::Nonlinear).into();
            let cal = calibrate_epsilon(&cfg, fidelity, *eps_min, *max_iter)?;
            let dir = out_dir(cli, &cfg, "calibrate")?;
            write_json(&dir.join("calibration.json"), &cal)?;
            println!("eps = {} after {} probes", cal.eps, cal.probes.len());
            Ok(limit_code(&cal.schedule))
        }
        Command::ExportLp => {
            let cfg = scenario(cli, "case2")?;
            let p = build_problem(&cfg)?;
            let dir = out_dir(cli, &cfg, "export")?;
            write_atomic(&dir.join("model.lp"), to_lp_string(&p.encoding.model).as_bytes())?;
            let size = p.encoding.size();
            println!("{} variables ({} binary), {} constraints", size.variables, size.binaries, size.constraints);
            Ok(OK)
        }
    }
}

fn verdict(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "satisfied",
        Some(false) => "violated",
        None => "not run",
    }
}

fn reduce(cli: &Cli) -> Outcome {
    let plants: [PlantConfig; 2] = match &cli.scenario {
        Some(p) => {
            let cfg = load_scenario(p)?;
            [cfg.wtg[0].plant.unwrap_or_default(), cfg.wtg[1].plant.unwrap_or_default()]
        }
        None => [PlantConfig::default(); 2],
    };
    let mut reports = Vec::new();
    for (i, p) in plants.iter().enumerate() {
        let (_, rep) = derive_wtg(&p.params, &p.operating_point)?;
        for w in &rep.warnings {
            log::warn!("wtg {}: {w}", i + 1);
        }
        println!(
            "wtg {}: A_rd {:.6} B_rd {:.6} C_rd {:.6} D_rd {:.6} (fit {:.4})",
            i + 1,
            rep.reduced.a_rd,
            rep.reduced.b_rd,
            rep.reduced.c_rd,
            rep.reduced.d_rd,
            rep.fit_quality
        );
        reports.push(rep);
    }
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out").join("reduce"));
    std::fs::create_dir_all(&dir).map_err(Error::from)?;
    write_json(&dir.join("reduction.json"), &reports)?;
    Ok(OK)
}

/// Draws random block switches and counts disagreements between the MILP
/// (switches fixed) and a replay on the model checked against the limits and
/// the encoded specification.
fn random_consistency(p: &gridstl::controller::Problem, samples: usize, seed: u64) -> Result<usize, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nb = p.encoding.n_blocks;
    let mut mismatches = 0;
    for _ in 0..samples {
        let density: f64 = rng.random();
        let b: [Vec<u8>; 2] = std::array::from_fn(|_| (0..nb).map(|_| u8::from(rng.random::<f64>() < density)).collect());
        let admitted = milp_admits(p, &b)?;
        let worst = replay_violation(p, &b)?;
        // margins inside the strictness slack are ambiguous by construction
        if worst.abs() > 1e-5 && admitted != (worst <= 0.0) {
            mismatches += 1;
        }
    }
    Ok(mismatches)
}
