//! Scenario files: one JSON document describing the machines, the scheduling
//! problem, the specification, the trigger and the verification plant.
//!
//! Unknown keys are rejected everywhere. Omitted blocks and optional fields
//! take the defaults documented on each field.

use serde::{Deserialize, Serialize};

use crate::afr::{assemble_afr, AfrModel, Bases, DieselParams};
use crate::dfig::{DfigParams, OperatingPoint};
use crate::error::{Error, Result};
use crate::reduction::{derive_wtg, ReducedWtg};
use crate::stl::{self, StlFormula};

/// Tolerance on `horizon / t_s` and `dt_u / t_s` being whole numbers.
pub const GRID_TOL: f64 = 1e-9;

pub const CASE1: &str = include_str!("../../../scenarios/paper_case1.json");
pub const CASE2: &str = include_str!("../../../scenarios/paper_case2.json");
pub const CASE3: &str = include_str!("../../../scenarios/paper_case3.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub diesel: DieselParams,
    #[serde(default)]
    pub bases: Bases,
    pub wtg: [WtgConfig; 2],
    pub milp: MilpConfig,
    /// `"recovery"` (default) builds the recovery requirement from `f_c` and
    /// `t_a`; `"none"` drops the specification; anything else is parsed as a
    /// formula.
    #[serde(default = "default_formula")]
    pub formula: String,
    #[serde(default)]
    pub trigger: TriggerConfig,
    #[serde(default)]
    pub plant: PlantRun,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

fn default_formula() -> String {
    "recovery".into()
}

/// Reduced coefficients of one turbine, injected or derived from `plant`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WtgConfig {
    /// Injected `[A_rd, B_rd, C_rd, D_rd]`; absent means derive from `plant`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced: Option<[f64; 4]>,
    /// Full machine used for derivation and nonlinear verification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant: Option<PlantConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantConfig {
    pub params: DfigParams,
    pub operating_point: OperatingPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MilpConfig {
    /// Sample time (s).
    pub t_s: f64,
    /// Horizon T (s).
    pub horizon: f64,
    /// Length of a Boolean control block (s), default 0.1.
    #[serde(default = "default_dt_u")]
    pub dt_u: f64,
    /// Worst-case contingency (MW).
    pub dp_d: f64,
    pub w1: f64,
    pub w2: f64,
    /// Bound on the diesel frequency deviation (Hz).
    pub df_d_lim: f64,
    /// Bound on the turbine speed deviations, default 2.0; `null` drops it.
    #[serde(default = "default_df_w_lim", with = "opt_inf")]
    pub df_w_lim: f64,
    /// Supplementary command while switched on (pu).
    pub u_c: f64,
    /// Frequency threshold of the recovery requirement (Hz), default 0.45.
    #[serde(default = "default_f_c")]
    pub f_c: f64,
    /// Recovery time (s), default 1.0.
    #[serde(default = "default_t_a")]
    pub t_a: f64,
    /// Robust factor applied to the specification (Hz), default 0.
    #[serde(default)]
    pub eps: f64,
    /// Solver wall-clock limit (s), default 120.
    #[serde(default = "default_time_limit")]
    pub time_limit: f64,
    /// Branch-and-bound node limit, default 2 000 000.
    #[serde(default = "default_node_limit")]
    pub node_limit: usize,
}

fn default_dt_u() -> f64 {
    0.1
}
fn default_df_w_lim() -> f64 {
    2.0
}
fn default_f_c() -> f64 {
    0.45
}
fn default_t_a() -> f64 {
    1.0
}
fn default_time_limit() -> f64 {
    120.0
}
fn default_node_limit() -> usize {
    2_000_000
}

/// Infinite values travel as `null`.
mod opt_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TriggerConfig {
    /// Detection threshold on |Δf| (Hz).
    pub threshold: f64,
    /// Consecutive samples required.
    pub consecutive: usize,
    pub channel: String,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        Self {
            threshold: 0.1,
            consecutive: 2,
            channel: "x1".into(),
        }
    }
}

impl TriggerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) || !self.threshold.is_finite() {
            return Err(scen("trigger.threshold", "must be positive"));
        }
        if self.consecutive == 0 {
            return Err(scen("trigger.consecutive", "must be at least 1"));
        }
        Ok(())
    }
}

/// Verification plant settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantRun {
    /// Integration step of the nonlinear machines (s); rounded down to divide `t_s`.
    pub dt: f64,
    /// Frequency measurement bias (Hz), applied in the direction of the
    /// contingency's deviation.
    pub bias: f64,
    /// Contingency onset (s) in plant time.
    pub onset: f64,
}

impl Default for PlantRun {
    fn default() -> Self {
        Self {
            dt: 0.001,
            bias: 0.0,
            onset: 0.0,
        }
    }
}

fn scen(path: &str, message: impl Into<String>) -> Error {
    Error::Scenario {
        path: path.into(),
        message: message.into(),
    }
}

const REQUIRED: [&str; 2] = ["wtg", "milp"];
const REQUIRED_MILP: [&str; 7] = ["t_s", "horizon", "dp_d", "w1", "w2", "df_d_lim", "u_c"];

/// Parses and validates a scenario document.
pub fn parse_scenario(src: &str) -> Result<ScenarioConfig> {
    let value: serde_json::Value = serde_json::from_str(src).map_err(|e| scen("$", e.to_string()))?;
    let Some(obj) = value.as_object() else {
        return Err(scen("$", "scenario must be a JSON object"));
    };
    let mut missing: Vec<String> = REQUIRED.iter().filter(|k| !obj.contains_key(**k)).map(|k| k.to_string()).collect();
    if let Some(milp) = obj.get("milp").and_then(|m| m.as_object()) {
        missing.extend(REQUIRED_MILP.iter().filter(|k| !milp.contains_key(**k)).map(|k| format!("milp.{k}")));
    }
    if !missing.is_empty() {
        return Err(scen("$", format!("missing required fields: {}", missing.join(", "))));
    }
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        scen(&path, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario(path: &std::path::Path) -> Result<ScenarioConfig> {
    let src = std::fs::read_to_string(path).map_err(|e| scen(&path.display().to_string(), e.to_string()))?;
    parse_scenario(&src)
}

/// A shipped scenario by case name.
pub fn builtin(case: &str) -> Result<ScenarioConfig> {
    match case {
        "case1" => parse_scenario(CASE1),
        "case2" => parse_scenario(CASE2),
        "case3" => parse_scenario(CASE3),
        _ => Err(scen("case", format!("unknown case `{case}` (expected case1, case2 or case3)"))),
    }
}

/// Steps of `span` on a grid of `step`, if it is a whole number.
pub fn whole_steps(span: f64, step: f64) -> Option<usize> {
    let r = span / step;
    let n = r.round();
    ((r - n).abs() <= GRID_TOL * 1f64.max(n) && n >= 1.0).then_some(n as usize)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let m = &self.milp;
        let positive = [
            ("milp.t_s", m.t_s),
            ("milp.horizon", m.horizon),
            ("milp.dt_u", m.dt_u),
            ("milp.df_d_lim", m.df_d_lim),
            ("milp.df_w_lim", m.df_w_lim),
            ("milp.f_c", m.f_c),
            ("milp.time_limit", m.time_limit),
            ("plant.dt", self.plant.dt),
        ];
        for (path, v) in positive {
            if !(v > 0.0) || v.is_nan() {
                return Err(scen(path, format!("must be positive, got {v}")));
            }
        }
        for (path, v) in [
            ("milp.dp_d", m.dp_d),
            ("milp.w1", m.w1),
            ("milp.w2", m.w2),
            ("milp.u_c", m.u_c),
            ("milp.eps", m.eps),
            ("plant.bias", self.plant.bias),
        ] {
            if !v.is_finite() {
                return Err(scen(path, format!("must be finite, got {v}")));
            }
        }
        if !(m.t_a >= 0.0) {
            return Err(scen("milp.t_a", "must be non-negative"));
        }
        if !(self.plant.onset >= 0.0) {
            return Err(scen("plant.onset", "must be non-negative"));
        }
        if m.eps > 0.0 {
            return Err(scen("milp.eps", "a robust factor loosens the specification when positive"));
        }
        let n = self.n_steps()?;
        let blk = self.block_steps()?;
        if n % blk != 0 {
            return Err(scen("milp.dt_u", "horizon must be a whole number of control blocks"));
        }
        self.onset_steps()?;
        self.trigger.validate()?;
        self.diesel.validate().map_err(|e| scen("diesel", e.to_string()))?;
        for (i, w) in self.wtg.iter().enumerate() {
            if w.reduced.is_none() && w.plant.is_none() {
                return Err(scen(&format!("wtg[{i}]"), "needs `reduced` coefficients or a `plant` to derive them"));
            }
        }
        self.formula()?;
        Ok(())
    }

    pub fn n_steps(&self) -> Result<usize> {
        whole_steps(self.milp.horizon, self.milp.t_s)
            .ok_or_else(|| scen("milp.horizon", "must be a whole number of samples t_s"))
    }

    pub fn block_steps(&self) -> Result<usize> {
        whole_steps(self.milp.dt_u, self.milp.t_s).ok_or_else(|| scen("milp.dt_u", "must be a whole number of samples t_s"))
    }

    pub fn onset_steps(&self) -> Result<usize> {
        if self.plant.onset == 0.0 {
            return Ok(0);
        }
        whole_steps(self.plant.onset, self.milp.t_s).ok_or_else(|| scen("plant.onset", "must be a whole number of samples t_s"))
    }

    /// Specification as written, before any robust factor.
    pub fn formula(&self) -> Result<Option<StlFormula>> {
        match self.formula.trim() {
            "none" => Ok(None),
            "recovery" => StlFormula::recovery("x1", self.milp.f_c, self.milp.t_a)
                .map(Some)
                .map_err(|e| scen("milp", e.to_string())),
            text => stl::parse(text).map(Some).map_err(|e| scen("formula", e.to_string())),
        }
    }

    /// Reduced models of both turbines.
    pub fn reduced_models(&self) -> Result<[ReducedWtg; 2]> {
        let one = |i: usize| -> Result<ReducedWtg> {
            let w = &self.wtg[i];
            match (w.reduced, w.plant) {
                (Some([a, b, c, d]), _) => Ok(ReducedWtg::given(a, b, c, d)),
                (None, Some(p)) => derive_wtg(&p.params, &p.operating_point).map(|(_, r)| r.reduced),
                (None, None) => Err(scen(&format!("wtg[{i}]"), "no reduced model source")),
            }
        };
        Ok([one(0)?, one(1)?])
    }

    pub fn afr(&self) -> Result<AfrModel> {
        let [w1, w2] = self.reduced_models()?;
        assemble_afr(&self.diesel, &w1, &w2, &self.bases)
    }

    /// Full machines of both turbines, when both are given.
    pub fn plants(&self) -> Option<[PlantConfig; 2]> {
        Some([self.wtg[0].plant?, self.wtg[1].plant?])
    }

    /// Canonical JSON text of the resolved configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        Sha256::digest(self.canonical_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
