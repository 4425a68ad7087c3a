use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Continuous,
    Binary,
}

/// Symbol and sample index a variable stands for, e.g. `("x1", 12)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tag {
    pub symbol: String,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    pub tag: Option<Tag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub coefs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    /// Leading part of the name, up to the first `_`, used to group rows.
    pub fn family(&self) -> &str {
        self.name.split('_').next().unwrap_or(&self.name)
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coefs.iter().map(|(j, a)| a * x[*j]).sum()
    }

    /// Amount by which `x` violates the row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// Minimization problem over continuous and binary variables.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MilpModel {
    pub vars: Vec<Variable>,
    pub cons: Vec<Constraint>,
    pub objective: Vec<(usize, f64)>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl PartialEq for MilpModel {
    fn eq(&self, other: &Self) -> bool {
        self.vars == other.vars && self.cons == other.cons && self.objective == other.objective
    }
}

pub(crate) fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    name.chars().all(|c| c.is_ascii_alphanumeric() || "_.!#$%&(){}/,;?@`'|~".contains(c))
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_cons(&self) -> usize {
        self.cons.len()
    }

    pub fn n_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> Result<usize> {
        let name = name.into();
        if !valid_name(&name) {
            return Err(Error::Encoding(format!("invalid variable name `{name}`")));
        }
        if self.index.contains_key(&name) {
            return Err(Error::Encoding(format!("duplicate variable `{name}`")));
        }
        if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(Error::Encoding(format!("bad bounds [{lower}, {upper}] for `{name}`")));
        }
        if kind == VarKind::Binary && (lower < 0.0 || upper > 1.0) {
            return Err(Error::Encoding(format!("binary `{name}` must have bounds within [0, 1]")));
        }
        let j = self.vars.len();
        self.index.insert(name.clone(), j);
        self.vars.push(Variable {
            name,
            kind,
            lower,
            upper,
            tag: None,
        });
        Ok(j)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Result<usize> {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Result<usize> {
        self.add_var(name, VarKind::Continuous, lower, upper)
    }

    pub fn set_tag(&mut self, j: usize, symbol: impl Into<String>, step: usize) {
        self.vars[j].tag = Some(Tag {
            symbol: symbol.into(),
            step,
        });
    }

    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.vars[j].lower = lower;
        self.vars[j].upper = upper;
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Variable carrying the given tag, if any.
    pub fn tagged(&self, symbol: &str, step: usize) -> Option<usize> {
        self.vars
            .iter()
            .position(|v| v.tag.as_ref().is_some_and(|t| t.symbol == symbol && t.step == step))
    }

    /// Adds a row; duplicate columns are merged and exact zeros dropped.
    pub fn add_constraint(&mut self, name: impl Into<String>, coefs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Result<usize> {
        let name = name.into();
        if !valid_name(&name) {
            return Err(Error::Encoding(format!("invalid constraint name `{name}`")));
        }
        if !rhs.is_finite() {
            return Err(Error::Encoding(format!("non-finite right-hand side in `{name}`")));
        }
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coefs.len());
        for (j, a) in coefs {
            if j >= self.vars.len() {
                return Err(Error::Encoding(format!("row `{name}` references undeclared column {j}")));
            }
            if !a.is_finite() {
                return Err(Error::Encoding(format!("non-finite coefficient in `{name}`")));
            }
            if let Some(e) = merged.iter_mut().find(|(k, _)| *k == j) {
                e.1 += a;
            } else {
                merged.push((j, a));
            }
        }
        merged.retain(|(_, a)| *a != 0.0);
        if merged.is_empty() {
            return Err(Error::Encoding(format!("row `{name}` has no nonzero coefficients")));
        }
        self.cons.push(Constraint {
            name,
            coefs: merged,
            sense,
            rhs,
        });
        Ok(self.cons.len() - 1)
    }

    pub fn set_objective(&mut self, coefs: Vec<(usize, f64)>) {
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (j, a) in coefs {
            if let Some(e) = merged.iter_mut().find(|(k, _)| *k == j) {
                e.1 += a;
            } else {
                merged.push((j, a));
            }
        }
        merged.retain(|(_, a)| *a != 0.0);
        merged.sort_by_key(|(j, _)| *j);
        self.objective = merged;
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|(j, c)| c * x[*j]).sum()
    }

    /// Largest bound or row violation, and largest distance of a binary from {0, 1}.
    pub fn max_violation(&self, x: &[f64]) -> (f64, f64) {
        let mut worst: f64 = 0.0;
        let mut frac: f64 = 0.0;
        for (v, &xv) in self.vars.iter().zip(x) {
            worst = worst.max(v.lower - xv).max(xv - v.upper);
            if v.kind == VarKind::Binary {
                frac = frac.max((xv - xv.round()).abs());
            }
        }
        for c in &self.cons {
            worst = worst.max(c.violation(x));
        }
        (worst, frac)
    }

    /// Copy with every binary relaxed to a continuous variable in [0, 1].
    pub fn relaxed(&self) -> Self {
        let mut m = self.clone();
        for v in &mut m.vars {
            v.kind = VarKind::Continuous;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_declarations() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 1.0).unwrap();
        assert!(m.add_continuous("x", 0.0, 1.0).is_err());
        assert!(m.add_continuous("1x", 0.0, 1.0).is_err());
        assert!(m.add_continuous("y", 2.0, 1.0).is_err());
        assert!(m.add_var("b", VarKind::Binary, 0.0, 2.0).is_err());
        assert!(m.add_constraint("c", vec![(7, 1.0)], Sense::Le, 1.0).is_err());
        assert!(m.add_constraint("c", vec![(x, 1.0), (x, -1.0)], Sense::Le, 1.0).is_err());
    }

    #[test]
    fn violation_measures() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 10.0).unwrap();
        let b = m.add_binary("b").unwrap();
        m.add_constraint("c_1", vec![(x, 1.0), (b, 1.0)], Sense::Le, 2.0).unwrap();
        let (v, f) = m.max_violation(&[2.5, 0.25]);
        assert!((v - 0.75).abs() < 1e-12);
        assert!((f - 0.25).abs() < 1e-12);
        assert_eq!(m.cons[0].family(), "c");
    }
}
