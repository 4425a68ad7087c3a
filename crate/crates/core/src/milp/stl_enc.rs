//! Big-M encoding of STL formulas over sampled decision variables.
//!
//! The formula is put in negation normal form, so satisfaction is monotone in
//! every subformula and a one-sided encoding suffices: an indicator equal to 1
//! forces its subformula to hold, an indicator equal to 0 forces nothing.
//! Predicate indicators are binary; conjunction and disjunction indicators are
//! continuous in [0, 1] and inherit integrality from the predicates.
//!
//! For a predicate `lhs <= c` at step k with `lhs` in `[L, U]`:
//!
//! ```text
//! lhs + (U - c)·p <= U
//! ```
//!
//! and symmetrically for lower bounds. Strict relations move `c` by
//! [`DELTA_STRICT`]. When the bounds already decide the predicate no variable
//! is created, and constants propagate through the boolean structure.
//!
//! Indicator counts per reachable (subformula, step) pair:
//! - predicate: one binary and one row unless decided by the bounds;
//! - `and`/`or` of n undecided children: one variable and n rows (`and`) or
//!   one row (`or`);
//! - bounded `G`/`F` over a window of w samples: as `and`/`or` of w children;
//! - bounded `F` directly over an unbounded `G` (and `G` over `F`): no
//!   variable, since the suffix value is monotone in its start sample and the
//!   window reduces to its last sample;
//! - unbounded `G`/`F`: one chain variable per sample from the first window
//!   start to the end of the trace, with two rows (`G`) or one row (`F`) per
//!   link;
//! - `U`/`R`: one conjunction (disjunction) per window sample plus the outer
//!   disjunction (conjunction).

use std::collections::{BTreeMap, HashMap};

use super::model::{MilpModel, Sense};
use crate::error::{Error, Result};
use crate::stl::{Interval, Predicate, StlFormula};

/// Slack that turns `<` into `<=` (and `>` into `>=`).
pub const DELTA_STRICT: f64 = 1e-6;

/// Decision variables and value bounds of one signal, one entry per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub columns: Vec<usize>,
    pub bounds: Vec<(f64, f64)>,
}

/// Truth value of a subformula at one step: decided, or carried by a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lit {
    Const(bool),
    Var(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StlEncoding {
    /// Root value at step 0.
    pub root: Lit,
    pub predicate_binaries: usize,
    pub continuous_indicators: usize,
    pub rows: usize,
    /// Predicates decided by the bounds alone.
    pub decided_predicates: usize,
}

enum Node {
    Pred(Predicate),
    And(Vec<usize>),
    Or(Vec<usize>),
    Always(Interval, usize),
    Eventually(Interval, usize),
    Until(Interval, usize, usize),
    Release(Interval, usize, usize),
}

fn flatten(f: &StlFormula, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    nodes.push(Node::And(vec![]));
    let node = match f {
        StlFormula::Pred(p) => Node::Pred(p.clone()),
        StlFormula::And(fs) => Node::And(fs.iter().map(|g| flatten(g, nodes)).collect()),
        StlFormula::Or(fs) => Node::Or(fs.iter().map(|g| flatten(g, nodes)).collect()),
        StlFormula::Always(i, g) => Node::Always(*i, flatten(g, nodes)),
        StlFormula::Eventually(i, g) => Node::Eventually(*i, flatten(g, nodes)),
        StlFormula::Until(i, l, r) => {
            let l = flatten(l, nodes);
            Node::Until(*i, l, flatten(r, nodes))
        }
        StlFormula::Release(i, l, r) => {
            let l = flatten(l, nodes);
            Node::Release(*i, l, flatten(r, nodes))
        }
        StlFormula::Not(_) | StlFormula::Implies(..) => unreachable!("formula is in negation normal form"),
    };
    nodes[id] = node;
    id
}

struct Encoder<'a> {
    m: &'a mut MilpModel,
    chans: &'a BTreeMap<String, Channel>,
    nodes: Vec<Node>,
    n: usize,
    t_s: f64,
    cache: HashMap<(usize, usize), Lit>,
    /// Suffix chains of unbounded `G` (true) and `F` (false), indexed by step.
    chains: HashMap<(usize, bool), Vec<Option<Lit>>>,
    out: StlEncoding,
}

impl Encoder<'_> {
    fn lit(&mut self, id: usize, k: usize) -> Result<Lit> {
        if let Some(l) = self.cache.get(&(id, k)) {
            return Ok(*l);
        }
        let l = match &self.nodes[id] {
            Node::Pred(p) => {
                let p = p.clone();
                self.predicate(id, &p, k)?
            }
            Node::And(kids) | Node::Or(kids) => {
                let conj = matches!(self.nodes[id], Node::And(_));
                let kids = kids.clone();
                let lits = kids.iter().map(|&c| self.lit(c, k)).collect::<Result<Vec<_>>>()?;
                self.combine(conj, lits, &format!("stl_n{id}_{k}"), (&format!("stl_n{id}"), k))?
            }
            &Node::Always(i, c) | &Node::Eventually(i, c) => {
                let conj = matches!(self.nodes[id], Node::Always(..));
                match i.window(k, self.n, self.t_s) {
                    None => Lit::Const(conj),
                    Some((lo, _)) if i.b.is_infinite() => self.chain(c, conj, lo)?,
                    // F over a G-suffix (G over an F-suffix) is monotone in
                    // the start sample, so only the window end matters
                    Some((_, hi)) if self.is_suffix(c, !conj) => self.lit(c, hi)?,
                    Some((lo, hi)) => {
                        let lits = (lo..=hi).map(|j| self.lit(c, j)).collect::<Result<Vec<_>>>()?;
                        self.combine(conj, lits, &format!("stl_n{id}_{k}"), (&format!("stl_n{id}"), k))?
                    }
                }
            }
            &Node::Until(i, l, r) | &Node::Release(i, l, r) => {
                let until = matches!(self.nodes[id], Node::Until(..));
                match i.window(k, self.n, self.t_s) {
                    None => Lit::Const(!until),
                    Some((lo, hi)) => {
                        let mut outer = Vec::with_capacity(hi - lo + 1);
                        for j in lo..=hi {
                            let mut inner = vec![self.lit(r, j)?];
                            for h in k..j {
                                inner.push(self.lit(l, h)?);
                            }
                            let sym = format!("stl_a{id}_{k}");
                            outer.push(self.combine(until, inner, &format!("{sym}_{j}"), (&sym, j))?);
                        }
                        self.combine(!until, outer, &format!("stl_n{id}_{k}"), (&format!("stl_n{id}"), k))?
                    }
                }
            }
        };
        self.cache.insert((id, k), l);
        Ok(l)
    }

    /// Whether node `id` is an unbounded `G` (`conj`) or `F` (`!conj`).
    fn is_suffix(&self, id: usize, conj: bool) -> bool {
        match &self.nodes[id] {
            Node::Always(i, _) => conj && i.b.is_infinite(),
            Node::Eventually(i, _) => !conj && i.b.is_infinite(),
            _ => false,
        }
    }

    /// Conjunction (`conj`) or disjunction of `lits` with constant folding.
    fn combine(&mut self, conj: bool, lits: Vec<Lit>, name: &str, tag: (&str, usize)) -> Result<Lit> {
        let mut vars = Vec::with_capacity(lits.len());
        for l in lits {
            match l {
                // false in a conjunction, true in a disjunction
                Lit::Const(b) if b != conj => return Ok(Lit::Const(b)),
                Lit::Const(_) => {}
                Lit::Var(v) => {
                    if !vars.contains(&v) {
                        vars.push(v)
                    }
                }
            }
        }
        match vars.len() {
            0 => return Ok(Lit::Const(conj)),
            1 => return Ok(Lit::Var(vars[0])),
            _ => {}
        }
        let s = self.m.add_continuous(name, 0.0, 1.0)?;
        self.m.set_tag(s, tag.0, tag.1);
        self.out.continuous_indicators += 1;
        if conj {
            for (i, v) in vars.iter().enumerate() {
                self.m.add_constraint(format!("{name}_{i}"), vec![(s, 1.0), (*v, -1.0)], Sense::Le, 0.0)?;
                self.out.rows += 1;
            }
        } else {
            let mut coefs = vec![(s, 1.0)];
            coefs.extend(vars.iter().map(|v| (*v, -1.0)));
            self.m.add_constraint(format!("{name}_0"), coefs, Sense::Le, 0.0)?;
            self.out.rows += 1;
        }
        Ok(Lit::Var(s))
    }

    /// Value of `G[j, end] child` (conj) or `F[j, end] child` at start `j`.
    fn chain(&mut self, child: usize, conj: bool, j: usize) -> Result<Lit> {
        let key = (child, conj);
        let mut chain = self.chains.remove(&key).unwrap_or_else(|| vec![None; self.n]);
        let res = (|| {
            let last = self.n - 1;
            // the chain is filled from the last sample backwards
            let mut start = (j..=last).find(|&h| chain[h].is_some()).unwrap_or(last + 1);
            while start > j {
                let h = start - 1;
                let here = self.lit(child, h)?;
                let lits = match chain.get(h + 1).copied().flatten() {
                    Some(next) => vec![here, next],
                    None => vec![here],
                };
                let sym = format!("stl_{}{child}", if conj { 'g' } else { 'f' });
                chain[h] = Some(self.combine(conj, lits, &format!("{sym}_{h}"), (&sym, h))?);
                start = h;
            }
            Ok(chain[j].expect("chain filled"))
        })();
        self.chains.insert(key, chain);
        res
    }

    fn predicate(&mut self, id: usize, p: &Predicate, k: usize) -> Result<Lit> {
        let (mut lo, mut hi) = (0.0, 0.0);
        let mut coefs = Vec::with_capacity(p.terms.len());
        for (name, a) in &p.terms {
            let ch = self
                .chans
                .get(name)
                .ok_or_else(|| Error::Encoding(format!("formula references unknown channel `{name}`")))?;
            let (&col, &(l, u)) = ch
                .columns
                .get(k)
                .zip(ch.bounds.get(k))
                .ok_or_else(|| Error::Encoding(format!("channel `{name}` has no sample {k}")))?;
            if !(l.is_finite() && u.is_finite()) {
                return Err(Error::Encoding(format!("no finite big-M bound for `{name}` at step {k}")));
            }
            if *a >= 0.0 {
                lo += a * l;
                hi += a * u;
            } else {
                lo += a * u;
                hi += a * l;
            }
            coefs.push((col, *a));
        }
        let strict = if p.rel.is_strict() { DELTA_STRICT } else { 0.0 };
        let name = format!("stl_p{id}_{k}");
        let lit = if p.rel.is_upper() {
            let c = p.threshold - strict;
            if hi <= c {
                Lit::Const(true)
            } else if lo > c {
                Lit::Const(false)
            } else {
                let b = self.m.add_binary(&name)?;
                coefs.push((b, hi - c));
                self.m.add_constraint(&name, coefs, Sense::Le, hi)?;
                Lit::Var(b)
            }
        } else {
            let c = p.threshold + strict;
            if lo >= c {
                Lit::Const(true)
            } else if hi < c {
                Lit::Const(false)
            } else {
                let b = self.m.add_binary(&name)?;
                coefs.push((b, lo - c));
                self.m.add_constraint(&name, coefs, Sense::Ge, lo)?;
                Lit::Var(b)
            }
        };
        match lit {
            Lit::Var(b) => {
                self.m.set_tag(b, format!("stl_p{id}"), k);
                self.out.predicate_binaries += 1;
                self.out.rows += 1;
            }
            Lit::Const(_) => self.out.decided_predicates += 1,
        }
        Ok(lit)
    }
}

/// Adds the encoding of `phi` at step 0 to `m` and forces it to hold.
///
/// `chans` maps every signal named in the formula to its per-sample columns
/// and value bounds; all channels must cover `n_samples` samples. A formula
/// that the bounds already falsify yields the infeasible row `stl_root`.
pub fn encode_stl(
    m: &mut MilpModel,
    phi: &StlFormula,
    chans: &BTreeMap<String, Channel>,
    n_samples: usize,
    t_s: f64,
) -> Result<StlEncoding> {
    if n_samples == 0 || !(t_s > 0.0) {
        return Err(Error::Encoding("STL encoding needs at least one sample and t_s > 0".into()));
    }
    for v in phi.variables() {
        let ch = chans
            .get(&v)
            .ok_or_else(|| Error::Encoding(format!("formula references unknown channel `{v}`")))?;
        if ch.columns.len() < n_samples || ch.bounds.len() < n_samples {
            return Err(Error::Encoding(format!("channel `{v}` covers fewer than {n_samples} samples")));
        }
    }
    let mut nodes = Vec::new();
    flatten(&phi.desugar(), &mut nodes);
    let mut enc = Encoder {
        m,
        chans,
        nodes,
        n: n_samples,
        t_s,
        cache: HashMap::new(),
        chains: HashMap::new(),
        out: StlEncoding {
            root: Lit::Const(true),
            predicate_binaries: 0,
            continuous_indicators: 0,
            rows: 0,
            decided_predicates: 0,
        },
    };
    let root = enc.lit(0, 0)?;
    let mut out = enc.out;
    out.root = root;
    match root {
        Lit::Var(v) => m.set_bounds(v, 1.0, 1.0),
        Lit::Const(true) => {}
        Lit::Const(false) => {
            let v = m.add_continuous("stl_root", 1.0, 1.0)?;
            m.add_constraint("stl_root", vec![(v, 1.0)], Sense::Le, 0.0)?;
            out.rows += 1;
        }
    }
    Ok(out)
}
