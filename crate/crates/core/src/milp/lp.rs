//! CPLEX-LP text format, restricted to the sections `Minimize`, `Subject To`,
//! `Bounds`, `Binary` and `End`.
//!
//! The writer lists every variable in the `Bounds` section in model order, and
//! the reader uses that order, so `import(export(m)) == m`. Variable tags
//! travel in comment lines of the form `\ tag <var> <symbol> <step>`.

use std::fmt::Write as _;
use std::path::Path;

use super::model::{MilpModel, Sense, VarKind};
use crate::error::{Error, Result};

const TERMS_PER_LINE: usize = 8;

/// Shortest decimal text that parses back to the same value.
pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if v != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn write_terms(out: &mut String, terms: &[(usize, f64)], m: &MilpModel) {
    for (i, (j, a)) in terms.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if a.is_sign_negative() { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", fmt_num(a.abs()), m.vars[*j].name);
    }
}

pub fn to_lp_string(m: &MilpModel) -> String {
    let mut out = String::new();
    out.push_str("\\ gridstl MILP model\n");
    for v in &m.vars {
        if let Some(t) = &v.tag {
            let _ = writeln!(out, "\\ tag {} {} {}", v.name, t.symbol, t.step);
        }
    }
    out.push_str("Minimize\n obj:");
    write_terms(&mut out, &m.objective, m);
    out.push_str("\nSubject To\n");
    for c in &m.cons {
        let _ = write!(out, " {}:", c.name);
        write_terms(&mut out, &c.coefs, m);
        let _ = writeln!(out, " {} {}", c.sense.symbol(), fmt_num(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in &m.vars {
        let (l, u) = (v.lower, v.upper);
        let line = if l == u {
            format!(" {} = {}", v.name, fmt_num(l))
        } else if l == f64::NEG_INFINITY && u == f64::INFINITY {
            format!(" {} free", v.name)
        } else if u == f64::INFINITY {
            format!(" {} >= {}", v.name, fmt_num(l))
        } else if l == f64::NEG_INFINITY {
            format!(" -inf <= {} <= {}", v.name, fmt_num(u))
        } else {
            format!(" {} <= {} <= {}", fmt_num(l), v.name, fmt_num(u))
        };
        out.push_str(&line);
        out.push('\n');
    }
    let bins: Vec<&str> = m
        .vars
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !bins.is_empty() {
        out.push_str("Binary\n");
        for chunk in bins.chunks(TERMS_PER_LINE) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

/// Writes the model atomically (temporary file, then rename).
pub fn export_lp(m: &MilpModel, path: &Path) -> Result<()> {
    crate::io::write_atomic(path, to_lp_string(m).as_bytes())
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Num(f64),
    Rel(Sense),
    Plus,
    Minus,
    Colon,
}

#[derive(Debug, Clone)]
struct Lexed {
    tok: Tok,
    line: usize,
    col: usize,
}

fn perr<T>(line: usize, column: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        line,
        column,
        message: message.into(),
    })
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || "_!\"#$%&()/,.;?@`'{}|~".contains(c)
}

fn lex_line(text: &str, line: usize, out: &mut Vec<Lexed>) -> Result<()> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        let next = chars.get(i + 1).copied();
        let mut push = |tok| out.push(Lexed { tok, line, col });
        if c.is_whitespace() {
            i += 1;
        } else if c == '\\' {
            break;
        } else if c == ':' {
            push(Tok::Colon);
            i += 1;
        } else if c == '+' {
            push(Tok::Plus);
            i += 1;
        } else if c == '-' {
            push(Tok::Minus);
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let (sense, len) = match (c, next) {
                ('<', Some('=')) | ('=', Some('<')) => (Sense::Le, 2),
                ('>', Some('=')) | ('=', Some('>')) => (Sense::Ge, 2),
                ('<', _) => (Sense::Le, 1),
                ('>', _) => (Sense::Ge, 1),
                _ => (Sense::Eq, 1),
            };
            push(Tok::Rel(sense));
            i += len;
        } else if c.is_ascii_digit() || (c == '.' && next.is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut k = i + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    i = k;
                }
            }
            let s: String = chars[start..i].iter().collect();
            match s.parse::<f64>() {
                Ok(v) => push(Tok::Num(v)),
                Err(_) => return perr(line, col, format!("malformed number `{s}`")),
            }
        } else if is_name_start(c) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || is_name_start(chars[i])) {
                i += 1;
            }
            push(Tok::Name(chars[start..i].iter().collect()));
        } else {
            return perr(line, col, format!("unexpected character `{c}`"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binary,
    End,
}

fn section_header(text: &str) -> Option<Section> {
    let t = text.trim().to_ascii_lowercase();
    let t: String = t.split_whitespace().collect::<Vec<_>>().join(" ");
    match t.as_str() {
        "minimize" | "minimise" | "minimum" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "binary" | "binaries" | "bin" => Some(Section::Binary),
        "end" => Some(Section::End),
        _ => None,
    }
}

struct Builder {
    names: Vec<String>,
    lookup: std::collections::HashMap<String, usize>,
    bounds_order: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    binary: Vec<bool>,
    tags: Vec<(String, String, usize)>,
}

impl Builder {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&j) = self.lookup.get(name) {
            return j;
        }
        let j = self.names.len();
        self.names.push(name.to_string());
        self.lookup.insert(name.to_string(), j);
        self.lower.push(0.0);
        self.upper.push(f64::INFINITY);
        self.binary.push(false);
        j
    }
}

/// Parses `[name:] (sign [coef] var)* [rel rhs]` from a token slice.
fn parse_linear(b: &mut Builder, toks: &[Lexed], pos: &mut usize, stop_at_rel: bool) -> Result<Vec<(usize, f64)>> {
    let mut terms = Vec::new();
    while *pos < toks.len() {
        let mut sign = 1.0;
        let mut saw_sign = false;
        while let Some(t) = toks.get(*pos) {
            match t.tok {
                Tok::Plus => {}
                Tok::Minus => sign = -sign,
                _ => break,
            }
            saw_sign = true;
            *pos += 1;
        }
        let Some(t) = toks.get(*pos) else {
            if saw_sign {
                let last = &toks[*pos - 1];
                return perr(last.line, last.col, "dangling sign");
            }
            break;
        };
        match &t.tok {
            Tok::Rel(_) if stop_at_rel && !saw_sign => break,
            Tok::Num(v) => {
                let v = *v;
                *pos += 1;
                match toks.get(*pos).map(|t| &t.tok) {
                    Some(Tok::Name(n)) => {
                        let j = b.var(n);
                        terms.push((j, sign * v));
                        *pos += 1;
                    }
                    _ => return perr(t.line, t.col, "constant terms are not supported on the left-hand side"),
                }
            }
            Tok::Name(n) => {
                let j = b.var(n);
                terms.push((j, sign));
                *pos += 1;
            }
            _ => return perr(t.line, t.col, "expected a term"),
        }
    }
    Ok(terms)
}

fn signed_number(toks: &[Lexed], pos: &mut usize) -> Option<f64> {
    let mut sign = 1.0;
    while let Some(t) = toks.get(*pos) {
        match t.tok {
            Tok::Plus => {}
            Tok::Minus => sign = -sign,
            _ => break,
        }
        *pos += 1;
    }
    match toks.get(*pos).map(|t| &t.tok) {
        Some(Tok::Num(v)) => {
            *pos += 1;
            Some(sign * v)
        }
        Some(Tok::Name(n)) if matches!(n.to_ascii_lowercase().as_str(), "inf" | "infinity") => {
            *pos += 1;
            Some(sign * f64::INFINITY)
        }
        _ => None,
    }
}

fn parse_bound_line(b: &mut Builder, toks: &[Lexed]) -> Result<()> {
    let first = &toks[0];
    let bad = || perr(first.line, first.col, "unrecognized bound");
    let mut pos = 0;
    // `x free`
    if let (Some(Tok::Name(n)), Some(Tok::Name(f))) = (toks.first().map(|t| &t.tok), toks.get(1).map(|t| &t.tok)) {
        if f.eq_ignore_ascii_case("free") && toks.len() == 2 {
            let j = b.var(n);
            b.lower[j] = f64::NEG_INFINITY;
            b.upper[j] = f64::INFINITY;
            b.bounds_order.push(j);
            return Ok(());
        }
    }
    if let Some(l) = signed_number(toks, &mut pos) {
        // `l <= x [<= u]`
        let Some(Tok::Rel(Sense::Le)) = toks.get(pos).map(|t| &t.tok) else { return bad() };
        pos += 1;
        let Some(Tok::Name(n)) = toks.get(pos).map(|t| t.tok.clone()) else { return bad() };
        pos += 1;
        let j = b.var(&n);
        b.lower[j] = l;
        if pos < toks.len() {
            let Some(Tok::Rel(Sense::Le)) = toks.get(pos).map(|t| &t.tok) else { return bad() };
            pos += 1;
            let Some(u) = signed_number(toks, &mut pos) else { return bad() };
            b.upper[j] = u;
        }
        if pos != toks.len() {
            return bad();
        }
        b.bounds_order.push(j);
        return Ok(());
    }
    let Some(Tok::Name(n)) = toks.first().map(|t| t.tok.clone()) else { return bad() };
    let j = b.var(&n);
    let Some(Tok::Rel(rel)) = toks.get(1).map(|t| t.tok.clone()) else { return bad() };
    pos = 2;
    let Some(v) = signed_number(toks, &mut pos) else { return bad() };
    if pos != toks.len() {
        return bad();
    }
    match rel {
        Sense::Le => b.upper[j] = v,
        Sense::Ge => b.lower[j] = v,
        Sense::Eq => {
            b.lower[j] = v;
            b.upper[j] = v;
        }
    }
    b.bounds_order.push(j);
    Ok(())
}

pub fn from_lp_str(text: &str) -> Result<MilpModel> {
    let mut b = Builder {
        names: Vec::new(),
        lookup: Default::default(),
        bounds_order: Vec::new(),
        lower: Vec::new(),
        upper: Vec::new(),
        binary: Vec::new(),
        tags: Vec::new(),
    };
    let mut section = Section::None;
    let mut obj_toks: Vec<Lexed> = Vec::new();
    let mut con_toks: Vec<Lexed> = Vec::new();
    let mut bin_toks: Vec<Lexed> = Vec::new();
    let mut bound_lines: Vec<Vec<Lexed>> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let trimmed = raw.trim_start();
        if let Some(rest) = trimmed.strip_prefix('\\') {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() == 4 && parts[0] == "tag" {
                if let Ok(step) = parts[3].parse() {
                    b.tags.push((parts[1].to_string(), parts[2].to_string(), step));
                }
            }
            continue;
        }
        if let Some(s) = section_header(raw) {
            if s == Section::Objective && section != Section::None {
                return perr(line, 1, "objective section must come first");
            }
            section = s;
            continue;
        }
        if trimmed.to_ascii_lowercase().starts_with("maximize") || trimmed.to_ascii_lowercase().starts_with("maximise") {
            return perr(line, 1, "only minimization models are supported");
        }
        if raw.trim().is_empty() {
            continue;
        }
        let mut toks = Vec::new();
        lex_line(raw, line, &mut toks)?;
        match section {
            Section::None => return perr(line, 1, "expected `Minimize`"),
            Section::Objective => obj_toks.extend(toks),
            Section::Constraints => con_toks.extend(toks),
            Section::Bounds => {
                if !toks.is_empty() {
                    bound_lines.push(toks);
                }
            }
            Section::Binary => bin_toks.extend(toks),
            Section::End => return perr(line, 1, "content after `End`"),
        }
    }
    if section != Section::End {
        return perr(text.lines().count().max(1), 1, "missing `End`");
    }

    // objective
    let mut pos = 0;
    if let (Some(Tok::Name(_)), Some(Tok::Colon)) = (obj_toks.first().map(|t| &t.tok), obj_toks.get(1).map(|t| &t.tok)) {
        pos = 2;
    }
    let objective = parse_linear(&mut b, &obj_toks, &mut pos, false)?;

    // constraints
    let mut rows = Vec::new();
    let mut pos = 0;
    while pos < con_toks.len() {
        let start = &con_toks[pos];
        let name = match (con_toks.get(pos).map(|t| &t.tok), con_toks.get(pos + 1).map(|t| &t.tok)) {
            (Some(Tok::Name(n)), Some(Tok::Colon)) => {
                let n = n.clone();
                pos += 2;
                n
            }
            _ => format!("r{}", rows.len()),
        };
        let terms = parse_linear(&mut b, &con_toks, &mut pos, true)?;
        let Some(Tok::Rel(sense)) = con_toks.get(pos).map(|t| t.tok.clone()) else {
            return perr(start.line, start.col, format!("constraint `{name}` lacks a relation"));
        };
        pos += 1;
        let Some(rhs) = signed_number(&con_toks, &mut pos) else {
            return perr(start.line, start.col, format!("constraint `{name}` lacks a numeric right-hand side"));
        };
        rows.push((name, terms, sense, rhs, start.line, start.col));
    }

    for line in &bound_lines {
        parse_bound_line(&mut b, line)?;
    }
    for t in &bin_toks {
        match &t.tok {
            Tok::Name(n) => {
                let j = b.var(n);
                b.binary[j] = true;
            }
            _ => return perr(t.line, t.col, "expected a variable name"),
        }
    }

    // model order: bounds section first, then first appearance
    let mut order: Vec<usize> = Vec::with_capacity(b.names.len());
    let mut placed = vec![false; b.names.len()];
    for j in b.bounds_order.iter().copied().chain(0..b.names.len()) {
        if !placed[j] {
            placed[j] = true;
            order.push(j);
        }
    }
    let mut new_index = vec![0; b.names.len()];
    let mut m = MilpModel::new();
    for &j in &order {
        let (mut lo, mut up) = (b.lower[j], b.upper[j]);
        let kind = if b.binary[j] {
            if up == f64::INFINITY {
                up = 1.0;
            }
            lo = lo.max(0.0);
            VarKind::Binary
        } else {
            VarKind::Continuous
        };
        new_index[j] = m.add_var(b.names[j].clone(), kind, lo, up)?;
    }
    for (name, sym, step) in b.tags {
        if let Some(j) = m.var_index(&name) {
            m.set_tag(j, sym, step);
        }
    }
    m.set_objective(objective.into_iter().map(|(j, c)| (new_index[j], c)).collect());
    for (name, terms, sense, rhs, line, col) in rows {
        let terms = terms.into_iter().map(|(j, a)| (new_index[j], a)).collect();
        m.add_constraint(name, terms, sense, rhs).or_else(|e| perr(line, col, e.to_string()))?;
    }
    Ok(m)
}

pub fn import_lp(path: &Path) -> Result<MilpModel> {
    from_lp_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> MilpModel {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", f64::NEG_INFINITY, 4.0).unwrap();
        let b = m.add_binary("b").unwrap();
        m.set_tag(b, "b1", 3);
        m.add_constraint("c_1", vec![(x, 1.5), (b, -2.0)], Sense::Ge, -1e-6).unwrap();
        m.set_objective(vec![(x, 1.0), (b, 0.1)]);
        m
    }

    #[test]
    fn empty_model_skeleton() {
        assert_eq!(
            to_lp_string(&MilpModel::new()),
            "\\ gridstl MILP model\nMinimize\n obj:\nSubject To\nBounds\nEnd\n"
        );
        assert_eq!(from_lp_str(&to_lp_string(&MilpModel::new())).unwrap(), MilpModel::new());
    }

    #[test]
    fn toy_golden() {
        let expect = "\\ gridstl MILP model\n\\ tag b b1 3\nMinimize\n obj: + 1 x + 0.1 b\nSubject To\n c_1: + 1.5 x - 2 b >= -1e-6\nBounds\n -inf <= x <= 4\n 0 <= b <= 1\nBinary\n b\nEnd\n";
        assert_eq!(to_lp_string(&toy()), expect);
    }

    #[test]
    fn round_trip() {
        let m = toy();
        let back = from_lp_str(&to_lp_string(&m)).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.vars[1].tag, m.vars[1].tag);
    }

    #[test]
    fn accepts_plain_cplex_forms() {
        let text = "Minimize\n  cost: 2x + 3 y\nSubject To\n  a: x + y >= 1\n  -x + y <= 4\nBounds\n  x <= 10\n  y free\nBinaries\n  z\nEnd\n";
        let m = from_lp_str(text).unwrap();
        assert_eq!(m.n_vars(), 3);
        assert_eq!(m.cons[1].name, "r1");
        assert_eq!(m.vars[m.var_index("y").unwrap()].lower, f64::NEG_INFINITY);
        assert_eq!(m.vars[m.var_index("z").unwrap()].kind, VarKind::Binary);
    }

    #[test]
    fn errors_carry_position() {
        match from_lp_str("Minimize\n obj: x\nSubject To\n c: x <= \nEnd\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(from_lp_str("Minimize\n obj: x\n").is_err());
    }
}
