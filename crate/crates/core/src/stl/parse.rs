//! Text syntax for formulas.
//!
//! ```text
//! formula   := disj ( "->" formula )?
//! disj      := conj ( ("|" | "||" | "or") conj )*
//! conj      := binary ( ("&" | "&&" | "and") binary )*
//! binary    := unary ( ("U" | "R") interval? unary )?
//! unary     := ("!" | "not") unary
//!            | ("G" | "always") interval? unary
//!            | ("F" | "eventually") interval? unary
//!            | "(" formula ")" | "true" | "false" | predicate
//! interval  := "[" number "," (number | "inf") "]"
//! predicate := side ("<=" | "<" | ">=" | ">") side
//! side      := "abs" "(" linear ")" | linear
//! linear    := ["-"] term (("+" | "-") term)*
//! term      := number ["*" ident] | ident ["*" number]
//! ```
//!
//! Temporal operators without an interval cover `[0, inf]`. `abs` expands into
//! a conjunction (`<=`, `<`) or disjunction (`>=`, `>`) of two predicates.

use super::{Interval, Predicate, Relation, StlFormula};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Rel(Relation),
    Arrow,
    And,
    Or,
    Not,
    Plus,
    Minus,
    Star,
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err<T>(line: usize, column: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse {
        line,
        column,
        message: message.into(),
    })
}

fn lex(src: &str) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let mut push = |tok: Tok, len: usize, i: &mut usize, col: &mut usize| {
            out.push(Spanned { tok, line: l0, col: c0 });
            *i += len;
            *col += len;
        };
        let next = chars.get(i + 1).copied();
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            '[' => push(Tok::LBracket, 1, &mut i, &mut col),
            ']' => push(Tok::RBracket, 1, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            '+' => push(Tok::Plus, 1, &mut i, &mut col),
            '*' => push(Tok::Star, 1, &mut i, &mut col),
            '-' if next == Some('>') => push(Tok::Arrow, 2, &mut i, &mut col),
            '=' if next == Some('>') => push(Tok::Arrow, 2, &mut i, &mut col),
            '-' => push(Tok::Minus, 1, &mut i, &mut col),
            '<' if next == Some('=') => push(Tok::Rel(Relation::Le), 2, &mut i, &mut col),
            '<' => push(Tok::Rel(Relation::Lt), 1, &mut i, &mut col),
            '>' if next == Some('=') => push(Tok::Rel(Relation::Ge), 2, &mut i, &mut col),
            '>' => push(Tok::Rel(Relation::Gt), 1, &mut i, &mut col),
            '&' if next == Some('&') => push(Tok::And, 2, &mut i, &mut col),
            '&' => push(Tok::And, 1, &mut i, &mut col),
            '|' if next == Some('|') => push(Tok::Or, 2, &mut i, &mut col),
            '|' => push(Tok::Or, 1, &mut i, &mut col),
            '!' => push(Tok::Not, 1, &mut i, &mut col),
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    j += 1;
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text: String = chars[start..j].iter().collect();
                let v: f64 = match text.parse() {
                    Ok(v) => v,
                    Err(_) => return err(line, col, format!("malformed number `{text}`")),
                };
                push(Tok::Num(v), j - start, &mut i, &mut col);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let text: String = chars[start..j].iter().collect();
                let tok = match text.as_str() {
                    "and" => Tok::And,
                    "or" => Tok::Or,
                    "not" => Tok::Not,
                    _ => Tok::Ident(text),
                };
                push(tok, j - start, &mut i, &mut col);
            }
            other => return err(line, col, format!("unexpected character `{other}`")),
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

/// Linear side of a predicate: terms plus a constant.
struct Linear {
    terms: Vec<(String, f64)>,
    constant: f64,
    abs: bool,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let s = &self.toks[self.pos];
        (s.line, s.col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        let (l, c) = self.here();
        err(l, c, message)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.fail(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn is_keyword(&self, kw: &[&str]) -> bool {
        matches!(self.peek(), Tok::Ident(s) if kw.contains(&s.as_str()))
    }

    fn formula(&mut self) -> Result<StlFormula> {
        let lhs = self.disj()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.formula()?;
            return Ok(StlFormula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disj(&mut self) -> Result<StlFormula> {
        let mut kids = vec![self.conj()?];
        while *self.peek() == Tok::Or {
            self.bump();
            kids.push(self.conj()?);
        }
        Ok(if kids.len() == 1 { kids.pop().unwrap() } else { StlFormula::Or(kids) })
    }

    fn conj(&mut self) -> Result<StlFormula> {
        let mut kids = vec![self.binary()?];
        while *self.peek() == Tok::And {
            self.bump();
            kids.push(self.binary()?);
        }
        Ok(if kids.len() == 1 { kids.pop().unwrap() } else { StlFormula::And(kids) })
    }

    fn binary(&mut self) -> Result<StlFormula> {
        let lhs = self.unary()?;
        if self.is_keyword(&["U", "until"]) {
            self.bump();
            let i = self.opt_interval()?;
            let rhs = self.unary()?;
            return Ok(StlFormula::until(i, lhs, rhs));
        }
        if self.is_keyword(&["R", "release"]) {
            self.bump();
            let i = self.opt_interval()?;
            let rhs = self.unary()?;
            return Ok(StlFormula::Release(i, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn opt_interval(&mut self) -> Result<Interval> {
        if *self.peek() != Tok::LBracket {
            return Ok(Interval::unbounded());
        }
        let (l, c) = self.here();
        self.bump();
        let a = self.number("interval start")?;
        self.expect(Tok::Comma, "`,`")?;
        let b = if self.is_keyword(&["inf"]) {
            self.bump();
            f64::INFINITY
        } else {
            self.number("interval end")?
        };
        self.expect(Tok::RBracket, "`]`")?;
        Interval::new(a, b).or_else(|_| err(l, c, format!("invalid interval [{a}, {b}]: need 0 <= a <= b")))
    }

    fn number(&mut self, what: &str) -> Result<f64> {
        let neg = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            t => self.fail(format!("expected {what}, found {}", describe(&t))),
        }
    }

    fn unary(&mut self) -> Result<StlFormula> {
        match self.peek().clone() {
            Tok::Not => {
                self.bump();
                Ok(StlFormula::not(self.unary()?))
            }
            Tok::Ident(s) if s == "G" || s == "always" => {
                self.bump();
                let i = self.opt_interval()?;
                Ok(StlFormula::always(i, self.unary()?))
            }
            Tok::Ident(s) if s == "F" || s == "eventually" => {
                self.bump();
                let i = self.opt_interval()?;
                Ok(StlFormula::eventually(i, self.unary()?))
            }
            Tok::Ident(s) if s == "true" => {
                self.bump();
                Ok(StlFormula::And(vec![]))
            }
            Tok::Ident(s) if s == "false" => {
                self.bump();
                Ok(StlFormula::Or(vec![]))
            }
            Tok::LParen => {
                self.bump();
                let f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(_) | Tok::Num(_) | Tok::Minus | Tok::Plus => self.predicate(),
            t => self.fail(format!("expected a formula, found {}", describe(&t))),
        }
    }

    fn predicate(&mut self) -> Result<StlFormula> {
        let (l, c) = self.here();
        let lhs = self.side()?;
        let rel = match self.peek() {
            Tok::Rel(r) => *r,
            t => return self.fail(format!("expected a comparison, found {}", describe(t))),
        };
        self.bump();
        let rhs = self.side()?;
        build_predicate(lhs, rel, rhs).or_else(|e| match e {
            Error::Parse { message, .. } => err(l, c, message),
            other => Err(other),
        })
    }

    fn side(&mut self) -> Result<Linear> {
        if self.is_keyword(&["abs"]) {
            self.bump();
            self.expect(Tok::LParen, "`(` after abs")?;
            let mut lin = self.linear()?;
            self.expect(Tok::RParen, "`)`")?;
            lin.abs = true;
            return Ok(lin);
        }
        self.linear()
    }

    fn linear(&mut self) -> Result<Linear> {
        let mut lin = Linear {
            terms: Vec::new(),
            constant: 0.0,
            abs: false,
        };
        let mut sign = 1.0;
        match self.peek() {
            Tok::Minus => {
                self.bump();
                sign = -1.0;
            }
            Tok::Plus => {
                self.bump();
            }
            _ => {}
        }
        loop {
            self.term(sign, &mut lin)?;
            match self.peek() {
                Tok::Plus => sign = 1.0,
                Tok::Minus => sign = -1.0,
                _ => break,
            }
            self.bump();
        }
        Ok(lin)
    }

    fn term(&mut self, sign: f64, lin: &mut Linear) -> Result<()> {
        let add = |lin: &mut Linear, name: String, c: f64| {
            if let Some(t) = lin.terms.iter_mut().find(|(n, _)| *n == name) {
                t.1 += c;
            } else {
                lin.terms.push((name, c));
            }
        };
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                if *self.peek() == Tok::Star {
                    self.bump();
                    match self.peek().clone() {
                        Tok::Ident(name) if !is_reserved(&name) => {
                            self.bump();
                            add(lin, name, sign * v);
                        }
                        t => return self.fail(format!("expected a variable after `*`, found {}", describe(&t))),
                    }
                } else {
                    lin.constant += sign * v;
                }
                Ok(())
            }
            Tok::Ident(name) if !is_reserved(&name) => {
                self.bump();
                let mut c = sign;
                if *self.peek() == Tok::Star {
                    self.bump();
                    c *= self.number("a coefficient after `*`")?;
                }
                add(lin, name, c);
                Ok(())
            }
            t => self.fail(format!("expected a variable or number, found {}", describe(&t))),
        }
    }
}

fn is_reserved(s: &str) -> bool {
    matches!(
        s,
        "G" | "F" | "U" | "R" | "always" | "eventually" | "until" | "release" | "abs" | "inf" | "true" | "false"
    )
}

fn flip(rel: Relation) -> Relation {
    match rel {
        Relation::Le => Relation::Ge,
        Relation::Lt => Relation::Gt,
        Relation::Ge => Relation::Le,
        Relation::Gt => Relation::Lt,
    }
}

fn build_predicate(lhs: Linear, rel: Relation, rhs: Linear) -> Result<StlFormula> {
    let parse_err = |m: &str| Error::Parse {
        line: 0,
        column: 0,
        message: m.into(),
    };
    match (lhs.abs, rhs.abs) {
        (true, true) => Err(parse_err("abs() may appear on one side only")),
        (true, false) | (false, true) => {
            let (inner, other, rel) = if lhs.abs { (lhs, rhs, rel) } else { (rhs, lhs, flip(rel)) };
            if !other.terms.is_empty() {
                return Err(parse_err("the side opposite abs() must be a constant"));
            }
            if inner.terms.is_empty() {
                return Err(parse_err("abs() needs at least one variable"));
            }
            let c = other.constant;
            let k = inner.constant;
            let pos = Predicate::new(inner.terms.clone(), rel, c - k);
            let neg_terms = inner.terms.iter().map(|(n, v)| (n.clone(), -v)).collect();
            let neg = Predicate::new(neg_terms, rel, c + k);
            let kids = vec![StlFormula::Pred(pos), StlFormula::Pred(neg)];
            Ok(if rel.is_upper() { StlFormula::And(kids) } else { StlFormula::Or(kids) })
        }
        (false, false) => {
            let mut terms = lhs.terms;
            for (n, v) in rhs.terms {
                if let Some(t) = terms.iter_mut().find(|(m, _)| *m == n) {
                    t.1 -= v;
                } else {
                    terms.push((n, -v));
                }
            }
            if terms.is_empty() {
                return Err(parse_err("predicate has no variables"));
            }
            Ok(StlFormula::Pred(Predicate::new(terms, rel, rhs.constant - lhs.constant)))
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Num(v) => format!("number {v}"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Rel(r) => format!("`{}`", r.symbol()),
        Tok::Arrow => "`->`".into(),
        Tok::And => "`&`".into(),
        Tok::Or => "`|`".into(),
        Tok::Not => "`!`".into(),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses a formula; errors carry 1-based line and column.
pub fn parse(src: &str) -> Result<StlFormula> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let f = p.formula()?;
    if *p.peek() != Tok::Eof {
        return p.fail(format!("unexpected {} after formula", describe(p.peek())));
    }
    Ok(f)
}
