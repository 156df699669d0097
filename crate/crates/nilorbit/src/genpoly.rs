//! Generalized polynomials: integer polynomials closed under floors of real
//! linear combinations.
//!
//! Text form is an s-expression, e.g.
//! `(floor (term "pi" (mul x0 x0)) (shift "1/2"))`.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::scalar::{floor_rat, rat_to_f64, Scalar, Symbol};

/// Floors whose float argument is this close to an integer are refused.
pub const FLOOR_GUARD: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum GenPoly {
    Var(usize),
    Const(BigInt),
    Add(Box<GenPoly>, Box<GenPoly>),
    Mul(Box<GenPoly>, Box<GenPoly>),
    Floor { terms: Vec<(Scalar, GenPoly)>, shift: Option<Scalar> },
}

#[derive(Debug, Error, PartialEq)]
pub enum GenPolyError {
    #[error("floor argument {0} is within the guard of an integer")]
    NearBoundary(f64),
    #[error("floor argument {0} too large for float evaluation")]
    Precision(f64),
    #[error("variable x{0} missing from the input")]
    MissingVar(usize),
    #[error("parse error: {0}")]
    Parse(String),
}

pub fn var(i: usize) -> GenPoly {
    GenPoly::Var(i)
}

pub fn konst(c: i64) -> GenPoly {
    GenPoly::Const(BigInt::from(c))
}

pub fn add(a: GenPoly, b: GenPoly) -> GenPoly {
    GenPoly::Add(Box::new(a), Box::new(b))
}

pub fn mul(a: GenPoly, b: GenPoly) -> GenPoly {
    GenPoly::Mul(Box::new(a), Box::new(b))
}

pub fn floor(terms: Vec<(Scalar, GenPoly)>, shift: Option<Scalar>) -> GenPoly {
    GenPoly::Floor { terms, shift }
}

pub fn pow(a: GenPoly, e: usize) -> GenPoly {
    let mut acc = a.clone();
    for _ in 1..e {
        acc = mul(acc, a.clone());
    }
    acc
}

fn shift_in_unit_interval(k: &Scalar) -> bool {
    match k.constant_value() {
        Some(q) => q > num_rational::BigRational::zero() && q < num_rational::BigRational::from_integer(1.into()),
        None => {
            let v = k.eval_f64();
            v > 0.0 && v < 1.0
        }
    }
}

pub fn gp_degree_bound(p: &GenPoly) -> usize {
    match p {
        GenPoly::Var(_) => 1,
        GenPoly::Const(_) => 0,
        GenPoly::Add(a, b) => gp_degree_bound(a).max(gp_degree_bound(b)),
        GenPoly::Mul(a, b) => gp_degree_bound(a) + gp_degree_bound(b),
        GenPoly::Floor { terms, .. } => terms.iter().map(|(_, q)| gp_degree_bound(q)).max().unwrap_or(0),
    }
}

pub fn gp_is_admissible(p: &GenPoly) -> bool {
    match p {
        GenPoly::Var(_) => true,
        GenPoly::Const(c) => c.is_zero(),
        GenPoly::Add(a, b) => gp_is_admissible(a) && gp_is_admissible(b),
        GenPoly::Mul(a, b) => gp_is_admissible(a) || gp_is_admissible(b),
        GenPoly::Floor { terms, shift } => {
            shift.as_ref().map(shift_in_unit_interval).unwrap_or(false)
                && terms.iter().all(|(_, q)| gp_is_admissible(q))
        }
    }
}

pub fn gp_eval(p: &GenPoly, xs: &[i64]) -> Result<BigInt, GenPolyError> {
    match p {
        GenPoly::Var(i) => xs.get(*i).map(|&v| BigInt::from(v)).ok_or(GenPolyError::MissingVar(*i)),
        GenPoly::Const(c) => Ok(c.clone()),
        GenPoly::Add(a, b) => Ok(gp_eval(a, xs)? + gp_eval(b, xs)?),
        GenPoly::Mul(a, b) => Ok(gp_eval(a, xs)? * gp_eval(b, xs)?),
        GenPoly::Floor { terms, shift } => {
            let mut arg = shift.clone().unwrap_or_else(Scalar::zero);
            for (c, q) in terms {
                arg += &(c * &Scalar::from_bigint(gp_eval(q, xs)?));
            }
            if let Some(q) = arg.constant_value() {
                return Ok(floor_rat(&q));
            }
            let v = arg.eval_f64();
            if !v.is_finite() || v.abs() > 2f64.powi(40) {
                return Err(GenPolyError::Precision(v));
            }
            if (v - v.round()).abs() < FLOOR_GUARD {
                return Err(GenPolyError::NearBoundary(v));
            }
            Ok(BigInt::from(v.floor() as i64))
        }
    }
}

pub fn gp_eval_i64(p: &GenPoly, xs: &[i64]) -> Result<i64, GenPolyError> {
    let v = gp_eval(p, xs)?;
    v.to_i64().ok_or(GenPolyError::Precision(rat_to_f64(&num_rational::BigRational::from_integer(v))))
}

impl fmt::Display for GenPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenPoly::Var(i) => write!(f, "x{i}"),
            GenPoly::Const(c) => write!(f, "{c}"),
            GenPoly::Add(a, b) => write!(f, "(add {a} {b})"),
            GenPoly::Mul(a, b) => write!(f, "(mul {a} {b})"),
            GenPoly::Floor { terms, shift } => {
                write!(f, "(floor")?;
                for (c, q) in terms {
                    write!(f, " (term \"{c}\" {q})")?;
                }
                if let Some(k) = shift {
                    write!(f, " (shift \"{k}\")")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Atom(String),
    Str(String),
}

fn tokenize(s: &str) -> Result<Vec<Tok>, GenPolyError> {
    let mut out = Vec::new();
    let cs: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '(' {
            out.push(Tok::Open);
            i += 1;
        } else if c == ')' {
            out.push(Tok::Close);
            i += 1;
        } else if c == '"' {
            let start = i + 1;
            i += 1;
            while i < cs.len() && cs[i] != '"' {
                i += 1;
            }
            if i >= cs.len() {
                return Err(GenPolyError::Parse("unterminated string".into()));
            }
            out.push(Tok::Str(cs[start..i].iter().collect()));
            i += 1;
        } else {
            let start = i;
            while i < cs.len() && !cs[i].is_whitespace() && cs[i] != '(' && cs[i] != ')' {
                i += 1;
            }
            out.push(Tok::Atom(cs[start..i].iter().collect()));
        }
    }
    Ok(out)
}

/// Parse the text form; Scalars inside quotes are read against `table`.
pub fn parse(s: &str, table: &[Symbol]) -> Result<GenPoly, GenPolyError> {
    let toks = tokenize(s)?;
    let mut pos = 0;
    let p = parse_expr(&toks, &mut pos, table)?;
    if pos != toks.len() {
        return Err(GenPolyError::Parse("trailing input".into()));
    }
    Ok(p)
}

fn scalar(text: &str, table: &[Symbol]) -> Result<Scalar, GenPolyError> {
    Scalar::parse(text, table).map_err(|e| GenPolyError::Parse(e.to_string()))
}

fn parse_expr(t: &[Tok], pos: &mut usize, table: &[Symbol]) -> Result<GenPoly, GenPolyError> {
    let bad = |m: &str| GenPolyError::Parse(m.to_string());
    match t.get(*pos) {
        Some(Tok::Atom(a)) => {
            *pos += 1;
            if let Some(rest) = a.strip_prefix('x') {
                rest.parse().map(GenPoly::Var).map_err(|_| bad("bad variable"))
            } else {
                a.parse::<BigInt>().map(GenPoly::Const).map_err(|_| bad("bad atom"))
            }
        }
        Some(Tok::Open) => {
            *pos += 1;
            let head = match t.get(*pos) {
                Some(Tok::Atom(h)) => h.clone(),
                _ => return Err(bad("missing head")),
            };
            *pos += 1;
            let out = match head.as_str() {
                "add" | "mul" => {
                    let a = parse_expr(t, pos, table)?;
                    let b = parse_expr(t, pos, table)?;
                    if head == "add" { add(a, b) } else { mul(a, b) }
                }
                "floor" => {
                    let mut terms = Vec::new();
                    let mut shift = None;
                    while t.get(*pos) == Some(&Tok::Open) {
                        *pos += 1;
                        match (t.get(*pos), t.get(*pos + 1)) {
                            (Some(Tok::Atom(k)), Some(Tok::Str(c))) if k == "term" => {
                                let c = scalar(c, table)?;
                                *pos += 2;
                                terms.push((c, parse_expr(t, pos, table)?));
                            }
                            (Some(Tok::Atom(k)), Some(Tok::Str(c))) if k == "shift" => {
                                shift = Some(scalar(c, table)?);
                                *pos += 2;
                            }
                            _ => return Err(bad("expected term or shift")),
                        }
                        if t.get(*pos) != Some(&Tok::Close) {
                            return Err(bad("unclosed clause"));
                        }
                        *pos += 1;
                    }
                    floor(terms, shift)
                }
                _ => return Err(bad("unknown head")),
            };
            if t.get(*pos) != Some(&Tok::Close) {
                return Err(bad("missing close paren"));
            }
            *pos += 1;
            Ok(out)
        }
        _ => Err(bad("unexpected token")),
    }
}
