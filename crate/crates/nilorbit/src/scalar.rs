//! Sparse polynomials with rational coefficients in named transcendentals.
//!
//! Every symbol carries a float witness used for numeric evaluation. Symbols
//! are treated as algebraically independent, so exact integrality of a
//! `Scalar` is a syntactic property of its terms.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Clone, Debug)]
pub struct Symbol {
    name: Arc<str>,
    witness: f64,
}

impl Symbol {
    pub fn new(name: &str, witness: f64) -> Self {
        Symbol { name: Arc::from(name), witness }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn witness(&self) -> f64 {
        self.witness
    }
}

impl PartialEq for Symbol {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Symbol {}

impl PartialOrd for Symbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Symbol {
    fn cmp(&self, other: &Self) -> Ordering {
        self.name
            .cmp(&other.name)
            .then_with(|| self.witness.total_cmp(&other.witness))
    }
}

impl Hash for Symbol {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.name.hash(state);
        self.witness.to_bits().hash(state);
    }
}

/// Sorted list of (symbol, exponent) with positive exponents.
pub type Monomial = Vec<(Symbol, u32)>;

fn mono_mul(a: &Monomial, b: &Monomial) -> Monomial {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            Ordering::Less => {
                out.push(a[i].clone());
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j].clone());
                j += 1;
            }
            Ordering::Equal => {
                out.push((a[i].0.clone(), a[i].1 + b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Scalar {
    terms: BTreeMap<Monomial, BigRational>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScalarError {
    #[error("symbol `{0}` declared with two different witnesses")]
    SymbolConflict(String),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("cannot parse scalar `{0}`: {1}")]
    Parse(String, String),
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::default()
    }

    pub fn one() -> Self {
        Scalar::from_int(1)
    }

    pub fn from_int(v: i64) -> Self {
        Scalar::from_rational(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn from_bigint(v: BigInt) -> Self {
        Scalar::from_rational(BigRational::from_integer(v))
    }

    pub fn from_rational(q: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !q.is_zero() {
            terms.insert(Vec::new(), q);
        }
        Scalar { terms }
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Scalar::from_rational(rat(n, d))
    }

    pub fn var(sym: &Symbol) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![(sym.clone(), 1)], BigRational::one());
        Scalar { terms }
    }

    pub fn symbol(name: &str, witness: f64) -> Self {
        Scalar::var(&Symbol::new(name, witness))
    }

    pub fn from_terms(it: impl IntoIterator<Item = (Monomial, BigRational)>) -> Self {
        let mut s = Scalar::zero();
        for (m, c) in it {
            s.add_term(m, c);
        }
        s
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(v) => {
                *v += c;
                if v.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.constant_value().map(|q| q.is_one()).unwrap_or(false)
    }

    /// Some(q) iff the scalar is the rational constant q.
    pub fn constant_value(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                if m.is_empty() {
                    Some(c.clone())
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    pub fn is_rational(&self) -> bool {
        self.constant_value().is_some()
    }

    pub fn is_integer(&self) -> bool {
        self.constant_value().map(|q| q.is_integer()).unwrap_or(false)
    }

    /// Coefficient of the constant monomial.
    pub fn constant_part(&self) -> BigRational {
        self.terms.get(&Vec::new()).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn symbols(&self) -> Vec<Symbol> {
        let mut v: Vec<Symbol> = self
            .terms
            .keys()
            .flat_map(|m| m.iter().map(|(s, _)| s.clone()))
            .collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn mentions(&self, name: &str) -> bool {
        self.terms
            .keys()
            .any(|m| m.iter().any(|(s, _)| s.name() == name))
    }

    pub fn degree_in(&self, name: &str) -> u32 {
        self.terms
            .keys()
            .map(|m| {
                m.iter()
                    .find(|(s, _)| s.name() == name)
                    .map(|(_, e)| *e)
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }

    /// Total degree.
    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|m| m.iter().map(|(_, e)| *e).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn scale(&self, q: &BigRational) -> Scalar {
        if q.is_zero() {
            return Scalar::zero();
        }
        Scalar {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * q)).collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Scalar {
        let mut acc = Scalar::one();
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Write the scalar as Σ_k c_k x^k in the symbol `name`.
    pub fn coefficients_in(&self, name: &str) -> Vec<Scalar> {
        let deg = self.degree_in(name) as usize;
        let mut out = vec![Scalar::zero(); deg + 1];
        for (m, c) in &self.terms {
            let mut k = 0usize;
            let mut rest = Vec::with_capacity(m.len());
            for (s, e) in m {
                if s.name() == name {
                    k = *e as usize;
                } else {
                    rest.push((s.clone(), *e));
                }
            }
            out[k].add_term(rest, c.clone());
        }
        out
    }

    /// Replace every occurrence of the symbol `name` by `by`.
    pub fn substitute(&self, name: &str, by: &Scalar) -> Scalar {
        if !self.mentions(name) {
            return self.clone();
        }
        let coeffs = self.coefficients_in(name);
        // Horner
        let mut acc = Scalar::zero();
        for c in coeffs.iter().rev() {
            acc = &(&acc * by) + c;
        }
        acc
    }

    pub fn substitute_int(&self, name: &str, v: i64) -> Scalar {
        self.substitute(name, &Scalar::from_int(v))
    }

    /// Float evaluation through the witnesses.
    pub fn eval_f64(&self) -> f64 {
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut t = rat_to_f64(c);
            for (s, e) in m {
                t *= s.witness.powi(*e as i32);
            }
            acc += t;
        }
        acc
    }

    /// Float evaluation with some symbols overridden.
    pub fn eval_with(&self, over: &dyn Fn(&Symbol) -> Option<f64>) -> f64 {
        let mut acc = 0.0;
        for (m, c) in &self.terms {
            let mut t = rat_to_f64(c);
            for (s, e) in m {
                let w = over(s).unwrap_or(s.witness);
                t *= w.powi(*e as i32);
            }
            acc += t;
        }
        acc
    }

    /// Check that no symbol name occurs with two witnesses.
    pub fn check_symbols<'a>(items: impl IntoIterator<Item = &'a Scalar>) -> Result<(), ScalarError> {
        let mut seen: BTreeMap<Arc<str>, f64> = BTreeMap::new();
        for s in items {
            for m in s.terms.keys() {
                for (sym, _) in m {
                    match seen.get(&sym.name) {
                        Some(w) if w.to_bits() != sym.witness.to_bits() => {
                            return Err(ScalarError::SymbolConflict(sym.name.to_string()))
                        }
                        Some(_) => {}
                        None => {
                            seen.insert(sym.name.clone(), sym.witness);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Parse `3/2*x^2*y - 1/3 + x` against a symbol table.
    pub fn parse(text: &str, table: &[Symbol]) -> Result<Scalar, ScalarError> {
        let err = |msg: &str| ScalarError::Parse(text.to_string(), msg.to_string());
        let lookup = |name: &str| -> Result<Symbol, ScalarError> {
            table
                .iter()
                .find(|s| s.name() == name)
                .cloned()
                .ok_or_else(|| ScalarError::UnknownSymbol(name.to_string()))
        };
        let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace()).collect();
        if chars.is_empty() {
            return Err(err("empty"));
        }
        let mut pos = 0;
        let mut out = Scalar::zero();
        while pos < chars.len() {
            let mut sign = 1i64;
            while pos < chars.len() && (chars[pos] == '+' || chars[pos] == '-') {
                if chars[pos] == '-' {
                    sign = -sign;
                }
                pos += 1;
            }
            if pos >= chars.len() {
                return Err(err("dangling sign"));
            }
            let mut coef = BigRational::from_integer(BigInt::from(sign));
            let mut mono: Monomial = Vec::new();
            let mut first = true;
            loop {
                if !first {
                    if pos < chars.len() && chars[pos] == '*' {
                        pos += 1;
                    } else {
                        break;
                    }
                }
                first = false;
                if pos >= chars.len() {
                    return Err(err("dangling factor"));
                }
                if chars[pos].is_ascii_digit() {
                    let start = pos;
                    while pos < chars.len() && chars[pos].is_ascii_digit() {
                        pos += 1;
                    }
                    let num: BigInt = chars[start..pos]
                        .iter()
                        .collect::<String>()
                        .parse()
                        .map_err(|_| err("bad integer"))?;
                    let mut q = BigRational::from_integer(num);
                    if pos < chars.len() && chars[pos] == '/' {
                        pos += 1;
                        let start = pos;
                        while pos < chars.len() && chars[pos].is_ascii_digit() {
                            pos += 1;
                        }
                        let den: BigInt = chars[start..pos]
                            .iter()
                            .collect::<String>()
                            .parse()
                            .map_err(|_| err("bad denominator"))?;
                        if den.is_zero() {
                            return Err(err("zero denominator"));
                        }
                        q /= BigRational::from_integer(den);
                    }
                    coef *= q;
                } else if chars[pos].is_alphabetic() || chars[pos] == '_' {
                    let start = pos;
                    while pos < chars.len() && (chars[pos].is_alphanumeric() || chars[pos] == '_') {
                        pos += 1;
                    }
                    let name: String = chars[start..pos].iter().collect();
                    let mut e = 1u32;
                    if pos < chars.len() && chars[pos] == '^' {
                        pos += 1;
                        let start = pos;
                        while pos < chars.len() && chars[pos].is_ascii_digit() {
                            pos += 1;
                        }
                        e = chars[start..pos]
                            .iter()
                            .collect::<String>()
                            .parse()
                            .map_err(|_| err("bad exponent"))?;
                    }
                    let sym = lookup(&name)?;
                    mono = mono_mul(&mono, &vec![(sym, e)]);
                    mono.retain(|(_, e)| *e > 0);
                } else {
                    return Err(err(&format!("unexpected `{}`", chars[pos])));
                }
            }
            out.add_term(mono, coef);
            if pos < chars.len() && chars[pos] != '+' && chars[pos] != '-' {
                return Err(err(&format!("unexpected `{}`", chars[pos])));
            }
        }
        Ok(out)
    }
}

pub fn rat_to_f64(q: &BigRational) -> f64 {
    match (q.numer().to_f64(), q.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // huge parts: scale down first
            let shift = q.numer().bits().max(q.denom().bits()).saturating_sub(1000) as usize;
            let n = (q.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let d = (q.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            n / d
        }
    }
}

pub fn floor_rat(q: &BigRational) -> BigInt {
    q.numer().div_floor(q.denom())
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            let neg = c.is_negative();
            let a = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            first = false;
            let mut parts: Vec<String> = Vec::new();
            if !a.is_one() || m.is_empty() {
                parts.push(a.to_string());
            }
            for (s, e) in m {
                if *e == 1 {
                    parts.push(s.name().to_string());
                } else {
                    parts.push(format!("{}^{}", s.name(), e));
                }
            }
            write!(f, "{}", parts.join("*"))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", self)
    }
}

impl<'a> Add<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn add(self, rhs: &Scalar) -> Scalar {
        let (big, small) = if self.terms.len() >= rhs.terms.len() { (self, rhs) } else { (rhs, self) };
        let mut out = big.clone();
        for (m, c) in &small.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl<'a> Sub<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn sub(self, rhs: &Scalar) -> Scalar {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl<'a> Mul<&'a Scalar> for &'a Scalar {
    type Output = Scalar;
    fn mul(self, rhs: &Scalar) -> Scalar {
        let mut out = Scalar::zero();
        if self.is_zero() || rhs.is_zero() {
            return out;
        }
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(mono_mul(ma, mb), ca * cb);
            }
        }
        out
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

macro_rules! owned_ops {
    ($tr:ident, $f:ident) => {
        impl $tr<Scalar> for Scalar {
            type Output = Scalar;
            fn $f(self, rhs: Scalar) -> Scalar {
                (&self).$f(&rhs)
            }
        }
        impl<'a> $tr<&'a Scalar> for Scalar {
            type Output = Scalar;
            fn $f(self, rhs: &Scalar) -> Scalar {
                (&self).$f(rhs)
            }
        }
        impl<'a> $tr<Scalar> for &'a Scalar {
            type Output = Scalar;
            fn $f(self, rhs: Scalar) -> Scalar {
                self.$f(&rhs)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);

impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, rhs: &Scalar) {
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), c.clone());
        }
    }
}

impl SubAssign<&Scalar> for Scalar {
    fn sub_assign(&mut self, rhs: &Scalar) {
        for (m, c) in &rhs.terms {
            self.add_term(m.clone(), -c);
        }
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::from_int(v)
    }
}

impl From<BigRational> for Scalar {
    fn from(q: BigRational) -> Self {
        Scalar::from_rational(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pi() -> Symbol {
        Symbol::new("pi", std::f64::consts::PI)
    }

    #[test]
    fn ring_ops_and_eval() {
        let x = Scalar::var(&pi());
        let e = Scalar::symbol("e", std::f64::consts::E);
        let p = &(&x * &x) + &(&e * &Scalar::ratio(3, 2));
        let q = &p - &p;
        assert!(q.is_zero());
        let v = p.eval_f64();
        assert!((v - (std::f64::consts::PI.powi(2) + 1.5 * std::f64::consts::E)).abs() < 1e-12);
        assert!(!p.is_integer());
        assert!(Scalar::from_int(-4).is_integer());
        assert!(!Scalar::ratio(1, 2).is_integer());
        assert!(Scalar::zero().is_integer());
    }

    #[test]
    fn substitution_and_coefficients() {
        let n = Scalar::symbol("n", 0.0);
        let p = &(&n * &n) + &n; // n^2 + n
        let shifted = p.substitute("n", &(&n + &Scalar::one()));
        // (n+1)^2 + n + 1 = n^2 + 3n + 2
        let c = shifted.coefficients_in("n");
        assert_eq!(c, vec![Scalar::from_int(2), Scalar::from_int(3), Scalar::from_int(1)]);
        assert_eq!(p.substitute_int("n", 4), Scalar::from_int(20));
    }

    #[test]
    fn parse_display_roundtrip() {
        let table = vec![pi(), Symbol::new("e", std::f64::consts::E)];
        let s = Scalar::parse("3/2*pi^2*e - 1/3 + pi - pi", &table).unwrap();
        let back = Scalar::parse(&s.to_string(), &table).unwrap();
        assert_eq!(s, back);
        assert_eq!(s.constant_part(), rat(-1, 3));
        assert!(Scalar::parse("zeta", &table).is_err());
        assert_eq!(Scalar::parse("-2", &table).unwrap(), Scalar::from_int(-2));
    }

    #[test]
    fn witness_conflicts_detected() {
        let a = Scalar::symbol("x", 1.0);
        let b = Scalar::symbol("x", 2.0);
        assert!(Scalar::check_symbols([&a, &b]).is_err());
        assert!(Scalar::check_symbols([&a, &a]).is_ok());
    }
}
