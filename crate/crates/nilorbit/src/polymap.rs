//! Polynomial maps Z → UT(d) in closed form.
//!
//! A closed form is a group element whose entries are polynomials in the
//! reserved domain symbol `_n`. Translations n ↦ a + n + b are substitutions,
//! so symbolic a and b cost nothing extra. Binomial-basis coefficients are
//! produced on demand by Newton differences.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::{commutator, GroupElement, Prefiltration};
use crate::lie;
use crate::scalar::{Scalar, ScalarError, Symbol};

pub const DOMAIN_VAR: &str = "_n";

pub fn n_var() -> Scalar {
    Scalar::symbol(DOMAIN_VAR, 0.0)
}

#[derive(Debug, Error)]
pub enum PolyError {
    #[error("black-box map has no closed form")]
    BlackBox,
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("element lies outside the G_1 mask")]
    OutsideMask,
    #[error("recursion exceeded the length bound")]
    Depth,
    #[error(transparent)]
    Scalar(#[from] ScalarError),
    #[error("malformed map: {0}")]
    Malformed(String),
}

#[derive(Clone)]
pub struct BlackBox {
    pub dim: usize,
    pub degree_bound: usize,
    pub eval: Arc<dyn Fn(i64) -> GroupElement + Send + Sync>,
}

#[derive(Clone)]
pub enum MapForm {
    Closed(GroupElement),
    BlackBox(BlackBox),
}

#[derive(Clone)]
pub struct PolyMap {
    form: MapForm,
    claimed: Option<Prefiltration>,
}

impl fmt::Debug for PolyMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.form {
            MapForm::Closed(g) => write!(f, "PolyMap({:?})", g),
            MapForm::BlackBox(b) => write!(f, "PolyMap(black box, dim {}, degree ≤ {})", b.dim, b.degree_bound),
        }
    }
}

impl PartialEq for PolyMap {
    fn eq(&self, other: &Self) -> bool {
        match (&self.form, &other.form) {
            (MapForm::Closed(a), MapForm::Closed(b)) => a == b,
            _ => false,
        }
    }
}

impl PolyMap {
    pub fn closed(g: GroupElement) -> Self {
        PolyMap { form: MapForm::Closed(g), claimed: None }
    }

    pub fn black_box(dim: usize, degree_bound: usize, eval: Arc<dyn Fn(i64) -> GroupElement + Send + Sync>) -> Self {
        PolyMap { form: MapForm::BlackBox(BlackBox { dim, degree_bound, eval }), claimed: None }
    }

    pub fn identity(dim: usize) -> Self {
        PolyMap::closed(GroupElement::identity(dim))
    }

    pub fn constant(c: GroupElement) -> Self {
        PolyMap::closed(c)
    }

    pub fn with_claim(mut self, p: Prefiltration) -> Self {
        self.claimed = Some(p);
        self
    }

    pub fn claimed(&self) -> Option<&Prefiltration> {
        self.claimed.as_ref()
    }

    pub fn form(&self) -> &MapForm {
        &self.form
    }

    pub fn dim(&self) -> usize {
        match &self.form {
            MapForm::Closed(g) => g.dim(),
            MapForm::BlackBox(b) => b.dim,
        }
    }

    pub fn closed_form(&self) -> Option<&GroupElement> {
        match &self.form {
            MapForm::Closed(g) => Some(g),
            MapForm::BlackBox(_) => None,
        }
    }

    fn need_closed(&self) -> Result<&GroupElement, PolyError> {
        self.closed_form().ok_or(PolyError::BlackBox)
    }

    /// Entries given in the binomial basis: value at (i,j) is Σ_k c_k binom(n,k).
    pub fn from_binomial_table(dim: usize, entries: &[((usize, usize), Vec<Scalar>)]) -> Self {
        let mut g = GroupElement::identity(dim);
        for ((i, j), cs) in entries {
            let cur = g.get(*i, *j) + &from_binomial(cs);
            g.set(*i, *j, cur);
        }
        PolyMap::closed(g)
    }

    pub fn binomial_table(&self) -> Result<Vec<((usize, usize), Vec<Scalar>)>, PolyError> {
        let g = self.need_closed()?;
        Ok(g.entries()
            .filter(|(_, v)| !v.is_zero())
            .map(|(p, v)| (p, to_binomial(v)))
            .collect())
    }

    pub fn eval(&self, n: i64) -> GroupElement {
        match &self.form {
            MapForm::Closed(g) => g.substitute(DOMAIN_VAR, &Scalar::from_int(n)),
            MapForm::BlackBox(b) => (b.eval)(n),
        }
    }

    pub fn eval_at(&self, n: &Scalar) -> Result<GroupElement, PolyError> {
        Ok(self.need_closed()?.substitute(DOMAIN_VAR, n))
    }

    /// n ↦ g(n + s)
    pub fn shifted(&self, s: &Scalar) -> Result<PolyMap, PolyError> {
        let g = self.need_closed()?;
        Ok(PolyMap::closed(g.substitute(DOMAIN_VAR, &(n_var() + s))))
    }

    pub fn is_constant(&self) -> bool {
        match &self.form {
            MapForm::Closed(g) => !g.mentions(DOMAIN_VAR),
            MapForm::BlackBox(b) => b.degree_bound == 0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.closed_form().map(|g| g.is_identity()).unwrap_or(false)
    }

    pub fn degree(&self) -> usize {
        match &self.form {
            MapForm::Closed(g) => g.entries().map(|(_, v)| v.degree_in(DOMAIN_VAR) as usize).max().unwrap_or(0),
            MapForm::BlackBox(b) => b.degree_bound,
        }
    }

    /// n ↦ g(n)⁻¹ g(a + n + b)
    pub fn derivative(&self, a: &Scalar, b: &Scalar) -> PolyMap {
        match &self.form {
            MapForm::Closed(g) => {
                let t = g.substitute(DOMAIN_VAR, &(&(a + &n_var()) + b));
                let mut out = PolyMap::closed(&g.inv() * &t);
                out.claimed = self.claimed.as_ref().map(|p| p.shift(1));
                out
            }
            MapForm::BlackBox(bb) => {
                let (ai, bi) = match (a.constant_value(), b.constant_value()) {
                    (Some(x), Some(y)) if x.is_integer() && y.is_integer() => {
                        (to_i64(&x), to_i64(&y))
                    }
                    _ => panic!("black-box derivative needs integer steps"),
                };
                let f = bb.eval.clone();
                let shift = ai + bi;
                PolyMap {
                    form: MapForm::BlackBox(BlackBox {
                        dim: bb.dim,
                        degree_bound: bb.degree_bound.saturating_sub(1),
                        eval: Arc::new(move |n| &f(n).inv() * &f(n + shift)),
                    }),
                    claimed: self.claimed.as_ref().map(|p| p.shift(1)),
                }
            }
        }
    }

    pub fn derivative_by(&self, b: i64) -> PolyMap {
        self.derivative(&Scalar::zero(), &Scalar::from_int(b))
    }

    /// g·g(0)⁻¹, the canonical representative modulo right constants.
    pub fn normalize_right(&self) -> Result<PolyMap, PolyError> {
        let g = self.need_closed()?;
        let g0 = g.substitute(DOMAIN_VAR, &Scalar::zero());
        Ok(PolyMap::closed(g * &g0.inv()))
    }

    pub fn to_json(&self) -> Result<PolyMapJson, PolyError> {
        let g = self.need_closed()?;
        let mut symbols: Vec<SymbolJson> = g
            .symbols()
            .into_iter()
            .filter(|s| s.name() != DOMAIN_VAR)
            .map(|s| SymbolJson { name: s.name().to_string(), witness: s.witness() })
            .collect();
        symbols.dedup_by(|a, b| a.name == b.name);
        let mut entries = Vec::new();
        for ((i, j), cs) in self.binomial_table()? {
            for (k, c) in cs.iter().enumerate() {
                if !c.is_zero() {
                    entries.push(EntryJson { position: [i + 1, j + 1], basis_degree: k, value: c.to_string() });
                }
            }
        }
        Ok(PolyMapJson { dim: g.dim(), symbols, entries })
    }

    pub fn from_json(j: &PolyMapJson) -> Result<PolyMap, PolyError> {
        let table: Vec<Symbol> = j.symbols.iter().map(|s| Symbol::new(&s.name, s.witness)).collect();
        let mut cells: Vec<((usize, usize), Vec<Scalar>)> = Vec::new();
        for e in &j.entries {
            let [r, c] = e.position;
            if !(r >= 1 && r < c && c <= j.dim) {
                return Err(PolyError::Malformed(format!("position ({r}, {c})")));
            }
            let v = Scalar::parse(&e.value, &table)?;
            let mut cs = vec![Scalar::zero(); e.basis_degree + 1];
            cs[e.basis_degree] = v;
            cells.push(((r - 1, c - 1), cs));
        }
        Ok(PolyMap::from_binomial_table(j.dim, &cells))
    }
}

fn to_i64(q: &BigRational) -> i64 {
    use num_traits::ToPrimitive;
    q.to_integer().to_i64().expect("step does not fit in i64")
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SymbolJson {
    pub name: String,
    pub witness: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EntryJson {
    pub position: [usize; 2],
    pub basis_degree: usize,
    pub value: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PolyMapJson {
    pub dim: usize,
    #[serde(default)]
    pub symbols: Vec<SymbolJson>,
    pub entries: Vec<EntryJson>,
}

fn stirling2(kmax: usize) -> Vec<Vec<BigInt>> {
    let mut s = vec![vec![BigInt::zero(); kmax + 1]; kmax + 1];
    s[0][0] = BigInt::one();
    for k in 1..=kmax {
        for j in 1..=k {
            s[k][j] = &s[k - 1][j - 1] + BigInt::from(j) * &s[k - 1][j];
        }
    }
    s
}

/// Binomial-basis coefficients of a polynomial in `_n`.
pub fn to_binomial(p: &Scalar) -> Vec<Scalar> {
    let q = p.coefficients_in(DOMAIN_VAR);
    let deg = q.len() - 1;
    let s = stirling2(deg);
    let mut out = vec![Scalar::zero(); deg + 1];
    let mut fact = BigInt::one();
    for j in 0..=deg {
        if j > 0 {
            fact *= BigInt::from(j);
        }
        let mut acc = Scalar::zero();
        for (k, qk) in q.iter().enumerate().skip(j) {
            let c = &s[k][j] * &fact;
            if !c.is_zero() && !qk.is_zero() {
                acc += &qk.scale(&BigRational::from_integer(c));
            }
        }
        out[j] = acc;
    }
    while out.len() > 1 && out.last().unwrap().is_zero() {
        out.pop();
    }
    out
}

/// binom(n, k) as a polynomial in `_n`.
pub fn binom_poly(k: usize) -> Scalar {
    let n = n_var();
    let mut acc = Scalar::one();
    let mut fact = BigInt::one();
    for i in 0..k {
        acc = &acc * &(&n - &Scalar::from_int(i as i64));
        fact *= BigInt::from(i + 1);
    }
    acc.scale(&BigRational::new(BigInt::one(), fact))
}

pub fn from_binomial(cs: &[Scalar]) -> Scalar {
    let mut acc = Scalar::zero();
    for (k, c) in cs.iter().enumerate() {
        if !c.is_zero() {
            acc += &(c * &binom_poly(k));
        }
    }
    acc
}

pub fn poly_product(g0: &PolyMap, g1: &PolyMap) -> Result<PolyMap, PolyError> {
    if g0.dim() != g1.dim() {
        return Err(PolyError::DimMismatch(g0.dim(), g1.dim()));
    }
    let a = g0.need_closed()?;
    let b = g1.need_closed()?;
    let mut out = PolyMap::closed(a.try_mul(b).map_err(|e| PolyError::Malformed(e.to_string()))?);
    out.claimed = g0.claimed.clone();
    Ok(out)
}

pub fn poly_inverse(g: &PolyMap) -> Result<PolyMap, PolyError> {
    let mut out = PolyMap::closed(g.need_closed()?.inv());
    out.claimed = g.claimed.clone();
    Ok(out)
}

/// n ↦ c⁻¹ g(n) c
pub fn poly_conjugate(g: &PolyMap, c: &GroupElement) -> Result<PolyMap, PolyError> {
    if g.dim() != c.dim() {
        return Err(PolyError::DimMismatch(g.dim(), c.dim()));
    }
    let mut out = PolyMap::closed(g.need_closed()?.conj(c));
    out.claimed = g.claimed.clone();
    Ok(out)
}

pub fn poly_commutator(g0: &PolyMap, g1: &PolyMap) -> Result<PolyMap, PolyError> {
    if g0.dim() != g1.dim() {
        return Err(PolyError::DimMismatch(g0.dim(), g1.dim()));
    }
    Ok(PolyMap::closed(commutator(g0.need_closed()?, g1.need_closed()?)))
}

/// n ↦ A^n through exp(n log A).
pub fn from_homomorphism(a: &GroupElement, p: &Prefiltration) -> Result<PolyMap, PolyError> {
    if !p.group(1).contains(a) {
        return Err(PolyError::OutsideMask);
    }
    let x = lie::log(a).scale(&n_var());
    Ok(PolyMap::closed(lie::exp(&x)).with_claim(p.clone()))
}

#[derive(Clone, Debug)]
pub struct CertLevel {
    pub level: usize,
    pub map: PolyMap,
}

/// Chain g, D₁g, D₁²g, … with the filtration level each one was checked at.
#[derive(Clone, Debug)]
pub struct PolyCertificate {
    pub levels: Vec<CertLevel>,
}

#[derive(Clone, Debug)]
pub struct PolyFailure {
    pub level: usize,
    pub map: PolyMap,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub enum Membership {
    Member(PolyCertificate),
    NotMember(PolyFailure),
}

impl Membership {
    pub fn holds(&self) -> bool {
        matches!(self, Membership::Member(_))
    }
}


pub fn is_polynomial(g: &PolyMap, p: &Prefiltration) -> Result<Membership, PolyError> {
    let mut cur = g.need_closed()?.clone();
    if cur.dim() != p.dim() {
        return Err(PolyError::DimMismatch(cur.dim(), p.dim()));
    }
    let bound = p.length().map(|l| l + 2).unwrap_or(1);
    let mut levels = Vec::new();
    for k in 0..=bound {
        let pk = p.shift(k);
        match pk.length() {
            None => {
                if cur.is_identity() {
                    levels.push(CertLevel { level: k, map: PolyMap::closed(cur) });
                    return Ok(Membership::Member(PolyCertificate { levels }));
                }
                return Ok(Membership::NotMember(PolyFailure {
                    level: k,
                    map: PolyMap::closed(cur),
                    reason: "derivative past the length is not the identity".into(),
                }));
            }
            Some(_) => {
                if !pk.group(0).contains(&cur) {
                    return Ok(Membership::NotMember(PolyFailure {
                        level: k,
                        map: PolyMap::closed(cur),
                        reason: format!("values leave G_{k}"),
                    }));
                }
                let next = PolyMap::closed(cur.clone()).derivative_by(1);
                levels.push(CertLevel { level: k, map: PolyMap::closed(cur) });
                cur = next.closed_form().unwrap().clone();
            }
        }
    }
    Err(PolyError::Depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{int_element, lower_central_series};

    fn heis(p1: Scalar, p2: Scalar, p3: Scalar) -> PolyMap {
        let mut g = GroupElement::identity(3);
        g.set(0, 1, p1);
        g.set(0, 2, p2);
        g.set(1, 2, p3);
        PolyMap::closed(g)
    }

    #[test]
    fn binomial_roundtrip() {
        let n = n_var();
        let p = &(&(&n * &n) * &n) + &Scalar::ratio(3, 2);
        let b = to_binomial(&p);
        // n^3 = 6 C(n,3) + 6 C(n,2) + C(n,1)
        assert_eq!(b, vec![Scalar::ratio(3, 2), Scalar::from_int(1), Scalar::from_int(6), Scalar::from_int(6)]);
        assert_eq!(from_binomial(&b), p);
    }

    #[test]
    fn homomorphism_entries() {
        let a = int_element(3, &[((0, 1), 1), ((1, 2), 1)]);
        let g = from_homomorphism(&a, &lower_central_series(3)).unwrap();
        for n in 0..=10 {
            assert_eq!(g.eval(n), a.pow(n));
        }
        assert_eq!(g.binomial_table().unwrap().iter().find(|(p, _)| *p == (0, 2)).unwrap().1,
                   vec![Scalar::zero(), Scalar::zero(), Scalar::one()]);
        let d = g.derivative_by(1);
        assert!(d.is_constant());
        assert_eq!(d.closed_form().unwrap(), &a);
    }

    #[test]
    fn heisenberg_characterization() {
        let n = n_var();
        let p = lower_central_series(3);
        let quad = heis(n.clone(), &n * &n, &n * &Scalar::from_int(2));
        assert!(is_polynomial(&quad, &p).unwrap().holds());
        let cubic = heis(n.clone(), &(&n * &n) * &n, n.clone());
        assert!(!is_polynomial(&cubic, &p).unwrap().holds());
        assert!(is_polynomial(&PolyMap::identity(3), &p).unwrap().holds());
    }

    #[test]
    fn cocycle_identity() {
        let n = n_var();
        let alpha = Scalar::symbol("alpha", 0.7);
        let g = heis(&alpha * &n, &n * &n, &n + &Scalar::one());
        let a = Scalar::from_int(2);
        let b = Scalar::from_int(5);
        let lhs = g.derivative(&Scalar::zero(), &(&a + &b));
        let da = g.derivative(&Scalar::zero(), &a);
        let db = g.derivative(&Scalar::zero(), &b).shifted(&a).unwrap();
        let rhs = poly_product(&da, &db).unwrap();
        assert_eq!(lhs.closed_form(), rhs.closed_form());
    }

    #[test]
    fn json_roundtrip() {
        let n = n_var();
        let alpha = Scalar::symbol("alpha", 0.7);
        let g = heis(&alpha * &n, &(&n * &n) * &Scalar::ratio(1, 3), n.clone());
        let j = g.to_json().unwrap();
        let back = PolyMap::from_json(&j).unwrap();
        assert_eq!(back, g);
    }
}
