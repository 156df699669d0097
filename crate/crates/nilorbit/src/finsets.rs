//! Maps on finite subsets of a small universe: VIP systems, monomial maps and
//! polynomial expressions.
//!
//! Subsets are bitmasks; bit k stands for the element k + 1. The operation
//! α ∪ β is only defined for disjoint α, β.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::group::{GroupElement, Prefiltration};

pub type Set = u32;

pub const MAX_UNIVERSE: u32 = 8;

#[derive(Debug, Error, PartialEq)]
pub enum SetError {
    #[error("universe has {0} elements, at most {1} supported")]
    UniverseTooLarge(u32, u32),
    #[error("empty step set")]
    EmptyStep,
    #[error("value at {0:#b} lies outside G_1")]
    NotInG1(Set),
    #[error("value at the empty set is not the identity")]
    NonzeroAtEmpty,
    #[error("table entry {0:?} lies outside its mask level")]
    MaskViolation(MonoIndex),
    #[error("tuple is not ordered")]
    Unordered,
    #[error("dimension mismatch")]
    DimMismatch,
    #[error("set {0:#b} is outside the universe")]
    OutsideUniverse(Set),
}

pub fn elements(s: Set) -> impl Iterator<Item = u32> {
    (0..32).filter(move |k| s & (1 << k) != 0).map(|k| k + 1)
}

pub fn subsets(u: Set) -> impl Iterator<Item = Set> {
    // enumerate submasks of u in increasing order
    let mut out = Vec::new();
    let mut s: Set = 0;
    loop {
        out.push(s);
        if s == u {
            break;
        }
        s = (s.wrapping_sub(u)) & u;
    }
    out.into_iter()
}

pub fn set_of(elems: &[u32]) -> Set {
    elems.iter().fold(0, |acc, &e| acc | (1 << (e - 1)))
}

/// max α < min β (the empty set is comparable with everything).
pub fn set_less(a: Set, b: Set) -> bool {
    if a == 0 || b == 0 {
        return true;
    }
    (32 - a.leading_zeros()) <= b.trailing_zeros()
}

/// A map F(U) → UT(d), stored as a table over all subsets of U.
#[derive(Clone, Debug, PartialEq)]
pub struct SetMap {
    dim: usize,
    universe: Set,
    table: BTreeMap<Set, GroupElement>,
}

impl SetMap {
    pub fn from_fn(dim: usize, universe: Set, f: impl Fn(Set) -> GroupElement) -> Result<Self, SetError> {
        let size = universe.count_ones();
        if size > MAX_UNIVERSE {
            return Err(SetError::UniverseTooLarge(size, MAX_UNIVERSE));
        }
        let mut table = BTreeMap::new();
        for s in subsets(universe) {
            let v = f(s);
            if v.dim() != dim {
                return Err(SetError::DimMismatch);
            }
            table.insert(s, v);
        }
        Ok(SetMap { dim, universe, table })
    }

    pub fn constant(dim: usize, universe: Set, c: GroupElement) -> Result<Self, SetError> {
        Self::from_fn(dim, universe, |_| c.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn universe(&self) -> Set {
        self.universe
    }

    pub fn get(&self, s: Set) -> Result<&GroupElement, SetError> {
        self.table.get(&s).ok_or(SetError::OutsideUniverse(s))
    }

    pub fn values(&self) -> impl Iterator<Item = (&Set, &GroupElement)> {
        self.table.iter()
    }

    pub fn is_identity(&self) -> bool {
        self.table.values().all(|g| g.is_identity())
    }

    /// Restriction to a smaller universe.
    pub fn restrict(&self, u: Set) -> SetMap {
        let u = u & self.universe;
        let table = self.table.iter().filter(|(s, _)| *s & !u == 0).map(|(s, g)| (*s, g.clone())).collect();
        SetMap { dim: self.dim, universe: u, table }
    }

    /// D_β g(α) = g(α)⁻¹ g(α ∪ β) on α ⊂ U ∖ β.
    pub fn derivative(&self, beta: Set) -> Result<SetMap, SetError> {
        if beta & !self.universe != 0 {
            return Err(SetError::OutsideUniverse(beta));
        }
        let u = self.universe & !beta;
        let mut table = BTreeMap::new();
        for a in subsets(u) {
            table.insert(a, &self.table[&a].inv() * &self.table[&(a | beta)]);
        }
        Ok(SetMap { dim: self.dim, universe: u, table })
    }

    /// sD_β g(α) = g(α)⁻¹ g(α ∪ β) g(β)⁻¹ on α ⊂ U ∖ β.
    pub fn sym_derivative(&self, beta: Set) -> Result<SetMap, SetError> {
        if beta == 0 {
            return Err(SetError::EmptyStep);
        }
        let gb_inv = self.get(beta)?.inv();
        let d = self.derivative(beta)?;
        let table = d.table.into_iter().map(|(s, g)| (s, &g * &gb_inv)).collect();
        Ok(SetMap { dim: self.dim, universe: d.universe, table })
    }

    pub fn mul(&self, o: &SetMap) -> Result<SetMap, SetError> {
        if self.dim != o.dim {
            return Err(SetError::DimMismatch);
        }
        let u = self.universe & o.universe;
        let table = subsets(u).map(|s| (s, &self.table[&s] * &o.table[&s])).collect();
        Ok(SetMap { dim: self.dim, universe: u, table })
    }

    pub fn inv(&self) -> SetMap {
        let table = self.table.iter().map(|(s, g)| (*s, g.inv())).collect();
        SetMap { dim: self.dim, universe: self.universe, table }
    }

    /// α ↦ b g(α) b⁻¹
    pub fn conj_by(&self, b: &GroupElement) -> SetMap {
        let bi = b.inv();
        let table = self.table.iter().map(|(s, g)| (*s, &(b * g) * &bi)).collect();
        SetMap { dim: self.dim, universe: self.universe, table }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SetCertificate {
    pub derivatives_checked: usize,
}

#[derive(Clone, Debug)]
pub struct SetFailure {
    /// Steps β₁, β₂, … leading to the failing derivative.
    pub path: Vec<Set>,
    pub reason: String,
}

/// Brute-force membership in poly(P) over every nonempty step set.
pub fn is_polynomial_sets(g: &SetMap, p: &Prefiltration) -> Result<SetCertificate, SetFailure> {
    let mut cert = SetCertificate::default();
    let mut path = Vec::new();
    check_sets(g, p, 0, &mut path, &mut cert)?;
    Ok(cert)
}

fn check_sets(
    g: &SetMap,
    p: &Prefiltration,
    k: usize,
    path: &mut Vec<Set>,
    cert: &mut SetCertificate,
) -> Result<(), SetFailure> {
    cert.derivatives_checked += 1;
    let pk = p.shift(k);
    if pk.length().is_none() {
        if g.is_identity() {
            return Ok(());
        }
        return Err(SetFailure { path: path.clone(), reason: "nonidentity derivative past the length".into() });
    }
    let g0 = pk.group(0);
    if let Some((s, _)) = g.values().find(|(_, v)| !g0.contains(v)) {
        return Err(SetFailure { path: path.clone(), reason: format!("value at {:#b} leaves G_{k}", s) });
    }
    for beta in subsets(g.universe()).skip(1) {
        let d = g.derivative(beta).expect("beta inside universe");
        path.push(beta);
        check_sets(&d, p, k + 1, path, cert)?;
        path.pop();
    }
    Ok(())
}

/// A map vanishing at ∅ with values in G_1.
#[derive(Clone, Debug)]
pub struct VipSystem {
    map: SetMap,
    filtration: Prefiltration,
}

impl VipSystem {
    pub fn new(map: SetMap, filtration: Prefiltration) -> Result<Self, SetError> {
        if !map.get(0)?.is_identity() {
            return Err(SetError::NonzeroAtEmpty);
        }
        let g1 = filtration.group(1);
        if let Some((s, _)) = map.values().find(|(_, v)| !g1.contains(v)) {
            return Err(SetError::NotInG1(*s));
        }
        Ok(VipSystem { map, filtration })
    }

    pub fn map(&self) -> &SetMap {
        &self.map
    }

    pub fn filtration(&self) -> &Prefiltration {
        &self.filtration
    }

    /// The symmetric derivative, as a VIP system for the shifted filtration.
    pub fn sym_derivative(&self, beta: Set) -> Result<VipSystem, SetError> {
        let m = self.map.sym_derivative(beta)?;
        VipSystem::new(m, self.filtration.shift(1))
    }

    pub fn is_polynomial(&self) -> bool {
        is_polynomial_sets(&self.map, &self.filtration).is_ok()
    }
}

/// Index (i, tuple in N^i, r in R_i) of a monomial factor.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonoIndex {
    pub degree: usize,
    pub tuple: Vec<u32>,
    pub r: usize,
}

#[derive(Clone)]
pub enum MonoOrder {
    Lex,
    /// Sort by key, ties broken lexicographically.
    Key(Arc<dyn Fn(&MonoIndex) -> i64 + Send + Sync>),
}

/// α ↦ ∏ over R[α] = ⊎ α^i × R_i in the given order. `sizes[i] = |R_i|`;
/// missing table entries are the identity.
pub fn monomial_map(
    dim: usize,
    universe: Set,
    sizes: &[usize],
    table: &BTreeMap<MonoIndex, GroupElement>,
    order: &MonoOrder,
    claimed: &Prefiltration,
) -> Result<SetMap, SetError> {
    let n = universe.count_ones();
    if n > 6 {
        return Err(SetError::UniverseTooLarge(n, 6));
    }
    for (idx, g) in table {
        if !claimed.group(idx.degree).contains(g) {
            return Err(SetError::MaskViolation(idx.clone()));
        }
    }
    SetMap::from_fn(dim, universe, |alpha| {
        let elems: Vec<u32> = elements(alpha).collect();
        let mut idxs: Vec<MonoIndex> = Vec::new();
        for (deg, &size) in sizes.iter().enumerate() {
            for tuple in tuples(&elems, deg) {
                for r in 0..size {
                    idxs.push(MonoIndex { degree: deg, tuple: tuple.clone(), r });
                }
            }
        }
        match order {
            MonoOrder::Lex => idxs.sort(),
            MonoOrder::Key(k) => idxs.sort_by(|a, b| k(a).cmp(&k(b)).then_with(|| a.cmp(b))),
        }
        let mut acc = GroupElement::identity(dim);
        for idx in &idxs {
            if let Some(g) = table.get(idx) {
                acc = &acc * g;
            }
        }
        acc
    })
}

fn tuples(elems: &[u32], len: usize) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::new();
        for t in &out {
            for &e in elems {
                let mut t2 = t.clone();
                t2.push(e);
                next.push(t2);
            }
        }
        out = next;
    }
    out
}

/// W^{α₁…α_m}(α_{m+1}) as a function of (prefix, last set).
pub type WFamily = Arc<dyn Fn(&[Set], Set) -> GroupElement + Send + Sync>;

/// Polynomial expressions: arity 0 is the identity, arity m + 1 is
/// W^{α₁…α_m}(α_{m+1}) · S(α₁…α_m).
#[derive(Clone)]
pub enum PolyExpr {
    Unit { dim: usize },
    Node { arity: usize, w: WFamily, s: Box<PolyExpr> },
}

impl PolyExpr {
    pub fn arity(&self) -> usize {
        match self {
            PolyExpr::Unit { .. } => 0,
            PolyExpr::Node { arity, .. } => *arity,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            PolyExpr::Unit { dim } => *dim,
            PolyExpr::Node { s, .. } => s.dim(),
        }
    }

    pub fn node(w: WFamily, s: PolyExpr) -> PolyExpr {
        PolyExpr::Node { arity: s.arity() + 1, w, s: Box::new(s) }
    }

    fn eval_unchecked(&self, alphas: &[Set]) -> GroupElement {
        match self {
            PolyExpr::Unit { dim } => GroupElement::identity(*dim),
            PolyExpr::Node { arity, w, s } => {
                let (prefix, last) = alphas[..*arity].split_at(arity - 1);
                &w(prefix, last[0]) * &s.eval_unchecked(prefix)
            }
        }
    }
}

pub fn is_ordered(alphas: &[Set]) -> bool {
    alphas.iter().all(|&a| a != 0) && alphas.windows(2).all(|w| set_less(w[0], w[1]))
}

pub fn pe_eval(e: &PolyExpr, alphas: &[Set]) -> Result<GroupElement, SetError> {
    if alphas.len() != e.arity() || !is_ordered(alphas) {
        return Err(SetError::Unordered);
    }
    Ok(e.eval_unchecked(alphas))
}

/// Pointwise product, built through the recursive form:
/// W₁(α)S₁·W₂(α)S₂ = [W₁(α)·S₁W₂(α)S₁⁻¹]·S₁S₂.
pub fn pe_product(a: &PolyExpr, b: &PolyExpr) -> Result<PolyExpr, SetError> {
    if a.arity() != b.arity() || a.dim() != b.dim() {
        return Err(SetError::DimMismatch);
    }
    match (a, b) {
        (PolyExpr::Unit { dim }, PolyExpr::Unit { .. }) => Ok(PolyExpr::Unit { dim: *dim }),
        (PolyExpr::Node { w: w1, s: s1, .. }, PolyExpr::Node { w: w2, s: s2, .. }) => {
            let s = pe_product(s1, s2)?;
            let (w1, w2, s1) = (w1.clone(), w2.clone(), (**s1).clone());
            let w: WFamily = Arc::new(move |prefix: &[Set], last: Set| {
                let sv = s1.eval_unchecked(prefix);
                &w1(prefix, last) * &(&(&sv * &w2(prefix, last)) * &sv.inv())
            });
            Ok(PolyExpr::node(w, s))
        }
        _ => unreachable!(),
    }
}

/// E[β⃗] : α⃗ ↦ E(∪_{i∈β₁} α_i, …, ∪_{i∈β_m} α_i).
#[derive(Clone)]
pub struct Substituted {
    inner: PolyExpr,
    blocks: Vec<Set>,
}

impl Substituted {
    /// Number of α variables read.
    pub fn width(&self) -> usize {
        self.blocks.iter().map(|b| 32 - b.leading_zeros()).max().unwrap_or(0) as usize
    }

    pub fn eval(&self, alphas: &[Set]) -> Result<GroupElement, SetError> {
        if alphas.len() < self.width() || !is_ordered(alphas) {
            return Err(SetError::Unordered);
        }
        let unions: Vec<Set> = self.blocks.iter().map(|b| elements(*b).fold(0, |acc, i| acc | alphas[i as usize - 1])).collect();
        pe_eval(&self.inner, &unions)
    }
}

pub fn pe_substitute(e: &PolyExpr, betas: &[Set]) -> Result<Substituted, SetError> {
    if betas.len() != e.arity() || !is_ordered(betas) {
        return Err(SetError::Unordered);
    }
    Ok(Substituted { inner: e.clone(), blocks: betas.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{int_element, lower_central_series, Subgroup};
    use crate::scalar::Scalar;

    #[test]
    fn subset_enumeration() {
        let u = set_of(&[1, 3]);
        let all: Vec<_> = subsets(u).collect();
        assert_eq!(all, vec![0, 1, 4, 5]);
        assert!(set_less(set_of(&[1, 2]), set_of(&[3])));
        assert!(!set_less(set_of(&[1, 3]), set_of(&[2])));
    }

    #[test]
    fn ip_system_is_degree_one() {
        // abelian group UT(2): α ↦ ∏ g_i is an IP system
        let p = Prefiltration::new(2, vec![Subgroup::full(2), Subgroup::full(2)]);
        let mut table = BTreeMap::new();
        for i in 1..=4u32 {
            table.insert(MonoIndex { degree: 1, tuple: vec![i], r: 0 }, int_element(2, &[((0, 1), i as i64 * 3 - 5)]));
        }
        let g = monomial_map(2, set_of(&[1, 2, 3, 4]), &[0, 1], &table, &MonoOrder::Lex, &p).unwrap();
        for a in subsets(g.universe()) {
            let expect: i64 = elements(a).map(|i| i as i64 * 3 - 5).sum();
            assert_eq!(g.get(a).unwrap().get(0, 1), &Scalar::from_int(expect));
        }
        assert!(is_polynomial_sets(&g, &p).is_ok());
        let vip = VipSystem::new(g, p).unwrap();
        assert!(vip.sym_derivative(set_of(&[2])).unwrap().map().is_identity());
    }

    #[test]
    fn identity_monomials_give_constant_map() {
        let p = lower_central_series(3);
        let g = monomial_map(3, set_of(&[1, 2, 3]), &[1, 1], &BTreeMap::new(), &MonoOrder::Lex, &p).unwrap();
        assert!(g.is_identity());
    }

    #[test]
    fn mask_violation_reported() {
        let p = lower_central_series(3);
        let mut table = BTreeMap::new();
        table.insert(MonoIndex { degree: 2, tuple: vec![1, 1], r: 0 }, int_element(3, &[((0, 1), 1)]));
        let r = monomial_map(3, set_of(&[1, 2]), &[0, 0, 1], &table, &MonoOrder::Lex, &p);
        assert!(matches!(r, Err(SetError::MaskViolation(_))));
    }
}
