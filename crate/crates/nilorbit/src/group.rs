//! Unitriangular matrix groups over `Scalar`, mask subgroups and prefiltrations.
//!
//! Positions are 0-based internally. Config files use 1-based (row, col)
//! pairs, as in E12 for the top-left superdiagonal entry.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Mul;

use num_bigint::BigInt;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scalar::{Scalar, ScalarError, Symbol};

#[derive(Debug, Error, PartialEq)]
pub enum GroupError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error(transparent)]
    Symbols(#[from] ScalarError),
    #[error("empty commutator list")]
    Empty,
    #[error("sequence is not superadditive at ({0}, {1})")]
    NotSuperadditive(usize, usize),
    #[error("reindexing sequence too short: need {0} entries")]
    ShortSequence(usize),
    #[error("infinite length")]
    InfiniteLength,
    #[error("dimension {0} outside supported range")]
    Unsupported(usize),
    #[error("position ({0}, {1}) is not strictly upper triangular")]
    BadPosition(usize, usize),
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupElement {
    dim: usize,
    // row-major; only strictly upper entries are ever nonzero
    e: Vec<Scalar>,
}

impl GroupElement {
    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1);
        GroupElement { dim, e: vec![Scalar::zero(); dim * dim] }
    }

    /// I + E_{ij} scaled by `v` (0-based).
    pub fn elementary(dim: usize, i: usize, j: usize, v: Scalar) -> Self {
        let mut g = Self::identity(dim);
        g.set(i, j, v);
        g
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry (i, j), 0-based, for strictly upper positions. The diagonal is 1.
    pub fn get(&self, i: usize, j: usize) -> &Scalar {
        &self.e[i * self.dim + j]
    }

    pub fn entry(&self, i: usize, j: usize) -> Scalar {
        if i == j {
            Scalar::one()
        } else {
            self.get(i, j).clone()
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: Scalar) {
        assert!(i < j && j < self.dim, "position ({i},{j}) not strictly upper");
        self.e[i * self.dim + j] = v;
    }

    pub fn positions(dim: usize) -> impl Iterator<Item = (usize, usize)> {
        (0..dim).flat_map(move |i| (i + 1..dim).map(move |j| (i, j)))
    }

    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), &Scalar)> + '_ {
        Self::positions(self.dim).map(move |(i, j)| ((i, j), self.get(i, j)))
    }

    pub fn is_identity(&self) -> bool {
        self.e.iter().all(|s| s.is_zero())
    }

    pub fn map_entries(&self, f: impl Fn(&Scalar) -> Scalar) -> Self {
        let mut out = Self::identity(self.dim);
        for (i, j) in Self::positions(self.dim) {
            let v = self.get(i, j);
            if !v.is_zero() {
                out.set(i, j, f(v));
            }
        }
        out
    }

    pub fn substitute(&self, name: &str, by: &Scalar) -> Self {
        self.map_entries(|s| s.substitute(name, by))
    }

    pub fn mentions(&self, name: &str) -> bool {
        self.e.iter().any(|s| s.mentions(name))
    }

    pub fn symbols(&self) -> Vec<Symbol> {
        let mut v: Vec<Symbol> = self.e.iter().flat_map(|s| s.symbols()).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn is_rational(&self) -> bool {
        self.e.iter().all(|s| s.is_rational())
    }

    pub fn is_integral(&self) -> bool {
        self.e.iter().all(|s| s.is_integer())
    }

    pub fn eval_f64(&self) -> Vec<f64> {
        self.e.iter().map(|s| s.eval_f64()).collect()
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self, GroupError> {
        if self.dim != rhs.dim {
            return Err(GroupError::DimMismatch(self.dim, rhs.dim));
        }
        Scalar::check_symbols(self.e.iter().chain(rhs.e.iter()))?;
        Ok(self.mul_unchecked(rhs))
    }

    fn mul_unchecked(&self, rhs: &Self) -> Self {
        let d = self.dim;
        let mut out = Self::identity(d);
        for i in 0..d {
            for j in i + 1..d {
                let mut acc = self.get(i, j) + rhs.get(i, j);
                for k in i + 1..j {
                    let a = self.get(i, k);
                    let b = rhs.get(k, j);
                    if !a.is_zero() && !b.is_zero() {
                        acc += &(a * b);
                    }
                }
                out.e[i * d + j] = acc;
            }
        }
        out
    }

    /// Inverse by back-substitution along superdiagonals.
    pub fn inv(&self) -> Self {
        let d = self.dim;
        let mut out = Self::identity(d);
        for gap in 1..d {
            for i in 0..d - gap {
                let j = i + gap;
                let mut acc = -self.get(i, j);
                for k in i + 1..j {
                    let a = self.get(i, k);
                    let b = out.get(k, j);
                    if !a.is_zero() && !b.is_zero() {
                        acc -= &(a * b);
                    }
                }
                out.e[i * d + j] = acc;
            }
        }
        out
    }

    pub fn pow(&self, n: i64) -> Self {
        let base = if n < 0 { self.inv() } else { self.clone() };
        let mut acc = Self::identity(self.dim);
        let mut b = base;
        let mut k = n.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &b;
            }
            b = &b * &b;
            k >>= 1;
        }
        acc
    }

    /// a^b = b⁻¹ a b
    pub fn conj(&self, b: &Self) -> Self {
        &(&b.inv() * self) * b
    }
}

impl<'a> Mul<&'a GroupElement> for &'a GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: &GroupElement) -> GroupElement {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        self.mul_unchecked(rhs)
    }
}

impl Mul for GroupElement {
    type Output = GroupElement;
    fn mul(self, rhs: GroupElement) -> GroupElement {
        &self * &rhs
    }
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for ((i, j), v) in self.entries() {
            if !v.is_zero() {
                parts.push(format!("E{}{}: {}", i + 1, j + 1, v));
            }
        }
        write!(f, "UT{}[{}]", self.dim, parts.join(", "))
    }
}

/// [a,b] = a⁻¹ b⁻¹ a b
pub fn commutator(a: &GroupElement, b: &GroupElement) -> GroupElement {
    let ia = a.inv();
    let ib = b.inv();
    &(&(&ia * &ib) * a) * b
}

pub fn try_commutator(a: &GroupElement, b: &GroupElement) -> Result<GroupElement, GroupError> {
    let ab = a.try_mul(b)?;
    let ba = b.try_mul(a)?;
    Ok(&ba.inv() * &ab)
}

/// Left-nested [[…[g1,g2]…],gn].
pub fn simple_commutator(gs: &[GroupElement]) -> Result<GroupElement, GroupError> {
    let (first, rest) = gs.split_first().ok_or(GroupError::Empty)?;
    let mut acc = first.clone();
    for g in rest {
        if g.dim() != acc.dim() {
            return Err(GroupError::DimMismatch(acc.dim(), g.dim()));
        }
        acc = commutator(&acc, g);
    }
    Ok(acc)
}

/// A subgroup of UT(dim). `Mask` is a coordinate subgroup; `Fibered`
/// realizes H ×_K H = {(h0, h1) : h0, h1 ∈ H, h0⁻¹h1 ∈ K} as block-diagonal
/// matrices of twice the base dimension.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Subgroup {
    Mask { dim: usize, set: BTreeSet<(usize, usize)> },
    Fibered { outer: Box<Subgroup>, inner: Box<Subgroup> },
}

impl Subgroup {
    pub fn trivial(dim: usize) -> Self {
        Subgroup::Mask { dim, set: BTreeSet::new() }
    }

    pub fn full(dim: usize) -> Self {
        Subgroup::Mask { dim, set: GroupElement::positions(dim).collect() }
    }

    pub fn mask(dim: usize, positions: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GroupError> {
        let mut set = BTreeSet::new();
        for (i, j) in positions {
            if !(i < j && j < dim) {
                return Err(GroupError::BadPosition(i + 1, j + 1));
            }
            set.insert((i, j));
        }
        Ok(Subgroup::Mask { dim, set })
    }

    pub fn dim(&self) -> usize {
        match self {
            Subgroup::Mask { dim, .. } => *dim,
            Subgroup::Fibered { outer, .. } => 2 * outer.dim(),
        }
    }

    /// Dimension of the subgroup as a Lie group (= rank of its lattice).
    pub fn rank(&self) -> usize {
        match self {
            Subgroup::Mask { set, .. } => set.len(),
            Subgroup::Fibered { outer, inner } => outer.rank() + inner.rank(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.rank() == 0
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        if g.dim() != self.dim() {
            return false;
        }
        match self {
            Subgroup::Mask { set, .. } => g.entries().all(|(p, v)| v.is_zero() || set.contains(&p)),
            Subgroup::Fibered { outer, inner } => match split_blocks(g) {
                Some((g0, g1)) => {
                    outer.contains(&g0) && outer.contains(&g1) && inner.contains(&(&g0.inv() * &g1))
                }
                None => false,
            },
        }
    }

    /// Mask-subgroup bracket closure: (i,j),(j,k) in mask ⟹ (i,k) in mask.
    pub fn is_bracket_closed(&self) -> bool {
        match self {
            Subgroup::Mask { set, .. } => set.iter().all(|&(i, j)| {
                set.iter().filter(|&&(a, _)| a == j).all(|&(_, k)| set.contains(&(i, k)))
            }),
            Subgroup::Fibered { outer, inner } => {
                outer.is_bracket_closed() && inner.is_bracket_closed() && inner.is_subset_of(outer)
            }
        }
    }

    pub fn is_subset_of(&self, other: &Subgroup) -> bool {
        match (self, other) {
            (Subgroup::Mask { dim: d1, set: a }, Subgroup::Mask { dim: d2, set: b }) => d1 == d2 && a.is_subset(b),
            (Subgroup::Mask { dim, set }, Subgroup::Fibered { .. }) => {
                *dim == other.dim() && fibered_mask_subset(set, other)
            }
            (Subgroup::Fibered { outer: o1, inner: i1 }, Subgroup::Fibered { outer: o2, inner: i2 }) => {
                o1.is_subset_of(o2) && i1.is_subset_of(i2)
            }
            (Subgroup::Fibered { outer, inner }, Subgroup::Mask { dim, set }) => {
                // both blocks of the outer group must embed
                *dim == self.dim()
                    && {
                        let d = outer.dim();
                        let lift = |s: &Subgroup, off: usize| -> bool {
                            match s {
                                Subgroup::Mask { set: m, .. } => m.iter().all(|&(i, j)| set.contains(&(i + off, j + off))),
                                _ => false,
                            }
                        };
                        lift(outer, 0) && lift(outer, d) && inner.rank() <= outer.rank()
                    }
            }
        }
    }

    /// Random element with small integer and linear symbolic entries.
    pub fn random_element<R: Rng>(&self, rng: &mut R, symbols: &[Symbol]) -> GroupElement {
        match self {
            Subgroup::Mask { dim, set } => {
                let mut g = GroupElement::identity(*dim);
                for &(i, j) in set {
                    g.set(i, j, random_scalar(rng, symbols));
                }
                g
            }
            Subgroup::Fibered { outer, inner } => {
                let g0 = outer.random_element(rng, symbols);
                let h = inner.random_element(rng, symbols);
                let g1 = &g0 * &h;
                join_blocks(&g0, &g1)
            }
        }
    }

    /// A generic element: every free coordinate is its own fresh symbol.
    pub fn generic_element(&self, tag: &str) -> GroupElement {
        match self {
            Subgroup::Mask { dim, set } => {
                let mut g = GroupElement::identity(*dim);
                for &(i, j) in set {
                    g.set(i, j, Scalar::symbol(&format!("_{tag}{}_{}", i, j), 0.0));
                }
                g
            }
            Subgroup::Fibered { outer, inner } => {
                let g0 = outer.generic_element(&format!("{tag}o"));
                let h = inner.generic_element(&format!("{tag}i"));
                let g1 = &g0 * &h;
                join_blocks(&g0, &g1)
            }
        }
    }
}

fn fibered_mask_subset(set: &BTreeSet<(usize, usize)>, fib: &Subgroup) -> bool {
    // a coordinate mask sits inside a fibered product iff its generic element does
    let probe = Subgroup::Mask { dim: fib.dim(), set: set.clone() }.generic_element("m");
    fib.contains(&probe)
}

pub fn random_scalar<R: Rng>(rng: &mut R, symbols: &[Symbol]) -> Scalar {
    let mut s = Scalar::from_int(rng.gen_range(-3..=3));
    for sym in symbols {
        let c = rng.gen_range(-2..=2);
        if c != 0 {
            s += &Scalar::var(sym).scale(&crate::scalar::rat(c, 1));
        }
    }
    s
}

/// Split a block-diagonal 2d×2d element into its two d×d blocks.
pub fn split_blocks(g: &GroupElement) -> Option<(GroupElement, GroupElement)> {
    let dd = g.dim();
    if dd % 2 != 0 {
        return None;
    }
    let d = dd / 2;
    let mut g0 = GroupElement::identity(d);
    let mut g1 = GroupElement::identity(d);
    for ((i, j), v) in g.entries() {
        if v.is_zero() {
            continue;
        }
        if j < d {
            g0.set(i, j, v.clone());
        } else if i >= d {
            g1.set(i - d, j - d, v.clone());
        } else {
            return None;
        }
    }
    Some((g0, g1))
}

pub fn join_blocks(g0: &GroupElement, g1: &GroupElement) -> GroupElement {
    let d = g0.dim();
    let mut g = GroupElement::identity(2 * d);
    for ((i, j), v) in g0.entries() {
        if !v.is_zero() {
            g.set(i, j, v.clone());
        }
    }
    for ((i, j), v) in g1.entries() {
        if !v.is_zero() {
            g.set(i + d, j + d, v.clone());
        }
    }
    g
}

/// G_0 ≥ G_1 ≥ … ≥ G_{d+1}; groups past the stored list are trivial.
/// `length == None` encodes length −∞ (G_0 trivial).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prefiltration {
    dim: usize,
    length: Option<usize>,
    groups: Vec<Subgroup>,
}

impl Prefiltration {
    /// Build from G_0, G_1, …; the length is the last index with a nontrivial group.
    pub fn new(dim: usize, groups: Vec<Subgroup>) -> Self {
        let mut groups = groups;
        while groups.last().map(|g| g.is_trivial()).unwrap_or(false) {
            groups.pop();
        }
        let length = if groups.is_empty() { None } else { Some(groups.len() - 1) };
        Prefiltration { dim, length, groups }
    }

    pub fn trivial(dim: usize) -> Self {
        Prefiltration { dim, length: None, groups: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn length(&self) -> Option<usize> {
        self.length
    }

    pub fn group(&self, i: usize) -> Subgroup {
        self.groups.get(i).cloned().unwrap_or_else(|| Subgroup::trivial(self.dim))
    }

    pub fn group_ref(&self, i: usize) -> Option<&Subgroup> {
        self.groups.get(i)
    }

    pub fn groups(&self) -> &[Subgroup] {
        &self.groups
    }

    /// Gb[+t]_i = G_{i+t}
    pub fn shift(&self, t: usize) -> Self {
        let groups = self.groups.iter().skip(t).cloned().collect();
        Prefiltration::new(self.dim, groups)
    }

    /// Gb[/t]: G_j trivial for j ≥ t.
    pub fn quotient_mask(&self, t: usize) -> Self {
        let groups = self.groups.iter().take(t).cloned().collect();
        Prefiltration::new(self.dim, groups)
    }

    /// Gb^{d̄}_i = G_j for d_{j−1} < i ≤ d_j, with d_{−1} = −∞.
    /// `dbar` must cover indices 0..=length.
    pub fn reindex(&self, dbar: &[i64]) -> Result<Self, GroupError> {
        for i in 0..dbar.len() {
            for j in 0..dbar.len() - i {
                if dbar[i + j] < dbar[i] + dbar[j] {
                    return Err(GroupError::NotSuperadditive(i, j));
                }
            }
        }
        let len = match self.length {
            None => return Ok(self.clone()),
            Some(l) => l,
        };
        if dbar.len() < len + 1 {
            return Err(GroupError::ShortSequence(len + 1));
        }
        let top = dbar[len];
        let mut groups = Vec::new();
        for i in 0..=top.max(0) {
            let j = (0..=len).find(|&j| i <= dbar[j]).unwrap_or(len + 1);
            groups.push(self.group(j));
        }
        Ok(Prefiltration::new(self.dim, groups))
    }

    pub fn hirsch_length(&self) -> Result<usize, GroupError> {
        let len = self.length.ok_or(GroupError::InfiniteLength)?;
        let mut h = 0;
        for i in 1..=len {
            h += self.group(i).rank() - self.group(i + 1).rank();
        }
        Ok(h)
    }
}

/// Lower central series of UT(dim): G_i = {(r,c) : c − r ≥ i}, G_0 = G_1.
pub fn lower_central_series(dim: usize) -> Prefiltration {
    assert!(dim >= 2, "dim must be at least 2");
    let mut groups = vec![Subgroup::full(dim)];
    for i in 1..dim {
        let set = GroupElement::positions(dim).filter(|&(r, c)| c - r >= i).collect();
        groups.push(Subgroup::Mask { dim, set });
    }
    Prefiltration::new(dim, groups)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Validation {
    pub ok: bool,
    pub counterexample: Option<String>,
}

pub fn validate_prefiltration(p: &Prefiltration, samples: usize) -> Validation {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    validate_prefiltration_with(p, samples, &mut rng)
}

pub fn validate_prefiltration_with<R: Rng>(p: &Prefiltration, samples: usize, rng: &mut R) -> Validation {
    let fail = |msg: String| Validation { ok: false, counterexample: Some(msg) };
    let base = match p.group_ref(0) {
        Some(Subgroup::Fibered { outer, .. }) => outer.dim(),
        _ => p.dim(),
    };
    if base > 6 {
        return fail(format!("dimension {} exceeds 6", base));
    }
    let len = match p.length() {
        None => return Validation { ok: true, counterexample: None },
        Some(l) => l,
    };
    for i in 0..=len {
        let g = p.group(i);
        if g.dim() != p.dim() {
            return fail(format!("G_{i} has dimension {}", g.dim()));
        }
        if !g.is_bracket_closed() {
            return fail(format!("G_{i} is not bracket closed"));
        }
        if !p.group(i + 1).is_subset_of(&g) {
            return fail(format!("G_{} is not contained in G_{}", i + 1, i));
        }
    }
    // exact bracket condition
    for i in 0..=len {
        for j in i..=len {
            let gi = p.group(i);
            let gj = p.group(j);
            let target = p.group(i + j);
            match (&gi, &gj, &target) {
                (Subgroup::Mask { set: a, .. }, Subgroup::Mask { set: b, .. }, Subgroup::Mask { set: t, .. }) => {
                    for &(r, s) in a {
                        for &(u, v) in b {
                            if s == u && !t.contains(&(r, v)) {
                                return fail(format!("[G_{i}, G_{j}] escapes G_{} at ({}, {})", i + j, r + 1, v + 1));
                            }
                            if v == r && !t.contains(&(u, s)) {
                                return fail(format!("[G_{i}, G_{j}] escapes G_{} at ({}, {})", i + j, u + 1, s + 1));
                            }
                        }
                    }
                }
                _ => {
                    let x = gi.generic_element("x");
                    let y = gj.generic_element("y");
                    if !target.contains(&commutator(&x, &y)) {
                        return fail(format!("[G_{i}, G_{j}] escapes G_{} (generic elements)", i + j));
                    }
                }
            }
        }
    }
    let syms = [Symbol::new("s", std::f64::consts::PI)];
    for _ in 0..samples {
        let i = rng.gen_range(0..=len);
        let j = rng.gen_range(0..=len);
        let x = p.group(i).random_element(rng, &syms);
        let y = p.group(j).random_element(rng, &syms);
        let c = commutator(&x, &y);
        if !p.group(i + j).contains(&c) {
            return fail(format!("[{:?}, {:?}] = {:?} escapes G_{}", x, y, c, i + j));
        }
    }
    Validation { ok: true, counterexample: None }
}

pub fn int_element(dim: usize, entries: &[((usize, usize), i64)]) -> GroupElement {
    let mut g = GroupElement::identity(dim);
    for &((i, j), v) in entries {
        g.set(i, j, Scalar::from_bigint(BigInt::from(v)));
    }
    g
}
