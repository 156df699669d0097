//! Walsh systems: (a,b)-reductions, cheating, certified complexity bounds,
//! the closed recursion bounding complexity, and PET weight vectors.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::finsets::{is_polynomial_sets, subsets, Set, SetMap};
use crate::group::{GroupElement, Prefiltration};
use crate::polymap::{is_polynomial, PolyError, PolyMap};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum WalshError {
    #[error("system must start with the identity map")]
    MissingIdentity,
    #[error("maps disagree in dimension")]
    DimMismatch,
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("no certificate within depth {cap} ({nodes} nodes searched)")]
    DepthExceeded { cap: usize, nodes: usize, partial: Vec<CertStep> },
    #[error("search budget of {0} nodes exhausted")]
    Budget(usize),
    #[error("certificate replay failed at step {0}: {1}")]
    Replay(usize, String),
    #[error("map is not polynomial for the filtration")]
    NotPolynomial,
    #[error("chosen map is not of maximal level")]
    NotMaximal,
    #[error("weight vector did not descend: {0:?} vs {1:?}")]
    NoDescent(WeightVector, WeightVector),
    #[error("empty system")]
    Empty,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalshSystem {
    maps: Vec<PolyMap>,
    filtration: Prefiltration,
}

impl WalshSystem {
    /// `maps` excludes g₀ ≡ 1, which is prepended.
    pub fn new(maps: Vec<PolyMap>, filtration: Prefiltration) -> Result<Self, WalshError> {
        let dim = filtration.dim();
        if maps.iter().any(|m| m.dim() != dim) {
            return Err(WalshError::DimMismatch);
        }
        let mut all = vec![PolyMap::identity(dim)];
        all.extend(maps);
        Ok(WalshSystem { maps: all, filtration })
    }

    pub fn from_full(maps: Vec<PolyMap>, filtration: Prefiltration) -> Result<Self, WalshError> {
        match maps.first() {
            Some(m) if m.is_identity() => {}
            _ => return Err(WalshError::MissingIdentity),
        }
        Ok(WalshSystem { maps, filtration })
    }

    pub fn maps(&self) -> &[PolyMap] {
        &self.maps
    }

    pub fn filtration(&self) -> &Prefiltration {
        &self.filtration
    }

    /// Number of maps besides g₀.
    pub fn size(&self) -> usize {
        self.maps.len() - 1
    }

    pub fn is_trivial(&self) -> bool {
        self.maps.len() == 1
    }
}

/// ⟨g|h⟩_{a,b}(n) = g(n) g(a+n+b)⁻¹ h(a+n+b)
pub fn bracket(g: &PolyMap, h: &PolyMap, a: &Scalar, b: &Scalar) -> Result<PolyMap, PolyError> {
    let s = a + b;
    let gs = g.shifted(&s)?;
    let hs = h.shifted(&s)?;
    let gc = g.closed_form().ok_or(PolyError::BlackBox)?;
    let gsc = gs.closed_form().unwrap();
    let hsc = hs.closed_form().unwrap();
    Ok(PolyMap::closed(&(gc * &gsc.inv()) * hsc))
}

/// Reduction with the map at `top` playing the role of g_j.
pub fn reduce_at(s: &WalshSystem, top: usize, a: &Scalar, b: &Scalar) -> Result<WalshSystem, WalshError> {
    if s.is_trivial() {
        return Ok(s.clone());
    }
    let g = &s.maps[top];
    let rest: Vec<PolyMap> = s.maps.iter().enumerate().filter(|(i, _)| *i != top).map(|(_, m)| m.clone()).collect();
    let mut maps = rest.clone();
    for h in &rest {
        maps.push(bracket(g, h, a, b)?);
    }
    Ok(WalshSystem { maps, filtration: s.filtration.clone() })
}

/// The (a,b)-reduction g′ ⊎ ⟨g_j|g′⟩.
pub fn reduce(s: &WalshSystem, a: &Scalar, b: &Scalar) -> Result<WalshSystem, WalshError> {
    let top = s.maps.len() - 1;
    reduce_at(s, top, a, b)
}

/// Where each input map went under cheating: `Some(i)` is its class index in
/// the output, `None` means it was constant and merged into g₀.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheatWitness {
    pub assignment: Vec<Option<usize>>,
}

fn map_key(m: &PolyMap) -> (usize, GroupElement) {
    (m.degree(), m.closed_form().cloned().unwrap_or_else(|| GroupElement::identity(m.dim())))
}

/// Strip constants, merge maps equal up to a right constant, dedupe and sort.
/// Each class is represented by g·g(0)⁻¹.
pub fn cheat_normalize(s: &WalshSystem) -> Result<(WalshSystem, CheatWitness), WalshError> {
    let dim = s.filtration.dim();
    let mut reps: Vec<PolyMap> = Vec::new();
    let mut raw: Vec<Option<usize>> = Vec::new();
    for m in &s.maps {
        let r = m.normalize_right()?;
        if r.is_identity() {
            raw.push(None);
            continue;
        }
        match reps.iter().position(|x| x == &r) {
            Some(i) => raw.push(Some(i)),
            None => {
                reps.push(r);
                raw.push(Some(reps.len() - 1));
            }
        }
    }
    let mut order: Vec<usize> = (0..reps.len()).collect();
    order.sort_by(|&i, &j| map_key(&reps[i]).cmp(&map_key(&reps[j])));
    let mut new_pos = vec![0; reps.len()];
    for (k, &i) in order.iter().enumerate() {
        new_pos[i] = k + 1;
    }
    let assignment = raw.iter().map(|r| r.map(|i| new_pos[i])).collect();
    let mut maps = vec![PolyMap::identity(dim)];
    maps.extend(order.iter().map(|&i| reps[i].clone()));
    Ok((WalshSystem { maps, filtration: s.filtration.clone() }, CheatWitness { assignment }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CertStep {
    Cheat { witness: CheatWitness, size: usize },
    Reduce { top: usize, a: String, b: String },
}

#[derive(Clone, Debug)]
pub struct ComplexityCertificate {
    pub root: WalshSystem,
    pub steps: Vec<CertStep>,
    pub bound: usize,
    pub nodes: usize,
}

pub fn reduction_symbols(depth: usize) -> (Scalar, Scalar) {
    (Scalar::symbol(&format!("_a{}", depth + 1), 0.0), Scalar::symbol(&format!("_b{}", depth + 1), 0.0))
}

pub const DEFAULT_BUDGET: usize = 200_000;

struct Search {
    nodes: usize,
    budget: usize,
    failed: HashSet<(String, usize)>,
}

impl Search {
    fn dfs(&mut self, sys: &WalshSystem, depth: usize, remaining: usize) -> Result<Option<Vec<CertStep>>, WalshError> {
        if sys.is_trivial() {
            return Ok(Some(Vec::new()));
        }
        if remaining == 0 {
            return Ok(None);
        }
        let key = (format!("{:?}", sys.maps), remaining);
        if self.failed.contains(&key) {
            return Ok(None);
        }
        let mut tops: Vec<usize> = (1..sys.maps.len()).collect();
        tops.sort_by(|&i, &j| sys.maps[j].degree().cmp(&sys.maps[i].degree()).then(j.cmp(&i)));
        let (a, b) = reduction_symbols(depth);
        for top in tops {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(WalshError::Budget(self.budget));
            }
            let red = reduce_at(sys, top, &a, &b)?;
            let (next, witness) = cheat_normalize(&red)?;
            if let Some(mut tail) = self.dfs(&next, depth + 1, remaining - 1)? {
                let mut steps = vec![
                    CertStep::Reduce { top, a: a_name(&a), b: a_name(&b) },
                    CertStep::Cheat { witness, size: next.size() },
                ];
                steps.append(&mut tail);
                return Ok(Some(steps));
            }
        }
        self.failed.insert(key);
        Ok(None)
    }
}

fn a_name(s: &Scalar) -> String {
    s.symbols()[0].name().to_string()
}

/// Iterative deepening search for a reduction/cheating derivation.
pub fn complexity_certify(s: &WalshSystem, depth_cap: Option<usize>) -> Result<ComplexityCertificate, WalshError> {
    complexity_certify_with_budget(s, depth_cap, DEFAULT_BUDGET)
}

pub fn complexity_certify_with_budget(
    s: &WalshSystem,
    depth_cap: Option<usize>,
    budget: usize,
) -> Result<ComplexityCertificate, WalshError> {
    let cap = match depth_cap {
        Some(c) => c,
        None => {
            let d = s.filtration.length().map(|l| l as u32);
            match bound_recursion(d, s.size() as u128) {
                Some(v) if v < 64 => v as usize + 1,
                _ => 64,
            }
        }
    };
    let (root, witness) = cheat_normalize(s)?;
    let mut search = Search { nodes: 0, budget, failed: HashSet::new() };
    for k in 0..=cap {
        if let Some(tail) = search.dfs(&root, 0, k)? {
            let mut steps = vec![CertStep::Cheat { witness, size: root.size() }];
            let bound = tail.iter().filter(|st| matches!(st, CertStep::Reduce { .. })).count();
            steps.extend(tail);
            return Ok(ComplexityCertificate { root: s.clone(), steps, bound, nodes: search.nodes });
        }
    }
    Err(WalshError::DepthExceeded { cap, nodes: search.nodes, partial: vec![CertStep::Cheat { witness, size: root.size() }] })
}

/// Re-execute a certificate; returns the number of reductions.
pub fn replay(cert: &ComplexityCertificate) -> Result<usize, WalshError> {
    let mut cur = cert.root.clone();
    let mut reductions = 0;
    for (i, st) in cert.steps.iter().enumerate() {
        match st {
            CertStep::Cheat { witness, size } => {
                let (next, w) = cheat_normalize(&cur)?;
                if &w != witness || next.size() != *size {
                    return Err(WalshError::Replay(i, "cheating witness differs".into()));
                }
                cur = next;
            }
            CertStep::Reduce { top, a, b } => {
                if *top == 0 || *top >= cur.maps.len() {
                    return Err(WalshError::Replay(i, format!("top index {top} out of range")));
                }
                cur = reduce_at(&cur, *top, &Scalar::symbol(a, 0.0), &Scalar::symbol(b, 0.0))?;
                reductions += 1;
            }
        }
    }
    if !cur.is_trivial() {
        return Err(WalshError::Replay(cert.steps.len(), "did not reach the trivial system".into()));
    }
    if reductions != cert.bound {
        return Err(WalshError::Replay(cert.steps.len(), "bound differs from reduction count".into()));
    }
    Ok(reductions)
}

/// Every map of the system passes is_polynomial for its filtration.
pub fn system_is_polynomial(s: &WalshSystem) -> Result<bool, WalshError> {
    for m in &s.maps {
        if !is_polynomial(m, &s.filtration)?.holds() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Saturating bound arithmetic; `None` means the value exceeds u128.
pub type Bound = Option<u128>;

/// c(d, j) with d = None standing for −∞.
pub fn bound_recursion(d: Option<u32>, j: u128) -> Bound {
    match d {
        None => Some(0),
        Some(0) => Some(j),
        Some(d) => c_prime_uniform(d, j, 1, 0),
    }
}

/// c′(d, j, s, …, s, c) where all j sizes share the value s.
fn c_prime_uniform(d: u32, j: u128, s: u128, c: u128) -> Bound {
    let (mut j, mut s, mut c) = (j, s, c);
    let mut acc: u128 = 0;
    loop {
        if j == 0 {
            return acc.checked_add(c);
        }
        if c > 0 {
            // c′(d,j,s,c) = c′(d,j,2s,c−1) + 1, unrolled c times
            acc = acc.checked_add(c)?;
            s = if c >= 128 { return None } else { s.checked_mul(1u128 << c)? };
            c = 0;
            continue;
        }
        // c′(d,j,s,0) = c′(d,j−1,2s,…,c(d−1,2s)) + 1
        let two_s = s.checked_mul(2)?;
        let inner = bound_recursion(if d == 0 { None } else { Some(d - 1) }, two_s)?;
        acc = acc.checked_add(1)?;
        j -= 1;
        s = two_s;
        c = inner;
    }
}

/// c′(d, j, |h₀|, …, |h_{j−1}|, c_j) for arbitrary sizes.
pub fn bound_recursion_general(d: Option<u32>, sizes: &[u128], cj: u128) -> Bound {
    let d = match d {
        None => return Some(0),
        Some(d) => d,
    };
    let mut sizes = sizes.to_vec();
    let mut c = cj;
    let mut acc: u128 = 0;
    loop {
        if sizes.is_empty() {
            return acc.checked_add(c);
        }
        if c > 0 {
            acc = acc.checked_add(c)?;
            if c >= 128 {
                return None;
            }
            for v in sizes.iter_mut() {
                *v = v.checked_mul(1u128 << c)?;
            }
            c = 0;
            continue;
        }
        let last = sizes.pop().unwrap();
        let inner = bound_recursion(if d == 0 { None } else { Some(d - 1) }, last.checked_mul(2)?)?;
        for v in sizes.iter_mut() {
            *v = v.checked_mul(2)?;
        }
        acc = acc.checked_add(1)?;
        c = inner;
    }
}

/// Level → number of classes.
#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WeightVector(pub BTreeMap<usize, usize>);

impl WeightVector {
    /// PET order: the lowest level where the counts differ decides.
    pub fn pet_cmp(&self, other: &Self) -> Ordering {
        let levels: std::collections::BTreeSet<usize> = self.0.keys().chain(other.0.keys()).copied().collect();
        for l in levels {
            let a = self.0.get(&l).copied().unwrap_or(0);
            let b = other.0.get(&l).copied().unwrap_or(0);
            if a != b {
                return a.cmp(&b);
            }
        }
        Ordering::Equal
    }

    pub fn precedes(&self, other: &Self) -> bool {
        self.pet_cmp(other) == Ordering::Less
    }
}

/// Greatest l with g ∈ poly(P[+l]); `None` for the identity.
pub fn pet_level(g: &SetMap, p: &Prefiltration) -> Result<Option<usize>, WalshError> {
    if g.is_identity() {
        return Ok(None);
    }
    if is_polynomial_sets(g, p).is_err() {
        return Err(WalshError::NotPolynomial);
    }
    let mut l = 0;
    while is_polynomial_sets(g, &p.shift(l + 1)).is_ok() {
        l += 1;
    }
    Ok(Some(l))
}

fn lt_level(a: Option<usize>, b: Option<usize>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x < y,
        (Some(_), None) => true,
        _ => false,
    }
}

/// g ~ h iff l(g) = l(h) < l(g⁻¹h), on the common universe.
pub fn pet_equivalent(g: &SetMap, h: &SetMap, p: &Prefiltration) -> Result<bool, WalshError> {
    let u = g.universe() & h.universe();
    let (g, h) = (g.restrict(u), h.restrict(u));
    let lg = pet_level(&g, p)?;
    let lh = pet_level(&h, p)?;
    if lg != lh || lg.is_none() {
        return Ok(false);
    }
    let q = g.inv().mul(&h).map_err(|_| WalshError::DimMismatch)?;
    Ok(lt_level(lg, pet_level(&q, p)?))
}

pub fn weight_vector(a: &[SetMap], p: &Prefiltration) -> Result<WeightVector, WalshError> {
    let mut classes: BTreeMap<usize, Vec<&SetMap>> = BTreeMap::new();
    for g in a {
        let l = match pet_level(g, p)? {
            Some(l) => l,
            None => continue,
        };
        let reps = classes.entry(l).or_default();
        let mut found = false;
        for r in reps.iter() {
            if pet_equivalent(g, r, p)? {
                found = true;
                break;
            }
        }
        if !found {
            reps.push(g);
        }
    }
    Ok(WeightVector(classes.into_iter().map(|(l, v)| (l, v.len())).collect()))
}

/// One PET step. All maps are restricted to U ∖ ∪M so that they share a
/// domain; both weight vectors are computed there.
pub fn pet_step(
    a: &[SetMap],
    h: &SetMap,
    b: &[GroupElement],
    m: &[Set],
    p: &Prefiltration,
) -> Result<(WeightVector, WeightVector), WalshError> {
    if a.is_empty() {
        return Err(WalshError::Empty);
    }
    let used = m.iter().fold(0, |acc, s| acc | s);
    let u = a.iter().fold(h.universe(), |acc, g| acc & g.universe()) & !used;
    let lh = pet_level(&h.restrict(u), p)?;
    for g in a {
        if lt_level(lh, pet_level(&g.restrict(u), p)?) {
            return Err(WalshError::NotMaximal);
        }
    }
    let hinv = h.restrict(u).inv();
    let mut out: Vec<SetMap> = Vec::new();
    for g in a {
        for &alpha in m {
            let sd = g.sym_derivative(alpha).map_err(|_| WalshError::DimMismatch)?.restrict(u);
            let base = hinv.mul(&g.restrict(u)).and_then(|x| x.mul(&sd)).map_err(|_| WalshError::DimMismatch)?;
            for bb in b {
                let c = base.conj_by(bb);
                if !c.is_identity() && !out.contains(&c) {
                    out.push(c);
                }
            }
        }
    }
    let before: Vec<SetMap> = a.iter().map(|g| g.restrict(u)).collect();
    let w_after = weight_vector(&out, p)?;
    let w_before = weight_vector(&before, p)?;
    if !w_after.precedes(&w_before) {
        return Err(WalshError::NoDescent(w_after, w_before));
    }
    Ok((w_after, w_before))
}

/// All nonempty subsets of `u`, for building step families.
pub fn nonempty_subsets(u: Set) -> Vec<Set> {
    subsets(u).skip(1).collect()
}
