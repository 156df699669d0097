//! Mal'cev coordinates on UT(d)/UT(d,Z), fundamental-domain reduction, the
//! cube construction and vertical Fourier analysis on grid functions.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::group::{join_blocks, GroupElement, Prefiltration, Subgroup};
use crate::lie::{self, LieElement};
use crate::polymap::{PolyError, PolyMap};
use crate::scalar::{floor_rat, Scalar};

pub const BOUNDARY_GUARD: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum NilError {
    #[error("dimension {0} not supported (2 ≤ d ≤ 4)")]
    Unsupported(usize),
    #[error("basis not adapted to the filtration at level {0}")]
    NotAdapted(usize),
    #[error("element is not in the lattice")]
    NotLattice,
    #[error("element has non-rational entries")]
    NotRational,
    #[error("fiber resolution {0} below 8")]
    Resolution(usize),
    #[error("p = {0} must be at least 2")]
    Exponent(f64),
    #[error("grid shape mismatch")]
    Shape,
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MalcevBasis {
    dim: usize,
    positions: Vec<(usize, usize)>,
}

impl MalcevBasis {
    /// Elementary matrices ordered by superdiagonal, then row.
    pub fn standard(dim: usize) -> Result<Self, NilError> {
        if !(2..=4).contains(&dim) {
            return Err(NilError::Unsupported(dim));
        }
        let mut positions: Vec<(usize, usize)> = GroupElement::positions(dim).collect();
        positions.sort_by_key(|&(i, j)| (j - i, i));
        Ok(MalcevBasis { dim, positions })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[(usize, usize)] {
        &self.positions
    }

    /// Each mask group G_i must be spanned by a tail of the basis.
    pub fn check_adapted(&self, p: &Prefiltration) -> Result<(), NilError> {
        for (i, g) in p.groups().iter().enumerate() {
            let set = match g {
                Subgroup::Mask { set, .. } => set,
                Subgroup::Fibered { .. } => return Err(NilError::NotAdapted(i)),
            };
            let tail = &self.positions[self.positions.len() - set.len()..];
            if !tail.iter().all(|p| set.contains(p)) {
                return Err(NilError::NotAdapted(i));
            }
        }
        Ok(())
    }

    pub fn to_coords2(&self, g: &GroupElement) -> Vec<Scalar> {
        let mut h = g.clone();
        let mut out = Vec::with_capacity(self.len());
        for &(i, j) in &self.positions {
            let u = h.get(i, j).clone();
            if !u.is_zero() {
                h = &GroupElement::elementary(self.dim, i, j, -&u) * &h;
            }
            out.push(u);
        }
        out
    }

    pub fn from_coords2(&self, u: &[Scalar]) -> GroupElement {
        let mut g = GroupElement::identity(self.dim);
        for (&(i, j), v) in self.positions.iter().zip(u) {
            if !v.is_zero() {
                g = &g * &GroupElement::elementary(self.dim, i, j, v.clone());
            }
        }
        g
    }

    pub fn to_coords1(&self, g: &GroupElement) -> Vec<Scalar> {
        let x = lie::log(g);
        self.positions.iter().map(|&(i, j)| x.get(i, j).clone()).collect()
    }

    pub fn from_coords1(&self, u: &[Scalar]) -> GroupElement {
        let mut x = LieElement::zero(self.dim);
        for (&(i, j), v) in self.positions.iter().zip(u) {
            x.set(i, j, v.clone());
        }
        lie::exp(&x)
    }

    /// Second-kind coordinates of a float matrix (row-major, d×d).
    pub fn to_coords2_f64(&self, m: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut h = m.to_vec();
        let mut out = Vec::with_capacity(self.len());
        for &(i, j) in &self.positions {
            let u = h[i * d + j];
            // left-multiply by I − u E_ij: row i −= u · row j
            for c in j + 1..d {
                h[i * d + c] -= u * h[j * d + c];
            }
            h[i * d + j] = 0.0;
            out.push(u);
        }
        out
    }

    pub fn from_coords2_f64(&self, u: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut g = identity_f64(d);
        for (&(i, j), &v) in self.positions.iter().zip(u) {
            right_mul_elem(&mut g, d, i, j, v);
        }
        g
    }

    /// Greedy reduction into [0,1)^d; returns the point and γ ∈ Γ with
    /// {g} = g·γ.
    pub fn frac_f64(&self, m: &[f64]) -> (NilPoint, GroupElement) {
        let (pt, steps) = self.reduce_f64(m);
        let d = self.dim;
        let mut gamma = GroupElement::identity(d);
        for (k, c) in steps {
            let (i, j) = self.positions[k];
            gamma = &gamma * &GroupElement::elementary(d, i, j, Scalar::from_int(-c));
        }
        (pt, gamma)
    }

    /// The representative alone, without building γ.
    pub fn frac_point_f64(&self, m: &[f64]) -> NilPoint {
        self.reduce_f64(m).0
    }

    fn reduce_f64(&self, m: &[f64]) -> (NilPoint, Vec<(usize, i64)>) {
        let d = self.dim;
        let mut h = m.to_vec();
        let mut steps = Vec::new();
        let mut boundary = Vec::new();
        for (k, &(i, j)) in self.positions.iter().enumerate() {
            let u = self.to_coords2_f64(&h)[k];
            let r = u.round();
            let c = if (u - r).abs() < BOUNDARY_GUARD {
                boundary.push(k);
                r
            } else {
                u.floor()
            };
            if c != 0.0 {
                right_mul_elem(&mut h, d, i, j, -c);
                steps.push((k, c as i64));
            }
        }
        let coords = self
            .to_coords2_f64(&h)
            .into_iter()
            .map(|v| if !(0.0..1.0).contains(&v) && (v.abs() < BOUNDARY_GUARD || (v - 1.0).abs() < BOUNDARY_GUARD) { 0.0 } else { v })
            .collect();
        (NilPoint { coords, exact: None, boundary }, steps)
    }

    /// Exact reduction for rational elements.
    pub fn frac_exact(&self, g: &GroupElement) -> Result<(NilPoint, GroupElement), NilError> {
        if !g.is_rational() {
            return Err(NilError::NotRational);
        }
        let d = self.dim;
        let mut h = g.clone();
        let mut gamma = GroupElement::identity(d);
        for (k, &(i, j)) in self.positions.iter().enumerate() {
            let u = self.to_coords2(&h)[k].constant_value().unwrap();
            let c = floor_rat(&u);
            if !c.is_zero() {
                let step = GroupElement::elementary(d, i, j, Scalar::from_bigint(-c));
                h = &h * &step;
                gamma = &gamma * &step;
            }
        }
        let exact: Vec<BigRational> = self.to_coords2(&h).iter().map(|s| s.constant_value().unwrap()).collect();
        let coords = exact.iter().map(crate::scalar::rat_to_f64).collect();
        Ok((NilPoint { coords, exact: Some(exact), boundary: Vec::new() }, gamma))
    }

    /// frac on a symbolic element through its float witnesses; exact when
    /// the element is rational.
    pub fn frac(&self, g: &GroupElement) -> (NilPoint, GroupElement) {
        if g.is_rational() {
            return self.frac_exact(g).unwrap();
        }
        self.frac_f64(&full_f64(g))
    }

    pub fn conj_in_coords(&self, gamma: &GroupElement) -> Result<ConjMap, NilError> {
        if !gamma.is_integral() {
            return Err(NilError::NotLattice);
        }
        let d = self.dim;
        let gi = gamma.inv();
        let n = self.len();
        let mut first = vec![vec![BigRational::zero(); n]; n];
        for (k, &(i, j)) in self.positions.iter().enumerate() {
            let img = &(&gi * &GroupElement::elementary(d, i, j, Scalar::one())) * gamma;
            for (r, &(a, b)) in self.positions.iter().enumerate() {
                first[k][r] = img.get(a, b).constant_value().unwrap();
            }
        }
        let syms: Vec<Scalar> = (0..n).map(|k| Scalar::symbol(&format!("_u{}", k + 1), 0.0)).collect();
        let g = self.from_coords2(&syms);
        let second = self.to_coords2(&(&(&gi * &g) * gamma));
        let unipotent_upper = (0..n).all(|k| (0..n).all(|r| if r < k { first[k][r].is_zero() } else if r == k { first[k][r].is_one() } else { true }));
        let integral = first.iter().flatten().all(|q| q.is_integer());
        // on the abelianization the map is the identity
        let top: Vec<usize> = (0..n).filter(|&k| self.positions[k].1 - self.positions[k].0 == 1).collect();
        let abelian_integral = top.iter().all(|&k| top.iter().all(|&r| first[k][r] == if k == r { BigRational::one() } else { BigRational::zero() }));
        Ok(ConjMap { first_kind: first, second_kind: second, symbols: syms, unipotent_upper, integral, abelian_integral })
    }
}

/// g ↦ γ⁻¹gγ in coordinates. Row k of `first_kind` is the image of X_k.
#[derive(Clone, Debug)]
pub struct ConjMap {
    pub first_kind: Vec<Vec<BigRational>>,
    /// Output second-kind coordinates as polynomials in `symbols`.
    pub second_kind: Vec<Scalar>,
    pub symbols: Vec<Scalar>,
    pub unipotent_upper: bool,
    pub integral: bool,
    pub abelian_integral: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NilPoint {
    pub coords: Vec<f64>,
    pub exact: Option<Vec<BigRational>>,
    /// Coordinates that landed within the guard of an integer.
    pub boundary: Vec<usize>,
}

pub fn identity_f64(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

/// m ← m·(I + v E_ij): column j += v · column i
fn right_mul_elem(m: &mut [f64], d: usize, i: usize, j: usize, v: f64) {
    for r in 0..d {
        m[r * d + j] += v * m[r * d + i];
    }
}

pub fn full_f64(g: &GroupElement) -> Vec<f64> {
    let d = g.dim();
    let mut m = g.eval_f64();
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

pub fn mul_f64(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for k in i..d {
            let x = a[i * d + k];
            if x == 0.0 {
                continue;
            }
            for j in k..d {
                out[i * d + j] += x * b[k * d + j];
            }
        }
    }
    out
}

/// G□_i = G_i ×_{G_{i+1}} G_i on block-diagonal matrices.
pub fn cube_filtration(p: &Prefiltration) -> Prefiltration {
    let groups = match p.length() {
        None => Vec::new(),
        Some(l) => (0..=l).map(|i| Subgroup::Fibered { outer: Box::new(p.group(i)), inner: Box::new(p.group(i + 1)) }).collect(),
    };
    Prefiltration::new(2 * p.dim(), groups)
}

/// n ↦ (g(n+k), g(n))
pub fn cube_naive(g: &PolyMap, k: i64) -> Result<PolyMap, NilError> {
    let shifted = g.shifted(&Scalar::from_int(k))?;
    let a = shifted.closed_form().ok_or(PolyError::BlackBox)?;
    let b = g.closed_form().ok_or(PolyError::BlackBox)?;
    Ok(PolyMap::closed(join_blocks(a, b)))
}

/// n ↦ ({g(k)}⁻¹ g(n+k) g(k)⁻¹ {g(k)}, g(n)), with {g(k)} = g(k)·γ.
pub fn cube_normalized(g: &PolyMap, k: i64, basis: &MalcevBasis) -> Result<PolyMap, NilError> {
    let gk = g.eval(k);
    let (_, gamma) = basis.frac(&gk);
    let shifted = g.shifted(&Scalar::from_int(k))?;
    let a = shifted.closed_form().ok_or(PolyError::BlackBox)?;
    let b = g.closed_form().ok_or(PolyError::BlackBox)?;
    let left = &(&(&gamma.inv() * &gk.inv()) * a) * &gamma;
    Ok(PolyMap::closed(join_blocks(&left, b)))
}

/// Complex samples on the grid Π [0,1) with `res[a]` points per axis; the
/// last axis is the vertical fiber. Row-major, last axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct VerticalFn {
    pub res: Vec<usize>,
    pub samples: Vec<Complex64>,
    pub freq: Option<i64>,
}

pub fn e(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, std::f64::consts::TAU * t)
}

impl VerticalFn {
    pub fn new(res: Vec<usize>, samples: Vec<Complex64>) -> Result<Self, NilError> {
        if res.iter().product::<usize>() != samples.len() || res.is_empty() {
            return Err(NilError::Shape);
        }
        Ok(VerticalFn { res, samples, freq: None })
    }

    pub fn from_fn(res: Vec<usize>, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let total: usize = res.iter().product();
        let mut samples = Vec::with_capacity(total);
        let mut x = vec![0.0; res.len()];
        for flat in 0..total {
            let mut r = flat;
            for a in (0..res.len()).rev() {
                x[a] = (r % res[a]) as f64 / res[a] as f64;
                r /= res[a];
            }
            samples.push(f(&x));
        }
        VerticalFn { res, samples, freq: None }
    }

    pub fn cells(&self) -> usize {
        self.samples.len()
    }

    fn fiber_len(&self) -> usize {
        *self.res.last().unwrap()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        let s: f64 = self.samples.iter().map(|z| z.norm().powf(p)).sum();
        (s / self.cells() as f64).powf(1.0 / p)
    }

    pub fn sub(&self, o: &VerticalFn) -> Result<VerticalFn, NilError> {
        if self.res != o.res {
            return Err(NilError::Shape);
        }
        Ok(VerticalFn { res: self.res.clone(), samples: self.samples.iter().zip(&o.samples).map(|(a, b)| a - b).collect(), freq: None })
    }

    pub fn add(&self, o: &VerticalFn) -> Result<VerticalFn, NilError> {
        if self.res != o.res {
            return Err(NilError::Shape);
        }
        Ok(VerticalFn { res: self.res.clone(), samples: self.samples.iter().zip(&o.samples).map(|(a, b)| a + b).collect(), freq: None })
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Shift along the fiber by `steps` grid points: F(g_l·y).
    pub fn vertical_shift(&self, steps: usize) -> VerticalFn {
        let r = self.fiber_len();
        let samples = self
            .samples
            .chunks(r)
            .flat_map(|fib| (0..r).map(move |t| fib[(t + steps) % r]))
            .collect();
        VerticalFn { res: self.res.clone(), samples, freq: None }
    }

    /// Checks F(g_l·y) = e(m t) F(y) on all fibers for one grid step t.
    pub fn is_vertical_character(&self, m: i64, tol: f64) -> bool {
        let r = self.fiber_len();
        let s = self.vertical_shift(1);
        let ph = e(m as f64 / r as f64);
        s.samples.iter().zip(&self.samples).all(|(a, b)| (a - ph * b).norm() <= tol)
    }

    pub fn to_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let axes: Vec<String> = (0..self.res.len()).map(|a| format!("i{a}")).collect();
        writeln!(w, "{},re,im", axes.join(","))?;
        writeln!(w, "# res={}", self.res.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("x"))?;
        for (flat, z) in self.samples.iter().enumerate() {
            let mut idx = vec![0; self.res.len()];
            let mut r = flat;
            for a in (0..self.res.len()).rev() {
                idx[a] = r % self.res[a];
                r /= self.res[a];
            }
            let idx: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
            writeln!(w, "{},{:e},{:e}", idx.join(","), z.re, z.im)?;
        }
        Ok(())
    }

    pub fn from_csv<R: BufRead>(r: R) -> Result<VerticalFn, NilError> {
        let bad = |m: String| NilError::Csv(m);
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("empty".into()))?.map_err(|e| bad(e.to_string()))?;
        let axes = header.split(',').count().checked_sub(2).ok_or_else(|| bad("header".into()))?;
        let res_line = lines.next().ok_or_else(|| bad("missing res".into()))?.map_err(|e| bad(e.to_string()))?;
        let res: Vec<usize> = res_line
            .strip_prefix("# res=")
            .ok_or_else(|| bad("missing res".into()))?
            .split('x')
            .map(|s| s.parse().map_err(|_| bad(format!("bad res {s}"))))
            .collect::<Result<_, _>>()?;
        if res.len() != axes {
            return Err(NilError::Shape);
        }
        let total: usize = res.iter().product();
        let mut samples = vec![Complex64::new(0.0, 0.0); total];
        let mut seen = vec![false; total];
        for line in lines {
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != axes + 2 {
                return Err(bad(format!("bad row {line}")));
            }
            let mut flat = 0;
            for a in 0..axes {
                let i: usize = f[a].parse().map_err(|_| bad(format!("bad index {}", f[a])))?;
                if i >= res[a] {
                    return Err(bad(format!("index {i} out of range")));
                }
                flat = flat * res[a] + i;
            }
            let re: f64 = f[axes].parse().map_err(|_| bad("bad re".into()))?;
            let im: f64 = f[axes + 1].parse().map_err(|_| bad("bad im".into()))?;
            samples[flat] = Complex64::new(re, im);
            seen[flat] = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(bad("missing samples".into()));
        }
        VerticalFn::new(res, samples)
    }
}

/// Fiberwise Fourier coefficient at frequency m, re-expanded as e(m t).
pub fn vertical_project(f: &VerticalFn, m: i64) -> Result<VerticalFn, NilError> {
    let r = f.fiber_len();
    if r < 8 {
        return Err(NilError::Resolution(r));
    }
    let tw: Vec<Complex64> = (0..r).map(|t| e((m * t as i64).rem_euclid(r as i64) as f64 / r as f64)).collect();
    let mut samples = Vec::with_capacity(f.cells());
    for fib in f.samples.chunks(r) {
        let c: Complex64 = fib.iter().zip(&tw).map(|(z, w)| z * w.conj()).sum::<Complex64>() / r as f64;
        samples.extend(tw.iter().map(|w| c * w));
    }
    Ok(VerticalFn { res: f.res.clone(), samples, freq: Some(m) })
}

/// All frequencies resolvable on the fiber, centered at 0.
pub fn fiber_frequencies(r: usize) -> Vec<i64> {
    let r = r as i64;
    (-(r - 1) / 2..=r / 2).collect()
}

#[derive(Clone, Debug)]
pub struct BesselReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Σ_m ‖F_m‖_p^p ≤ ‖F‖_p^p up to 10⁻⁸ per grid cell.
pub fn bessel_check(f: &VerticalFn, p: f64) -> Result<BesselReport, NilError> {
    if p < 2.0 {
        return Err(NilError::Exponent(p));
    }
    let mut lhs = 0.0;
    for m in fiber_frequencies(f.fiber_len()) {
        lhs += vertical_project(f, m)?.lp_norm(p).powf(p);
    }
    let rhs = f.lp_norm(p).powf(p);
    let tol = 1e-8 * f.cells() as f64;
    Ok(BesselReport { lhs, rhs, pass: lhs <= rhs + tol })
}

/// (Σ_{|α| ≤ j} ‖∂^α F‖_p^p)^{1/p} with ∂ a periodic symmetric difference quotient at
/// the grid spacing along each coordinate axis.
pub fn sobolev_norm(f: &VerticalFn, j: usize, p: f64) -> f64 {
    let mut total = 0.0;
    let mut frontier = vec![f.clone()];
    for _ in 0..=j {
        let mut next = Vec::new();
        for g in &frontier {
            total += g.lp_norm(p).powf(p);
            for a in 0..f.res.len() {
                next.push(difference(g, a));
            }
        }
        frontier = next;
    }
    total.powf(1.0 / p)
}

fn difference(f: &VerticalFn, axis: usize) -> VerticalFn {
    let n = f.res[axis];
    let stride: usize = f.res[axis + 1..].iter().product();
    let h = 1.0 / n as f64;
    let samples = (0..f.cells())
        .map(|flat| {
            let i = (flat / stride) % n;
            let base = flat - i * stride;
            let up = base + ((i + 1) % n) * stride;
            let dn = base + ((i + n - 1) % n) * stride;
            (f.samples[up] - f.samples[dn]) / (2.0 * h)
        })
        .collect();
    VerticalFn { res: f.res.clone(), samples, freq: None }
}

/// Integer coordinates of a lattice element, as i64.
pub fn lattice_coords(basis: &MalcevBasis, g: &GroupElement) -> Option<Vec<i64>> {
    basis
        .to_coords2(g)
        .iter()
        .map(|s| s.constant_value().filter(|q| q.is_integer()).and_then(|q| q.to_integer().to_i64()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heisenberg_coordinates() {
        let b = MalcevBasis::standard(3).unwrap();
        let (x, y, z) = (Scalar::symbol("x", 0.3), Scalar::symbol("y", 0.7), Scalar::symbol("z", 0.1));
        let mut g = GroupElement::identity(3);
        g.set(0, 1, x.clone());
        g.set(1, 2, y.clone());
        g.set(0, 2, z.clone());
        let u = b.to_coords2(&g);
        assert_eq!(u, vec![x.clone(), y.clone(), &z - &(&x * &y)]);
        assert_eq!(b.from_coords2(&u), g);
    }
}
