//! Weighted ergodic averages of small model systems against nilsequence
//! weights, a uniform sup over finite weight nets, and an estimator for the
//! autocorrelation density condition on bounded sequences.

use num_complex::Complex64;
use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equidist::{orbit, EquidistError};
use crate::nilmanifold::{e, sobolev_norm, VerticalFn};
use crate::polymap::PolyMap;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum WwError {
    #[error("empty weight family")]
    EmptyFamily,
    #[error("sequence of length {len} is too short for R = {r} and W = {w}")]
    WindowTooShort { len: usize, r: usize, w: usize },
    #[error("need L ≤ R and L ≥ 1")]
    BadRange,
    #[error("point has {0} coordinates, system needs {1}")]
    Dimension(usize, usize),
    #[error(transparent)]
    Orbit(#[from] EquidistError),
    #[error("weight grid has {0} axes, map needs {1}")]
    GridShape(usize, usize),
}

#[derive(Clone, Debug)]
pub enum SystemKind {
    /// x ↦ x + α on T^d
    Rotation(Vec<Scalar>),
    /// (x, y) ↦ (x + α, y + 2x + α) on T²
    Skew(Scalar),
    /// k ↦ k + step on Z_N, as the point k/N of T
    Cyclic { n: u64, step: u64 },
}

#[derive(Clone, Debug)]
pub struct ModelSystem {
    pub kind: SystemKind,
    pub ergodic: bool,
}

fn frac(t: f64) -> f64 {
    t - t.floor()
}

/// Degree-one scalars whose symbol parts are linearly independent; symbols
/// are taken to be independent over Q together with 1.
fn independent(alphas: &[Scalar]) -> bool {
    if alphas.iter().any(|a| a.degree() > 1) {
        return false;
    }
    let mut names: Vec<String> = alphas.iter().flat_map(|a| a.symbols()).map(|s| s.name().to_string()).collect();
    names.sort();
    names.dedup();
    let rows: Vec<Vec<num_rational::BigRational>> = alphas
        .iter()
        .map(|a| {
            names
                .iter()
                .map(|nm| a.coefficients_in(nm).get(1).and_then(|c| c.constant_value()).unwrap_or_default())
                .collect()
        })
        .collect();
    rank(rows) == alphas.len()
}

fn rank(mut m: Vec<Vec<num_rational::BigRational>>) -> usize {
    use num_traits::Zero;
    let cols = m.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        for i in 0..m.len() {
            if i != r && !m[i][c].is_zero() {
                let k = &m[i][c] / &m[r][c];
                for j in 0..cols {
                    let v = &m[r][j] * &k;
                    m[i][j] -= v;
                }
            }
        }
        r += 1;
    }
    r
}

impl ModelSystem {
    pub fn rotation(alpha: Vec<Scalar>) -> Self {
        let ergodic = independent(&alpha);
        ModelSystem { kind: SystemKind::Rotation(alpha), ergodic }
    }

    pub fn skew(alpha: Scalar) -> Self {
        let ergodic = independent(std::slice::from_ref(&alpha));
        ModelSystem { kind: SystemKind::Skew(alpha), ergodic }
    }

    pub fn cyclic(n: u64, step: u64) -> Self {
        ModelSystem { kind: SystemKind::Cyclic { n, step }, ergodic: step.gcd(&n) == 1 }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            SystemKind::Rotation(a) => a.len(),
            SystemKind::Skew(_) => 2,
            SystemKind::Cyclic { .. } => 1,
        }
    }

    /// Tⁿx in closed form.
    pub fn point(&self, x: &[f64], n: u64) -> Vec<f64> {
        match &self.kind {
            SystemKind::Rotation(a) => x.iter().zip(a).map(|(xi, ai)| frac(xi + n as f64 * ai.eval_f64())).collect(),
            SystemKind::Skew(a) => {
                let a = a.eval_f64();
                let nf = n as f64;
                // y_n = y + 2n·x + n²·α
                let sq = frac(((n as u128 * n as u128) as f64) * a);
                vec![frac(x[0] + nf * a), frac(x[1] + frac(2.0 * nf * x[0]) + sq)]
            }
            SystemKind::Cyclic { n: m, step } => {
                let k = (x[0] * *m as f64).round() as u128;
                vec![((k + n as u128 * *step as u128) % *m as u128) as f64 / *m as f64]
            }
        }
    }
}

/// Trigonometric polynomial Σ c·e(k·x).
#[derive(Clone, Debug)]
pub struct ObsFn {
    pub terms: Vec<(Complex64, Vec<i64>)>,
}

impl ObsFn {
    pub fn zero() -> Self {
        ObsFn { terms: Vec::new() }
    }

    pub fn constant(c: Complex64, dim: usize) -> Self {
        ObsFn { terms: vec![(c, vec![0; dim])] }
    }

    pub fn character(k: Vec<i64>) -> Self {
        ObsFn { terms: vec![(Complex64::new(1.0, 0.0), k)] }
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(c, k)| c * e(k.iter().zip(x).map(|(ki, xi)| *ki as f64 * xi).sum::<f64>()))
            .sum()
    }

    pub fn sup_bound(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.norm()).sum()
    }

    pub fn scale(&self, s: Complex64) -> ObsFn {
        ObsFn { terms: self.terms.iter().map(|(c, k)| (c * s, k.clone())).collect() }
    }

    pub fn add(&self, o: &ObsFn) -> ObsFn {
        ObsFn { terms: self.terms.iter().chain(&o.terms).cloned().collect() }
    }
}

/// Grid points per axis when sampling closed-form weights for their norm.
pub const SOBOLEV_GRID: usize = 64;

#[derive(Clone, Debug)]
pub enum NilWeight {
    Constant(Complex64),
    /// c·e(θn), the 1-step nilsequence F(θn) with F = c·e(x) on T.
    Character { theta: f64, c: Complex64 },
    /// F({g(n)}) with F sampled on a grid in second-kind coordinates.
    Nil { map: PolyMap, f: VerticalFn },
}

/// k = Σ_{r=1}^{l} (d_r − d_{r+1}) C(l, r−1), d_r = dim G_r.
pub fn sobolev_order(dims: &[usize]) -> usize {
    let l = dims.len();
    let mut k = 0;
    for r in 1..=l {
        let next = dims.get(r).copied().unwrap_or(0);
        k += (dims[r - 1] - next) * binom(l, r - 1);
    }
    k
}

fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// dim G_r for the lower central series of UT(d), r = 1..d−1.
pub fn lcs_dims(d: usize) -> Vec<usize> {
    (1..d).map(|r| (r..d).map(|s| d - s).sum()).collect()
}

impl NilWeight {
    pub fn character(theta: f64) -> Self {
        NilWeight::Character { theta, c: Complex64::new(1.0, 0.0) }
    }

    /// a_1, …, a_N
    pub fn values(&self, n: usize) -> Result<Vec<Complex64>, WwError> {
        match self {
            NilWeight::Constant(c) => Ok(vec![*c; n]),
            NilWeight::Character { theta, c } => Ok((1..=n).map(|k| c * e(frac(k as f64 * theta))).collect()),
            NilWeight::Nil { map, f } => {
                let coords = map.dim() * (map.dim() - 1) / 2;
                if f.res.len() != coords {
                    return Err(WwError::GridShape(f.res.len(), coords));
                }
                let o = orbit(map, 1, 1, n)?;
                Ok(o.points.iter().map(|p| lookup(f, &p.coords)).collect())
            }
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            NilWeight::Constant(c) => c.norm(),
            NilWeight::Character { c, .. } => c.norm(),
            NilWeight::Nil { f, .. } => f.max_abs(),
        }
    }

    /// W^{k,2^l} norm of F with k, l from the filtration of the ambient group.
    pub fn sobolev(&self) -> f64 {
        match self {
            NilWeight::Constant(c) => c.norm(),
            NilWeight::Character { c, .. } => {
                let grid = VerticalFn::from_fn(vec![SOBOLEV_GRID], |x| c * e(x[0]));
                sobolev_norm(&grid, sobolev_order(&[1]), 2.0)
            }
            NilWeight::Nil { map, f } => {
                let dims = lcs_dims(map.dim());
                sobolev_norm(f, sobolev_order(&dims), (1u64 << dims.len()) as f64)
            }
        }
    }
}

/// Sample of the cell containing x.
fn lookup(f: &VerticalFn, x: &[f64]) -> Complex64 {
    let mut flat = 0;
    for (a, &r) in f.res.iter().enumerate() {
        let i = ((frac(x[a]) * r as f64).floor() as usize).min(r - 1);
        flat = flat * r + i;
    }
    f.samples[flat]
}

/// f(Tⁿx₀) for n = 1..=N
fn observations(sys: &ModelSystem, f: &ObsFn, x0: &[f64], n: usize) -> Result<Vec<Complex64>, WwError> {
    if x0.len() != sys.dim() {
        return Err(WwError::Dimension(x0.len(), sys.dim()));
    }
    Ok((1..=n as u64).into_par_iter().map(|k| f.eval(&sys.point(x0, k))).collect())
}

/// (1/N) Σ_{n=1}^{N} a_n f(Tⁿx₀)
pub fn ww_avg(sys: &ModelSystem, f: &ObsFn, x0: &[f64], w: &NilWeight, n: usize) -> Result<Complex64, WwError> {
    let obs = observations(sys, f, x0, n)?;
    let a = w.values(n)?;
    let s: Complex64 = a.iter().zip(&obs).map(|(x, y)| x * y).sum();
    Ok(s / n as f64)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupRow {
    #[serde(rename = "N")]
    pub n: usize,
    /// sup over the family of |avg| / ‖F‖_W
    pub sup: f64,
    pub sup_raw: f64,
    pub argmax: usize,
}

pub fn ww_uniform_sup(
    sys: &ModelSystem,
    f: &ObsFn,
    x0: &[f64],
    family: &[NilWeight],
    ladder: &[usize],
) -> Result<Vec<SupRow>, WwError> {
    if family.is_empty() {
        return Err(WwError::EmptyFamily);
    }
    let top = ladder.iter().copied().max().unwrap_or(0);
    let obs = observations(sys, f, x0, top)?;
    // per weight: |avg| at each ladder point, and its norm
    let per: Vec<(Vec<f64>, f64)> = family
        .par_iter()
        .map(|w| {
            let a = w.values(top)?;
            let mut acc = Complex64::new(0.0, 0.0);
            let mut out = Vec::with_capacity(ladder.len());
            let mut sorted: Vec<(usize, usize)> = ladder.iter().copied().enumerate().map(|(i, n)| (n, i)).collect();
            sorted.sort();
            let mut vals = vec![0.0; ladder.len()];
            let mut k = 0;
            for (n, i) in sorted {
                while k < n {
                    acc += a[k] * obs[k];
                    k += 1;
                }
                vals[i] = if n == 0 { 0.0 } else { (acc / n as f64).norm() };
            }
            out.extend(vals);
            Ok((out, w.sobolev()))
        })
        .collect::<Result<_, WwError>>()?;
    Ok(ladder
        .iter()
        .enumerate()
        .map(|(li, &n)| {
            let mut best = (0.0, 0.0, 0);
            for (wi, (vals, norm)) in per.iter().enumerate() {
                let normalized = if *norm > 0.0 { vals[li] / norm } else { 0.0 };
                if normalized > best.0 || wi == 0 {
                    best = (normalized, best.1, wi);
                }
                best.1 = f64::max(best.1, vals[li]);
            }
            SupRow { n, sup: best.0, sup_raw: best.1, argmax: best.2 }
        })
        .collect())
}

/// {e(θ_k n)} with θ_k = {−α + k/r}, k < r; k = 0 resonates with e(x).
pub fn character_net(alpha: f64, r: usize) -> Vec<NilWeight> {
    (0..r).map(|k| NilWeight::character(frac(-alpha + k as f64 / r as f64))).collect()
}

pub fn doubling_ladder(from: u32, to: u32) -> Vec<usize> {
    (from..=to).map(|p| 1usize << p).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BfkoReport {
    /// min over W/2 ≤ w ≤ W of |S ∩ [0, w]| / (w + 1)
    pub density: f64,
    /// |S ∩ [0, W]| / (W + 1)
    pub density_at_w: f64,
    pub count: usize,
    pub sample: Vec<usize>,
}

pub const BFKO_SAMPLE: usize = 32;

/// S_{δ,L,R} = {a ≤ W : |E_{g∈[1,n]} c(g)·conj c(g+a)| < δ for all L ≤ n ≤ R}.
pub fn bfko_estimate(c: &[Complex64], delta: f64, l: usize, r: usize, w: usize) -> Result<BfkoReport, WwError> {
    if l == 0 || l > r {
        return Err(WwError::BadRange);
    }
    if c.len() < r + w + 1 {
        return Err(WwError::WindowTooShort { len: c.len(), r, w });
    }
    let member: Vec<bool> = (0..=w)
        .into_par_iter()
        .map(|a| {
            let mut acc = Complex64::new(0.0, 0.0);
            for g in 1..=r {
                acc += c[g] * c[g + a].conj();
                if g >= l && (acc / g as f64).norm() >= delta {
                    return false;
                }
            }
            true
        })
        .collect();
    let mut count = 0;
    let mut density = f64::INFINITY;
    for (a, &m) in member.iter().enumerate() {
        count += m as usize;
        if 2 * a >= w {
            density = density.min(count as f64 / (a + 1) as f64);
        }
    }
    let sample = member.iter().enumerate().filter(|(_, &m)| m).map(|(a, _)| a).take(BFKO_SAMPLE).collect();
    Ok(BfkoReport { density, density_at_w: count as f64 / (w + 1) as f64, count, sample })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders() {
        assert_eq!(sobolev_order(&[1]), 1);
        assert_eq!(lcs_dims(3), vec![3, 1]);
        // Heisenberg: (3−1)·1 + (1−0)·2
        assert_eq!(sobolev_order(&lcs_dims(3)), 4);
        assert_eq!(lcs_dims(4), vec![6, 3, 1]);
    }

    #[test]
    fn skew_closed_form_matches_iteration() {
        let sys = ModelSystem::skew(Scalar::symbol("a", 0.3819660112501051));
        let (mut x, mut y) = (0.1, 0.7);
        let a = 0.3819660112501051;
        for n in 1..50u64 {
            y = frac(y + 2.0 * x + a);
            x = frac(x + a);
            let p = sys.point(&[0.1, 0.7], n);
            let d = |u: f64, v: f64| (frac(u - v + 0.5) - 0.5).abs();
            assert!(d(p[0], x) < 1e-9 && d(p[1], y) < 1e-9);
        }
    }
}
