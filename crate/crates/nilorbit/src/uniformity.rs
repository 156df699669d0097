//! Gowers norms on Z_N, the Cauchy–Schwarz–Gowers inequality, a finite-window
//! van der Corput estimate, and metastability for multiplicator averages.

use num_bigint::BigUint;
use num_complex::Complex64;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nilmanifold::e;

#[derive(Debug, Error)]
pub enum UniformityError {
    #[error("radicand {0} is negative beyond the guard")]
    NegativeRadicand(f64),
    #[error("sequences have different periods")]
    Mismatch,
    #[error("need {0}")]
    Bad(String),
    #[error("metastability verification failed: oscillation bound {0} ≥ ε")]
    VerificationFailed(f64),
}

/// A function on Z_N.
#[derive(Clone, Debug, PartialEq)]
pub struct SeqFn {
    pub samples: Vec<Complex64>,
}

impl SeqFn {
    pub fn new(samples: Vec<Complex64>) -> Self {
        SeqFn { samples }
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> Complex64) -> Self {
        SeqFn { samples: (0..n).map(f).collect() }
    }

    pub fn period(&self) -> usize {
        self.samples.len()
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn at(&self, i: usize) -> Complex64 {
        self.samples[i % self.samples.len()]
    }

    /// Δ_k f = f(· + k) · conj f
    pub fn mult_derivative(&self, k: usize) -> SeqFn {
        SeqFn::from_fn(self.period(), |x| self.at(x + k) * self.samples[x].conj())
    }

    pub fn shift(&self, k: usize) -> SeqFn {
        SeqFn::from_fn(self.period(), |x| self.at(x + k))
    }

    pub fn conj(&self) -> SeqFn {
        SeqFn::from_fn(self.period(), |x| self.samples[x].conj())
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        (self.samples.iter().map(|z| z.norm().powf(p)).sum::<f64>() / self.period() as f64).powf(1.0 / p)
    }
}

const RADICAND_GUARD: f64 = 1e-12;

fn root(v: f64, l: usize) -> Result<f64, UniformityError> {
    if v < -RADICAND_GUARD {
        return Err(UniformityError::NegativeRadicand(v));
    }
    Ok(v.max(0.0).powf(1.0 / (1u64 << l) as f64))
}

/// E_{x,h} Π_ε C^{|ε|} f_ε(x + ε·h), the literal cube sum.
pub fn cube_average(fs: &[SeqFn], l: usize) -> Result<Complex64, UniformityError> {
    if fs.len() != 1 << l {
        return Err(UniformityError::Bad(format!("{} functions for l = {l}", 1 << l)));
    }
    let n = fs[0].period();
    if fs.iter().any(|f| f.period() != n) {
        return Err(UniformityError::Mismatch);
    }
    let total_h = n.pow(l as u32);
    // conjugated where |ε| is odd, doubled so x + offset never wraps
    let vals: Vec<Vec<Complex64>> = fs
        .iter()
        .enumerate()
        .map(|(eps, f)| {
            let odd = eps.count_ones() % 2 == 1;
            let s: Vec<Complex64> = f.samples.iter().map(|v| if odd { v.conj() } else { *v }).collect();
            s.iter().chain(s.iter()).copied().collect()
        })
        .collect();
    let per_top = total_h / n;
    // chunks by the last h coordinate, summed in order
    let sum: Complex64 = (0..n)
        .into_par_iter()
        .map(|top| {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut h = vec![0usize; l];
            let mut off = vec![0usize; 1 << l];
            for lo in 0..per_top {
                let mut r = lo;
                for slot in h.iter_mut().take(l - 1) {
                    *slot = r % n;
                    r /= n;
                }
                h[l - 1] = top;
                for (eps, o) in off.iter_mut().enumerate() {
                    *o = h.iter().enumerate().filter(|(b, _)| eps >> b & 1 == 1).map(|(_, hb)| hb).sum::<usize>() % n;
                }
                for x in 0..n {
                    let mut prod = Complex64::new(1.0, 0.0);
                    for (v, o) in vals.iter().zip(&off) {
                        prod *= v[x + o];
                    }
                    acc += prod;
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .sum();
    Ok(sum / (n as f64 * total_h as f64))
}

pub fn gowers_direct(f: &SeqFn, l: usize) -> Result<f64, UniformityError> {
    if l == 0 || l > 4 {
        return Err(UniformityError::Bad("1 ≤ l ≤ 4".into()));
    }
    let fs = vec![f.clone(); 1 << l];
    root(cube_average(&fs, l)?.re, l)
}

/// ‖f‖_{U^l}^{2^l}, by ‖f‖_{U^1}² = |E f|² and
/// ‖f‖_{U^{l+1}}^{2^{l+1}} = E_k ‖Δ_k f‖_{U^l}^{2^l}.
pub fn gowers_power(f: &SeqFn, l: usize) -> f64 {
    if l == 1 {
        let m: Complex64 = f.samples.iter().sum::<Complex64>() / f.period() as f64;
        return m.norm_sqr();
    }
    let n = f.period();
    let parts: Vec<f64> = (0..n).into_par_iter().map(|k| gowers_power(&f.mult_derivative(k), l - 1)).collect();
    parts.into_iter().sum::<f64>() / n as f64
}

pub fn gowers_recursive(f: &SeqFn, l: usize) -> Result<f64, UniformityError> {
    if l == 0 {
        return Err(UniformityError::Bad("l ≥ 1".into()));
    }
    root(gowers_power(f, l), l)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// |E Π_ε C^{|ε|} f_ε| ≤ Π_ε ‖f_ε‖_{U^l}, within 10⁻⁹.
pub fn csg_check(fs: &[SeqFn], l: usize) -> Result<Inequality, UniformityError> {
    if l > 3 {
        return Err(UniformityError::Bad("l ≤ 3".into()));
    }
    let lhs = cube_average(fs, l)?.norm();
    let mut rhs = 1.0;
    for f in fs {
        rhs *= gowers_recursive(f, l)?;
    }
    Ok(Inequality { lhs, rhs, pass: lhs <= rhs + 1e-9 })
}

pub type Vector = Vec<Complex64>;

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VdcReport {
    pub lhs: f64,
    pub main: f64,
    pub boundary: f64,
    pub bound_c: f64,
    pub pass: bool,
}

/// Finite-window van der Corput on Φ = [start, start + w). With
/// S = K⁻² Σ_{|h|≤K} (K−|h|) E_{n∈Φ} ⟨u_n, u_{n+h}⟩ and C = sup ‖u_n‖:
///   ‖E_Φ u_n‖² ≤ 2|S| + 2(K+1)C²/w + 2(K+1)²C²/w².
/// The last two terms count the 2k window points lost by each shift k ≤ K,
/// once in E_Φ u_n − E_Φ K⁻¹Σ_k u_{n+k} and once in the correlation sum.
/// `main` reports 2|S|.
pub fn vdc_bound(u: &[Vector], k: usize, start: usize, w: usize) -> Result<VdcReport, UniformityError> {
    if k == 0 || k >= w {
        return Err(UniformityError::Bad(format!("0 < K < window length, got K = {k}, w = {w}")));
    }
    if start < k || start + w + k > u.len() {
        return Err(UniformityError::Bad("sequence must extend K beyond the window on both sides".into()));
    }
    let dim = u[0].len();
    let c = u.iter().map(|v| inner(v, v).re.sqrt()).fold(0.0, f64::max);
    let mut avg = vec![Complex64::new(0.0, 0.0); dim];
    for v in &u[start..start + w] {
        for (a, x) in avg.iter_mut().zip(v) {
            *a += x;
        }
    }
    let lhs = inner(&avg, &avg).re / (w as f64 * w as f64);
    let kk = k as i64;
    let mut s = Complex64::new(0.0, 0.0);
    for h in -kk..=kk {
        let weight = (kk - h.abs()) as f64;
        if weight == 0.0 {
            continue;
        }
        let corr: Complex64 = (start..start + w).map(|n| inner(&u[n], &u[(n as i64 + h) as usize])).sum::<Complex64>() / w as f64;
        s += corr * weight;
    }
    s /= (k * k) as f64;
    let main = 2.0 * s.norm();
    let wf = w as f64;
    let kp = (k + 1) as f64;
    let boundary = 2.0 * kp * c * c / wf + 2.0 * kp * kp * c * c / (wf * wf);
    Ok(VdcReport { lhs, main, boundary, bound_c: c, pass: lhs <= main + boundary + 1e-12 })
}

/// Atoms (angle θ ∈ [0,1), weight); λ = e(θ).
#[derive(Clone, Debug)]
pub struct AtomicMeasure {
    pub atoms: Vec<(f64, f64)>,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self, UniformityError> {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if atoms.is_empty() || (total - 1.0).abs() > 1e-12 || atoms.iter().any(|a| a.1 <= 0.0 || !(0.0..1.0).contains(&a.0)) {
            return Err(UniformityError::Bad("positive weights summing to 1, angles in [0,1)".into()));
        }
        Ok(AtomicMeasure { atoms })
    }
}

/// θ as an exact dyadic fraction mant / 2^shift.
fn dyadic(theta: f64) -> (BigUint, u32) {
    if theta == 0.0 {
        return (BigUint::zero(), 0);
    }
    let bits = theta.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let (mant, e2) = if exp == 0 { (bits & ((1 << 52) - 1), -1074) } else { ((bits & ((1 << 52) - 1)) | (1 << 52), exp - 1075) };
    // θ = mant · 2^e2 with e2 < 0 for θ < 1
    let tz = mant.trailing_zeros().min((-e2) as u32);
    (BigUint::from(mant >> tz), (-e2) as u32 - tz)
}

/// λ^N = e(frac(Nθ)), exact in the angle.
fn power_exact(theta: &(BigUint, u32), n: &BigUint) -> Complex64 {
    let (m, s) = theta;
    if m.is_zero() {
        return Complex64::new(1.0, 0.0);
    }
    if let (Some(m64), Some(n64)) = (m.to_u64(), n.to_u64()) {
        // mant < 2^53 and N < 2^64, so the product fits in u128
        let p = m64 as u128 * n64 as u128;
        let f = if *s < 128 { (p & ((1u128 << s) - 1)) as f64 / 2f64.powi(*s as i32) } else { p as f64 / 2f64.powi(*s as i32) };
        return e(f);
    }
    let modulus = BigUint::one() << *s;
    let r = (m * n) % &modulus;
    let f = r.to_f64().unwrap() / modulus.to_f64().unwrap();
    e(f)
}

/// (1/N) Σ_{n=1}^N λ^n in closed form.
fn avg_closed(theta: f64, dy: &(BigUint, u32), n: &BigUint) -> Complex64 {
    if dy.0.is_zero() {
        return Complex64::new(1.0, 0.0);
    }
    let lam = e(theta);
    let ln = power_exact(dy, n);
    lam * (ln - 1.0) / ((lam - 1.0) * n.to_f64().unwrap())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VnReport {
    pub epsilon: f64,
    pub k_total: usize,
    pub index: usize,
    pub m_i: String,
    pub f_m_i: String,
    pub energy_e: f64,
    pub sigma_norm: f64,
    pub u_norm: f64,
    pub v_norm: f64,
    /// Upper bound for sup ‖a_N − a_N′‖₂ over the window.
    pub oscillation_bound: f64,
    /// Step between evaluated N; 1 means every N was evaluated.
    pub step: String,
    pub verified: bool,
}

/// Exhaustive evaluation up to this many N; beyond it, strided with a
/// Lipschitz margin |s_{N+1} − s_N| ≤ 2/(N+1).
pub const EXHAUSTIVE_RANGE: u64 = 20_000;

pub fn vn_metastable(
    mu: &AtomicMeasure,
    f: &[Complex64],
    eps: f64,
    big_f: &dyn Fn(&BigUint) -> BigUint,
) -> Result<VnReport, UniformityError> {
    if f.len() != mu.atoms.len() {
        return Err(UniformityError::Mismatch);
    }
    let norm2: f64 = mu.atoms.iter().zip(f).map(|((_, w), c)| w * c.norm_sqr()).sum();
    if norm2 > 1.0 + 1e-12 {
        return Err(UniformityError::Bad("‖f‖₂ ≤ 1".into()));
    }
    let k_total = (36.0 / (eps * eps)).ceil() as usize + 1;
    let dist: Vec<f64> = mu.atoms.iter().map(|(t, _)| 2.0 * (std::f64::consts::PI * t).sin().abs()).collect();
    let mut m = BigUint::one();
    let mut chosen = None;
    for i in 1..=k_total {
        let fm = big_f(&m);
        let a_rad = eps / (6.0 * fm.to_f64().unwrap());
        let b_rad = 12.0 / (eps * m.to_f64().unwrap());
        let in_e = |d: f64| d >= a_rad && d < b_rad;
        let energy: f64 = mu.atoms.iter().zip(f).zip(&dist).filter(|(_, &d)| in_e(d)).map(|(((_, w), c), _)| w * c.norm_sqr()).sum();
        if energy.sqrt() < eps / 6.0 {
            chosen = Some((i, m.clone(), fm, a_rad, b_rad, energy));
            break;
        }
        // 12/(ε M_{i+1}) < ε/(6 F(M_i))
        let need = 72.0 / (eps * eps);
        let num = BigUint::from((need * 1e6).ceil() as u64);
        m = &fm * num / BigUint::from(1_000_000u64) + BigUint::one();
    }
    let (index, m_i, fm, a_rad, b_rad, energy) = chosen.ok_or_else(|| UniformityError::Bad("pigeonhole exhausted".into()))?;
    let part = |pred: &dyn Fn(f64) -> bool| -> f64 {
        mu.atoms.iter().zip(f).zip(&dist).filter(|(_, &d)| pred(d)).map(|(((_, w), c), _)| w * c.norm_sqr()).sum::<f64>().sqrt()
    };
    let sigma_norm = part(&|d| d < a_rad);
    let u_norm = part(&|d| d >= b_rad);
    let range = &fm - &m_i + BigUint::one();
    let step = if range <= BigUint::from(EXHAUSTIVE_RANGE) { BigUint::one() } else { range.div_ceil(&BigUint::from(EXHAUSTIVE_RANGE)) };
    let m_f = m_i.to_f64().unwrap();
    let slack = step.to_f64().unwrap() / m_f;
    let diams: Vec<f64> = mu
        .atoms
        .par_iter()
        .zip(f)
        .map(|((theta, w), c)| {
            let weight = w * c.norm_sqr();
            if weight == 0.0 {
                return 0.0;
            }
            let (lo, hi) = atom_box(*theta, &m_i, &fm, &step);
            let diam = ((hi.re - lo.re).powi(2) + (hi.im - lo.im).powi(2)).sqrt() + if step.is_one() { 0.0 } else { 2.0 * slack };
            weight * diam * diam
        })
        .collect();
    let total: f64 = diams.iter().sum();
    let oscillation_bound = total.sqrt();
    Ok(VnReport {
        epsilon: eps,
        k_total,
        index,
        m_i: m_i.to_string(),
        f_m_i: fm.to_string(),
        energy_e: energy.sqrt(),
        sigma_norm,
        u_norm,
        v_norm: energy.sqrt(),
        oscillation_bound,
        step: step.to_string(),
        verified: oscillation_bound < eps,
    })
}

/// Bounding box of {s_N(λ) : M ≤ N ≤ F(M)} at the given stride.
fn atom_box(theta: f64, m: &BigUint, fm: &BigUint, step: &BigUint) -> (Complex64, Complex64) {
    let mut lo = Complex64::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut upd = |z: Complex64| {
        lo.re = lo.re.min(z.re);
        lo.im = lo.im.min(z.im);
        hi.re = hi.re.max(z.re);
        hi.im = hi.im.max(z.im);
    };
    let dy = dyadic(theta);
    if step.is_one() {
        // running sum S_N = Σ_{n≤N} λ^n, restarted exactly at N = M
        let lam = e(theta);
        let m64 = m.to_u64().unwrap();
        let f64n = fm.to_u64().unwrap();
        let mut s = avg_closed(theta, &dy, m) * m64 as f64;
        let mut pw = power_exact(&dy, m);
        upd(s / m64 as f64);
        for n in m64 + 1..=f64n {
            pw *= lam;
            s += pw;
            upd(s / n as f64);
        }
    } else {
        let mut n = m.clone();
        while &n <= fm {
            upd(avg_closed(theta, &dy, &n));
            n += step;
        }
        upd(avg_closed(theta, &dy, fm));
    }
    (lo, hi)
}

/// Seeded random measure with 1..=max_atoms atoms, and f on the atoms with
/// ‖f‖₂ ≤ 1.
pub fn random_measure<R: Rng>(rng: &mut R, max_atoms: usize) -> (AtomicMeasure, Vec<Complex64>) {
    let k = rng.gen_range(1..=max_atoms);
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let atoms = raw.iter().map(|w| (rng.gen_range(0.0..1.0), w / total)).collect();
    let f: Vec<Complex64> = (0..k).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let mu = AtomicMeasure { atoms };
    let n2: f64 = mu.atoms.iter().zip(&f).map(|((_, w), c)| w * c.norm_sqr()).sum();
    let scale = rng.gen_range(0.1..1.0) / n2.sqrt();
    (mu, f.into_iter().map(|c| c * scale).collect())
}

/// Seeded sequence with entries in the closed unit disc.
pub fn random_seq<R: Rng>(rng: &mut R, n: usize) -> SeqFn {
    SeqFn::from_fn(n, |_| Complex64::from_polar(rng.gen_range(0.0..1.0f64).sqrt(), rng.gen_range(0.0..std::f64::consts::TAU)))
}

/// Seeded ±1 sequence.
pub fn random_signs<R: Rng>(rng: &mut R, n: usize) -> SeqFn {
    SeqFn::from_fn(n, |_| Complex64::new(if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0))
}

pub fn doubling(m: &BigUint) -> BigUint {
    m * 2u32
}

pub fn big(v: u64) -> BigUint {
    BigUint::from(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_is_exact() {
        let (m, s) = dyadic(0.375);
        assert_eq!((m, s), (BigUint::from(3u32), 3));
        let t = 0.1f64;
        let (m, s) = dyadic(t);
        assert_eq!(m.to_f64().unwrap() / 2f64.powi(s as i32), t);
    }

    #[test]
    fn fast_power_matches_bigint() {
        for t in [0.1, 0.7071, 1e-9, 0.999_999] {
            let dy = dyadic(t);
            for n in [1u64, 17, 123_456_789, u64::MAX / 3] {
                let nb = BigUint::from(n);
                let fast = power_exact(&dy, &nb);
                let modulus = BigUint::one() << dy.1;
                let r = (&dy.0 * &nb) % &modulus;
                let slow = e(r.to_f64().unwrap() / modulus.to_f64().unwrap());
                assert!((fast - slow).norm() < 1e-12);
            }
        }
    }
}
