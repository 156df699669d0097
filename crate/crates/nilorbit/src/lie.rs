//! Strictly upper triangular matrices and the exp/log correspondence.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::group::GroupElement;
use crate::scalar::Scalar;

#[derive(Clone, PartialEq, Eq)]
pub struct LieElement {
    dim: usize,
    e: Vec<Scalar>,
}

impl LieElement {
    pub fn zero(dim: usize) -> Self {
        LieElement { dim, e: vec![Scalar::zero(); dim * dim] }
    }

    pub fn elementary(dim: usize, i: usize, j: usize, v: Scalar) -> Self {
        let mut x = Self::zero(dim);
        x.set(i, j, v);
        x
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &Scalar {
        &self.e[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Scalar) {
        assert!(i < j && j < self.dim);
        self.e[i * self.dim + j] = v;
    }

    pub fn is_zero(&self) -> bool {
        self.e.iter().all(|s| s.is_zero())
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.e.iter_mut().zip(&o.e) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.e.iter_mut().zip(&o.e) {
            *a -= b;
        }
        out
    }

    pub fn scale(&self, s: &Scalar) -> Self {
        LieElement { dim: self.dim, e: self.e.iter().map(|x| x * s).collect() }
    }

    /// Plain matrix product (strictly upper times strictly upper).
    pub fn matmul(&self, o: &Self) -> Self {
        let d = self.dim;
        let mut out = Self::zero(d);
        for i in 0..d {
            for j in i + 2..d {
                let mut acc = Scalar::zero();
                for k in i + 1..j {
                    let a = self.get(i, k);
                    let b = o.get(k, j);
                    if !a.is_zero() && !b.is_zero() {
                        acc += &(a * b);
                    }
                }
                out.e[i * d + j] = acc;
            }
        }
        out
    }

    pub fn bracket(&self, o: &Self) -> Self {
        self.matmul(o).sub(&o.matmul(self))
    }

    pub fn from_group_minus_identity(g: &GroupElement) -> Self {
        let d = g.dim();
        let mut x = Self::zero(d);
        for ((i, j), v) in g.entries() {
            if !v.is_zero() {
                x.set(i, j, v.clone());
            }
        }
        x
    }

    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), &Scalar)> + '_ {
        GroupElement::positions(self.dim).map(move |(i, j)| ((i, j), self.get(i, j)))
    }
}

impl fmt::Debug for LieElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for ((i, j), v) in self.entries() {
            if !v.is_zero() {
                parts.push(format!("E{}{}: {}", i + 1, j + 1, v));
            }
        }
        write!(f, "ut{}[{}]", self.dim, parts.join(", "))
    }
}

fn inv_int(k: i64) -> BigRational {
    BigRational::new(BigInt::from(1), BigInt::from(k))
}

/// exp(X) = Σ X^k / k!, terminating at k = dim − 1.
pub fn exp(x: &LieElement) -> GroupElement {
    let d = x.dim();
    let mut out = GroupElement::identity(d);
    let mut power = x.clone();
    let mut fact = BigRational::from_integer(BigInt::from(1));
    for k in 1..d {
        fact *= inv_int(k as i64);
        if power.is_zero() {
            break;
        }
        for ((i, j), v) in power.entries() {
            if !v.is_zero() {
                let cur = out.get(i, j) + &v.scale(&fact);
                out.set(i, j, cur);
            }
        }
        power = power.matmul(x);
    }
    out
}

/// log(g) = Σ (−1)^{k+1} (g − I)^k / k.
pub fn log(g: &GroupElement) -> LieElement {
    let d = g.dim();
    let n = LieElement::from_group_minus_identity(g);
    let mut out = LieElement::zero(d);
    let mut power = n.clone();
    for k in 1..d {
        if power.is_zero() {
            break;
        }
        let c = if k % 2 == 1 { inv_int(k as i64) } else { -inv_int(k as i64) };
        out = out.add(&power.scale(&Scalar::from_rational(c)));
        power = power.matmul(&n);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::int_element;

    #[test]
    fn exp_log_examples() {
        assert!(exp(&LieElement::zero(3)).is_identity());
        let e12 = int_element(3, &[((0, 1), 1)]);
        assert_eq!(log(&e12), LieElement::elementary(3, 0, 1, Scalar::one()));
        let x = LieElement::elementary(3, 0, 1, Scalar::one()).add(&LieElement::elementary(3, 1, 2, Scalar::one()));
        let g = exp(&x);
        assert_eq!(g.get(0, 1), &Scalar::one());
        assert_eq!(g.get(1, 2), &Scalar::one());
        assert_eq!(g.get(0, 2), &Scalar::ratio(1, 2));
        assert_eq!(log(&g), x);
    }
}
