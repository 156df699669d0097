//! Integer lattices from rational linear systems: kernels via column Hermite
//! reduction with a unimodular transform.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type IntMatrix = Vec<Vec<BigInt>>;

/// Scale a rational row to integers by the lcm of its denominators.
pub fn clear_denominators(row: &[BigRational]) -> Vec<BigInt> {
    let l = row.iter().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
    row.iter().map(|q| (q * BigRational::from_integer(l.clone())).to_integer()).collect()
}

/// Column echelon form of `a` (rows × n) with the unimodular U such that
/// a·U is in echelon form; returns (a·U, U, rank).
pub fn column_hermite(a: &IntMatrix, n: usize) -> (IntMatrix, IntMatrix, usize) {
    let mut h: IntMatrix = a.to_vec();
    let mut u: IntMatrix = (0..n).map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect()).collect();
    let mut piv = 0;
    for r in 0..h.len() {
        if piv == n {
            break;
        }
        loop {
            // smallest nonzero entry in row r among columns piv..
            let best = (piv..n).filter(|&c| !h[r][c].is_zero()).min_by_key(|&c| h[r][c].abs());
            let b = match best {
                Some(b) => b,
                None => break,
            };
            swap_cols(&mut h, &mut u, piv, b);
            let mut done = true;
            for c in piv + 1..n {
                if h[r][c].is_zero() {
                    continue;
                }
                let qt = h[r][c].div_floor(&h[r][piv]);
                add_col(&mut h, &mut u, c, piv, &(-qt));
                if !h[r][c].is_zero() {
                    done = false;
                }
            }
            if done {
                if h[r][piv].is_negative() {
                    negate_col(&mut h, &mut u, piv);
                }
                piv += 1;
                break;
            }
        }
    }
    (h, u, piv)
}

fn swap_cols(h: &mut IntMatrix, u: &mut IntMatrix, a: usize, b: usize) {
    if a == b {
        return;
    }
    for row in h.iter_mut().chain(u.iter_mut()) {
        row.swap(a, b);
    }
}

/// column c += k · column p
fn add_col(h: &mut IntMatrix, u: &mut IntMatrix, c: usize, p: usize, k: &BigInt) {
    for row in h.iter_mut().chain(u.iter_mut()) {
        let v = &row[p] * k;
        row[c] += v;
    }
}

fn negate_col(h: &mut IntMatrix, u: &mut IntMatrix, c: usize) {
    for row in h.iter_mut().chain(u.iter_mut()) {
        row[c] = -row[c].clone();
    }
}

/// Z-basis of {x ∈ Z^n : a·x = 0}, as columns (returned as vectors).
pub fn integer_kernel(a: &IntMatrix, n: usize) -> Vec<Vec<BigInt>> {
    let (_, u, rank) = column_hermite(a, n);
    (rank..n).map(|c| u.iter().map(|row| row[c].clone()).collect()).collect()
}

/// Basis for the lattice generated by `gens` (each of length n).
pub fn lattice_basis(gens: &[Vec<BigInt>], n: usize) -> Vec<Vec<BigInt>> {
    if gens.is_empty() {
        return Vec::new();
    }
    // rows = coordinates, columns = generators
    let a: IntMatrix = (0..n).map(|i| gens.iter().map(|g| g[i].clone()).collect()).collect();
    let (h, _, rank) = column_hermite(&a, gens.len());
    (0..rank).map(|c| h.iter().map(|row| row[c].clone()).collect()).collect()
}

/// {x ∈ Z^n : s·x = 0 and r·x ∈ Z^J}, for rational s and r.
pub fn solution_lattice(s: &[Vec<BigRational>], r: &[Vec<BigRational>], n: usize) -> Vec<Vec<BigInt>> {
    let s_int: IntMatrix = s.iter().map(|row| clear_denominators(row)).collect();
    let k = integer_kernel(&s_int, n);
    if k.is_empty() || r.is_empty() {
        return k;
    }
    let rk = k.len();
    // r' = r·K
    let rp: Vec<Vec<BigRational>> = r
        .iter()
        .map(|row| {
            (0..rk)
                .map(|c| (0..n).fold(BigRational::zero(), |acc, i| acc + &row[i] * BigRational::from_integer(k[c][i].clone())))
                .collect()
        })
        .collect();
    let d = rp.iter().flatten().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
    let j = rp.len();
    // t with (d r') t + d s = 0 for some integer s
    let m: IntMatrix = rp
        .iter()
        .enumerate()
        .map(|(row_i, row)| {
            let mut v: Vec<BigInt> = row.iter().map(|q| (q * BigRational::from_integer(d.clone())).to_integer()).collect();
            v.extend((0..j).map(|c| if c == row_i { d.clone() } else { BigInt::zero() }));
            v
        })
        .collect();
    let ker = integer_kernel(&m, rk + j);
    let gens: Vec<Vec<BigInt>> = ker
        .iter()
        .map(|t| (0..n).map(|i| (0..rk).fold(BigInt::zero(), |acc, c| acc + &t[c] * &k[c][i])).collect())
        .filter(|v: &Vec<BigInt>| v.iter().any(|x| !x.is_zero()))
        .collect();
    lattice_basis(&gens, n)
}

pub fn sup_norm(v: &[BigInt]) -> BigInt {
    v.iter().map(|x| x.abs()).max().unwrap_or_else(BigInt::zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn bi(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn kernel_of_single_row() {
        let a = vec![bi(&[2, 4, 6])];
        let k = integer_kernel(&a, 3);
        assert_eq!(k.len(), 2);
        for v in &k {
            let dot: BigInt = &v[0] * 2 + &v[1] * 4 + &v[2] * 6;
            assert!(dot.is_zero());
        }
    }

    #[test]
    fn half_lattice() {
        // x/2 ∈ Z, no symbolic constraint
        let l = solution_lattice(&[], &[vec![rat(1, 2), rat(0, 1)]], 2);
        assert_eq!(l.len(), 2);
        let mut has_two = false;
        for v in &l {
            assert!(v[0].is_even());
            has_two |= v[0] == BigInt::from(2) || v[0] == BigInt::from(-2);
        }
        assert!(has_two);
    }
}
