//! The dihedral group D₃ by its multiplication table, used as a negative
//! control: in a non-nilpotent group, sequences killed by two differences are
//! not closed under pointwise products.

/// Elements δ^r σ^s encoded as 3s + r.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct D3(pub u8);

pub const ONE: D3 = D3(0);
pub const DELTA: D3 = D3(1);
pub const SIGMA: D3 = D3(3);

// row x, column y holds x·y, with σδσ⁻¹ = δ⁻¹
const TABLE: [[u8; 6]; 6] = [
    [0, 1, 2, 3, 4, 5],
    [1, 2, 0, 4, 5, 3],
    [2, 0, 1, 5, 3, 4],
    [3, 5, 4, 0, 2, 1],
    [4, 3, 5, 1, 0, 2],
    [5, 4, 3, 2, 1, 0],
];

impl D3 {
    pub fn mul(self, o: D3) -> D3 {
        D3(TABLE[self.0 as usize][o.0 as usize])
    }

    pub fn inv(self) -> D3 {
        (0..6).map(D3).find(|&x| self.mul(x) == ONE).unwrap()
    }

    pub fn all() -> [D3; 6] {
        [D3(0), D3(1), D3(2), D3(3), D3(4), D3(5)]
    }
}

/// A periodic sequence Z → D₃ given by one period.
pub type Periodic = Vec<D3>;

/// n ↦ g(n)⁻¹ g(n + b)
pub fn difference(g: &Periodic, b: usize) -> Periodic {
    let p = g.len();
    (0..p).map(|n| g[n].inv().mul(g[(n + b) % p])).collect()
}

/// True iff every k-fold difference, over all steps, is identically 1.
/// Steps modulo the period exhaust all integer steps.
pub fn vanishes_after(g: &Periodic, k: usize) -> bool {
    if k == 0 {
        return g.iter().all(|&x| x == ONE);
    }
    (0..g.len()).all(|b| vanishes_after(&difference(g, b), k - 1))
}

pub fn pointwise(a: &Periodic, b: &Periodic) -> Periodic {
    a.iter().zip(b).map(|(x, y)| x.mul(*y)).collect()
}
