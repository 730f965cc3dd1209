//! GF(2^m) arithmetic for m in {1, 2, 4, 8} and incremental rank tracking.
//!
//! Multiplication goes through log/antilog tables built from a primitive
//! polynomial per field. Addition is XOR. Rank bookkeeping keeps a row
//! reduced basis and absorbs one vector at a time.

use rand::Rng;

use crate::error::{Error, Result};

const POLYS: &[(u32, u64, u32)] = &[
    // (m, q, primitive polynomial)
    (1, 2, 0b11),
    (2, 4, 0b111),
    (4, 16, 0b1_0011),
    (8, 256, 0x11D),
];

/// One binary extension field GF(2^m).
#[derive(Debug, Clone)]
pub struct GfField {
    q: u64,
    log: Vec<u16>,
    exp: Vec<u8>,
}

impl GfField {
    /// Builds tables for q = 2^m with m in {1, 2, 4, 8}.
    pub fn new(q: u64) -> Result<Self> {
        let &(_, _, poly) = POLYS
            .iter()
            .find(|&&(_, size, _)| size == q)
            .ok_or(Error::UnsupportedSimulationField(q))?;
        let order = (q - 1) as usize;
        let mut log = vec![0u16; q as usize];
        let mut exp = vec![0u8; order.max(1)];
        let mut x: u32 = 1;
        for i in 0..order.max(1) {
            exp[i] = x as u8;
            log[x as usize] = i as u16;
            // multiply by the generator alpha = x, reduce mod poly
            x <<= 1;
            if x >= q as u32 {
                x ^= poly;
            }
        }
        Ok(GfField { q, log, exp })
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    #[inline]
    pub fn add(&self, a: u8, b: u8) -> u8 {
        a ^ b
    }

    #[inline]
    pub fn mul(&self, a: u8, b: u8) -> u8 {
        if a == 0 || b == 0 {
            return 0;
        }
        let order = (self.q - 1) as usize;
        let idx = (self.log[a as usize] as usize + self.log[b as usize] as usize) % order.max(1);
        self.exp[idx]
    }

    pub fn inv(&self, a: u8) -> u8 {
        assert!(a != 0, "zero has no inverse");
        let order = (self.q - 1) as usize;
        if order == 0 {
            return 1;
        }
        self.exp[(order - self.log[a as usize] as usize) % order]
    }

    /// Uniform field element.
    #[inline]
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> u8 {
        rng.random_range(0..self.q) as u8
    }
}

/// Row-reduced basis of received coefficient vectors.
///
/// Absorbing a vector either grows the rank by one or leaves the span
/// unchanged; either way the reduced form is maintained so later
/// absorptions stay O(rank · dim).
#[derive(Debug, Clone, Default)]
pub struct ReducedBasis {
    /// (pivot position, normalized vector) sorted by pivot.
    rows: Vec<(usize, Vec<u8>)>,
}

impl ReducedBasis {
    pub fn new() -> Self {
        ReducedBasis::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn vectors(&self) -> impl Iterator<Item = &Vec<u8>> {
        self.rows.iter().map(|(_, v)| v)
    }

    /// Reduce `v` against the basis; if a nonzero remainder survives, add it
    /// and return true.
    pub fn absorb(&mut self, field: &GfField, mut v: Vec<u8>) -> bool {
        for (pivot, row) in &self.rows {
            let c = v[*pivot];
            if c != 0 {
                for (a, b) in v.iter_mut().zip(row) {
                    *a = field.add(*a, field.mul(c, *b));
                }
            }
        }
        let pivot = match v.iter().position(|&x| x != 0) {
            Some(p) => p,
            None => return false,
        };
        let inv = field.inv(v[pivot]);
        for a in v.iter_mut() {
            *a = field.mul(*a, inv);
        }
        // Back-substitute into existing rows to keep full reduction.
        for (_, row) in self.rows.iter_mut() {
            let c = row[pivot];
            if c != 0 {
                for (a, b) in row.iter_mut().zip(&v) {
                    *a = field.add(*a, field.mul(c, *b));
                }
            }
        }
        let at = self
            .rows
            .binary_search_by_key(&pivot, |(p, _)| *p)
            .unwrap_err();
        self.rows.insert(at, (pivot, v));
        true
    }
}

/// Rank of the matrix whose columns are `cols`.
pub fn rank_of_columns(field: &GfField, cols: &[Vec<u8>]) -> usize {
    let mut basis = ReducedBasis::new();
    for c in cols {
        basis.absorb(field, c.clone());
    }
    basis.rank()
}
