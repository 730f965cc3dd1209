//! Exact finite-field rank probabilities.
//!
//! Everything here is about uniformly random matrices over GF(q):
//!
//! * `zeta(j, m, q)` = ∏_{k=0}^{j-1} (1 - q^(k-m)), the probability that j
//!   uniform vectors of length m are linearly independent.
//! * `zeta_transfer(j, i, r, q)` = probability that a rank-r batch whose
//!   receiver got i random linear combinations ends up with rank j.
//! * `random_matrix_rank_dist(r, t, q)` = distribution of the rank of an
//!   r×t uniform matrix, by the column-append recursion
//!   P_{t+1}(i) = P_t(i)·q^(i-r) + P_t(i-1)·(1 - q^(i-1-r)).
//! * `random_matrix_rank_delta(r, t, q)` = expected rank gain from one more
//!   uniform column, Σ_i P_t(i)·(1 - q^(i-r)).

use crate::error::{Error, Result};
use crate::field::FieldSize;

/// Probability vector over ranks 0..=r_max.
#[derive(Debug, Clone, PartialEq)]
pub struct RankDistribution {
    probs: Vec<f64>,
}

impl RankDistribution {
    /// Validates non-negativity and unit mass (within 1e-12).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty rank distribution".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || p > 1.0 + 1e-12) {
            return Err(Error::InvalidDistribution(
                "rank probabilities must lie in [0, 1]".into(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "rank probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(RankDistribution { probs })
    }

    /// Point mass at `rank` with support 0..=r_max.
    pub fn point_mass(rank: usize, r_max: usize) -> Self {
        assert!(rank <= r_max);
        let mut probs = vec![0.0; r_max + 1];
        probs[rank] = 1.0;
        RankDistribution { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn r_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| i as f64 * p)
            .sum()
    }
}

/// ζ_j^m = ∏_{k=0}^{j-1} (1 - q^(-m+k)).
///
/// Empty product (j = 0) is 1; the k = m factor vanishes, so j > m gives 0.
/// For the infinite field the product tends to 1 for j ≤ m.
pub fn zeta(j: usize, m: usize, q: FieldSize) -> f64 {
    if j > m {
        return 0.0;
    }
    match q {
        FieldSize::Infinite => 1.0,
        FieldSize::Finite(_) => {
            let mut prod = 1.0;
            // Descending exponent: factors closest to zero first.
            for k in (0..j).rev() {
                prod *= 1.0 - q.pow(k as i32 - m as i32);
            }
            prod
        }
    }
}

/// Batch transfer probability ζ_j^{i,r} = ζ_j^i ζ_j^r / (ζ_j^j q^((i-j)(r-j))).
///
/// This is the chance that i uniform recodings of a rank-r batch span a
/// j-dimensional space at the receiver. Out-of-range j yields 0. For the
/// infinite field it degenerates to the Kronecker delta at min(i, r).
pub fn zeta_transfer(j: usize, i: usize, r: usize, q: FieldSize) -> f64 {
    if j > i.min(r) {
        return 0.0;
    }
    match q {
        FieldSize::Infinite => {
            if j == i.min(r) {
                1.0
            } else {
                0.0
            }
        }
        FieldSize::Finite(_) => {
            let denom_pow = q.pow(((i - j) * (r - j)) as i32);
            if denom_pow.is_infinite() {
                // Exponent overflow means a negligible probability.
                return 0.0;
            }
            zeta(j, i, q) * zeta(j, r, q) / (zeta(j, j, q) * denom_pow)
        }
    }
}

/// Distribution of rk(R) for an r×t matrix with i.i.d. uniform entries.
///
/// Support is 0..=min(r, t); an empty matrix (t = 0 or r = 0) has rank 0.
pub fn random_matrix_rank_dist(r: usize, t: usize, q: FieldSize) -> RankDistribution {
    let cap = r.min(t);
    if q.is_infinite() {
        return RankDistribution::point_mass(cap, cap);
    }
    let mut probs = vec![0.0; cap + 1];
    probs[0] = 1.0;
    let mut reach = 0usize; // current support end
    for step in 0..t {
        let next_reach = (step + 1).min(r).min(cap);
        let mut next = vec![0.0; cap + 1];
        for i in 0..=next_reach {
            let stay = if i <= reach {
                probs[i] * q.pow(i as i32 - r as i32)
            } else {
                0.0
            };
            let up = if i >= 1 && i - 1 <= reach {
                probs[i - 1] * (1.0 - q.pow(i as i32 - 1 - r as i32))
            } else {
                0.0
            };
            next[i] = stay + up;
        }
        probs = next;
        reach = next_reach;
    }
    RankDistribution { probs }
}

/// Expected rank increment E[rk(R_{r,t+1})] - E[rk(R_{r,t})], i.e. the
/// probability that one more uniform column falls outside the current span.
pub fn random_matrix_rank_delta(r: usize, t: usize, q: FieldSize) -> f64 {
    if q.is_infinite() {
        return if t < r { 1.0 } else { 0.0 };
    }
    let dist = random_matrix_rank_dist(r, t, q);
    dist.probs()
        .iter()
        .enumerate()
        .map(|(i, p)| p * (1.0 - q.pow(i as i32 - r as i32)))
        .sum()
}
