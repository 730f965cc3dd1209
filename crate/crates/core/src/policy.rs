//! Recoding policies: one recoding number per batch rank.

use crate::error::{Error, Result};

/// Per-rank recoding numbers t_0..t_M, extended to non-negative reals.
///
/// A fractional t_r is realized probabilistically: the node transmits
/// ⌊t_r⌋ or ⌊t_r⌋+1 recoded packets with probabilities chosen so the mean
/// is exactly t_r (see [`RecodingPolicy::conditional_dist`]).
#[derive(Debug, Clone, PartialEq)]
pub struct RecodingPolicy {
    t: Vec<f64>,
}

impl RecodingPolicy {
    /// Validates length ≥ 1 and non-negative finite entries.
    pub fn new(t: Vec<f64>) -> Result<Self> {
        if t.is_empty() {
            return Err(Error::InvalidPolicy("empty policy".into()));
        }
        for (r, &v) in t.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidPolicy(format!("t_{r} = {v}")));
            }
        }
        Ok(RecodingPolicy { t })
    }

    /// All-zero policy for ranks 0..=m.
    pub fn zeros(m: usize) -> Self {
        RecodingPolicy {
            t: vec![0.0; m + 1],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.t
    }

    /// Largest rank (policy length minus one).
    pub fn max_rank(&self) -> usize {
        self.t.len() - 1
    }

    pub fn get(&self, r: usize) -> f64 {
        self.t[r]
    }

    /// Resource consumed under rank distribution h: Σ_r h_r t_r.
    pub fn resource(&self, h: &[f64]) -> f64 {
        self.t.iter().zip(h).map(|(t, h)| t * h).sum()
    }

    /// Conditional recoding-number distribution α_{t|r} for rank r:
    /// support {⌊t_r⌋} for integer t_r, otherwise {⌊t_r⌋, ⌊t_r⌋+1} with
    /// the fractional part as the upper mass. The mean equals t_r exactly.
    pub fn conditional_dist(&self, r: usize) -> Vec<(usize, f64)> {
        let t = self.t[r];
        let lower = t.floor();
        let frac = t - lower;
        if frac == 0.0 {
            vec![(lower as usize, 1.0)]
        } else {
            vec![(lower as usize, 1.0 - frac), (lower as usize + 1, frac)]
        }
    }

    /// Ranks whose recoding number is not an integer (within `tol`).
    pub fn fractional_ranks(&self, tol: f64) -> Vec<usize> {
        self.t
            .iter()
            .enumerate()
            .filter(|(_, &v)| (v - v.round()).abs() > tol)
            .map(|(r, _)| r)
            .collect()
    }
}
