//! Recoding-number optimization.
//!
//! Given an expected-rank table, an input rank distribution h and a total
//! resource t_avg, the problem is
//!
//!   maximize Σ_r h_r E_r(t_r)   subject to   Σ_r h_r t_r = t_avg, t_r ≥ 0.
//!
//! Because each E_r is piecewise linear and concave, the optimum is reached
//! by occupying per-rank slope cells Δ_{r,t} from the largest down — a
//! water-filling picture where the Lagrange multiplier is the water level.
//! The solvers here all return *preferred* solutions: at most one
//! fractional recoding number, sitting on the smallest occupied slope, with
//! the occupied multiset equal to the global top-k of all slopes. That
//! structure is what makes the answer robust to errors in h, including
//! ranks reported with zero mass.

mod certify;
mod oracle;
mod solve;

pub use certify::{certify, Cell, CellMultiset, Certification};
pub use oracle::brute_force_reference;
pub use solve::{retune, solve_dual, solve_greedy, tune};

use crate::error::{Error, Result};
use crate::policy::RecodingPolicy;
use crate::table::ExpectedRankTable;

/// Absolute tolerance for resource feasibility Σ h_r t_r = t_avg.
pub const FEASIBILITY_TOL: f64 = 1e-10;
/// Absolute tolerance under which two slope values count as tied.
pub const TIE_TOL: f64 = 1e-12;
/// Recoding numbers this close to an integer are treated as integral.
pub const INT_TOL: f64 = 1e-9;

/// Input rank distribution h_0..h_M with its support cached.
#[derive(Debug, Clone, PartialEq)]
pub struct InputRankDistribution {
    h: Vec<f64>,
    support: Vec<usize>,
}

impl InputRankDistribution {
    /// Validates non-negativity and unit mass (within 1e-12).
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::InvalidDistribution("empty rank distribution".into()));
        }
        for (r, &p) in h.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::InvalidDistribution(format!("h_{r} = {p}")));
            }
        }
        let sum: f64 = h.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!(
                "rank masses sum to {sum}, expected 1"
            )));
        }
        let support = h
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(|(r, _)| r)
            .collect();
        Ok(InputRankDistribution { h, support })
    }

    /// Point mass at the full batch rank M ("source" distribution).
    pub fn source(m: usize) -> Self {
        let mut h = vec![0.0; m + 1];
        h[m] = 1.0;
        InputRankDistribution {
            h,
            support: vec![m],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.h
    }

    pub fn get(&self, r: usize) -> f64 {
        self.h[r]
    }

    /// Largest rank (length minus one).
    pub fn max_rank(&self) -> usize {
        self.h.len() - 1
    }

    /// Rank support S = {r : h_r ≠ 0}.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn mean_rank(&self) -> f64 {
        self.h.iter().enumerate().map(|(r, &p)| r as f64 * p).sum()
    }
}

/// Certification flags attached to solver outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutcomeFlags {
    /// Σ h_r t_r matches t_avg within [`FEASIBILITY_TOL`].
    pub feasible: bool,
    /// At most one fractional recoding number.
    pub ads: bool,
    /// Occupied slopes form the global top-k (error-tolerant optimum).
    pub preferred: bool,
}

/// Result of a solver run.
#[derive(Debug, Clone)]
pub struct OptimizationOutcome {
    pub policy: RecodingPolicy,
    pub objective: f64,
    /// Dual certificate: any water level in this interval supports the
    /// policy (largest unoccupied slope, smallest occupied slope).
    pub lambda_interval: (f64, f64),
    pub flags: OutcomeFlags,
    pub iterations: u64,
}

/// Objective value Σ_r h_r E_r(t_r).
pub fn objective(
    table: &ExpectedRankTable,
    h: &InputRankDistribution,
    policy: &RecodingPolicy,
) -> Result<f64> {
    check_dimensions(table, h, policy)?;
    let mut total = 0.0;
    for r in 0..=table.m() {
        let hr = h.get(r);
        if hr != 0.0 {
            total += hr * table.eval(r, policy.get(r))?;
        }
    }
    Ok(total)
}

/// Interval of maximizers of E_r(t) − λt over t ≥ 0, truncated at the table
/// horizon. The lower endpoint counts the slopes strictly above λ; the
/// upper endpoint extends across the plateau of slopes equal to λ.
pub fn t_r_interval(table: &ExpectedRankTable, r: usize, lambda: f64) -> (f64, f64) {
    assert!(lambda >= 0.0, "negative water level");
    let mut above = 0usize;
    let mut last_tie: Option<usize> = None;
    for t in 0..table.t_max() {
        let d = table.delta(r, t as i64).expect("within horizon");
        if d > lambda + TIE_TOL {
            above = t + 1;
        } else if (d - lambda).abs() <= TIE_TOL {
            last_tie = Some(t);
        } else {
            break;
        }
    }
    let lo = above as f64;
    let hi = match last_tie {
        Some(t) => (t + 1) as f64,
        None => lo,
    };
    (lo, hi.max(lo))
}

/// Snap floating noise to the nearest integer when within [`INT_TOL`].
pub(crate) fn snap(t: f64) -> f64 {
    let r = t.round();
    if (t - r).abs() <= INT_TOL {
        r
    } else {
        t
    }
}

pub(crate) fn check_dimensions(
    table: &ExpectedRankTable,
    h: &InputRankDistribution,
    policy: &RecodingPolicy,
) -> Result<()> {
    if h.max_rank() != table.m() || policy.max_rank() != table.m() {
        return Err(Error::InvalidDistribution(format!(
            "dimension mismatch: table M={}, h M={}, policy M={}",
            table.m(),
            h.max_rank(),
            policy.max_rank()
        )));
    }
    Ok(())
}

/// Shared outcome assembly: evaluate the objective and certify the flags.
pub(crate) fn build_outcome(
    table: &ExpectedRankTable,
    h: &InputRankDistribution,
    policy: RecodingPolicy,
    t_avg: f64,
    iterations: u64,
) -> Result<OptimizationOutcome> {
    let cert = certify(table, h, &policy, t_avg)?;
    let cells = CellMultiset::from_policy(table, &policy)?;
    let objective = objective(table, h, &policy)?;
    Ok(OptimizationOutcome {
        policy,
        objective,
        lambda_interval: cells.water_interval(),
        flags: OutcomeFlags {
            feasible: cert.feasible,
            ads: cert.ads,
            preferred: cert.preferred,
        },
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSize;
    use crate::loss::LossModel;

    fn golden_table() -> ExpectedRankTable {
        let model = LossModel::bernoulli(0.2).unwrap();
        ExpectedRankTable::build(&model, FieldSize::Infinite, 4, 68).unwrap()
    }

    fn golden_h() -> InputRankDistribution {
        InputRankDistribution::new(vec![0.0625, 0.25, 0.375, 0.25, 0.0625]).unwrap()
    }

    #[test]
    fn distribution_validation() {
        assert!(InputRankDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(InputRankDistribution::new(vec![0.5, 0.5, -0.0]).is_ok());
        assert!(InputRankDistribution::new(vec![1.1, -0.1]).is_err());
        let h = InputRankDistribution::new(vec![0.5, 0.0, 0.5]).unwrap();
        assert_eq!(h.support(), &[0, 2]);
        let src = InputRankDistribution::source(4);
        assert_eq!(src.support(), &[4]);
        assert_eq!(src.mean_rank(), 4.0);
    }

    #[test]
    fn objective_examples() {
        let table = golden_table();
        let h = golden_h();
        let zeros = RecodingPolicy::zeros(4);
        assert_eq!(objective(&table, &h, &zeros).unwrap(), 0.0);

        let golden = RecodingPolicy::new(vec![0.0, 2.25, 4.0, 6.0, 7.0]).unwrap();
        let direct: f64 = (0..=4)
            .map(|r| h.get(r) * table.eval(r, golden.get(r)).unwrap())
            .sum();
        assert!((objective(&table, &h, &golden).unwrap() - direct).abs() < 1e-15);

        let h0 = InputRankDistribution::new(vec![1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(objective(&table, &h0, &golden).unwrap(), 0.0);
    }

    #[test]
    fn interval_examples() {
        let table = golden_table();
        // Slopes for rank 1: 0.8, 0.16, 0.032, ...
        let (lo, hi) = t_r_interval(&table, 1, 0.5);
        assert_eq!((lo, hi), (1.0, 1.0));
        let (lo, hi) = t_r_interval(&table, 1, 0.8);
        assert_eq!((lo, hi), (0.0, 1.0));
        let (lo, hi) = t_r_interval(&table, 1, 0.9);
        assert_eq!((lo, hi), (0.0, 0.0));
    }

    #[test]
    fn interval_plateau_spans_ties() {
        let table = golden_table();
        // At infinite q the first r slopes of rank r all equal 1 - p = 0.8.
        let (lo, hi) = t_r_interval(&table, 4, 0.8);
        assert_eq!(lo, 0.0);
        assert_eq!(hi, 4.0);
    }
}
