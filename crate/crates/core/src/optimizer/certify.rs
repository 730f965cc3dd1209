//! Cell-multiset view of a policy and the preferred-solution certificate.
//!
//! A policy occupies, per rank r, the lowest ⌈t_r⌉ slope cells of column r.
//! "Preferred" means the occupied cells are a collection of the globally
//! largest ⌈Σ t_r⌉ cells, and the (at most one) fractional recoding number
//! sits on the smallest occupied slope. Such a solution is optimal and keeps
//! its shape under small perturbations of the rank distribution.

use crate::error::{Error, Result};
use crate::policy::RecodingPolicy;
use crate::table::ExpectedRankTable;

use super::{snap, InputRankDistribution, FEASIBILITY_TOL, INT_TOL, TIE_TOL};

/// One slope cell: the segment of E_rank between t and t+1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub rank: usize,
    pub t: usize,
    pub delta: f64,
}

/// Occupied and frontier cells of a policy over a table.
#[derive(Debug, Clone)]
pub struct CellMultiset {
    /// All cells with t < t_rank, over every rank.
    pub selected: Vec<Cell>,
    /// Per rank, the first unoccupied cell within the horizon.
    pub frontier: Vec<Cell>,
    /// Largest slope among cells outside the selection (whole horizon).
    max_unselected: f64,
    /// Smallest slope among selected cells (+∞ when nothing is selected).
    min_selected: f64,
}

impl CellMultiset {
    pub fn from_policy(table: &ExpectedRankTable, policy: &RecodingPolicy) -> Result<Self> {
        if policy.max_rank() != table.m() {
            return Err(Error::InvalidPolicy(format!(
                "policy covers 0..={}, table expects 0..={}",
                policy.max_rank(),
                table.m()
            )));
        }
        let mut selected = Vec::new();
        let mut frontier = Vec::new();
        let mut max_unselected = f64::NEG_INFINITY;
        let mut min_selected = f64::INFINITY;
        for r in 0..=table.m() {
            let t_r = snap(policy.get(r));
            let occupied = t_r.ceil() as usize;
            if occupied > table.t_max() {
                return Err(Error::HorizonExceeded(format!(
                    "t_{r} = {} beyond horizon {}",
                    policy.get(r),
                    table.t_max()
                )));
            }
            for t in 0..table.t_max() {
                let delta = table.delta(r, t as i64)?;
                if t < occupied {
                    selected.push(Cell { rank: r, t, delta });
                    min_selected = min_selected.min(delta);
                } else {
                    if t == occupied {
                        frontier.push(Cell { rank: r, t, delta });
                    }
                    max_unselected = max_unselected.max(delta);
                }
            }
        }
        if max_unselected == f64::NEG_INFINITY {
            max_unselected = 0.0;
        }
        Ok(CellMultiset {
            selected,
            frontier,
            max_unselected,
            min_selected,
        })
    }

    /// Dual certificate interval (largest unoccupied, smallest occupied).
    pub fn water_interval(&self) -> (f64, f64) {
        (self.max_unselected, self.min_selected)
    }

    /// Whether the selection is a collection of the globally largest cells.
    pub fn is_top_heavy(&self) -> bool {
        self.min_selected >= self.max_unselected - TIE_TOL
    }
}

/// Certification verdict with human-readable diagnostics.
#[derive(Debug, Clone)]
pub struct Certification {
    pub feasible: bool,
    pub ads: bool,
    pub preferred: bool,
    pub diagnosis: Vec<String>,
}

/// Check feasibility, the almost-deterministic shape, and the preferred
/// (top-k multiset) structure of a policy.
pub fn certify(
    table: &ExpectedRankTable,
    h: &InputRankDistribution,
    policy: &RecodingPolicy,
    t_avg: f64,
) -> Result<Certification> {
    super::check_dimensions(table, h, policy)?;
    let mut diagnosis = Vec::new();

    let resource = policy.resource(h.probs());
    let feasible = (resource - t_avg).abs() <= FEASIBILITY_TOL;
    if !feasible {
        diagnosis.push(format!(
            "resource {resource} differs from t_avg {t_avg} by {}",
            (resource - t_avg).abs()
        ));
    }

    let fractional = policy.fractional_ranks(INT_TOL);
    let ads = fractional.len() <= 1;
    if !ads {
        diagnosis.push(format!(
            "{} fractional recoding numbers at ranks {fractional:?}",
            fractional.len()
        ));
    }

    let cells = CellMultiset::from_policy(table, policy)?;
    let mut preferred = feasible && ads;

    if preferred && !cells.is_top_heavy() {
        let (lo, hi) = cells.water_interval();
        diagnosis.push(format!(
            "occupied multiset is not top-heavy: smallest occupied {hi} < largest unoccupied {lo}"
        ));
        preferred = false;
    }

    if preferred {
        if let Some(&r) = fractional.first() {
            // The fractional rank must sit on the smallest occupied slope.
            let t_r = policy.get(r);
            let own = table.delta(r, t_r.floor() as i64)?;
            let (_, min_selected) = cells.water_interval();
            if own > min_selected + TIE_TOL {
                diagnosis.push(format!(
                    "fractional t_{r} occupies slope {own}, above the smallest occupied {min_selected}"
                ));
                preferred = false;
            }
        }
    }

    Ok(Certification {
        feasible,
        ads,
        preferred,
        diagnosis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSize;
    use crate::loss::LossModel;

    fn setup() -> (ExpectedRankTable, InputRankDistribution) {
        let model = LossModel::bernoulli(0.2).unwrap();
        let table = ExpectedRankTable::build(&model, FieldSize::Infinite, 4, 68).unwrap();
        let h = InputRankDistribution::new(vec![0.0625, 0.25, 0.375, 0.25, 0.0625]).unwrap();
        (table, h)
    }

    #[test]
    fn golden_policy_is_preferred() {
        let (table, h) = setup();
        let policy = RecodingPolicy::new(vec![0.0, 2.25, 4.0, 6.0, 7.0]).unwrap();
        let cert = certify(&table, &h, &policy, 4.0).unwrap();
        assert!(cert.feasible, "{:?}", cert.diagnosis);
        assert!(cert.ads);
        assert!(cert.preferred, "{:?}", cert.diagnosis);
    }

    #[test]
    fn two_fractional_ranks_fail_ads() {
        let (table, h) = setup();
        // Shift resource between ranks 1 and 2 so both go fractional.
        let policy = RecodingPolicy::new(vec![0.0, 2.85, 3.6, 6.0, 7.0]).unwrap();
        let cert = certify(&table, &h, &policy, 4.0).unwrap();
        assert!(cert.feasible, "{:?}", cert.diagnosis);
        assert!(!cert.ads);
        assert!(!cert.preferred);
    }

    #[test]
    fn misplaced_resource_fails_preferred() {
        let (table, h) = setup();
        // Move one whole cell of rank 3 onto rank 1: still feasible and
        // almost deterministic, but no longer the top-k multiset.
        let policy = RecodingPolicy::new(vec![0.0, 3.25, 4.0, 5.0, 7.0]).unwrap();
        let cert = certify(&table, &h, &policy, 4.0).unwrap();
        assert!(cert.feasible, "{:?}", cert.diagnosis);
        assert!(cert.ads);
        assert!(!cert.preferred);
        assert!(!cert.diagnosis.is_empty());
    }

    #[test]
    fn infeasible_policy_flagged() {
        let (table, h) = setup();
        let policy = RecodingPolicy::new(vec![0.0, 2.25, 4.0, 6.0, 8.0]).unwrap();
        let cert = certify(&table, &h, &policy, 4.0).unwrap();
        assert!(!cert.feasible);
        assert!(!cert.preferred);
    }

    #[test]
    fn horizon_guard() {
        let (table, h) = setup();
        let policy = RecodingPolicy::new(vec![0.0, 2.25, 4.0, 6.0, 200.0]).unwrap();
        assert!(matches!(
            certify(&table, &h, &policy, 4.0),
            Err(Error::HorizonExceeded(_))
        ));
    }
}
