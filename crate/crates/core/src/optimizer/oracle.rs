//! Exhaustive reference for small instances.
//!
//! Optimal solutions admit at most one fractional recoding number, so
//! enumerating all integer assignments within budget and trying the
//! leftover on each rank in turn covers an optimal point. Deliberately
//! independent of the greedy/tuning machinery: this is the oracle the
//! solvers are checked against.

use crate::error::{Error, Result};
use crate::table::ExpectedRankTable;

use super::{InputRankDistribution, FEASIBILITY_TOL};

const MAX_RANKS: usize = 5;
const LEAF_BUDGET: u64 = 50_000_000;

/// Best achievable objective over almost-deterministic policies, by
/// exhaustive search. Requires M ≤ 5.
pub fn brute_force_reference(
    table: &ExpectedRankTable,
    h: &InputRankDistribution,
    t_avg: f64,
) -> Result<f64> {
    if h.max_rank() != table.m() {
        return Err(Error::InvalidDistribution(format!(
            "h covers 0..={}, table expects 0..={}",
            h.max_rank(),
            table.m()
        )));
    }
    if table.m() > MAX_RANKS {
        return Err(Error::OracleBudgetExceeded(format!(
            "batch size {} too large for enumeration",
            table.m()
        )));
    }
    if !(t_avg.is_finite() && t_avg >= 0.0) {
        return Err(Error::InvalidPolicy(format!("t_avg = {t_avg}")));
    }
    // Rank 0 contributes nothing; ranks with no mass consume nothing.
    let ranks: Vec<usize> = h.support().iter().copied().filter(|&r| r > 0).collect();
    if ranks.is_empty() {
        return if t_avg <= FEASIBILITY_TOL {
            Ok(0.0)
        } else {
            Err(Error::HorizonExceeded(
                "no rank can absorb the budget".into(),
            ))
        };
    }

    let mut search = Search {
        table,
        h,
        ranks,
        t_avg,
        leaves: 0,
        best: f64::NEG_INFINITY,
        assignment: Vec::new(),
    };
    search.assignment = vec![0usize; search.ranks.len()];
    search.descend(0, t_avg, 0.0)?;
    if search.best == f64::NEG_INFINITY {
        return Err(Error::HorizonExceeded(
            "no feasible assignment within the horizon".into(),
        ));
    }
    Ok(search.best)
}

struct Search<'a> {
    table: &'a ExpectedRankTable,
    h: &'a InputRankDistribution,
    ranks: Vec<usize>,
    t_avg: f64,
    leaves: u64,
    best: f64,
    assignment: Vec<usize>,
}

impl Search<'_> {
    fn descend(&mut self, idx: usize, budget: f64, partial: f64) -> Result<()> {
        if idx == self.ranks.len() {
            return self.score_leaf(budget, partial);
        }
        let rank = self.ranks[idx];
        let hr = self.h.get(rank);
        let cap = ((budget + FEASIBILITY_TOL) / hr).floor() as usize;
        for c in 0..=cap.min(self.table.t_max()) {
            self.assignment[idx] = c;
            let gain = hr * self.table.at(rank, c);
            self.descend(idx + 1, budget - hr * c as f64, partial + gain)?;
        }
        Ok(())
    }

    fn score_leaf(&mut self, leftover: f64, partial: f64) -> Result<()> {
        self.leaves += 1;
        if self.leaves > LEAF_BUDGET {
            return Err(Error::OracleBudgetExceeded(format!(
                "more than {LEAF_BUDGET} assignments"
            )));
        }
        if leftover <= FEASIBILITY_TOL {
            // Fully allocated: the assignment itself is a candidate.
            if self.best < partial {
                self.best = partial;
            }
            return Ok(());
        }
        // Place the remainder fractionally on each rank in turn.
        for (idx, &rank) in self.ranks.iter().enumerate() {
            let hr = self.h.get(rank);
            let t_new = self.assignment[idx] as f64 + leftover / hr;
            if t_new > self.table.t_max() as f64 + 1e-12 {
                continue;
            }
            let gain =
                hr * (self.table.eval(rank, t_new)? - self.table.at(rank, self.assignment[idx]));
            if self.best < partial + gain {
                self.best = partial + gain;
            }
        }
        Ok(())
    }
}
