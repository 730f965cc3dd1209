//! Solvers: greedy slope filling, feasible-point tuning, dual bisection,
//! and retuning after parameter updates.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::policy::RecodingPolicy;
use crate::table::ExpectedRankTable;

use super::{
    build_outcome, check_dimensions, snap, InputRankDistribution, OptimizationOutcome,
    FEASIBILITY_TOL, TIE_TOL,
};

/// Residual resource below this is considered exhausted.
const RESIDUAL_EPS: f64 = 1e-12;

/// Max-heap entry: frontier slope of one rank.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Frontier {
    delta: f64,
    rank: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.delta
            .total_cmp(&other.delta)
            .then(self.rank.cmp(&other.rank))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Pop the best frontier rank, breaking slope ties (within [`TIE_TOL`])
/// in favor of the larger rank.
fn pop_with_ties(heap: &mut BinaryHeap<Frontier>) -> Option<Frontier> {
    let top = heap.pop()?;
    let mut best = top;
    let mut returned = Vec::new();
    while let Some(&next) = heap.peek() {
        if top.delta - next.delta > TIE_TOL {
            break;
        }
        heap.pop();
        if next.rank > best.rank {
            returned.push(best);
            best = next;
        } else {
            returned.push(next);
        }
    }
    for f in returned {
        heap.push(f);
    }
    Some(best)
}

/// Greedy water filling from an interior point.
///
/// Starting from `start` (default: the all-zero policy with the whole
/// budget unallocated), repeatedly climb the steepest frontier slope:
/// complete that cell if the remaining resource affords it, otherwise place
/// the exact remainder there fractionally. Started from an all-integer
/// point whose occupied cells are already the global top cells (the
/// all-zero start trivially qualifies), the output is a preferred solution.
///
/// Ranks with h_r = 0 participate at zero resource cost, which is exactly
/// what gives them meaningful recoding numbers in the output. Rank 0 never
/// receives resource: recoded packets of a rank-0 batch are useless.
pub fn solve_greedy(
    table: &ExpectedRankTable,
    h: &InputRankDistribution,
    t_avg: f64,
    start: Option<(&RecodingPolicy, f64)>,
) -> Result<OptimizationOutcome> {
    if !(t_avg.is_finite() && t_avg >= 0.0) {
        return Err(Error::InvalidPolicy(format!("t_avg = {t_avg}")));
    }
    let m = table.m();
    let mut t: Vec<f64>;
    let mut residual: f64;
    match start {
        None => {
            t = vec![0.0; m + 1];
            residual = t_avg;
        }
        Some((policy, u)) => {
            check_dimensions(table, h, policy)?;
            if !(u.is_finite() && u >= 0.0) {
                return Err(Error::InvalidPolicy(format!("remaining resource u = {u}")));
            }
            let consumed = policy.resource(h.probs());
            if (consumed + u - t_avg).abs() > 1e-9 {
                return Err(Error::InvalidPolicy(format!(
                    "start point uses {consumed} + u {u}, not t_avg {t_avg}"
                )));
            }
            for r in 0..=m {
                if snap(policy.get(r)).ceil() as usize > table.t_max() {
                    return Err(Error::HorizonExceeded(format!(
                        "start t_{r} = {} beyond horizon {}",
                        policy.get(r),
                        table.t_max()
                    )));
                }
            }
            t = policy.values().to_vec();
            residual = u;
        }
    }

    if residual > RESIDUAL_EPS && table.max_initial_slope() <= TIE_TOL {
        return Err(Error::DegenerateChannel);
    }

    let mut heap: BinaryHeap<Frontier> = BinaryHeap::with_capacity(m);
    for (rank, &tr) in t.iter().enumerate().skip(1) {
        let floor = snap(tr).floor() as usize;
        if floor < table.t_max() {
            heap.push(Frontier {
                delta: table.delta(rank, floor as i64)?,
                rank,
            });
        }
    }

    let mut iterations = 0u64;
    let iteration_cap = 4 * (m as u64 + 1) * (table.t_max() as u64 + 2);
    while residual > RESIDUAL_EPS {
        let Frontier { rank, .. } = match pop_with_ties(&mut heap) {
            Some(f) => f,
            None => {
                return Err(Error::HorizonExceeded(format!(
                    "{residual} resource left with every rank at the horizon"
                )));
            }
        };
        iterations += 1;
        if iterations > iteration_cap {
            return Err(Error::IterationLimit("greedy fill"));
        }
        let tr = snap(t[rank]);
        let floor = tr.floor();
        let cost = h.get(rank) * (1.0 - (tr - floor));
        if cost <= residual + 1e-15 {
            let next = floor + 1.0;
            t[rank] = next;
            residual = (residual - cost).max(0.0);
            if (next as usize) < table.t_max() {
                heap.push(Frontier {
                    delta: table.delta(rank, next as i64)?,
                    rank,
                });
            }
        } else {
            // h_rank > 0 here, since cost > residual >= 0.
            t[rank] = tr + residual / h.get(rank);
            residual = 0.0;
        }
    }

    let policy = RecodingPolicy::new(t.iter().map(|&v| snap(v)).collect())?;
    build_outcome(table, h, policy, t_avg, iterations)
}

/// Tune an arbitrary feasible point into a preferred solution.
///
/// While the steepest frontier slope beats the smallest occupied slope,
/// move resource from the latter to the former (ranks with zero mass are
/// snapped to the neighbouring integer for free). The loop ends with the
/// occupied cells top-heavy; dropping every fractional part then yields an
/// all-integer occupation of top cells, and the greedy fill of the freed
/// resource restores feasibility while keeping the preferred structure.
pub fn tune(
    table: &ExpectedRankTable,
    h: &InputRankDistribution,
    policy: &RecodingPolicy,
) -> Result<OptimizationOutcome> {
    check_dimensions(table, h, policy)?;
    let m = table.m();
    let t_avg = policy.resource(h.probs());
    let mut t: Vec<f64> = policy.values().iter().map(|&v| snap(v)).collect();
    for (r, &tr) in t.iter().enumerate() {
        if tr.ceil() as usize > table.t_max() {
            return Err(Error::HorizonExceeded(format!(
                "t_{r} = {tr} beyond horizon {}",
                table.t_max()
            )));
        }
    }

    let mut iterations = 0u64;
    let iteration_cap = 8 * (m as u64 + 1) * (table.t_max() as u64 + 2);
    loop {
        iterations += 1;
        if iterations > iteration_cap {
            return Err(Error::IterationLimit("tuning loop"));
        }

        // Steepest frontier slope (rank 0 never receives resource).
        let mut best_up: Option<(f64, usize)> = None;
        for (rank, &tr) in t.iter().enumerate().skip(1) {
            let floor = tr.floor() as usize;
            if floor >= table.t_max() {
                continue;
            }
            let d = table.delta(rank, floor as i64)?;
            match best_up {
                Some((bd, br)) if d < bd - TIE_TOL || ((d - bd).abs() <= TIE_TOL && rank < br) => {}
                _ => best_up = Some((d, rank)),
            }
        }
        // Smallest occupied slope; Δ_{r,-1} = ∞ keeps zeros untouched.
        let mut best_down: Option<(f64, usize)> = None;
        for (rank, &tr) in t.iter().enumerate() {
            let last = (tr - 1.0).ceil() as i64;
            let d = table.delta(rank, last)?;
            match best_down {
                Some((bd, br)) if d > bd + TIE_TOL || ((d - bd).abs() <= TIE_TOL && rank < br) => {}
                _ => best_down = Some((d, rank)),
            }
        }

        let (up_delta, up) = match best_up {
            Some(x) => x,
            None => break,
        };
        let (down_delta, down) = match best_down {
            Some(x) => x,
            None => break,
        };
        if up_delta <= down_delta + TIE_TOL || up == down {
            break;
        }

        if h.get(up) == 0.0 {
            t[up] = (t[up] + 1.0).floor();
            continue;
        }
        if h.get(down) == 0.0 {
            t[down] = (t[down] - 1.0).ceil();
            continue;
        }
        let frac_up = t[up] - t[up].floor();
        let frac_down = t[down] - t[down].floor();
        let drainable = if frac_down == 0.0 { 1.0 } else { frac_down };
        let s = (h.get(down) * drainable).min(h.get(up) * (1.0 - frac_up));
        t[up] = snap(t[up] + s / h.get(up));
        t[down] = snap(t[down] - s / h.get(down));
    }

    // Strip fractional parts and let the greedy place them back.
    let mut freed = 0.0;
    for (rank, tr) in t.iter_mut().enumerate() {
        let floor = tr.floor();
        freed += h.get(rank) * (*tr - floor);
        *tr = floor;
    }
    let floors = RecodingPolicy::new(t)?;
    let mut outcome = solve_greedy(table, h, t_avg, Some((&floors, freed)))?;
    outcome.iterations += iterations;
    Ok(outcome)
}

/// Resource the extraction t_r = min t_r(λ) would consume at water level λ.
fn dual_resource(table: &ExpectedRankTable, h: &InputRankDistribution, lambda: f64) -> f64 {
    (1..=table.m())
        .map(|r| h.get(r) * min_t_r(table, r, lambda) as f64)
        .sum()
}

/// Number of slopes of rank r strictly above λ (the minimal maximizer).
fn min_t_r(table: &ExpectedRankTable, r: usize, lambda: f64) -> usize {
    let mut count = 0;
    for t in 0..table.t_max() {
        if table.delta(r, t as i64).expect("within horizon") > lambda {
            count = t + 1;
        } else {
            break;
        }
    }
    count
}

/// Dual solve: bisection on the water level λ, then extraction of the
/// minimal primal point and a greedy fill of the leftover resource.
///
/// The extraction t_r = min t_r(λ) is all-integer and occupies exactly the
/// cells above the water, i.e. a preferred solution of the smaller
/// subproblem, so the final greedy output is preferred as well.
pub fn solve_dual(
    table: &ExpectedRankTable,
    h: &InputRankDistribution,
    t_avg: f64,
    tol: f64,
) -> Result<OptimizationOutcome> {
    if !(t_avg.is_finite() && t_avg >= 0.0) {
        return Err(Error::InvalidPolicy(format!("t_avg = {t_avg}")));
    }
    assert!(tol > 0.0);
    let m = table.m();
    let mut iterations = 0u64;

    let ceiling = table.max_initial_slope();
    if ceiling <= TIE_TOL && t_avg > RESIDUAL_EPS {
        return Err(Error::DegenerateChannel);
    }

    // Invariant: dual_resource(hi) <= t_avg; lo only ever holds levels whose
    // extraction overshoots.
    let mut lo = 0.0f64;
    let mut hi = ceiling.max(1e-6) * (1.0 + 1e-9);
    let mut lambda = if dual_resource(table, h, lo) <= t_avg {
        lo
    } else {
        while hi - lo > tol {
            iterations += 1;
            let mid = 0.5 * (lo + hi);
            let used = dual_resource(table, h, mid);
            if used <= t_avg {
                hi = mid;
                if used == t_avg {
                    break;
                }
            } else {
                lo = mid;
            }
            if iterations > 200 {
                break;
            }
        }
        hi
    };
    // Guard against landing inside a tie plateau wider than tol.
    if dual_resource(table, h, lambda) > t_avg {
        lambda = ceiling * (1.0 + 1e-9);
    }

    let t: Vec<f64> = (0..=m)
        .map(|r| {
            if r == 0 {
                0.0
            } else {
                min_t_r(table, r, lambda) as f64
            }
        })
        .collect();
    let extracted = RecodingPolicy::new(t)?;
    let used = extracted.resource(h.probs());
    let remainder = (t_avg - used).max(0.0);
    let mut outcome = solve_greedy(table, h, t_avg, Some((&extracted, remainder)))?;
    outcome.iterations += iterations;
    Ok(outcome)
}

/// Retune an existing policy after h or t_avg changed.
///
/// Case I (resource unchanged): tune directly. Case II (spare resource):
/// greedy fill from the old point, then tune. Case III (over budget):
/// release the smallest occupied slopes until the point fits, then proceed
/// as in the other cases.
pub fn retune(
    table: &ExpectedRankTable,
    h_new: &InputRankDistribution,
    t_avg_new: f64,
    old_policy: &RecodingPolicy,
) -> Result<OptimizationOutcome> {
    check_dimensions(table, h_new, old_policy)?;
    if !(t_avg_new.is_finite() && t_avg_new >= 0.0) {
        return Err(Error::InvalidPolicy(format!("t_avg = {t_avg_new}")));
    }
    let m = table.m();
    let mut t: Vec<f64> = old_policy.values().iter().map(|&v| snap(v)).collect();
    for (r, &tr) in t.iter().enumerate() {
        if tr.ceil() as usize > table.t_max() {
            return Err(Error::HorizonExceeded(format!(
                "t_{r} = {tr} beyond horizon {}",
                table.t_max()
            )));
        }
    }

    let mut iterations = 0u64;
    let iteration_cap = 8 * (m as u64 + 1) * (table.t_max() as u64 + 2);
    // Case III: shed the smallest occupied slopes until within budget.
    loop {
        let consumed: f64 = t.iter().zip(h_new.probs()).map(|(t, h)| t * h).sum();
        let excess = consumed - t_avg_new;
        if excess <= FEASIBILITY_TOL {
            break;
        }
        iterations += 1;
        if iterations > iteration_cap {
            return Err(Error::IterationLimit("retune release"));
        }
        let mut smallest: Option<(f64, usize)> = None;
        for (rank, &tr) in t.iter().enumerate() {
            if tr <= 0.0 {
                continue;
            }
            let d = table.delta(rank, (tr - 1.0).ceil() as i64)?;
            match smallest {
                Some((bd, br)) if d > bd + TIE_TOL || ((d - bd).abs() <= TIE_TOL && rank < br) => {}
                _ => smallest = Some((d, rank)),
            }
        }
        let (_, rank) = match smallest {
            Some(x) => x,
            None => break,
        };
        if h_new.get(rank) == 0.0 {
            t[rank] = (t[rank] - 1.0).ceil();
            continue;
        }
        let frac = t[rank] - t[rank].floor();
        let drainable = if frac == 0.0 { 1.0 } else { frac };
        let release = (h_new.get(rank) * drainable).min(excess);
        t[rank] = snap(t[rank] - release / h_new.get(rank));
    }

    let trimmed = RecodingPolicy::new(t)?;
    let consumed = trimmed.resource(h_new.probs());
    let outcome = if consumed < t_avg_new - FEASIBILITY_TOL {
        // Case II: fill first, then tune.
        let filled = solve_greedy(table, h_new, t_avg_new, Some((&trimmed, t_avg_new - consumed)))?;
        let mut tuned = tune(table, h_new, &filled.policy)?;
        tuned.iterations += filled.iterations;
        tuned
    } else {
        tune(table, h_new, &trimmed)?
    };
    // Certify against the requested budget, not the tune-derived one.
    build_outcome(
        table,
        h_new,
        outcome.policy,
        t_avg_new,
        outcome.iterations + iterations,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSize;
    use crate::loss::LossModel;
    use crate::optimizer::certify;

    fn setup() -> (ExpectedRankTable, InputRankDistribution) {
        let model = LossModel::bernoulli(0.2).unwrap();
        let table = ExpectedRankTable::build(&model, FieldSize::Infinite, 4, 68).unwrap();
        let h = InputRankDistribution::new(vec![0.0625, 0.25, 0.375, 0.25, 0.0625]).unwrap();
        (table, h)
    }

    fn assert_policy(got: &RecodingPolicy, want: &[f64], tol: f64) {
        for (r, (&g, &w)) in got.values().iter().zip(want).enumerate() {
            assert!((g - w).abs() <= tol, "t_{r}: got {g}, want {w}");
        }
    }

    #[test]
    fn greedy_solves_worked_example() {
        let (table, h) = setup();
        let out = solve_greedy(&table, &h, 4.0, None).unwrap();
        assert_policy(&out.policy, &[0.0, 2.25, 4.0, 6.0, 7.0], 1e-9);
        assert!(out.flags.feasible);
        assert!(out.flags.ads);
        assert!(out.flags.preferred);
        // Iteration count stays within the ceil-sum bound.
        let bound: f64 = out
            .policy
            .values()
            .iter()
            .map(|t| t.ceil())
            .sum::<f64>()
            + table.m() as f64;
        assert!(out.iterations as f64 <= bound, "{} > {bound}", out.iterations);
    }

    #[test]
    fn greedy_zero_budget() {
        let (table, h) = setup();
        let out = solve_greedy(&table, &h, 0.0, None).unwrap();
        assert!(out.policy.values().iter().all(|&t| t == 0.0));
        assert_eq!(out.objective, 0.0);
        assert!(out.flags.feasible && out.flags.preferred);
    }

    #[test]
    fn greedy_degenerate_channel() {
        let model = LossModel::bernoulli(1.0).unwrap();
        let table = ExpectedRankTable::build(&model, FieldSize::Infinite, 3, 12).unwrap();
        let h = InputRankDistribution::new(vec![0.25, 0.25, 0.25, 0.25]).unwrap();
        assert!(matches!(
            solve_greedy(&table, &h, 2.0, None),
            Err(Error::DegenerateChannel)
        ));
        // Zero budget is still fine.
        assert!(solve_greedy(&table, &h, 0.0, None).is_ok());
    }

    #[test]
    fn greedy_horizon_exhausted() {
        let model = LossModel::bernoulli(0.2).unwrap();
        let table = ExpectedRankTable::build(&model, FieldSize::Finite(2), 2, 8).unwrap();
        let h = InputRankDistribution::new(vec![0.0, 0.5, 0.5]).unwrap();
        // Budget exceeds what all ranks can hold within the horizon.
        assert!(matches!(
            solve_greedy(&table, &h, 20.0, None),
            Err(Error::HorizonExceeded(_))
        ));
    }

    #[test]
    fn tune_keeps_preferred_input() {
        let (table, h) = setup();
        let golden = RecodingPolicy::new(vec![0.0, 2.25, 4.0, 6.0, 7.0]).unwrap();
        let out = tune(&table, &h, &golden).unwrap();
        assert_policy(&out.policy, golden.values(), 1e-12);
        assert!(out.flags.preferred);
    }

    #[test]
    fn tune_restores_optimum_after_perturbation() {
        let (table, h) = setup();
        let golden = solve_greedy(&table, &h, 4.0, None).unwrap();
        // Move one resource unit of mass off rank 3 onto rank 1.
        let perturbed = RecodingPolicy::new(vec![0.0, 3.25, 4.0, 5.0, 7.0]).unwrap();
        assert!((perturbed.resource(h.probs()) - 4.0).abs() < 1e-12);
        let out = tune(&table, &h, &perturbed).unwrap();
        assert!(out.flags.preferred);
        assert!((out.objective - golden.objective).abs() < 1e-9);
        assert_policy(&out.policy, &[0.0, 2.25, 4.0, 6.0, 7.0], 1e-9);
    }

    #[test]
    fn tune_collapses_multiple_fractions() {
        let (table, h) = setup();
        let two_fracs = RecodingPolicy::new(vec![0.0, 2.85, 3.6, 6.0, 7.0]).unwrap();
        let out = tune(&table, &h, &two_fracs).unwrap();
        assert!(out.policy.fractional_ranks(1e-9).len() <= 1);
        assert!(out.flags.preferred);
        let base = objective(&table, &h, &two_fracs).unwrap();
        assert!(out.objective >= base - 1e-12);
    }

    #[test]
    fn tune_from_lopsided_start() {
        let (table, h) = setup();
        // Everything piled on rank 1: feasible (0.25 * 16 = 4) but awful.
        let lopsided = RecodingPolicy::new(vec![0.0, 16.0, 0.0, 0.0, 0.0]).unwrap();
        let out = tune(&table, &h, &lopsided).unwrap();
        assert!(out.flags.preferred, "{:?}", out.policy);
        assert_policy(&out.policy, &[0.0, 2.25, 4.0, 6.0, 7.0], 1e-9);
    }

    #[test]
    fn dual_matches_greedy() {
        let (table, h) = setup();
        let dual = solve_dual(&table, &h, 4.0, 1e-12).unwrap();
        assert_policy(&dual.policy, &[0.0, 2.25, 4.0, 6.0, 7.0], 1e-9);
        assert!(dual.flags.preferred);
        let greedy = solve_greedy(&table, &h, 4.0, None).unwrap();
        assert!((dual.objective - greedy.objective).abs() < 1e-9);
    }

    #[test]
    fn dual_zero_budget() {
        let (table, h) = setup();
        let out = solve_dual(&table, &h, 0.0, 1e-12).unwrap();
        assert!(out.policy.values().iter().all(|&t| t == 0.0));
        // Any water level above every first slope is dual-optimal.
        assert!(out.lambda_interval.0 >= 0.8 - 1e-12);
    }

    #[test]
    fn retune_worked_example_keeps_integer_ranks() {
        let (table, h1) = setup();
        let golden = solve_greedy(&table, &h1, 4.0, None).unwrap();
        let h2 =
            InputRankDistribution::new(vec![0.0625, 0.2, 0.425, 0.3125, 0.0]).unwrap();
        let out = retune(&table, &h2, 4.0, &golden.policy).unwrap();
        assert!(out.flags.preferred, "{:?}", out.policy);
        let t = out.policy.values();
        assert_eq!(t[0], 0.0);
        assert_eq!(t[2], 4.0);
        assert_eq!(t[3], 6.0);
        assert_eq!(t[4], 7.0);
        // t_1 agrees with a cold greedy solve under the new distribution.
        let cold = solve_greedy(&table, &h2, 4.0, None).unwrap();
        assert!((t[1] - cold.policy.get(1)).abs() < 1e-9);
        assert!((out.objective - cold.objective).abs() < 1e-9);
    }

    #[test]
    fn retune_identity_when_nothing_changed() {
        let (table, h) = setup();
        let golden = solve_greedy(&table, &h, 4.0, None).unwrap();
        let out = retune(&table, &h, 4.0, &golden.policy).unwrap();
        assert_policy(&out.policy, golden.policy.values(), 1e-12);
        assert!(out.flags.preferred);
    }

    #[test]
    fn retune_with_more_resource() {
        let (table, h) = setup();
        let golden = solve_greedy(&table, &h, 4.0, None).unwrap();
        let out = retune(&table, &h, 5.0, &golden.policy).unwrap();
        assert!(out.flags.preferred);
        let cold = solve_greedy(&table, &h, 5.0, None).unwrap();
        assert!((out.objective - cold.objective).abs() < 1e-9);
    }

    #[test]
    fn retune_with_less_resource() {
        let (table, h) = setup();
        let golden = solve_greedy(&table, &h, 4.0, None).unwrap();
        let out = retune(&table, &h, 3.0, &golden.policy).unwrap();
        assert!(out.flags.preferred, "{:?}", out.policy.values());
        let cold = solve_greedy(&table, &h, 3.0, None).unwrap();
        assert!((out.objective - cold.objective).abs() < 1e-9);
    }

    #[test]
    fn outcomes_are_certified_not_assumed() {
        let (table, h) = setup();
        let out = solve_greedy(&table, &h, 4.0, None).unwrap();
        let cert = certify(&table, &h, &out.policy, 4.0).unwrap();
        assert_eq!(cert.preferred, out.flags.preferred);
        assert_eq!(cert.feasible, out.flags.feasible);
    }
}
