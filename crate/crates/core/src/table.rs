//! Expected-rank tables E_r(t) and their slopes.
//!
//! For a channel {Z_t} and recoding field q, the expected rank of a rank-r
//! batch after transmitting t recoded packets is
//!
//!   E_r(t) = Σ_i Pr(i of t packets received) · Σ_j j · ζ_j^{i,r},
//!
//! evaluated exactly from the channel's receive-count distributions and the
//! transfer probabilities in [`crate::rank`]. The table stores E on the
//! integer grid r ∈ 0..=M, t ∈ 0..=t_max; between integers E is extended by
//! linear interpolation, which makes the per-rank slopes
//! Δ_{r,t} = E_r(t+1) − E_r(t) the whole story for the optimizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::FieldSize;
use crate::fmt::{fmt_float, parse_float};
use crate::gf::{GfField, ReducedBasis};
use crate::loss::LossModel;
use crate::policy::RecodingPolicy;
use crate::rank::{zeta_transfer, RankDistribution};

/// Default ceiling on table-construction work (|states|²·t_max² plus the
/// transfer sums), roughly proportional to double operations.
pub const DEFAULT_WORK_BUDGET: u64 = 1_500_000_000;

/// Noise floor: slope differences below this are floating-point artifacts.
pub const SLOPE_TOL: f64 = 1e-12;

/// Dense E_r(t) grid for one (channel, field, batch size).
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedRankTable {
    m: usize,
    q: FieldSize,
    t_max: usize,
    channel_tag: String,
    /// e[r][t], r ∈ 0..=m, t ∈ 0..=t_max.
    e: Vec<Vec<f64>>,
}

/// Concavity violations found in a table.
#[derive(Debug, Clone, Default)]
pub struct ConcavityReport {
    /// (r, t) pairs where Δ_{r,t} > Δ_{r,t-1} beyond the noise floor,
    /// with the violation magnitude.
    pub violations: Vec<(usize, usize, f64)>,
    pub max_violation: f64,
}

impl ConcavityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl ExpectedRankTable {
    /// Build with the default work budget.
    pub fn build(model: &LossModel, q: FieldSize, m: usize, t_max: usize) -> Result<Self> {
        Self::build_with_budget(model, q, m, t_max, DEFAULT_WORK_BUDGET)
    }

    /// Build the table by exact dynamic programming; rejects horizons whose
    /// estimated work exceeds `budget`.
    pub fn build_with_budget(
        model: &LossModel,
        q: FieldSize,
        m: usize,
        t_max: usize,
        budget: u64,
    ) -> Result<Self> {
        if m == 0 || t_max == 0 {
            return Err(Error::InvalidModel(format!(
                "batch size {m} and horizon {t_max} must be positive"
            )));
        }
        let n_states = model.stationary_distribution().map(|p| p.len()).unwrap_or(2);
        let span = (t_max + 1) as u64;
        let work = span
            .saturating_mul(span)
            .saturating_mul((n_states * n_states + m + 1) as u64);
        if work > budget {
            return Err(Error::TableBudgetExceeded {
                requested: work,
                budget,
            });
        }

        let counts = model.receive_count_dists_upto(t_max);

        // mean_rank[i][r] = Σ_j j ζ_j^{i,r}: expected rank of a rank-r batch
        // after i received recodings.
        let mean_rank: Vec<Vec<f64>> = (0..=t_max)
            .map(|i| {
                (0..=m)
                    .map(|r| match q {
                        FieldSize::Infinite => i.min(r) as f64,
                        FieldSize::Finite(_) => (1..=i.min(r))
                            .map(|j| j as f64 * zeta_transfer(j, i, r, q))
                            .sum(),
                    })
                    .collect()
            })
            .collect();

        let e: Vec<Vec<f64>> = (0..=m)
            .map(|r| {
                (0..=t_max)
                    .map(|t| {
                        counts[t]
                            .iter()
                            .enumerate()
                            .map(|(i, p)| p * mean_rank[i][r])
                            .sum()
                    })
                    .collect()
            })
            .collect();

        Ok(ExpectedRankTable {
            m,
            q,
            t_max,
            channel_tag: model.tag(),
            e,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn q(&self) -> FieldSize {
        self.q
    }

    pub fn t_max(&self) -> usize {
        self.t_max
    }

    pub fn channel_tag(&self) -> &str {
        &self.channel_tag
    }

    /// Grid value E_r(t) at integer t.
    pub fn at(&self, r: usize, t: usize) -> f64 {
        self.e[r][t]
    }

    /// E_r(t) for real t via linear interpolation. Exact at integers.
    pub fn eval(&self, r: usize, t: f64) -> Result<f64> {
        assert!(r <= self.m, "rank {r} exceeds batch size {}", self.m);
        assert!(t >= 0.0, "negative recoding number {t}");
        let horizon = self.t_max as f64;
        if t > horizon {
            if t - horizon < 1e-9 {
                return Ok(self.e[r][self.t_max]);
            }
            return Err(Error::HorizonExceeded(format!(
                "t = {t} beyond horizon {}",
                self.t_max
            )));
        }
        let lower = t.floor() as usize;
        let frac = t - lower as f64;
        if frac == 0.0 {
            Ok(self.e[r][lower])
        } else {
            Ok((1.0 - frac) * self.e[r][lower] + frac * self.e[r][lower + 1])
        }
    }

    /// Slope Δ_{r,t} = E_r(t+1) − E_r(t); Δ_{r,-1} is +∞ by convention so
    /// zero recoding numbers are never decremented by the tuning loop.
    pub fn delta(&self, r: usize, t: i64) -> Result<f64> {
        assert!(r <= self.m);
        if t == -1 {
            return Ok(f64::INFINITY);
        }
        assert!(t >= 0, "slope index {t}");
        let t = t as usize;
        if t + 1 > self.t_max {
            return Err(Error::HorizonExceeded(format!(
                "slope at t = {t} beyond horizon {}",
                self.t_max
            )));
        }
        Ok(self.e[r][t + 1] - self.e[r][t])
    }

    /// Largest first slope over all ranks (the initial water level).
    pub fn max_initial_slope(&self) -> f64 {
        (0..=self.m)
            .map(|r| self.e[r][1] - self.e[r][0])
            .fold(0.0, f64::max)
    }

    /// Scan for concavity violations beyond the noise floor.
    pub fn verify_concavity(&self) -> ConcavityReport {
        let mut report = ConcavityReport::default();
        for r in 0..=self.m {
            for t in 1..self.t_max {
                let earlier = self.e[r][t] - self.e[r][t - 1];
                let later = self.e[r][t + 1] - self.e[r][t];
                let excess = later - earlier;
                if excess > SLOPE_TOL {
                    report.violations.push((r, t, excess));
                    report.max_violation = report.max_violation.max(excess);
                }
            }
        }
        report
    }

    /// Serialize as the cache CSV: header `r,t,E,delta`, row-major by r
    /// then t, floats at 17 significant digits. The delta column is empty
    /// on the last grid row of each rank.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("r,t,E,delta\n");
        for r in 0..=self.m {
            for t in 0..=self.t_max {
                let delta = if t < self.t_max {
                    fmt_float(self.e[r][t + 1] - self.e[r][t])
                } else {
                    String::new()
                };
                out.push_str(&format!(
                    "{r},{t},{},{delta}\n",
                    fmt_float(self.e[r][t])
                ));
            }
        }
        out
    }

    /// Parse a table cache produced by [`ExpectedRankTable::to_csv_string`].
    pub fn from_csv_str(csv: &str, q: FieldSize, channel_tag: &str) -> Result<Self> {
        let mut rows: Vec<(usize, usize, f64)> = Vec::new();
        let mut lines = csv.lines();
        match lines.next() {
            Some(h) if h.trim() == "r,t,E,delta" => {}
            _ => return Err(Error::InvalidModel("bad table CSV header".into())),
        }
        for (ln, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 4 {
                return Err(Error::InvalidModel(format!("table CSV line {}", ln + 2)));
            }
            let r: usize = parts[0]
                .parse()
                .map_err(|_| Error::InvalidModel(format!("table CSV line {}", ln + 2)))?;
            let t: usize = parts[1]
                .parse()
                .map_err(|_| Error::InvalidModel(format!("table CSV line {}", ln + 2)))?;
            let e = parse_float(parts[2])
                .ok_or_else(|| Error::InvalidModel(format!("table CSV line {}", ln + 2)))?;
            rows.push((r, t, e));
        }
        let m = rows.iter().map(|&(r, _, _)| r).max().unwrap_or(0);
        let t_max = rows.iter().map(|&(_, t, _)| t).max().unwrap_or(0);
        if m == 0 || t_max == 0 || rows.len() != (m + 1) * (t_max + 1) {
            return Err(Error::InvalidModel("table CSV grid incomplete".into()));
        }
        let mut e = vec![vec![f64::NAN; t_max + 1]; m + 1];
        for (r, t, v) in rows {
            e[r][t] = v;
        }
        if e.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::InvalidModel("table CSV grid incomplete".into()));
        }
        Ok(ExpectedRankTable {
            m,
            q,
            t_max,
            channel_tag: channel_tag.to_string(),
            e,
        })
    }
}

/// Sensible horizon: enough room for the greedy to exhaust t_avg on the
/// rarest supported rank, and never less than 4M.
pub fn default_t_max(m: usize, t_avg: f64, h: &[f64]) -> usize {
    let min_pos = h
        .iter()
        .copied()
        .filter(|&x| x > 0.0)
        .fold(f64::INFINITY, f64::min);
    let spread = if min_pos.is_finite() && t_avg > 0.0 {
        (t_avg / min_pos).ceil() as usize
    } else {
        0
    };
    (m + spread).max(4 * m)
}

/// Monte Carlo estimate of E_r(t): sample a loss pattern, draw the received
/// random linear combinations, measure the rank. Returns (mean, standard
/// error). Finite fields must be GF(2^m), m ∈ {1, 2, 4, 8}.
pub fn monte_carlo_er(
    model: &LossModel,
    q: FieldSize,
    r: usize,
    t: usize,
    trials: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    let field = match q {
        FieldSize::Infinite => None,
        FieldSize::Finite(qv) => Some(GfField::new(qv)?),
    };
    assert!(trials >= 2);
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    for trial in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, trial));
        let pattern = model.sample_pattern_with(t, &mut rng);
        let received = pattern.iter().filter(|&&b| b).count();
        let rank = match &field {
            None => received.min(r),
            Some(f) => {
                let mut basis = ReducedBasis::new();
                for _ in 0..received {
                    let col: Vec<u8> = (0..r).map(|_| f.random(&mut rng)).collect();
                    basis.absorb(f, col);
                }
                basis.rank()
            }
        };
        sum += rank as f64;
        sum_sq += (rank * rank) as f64;
    }
    let n = trials as f64;
    let mean = sum / n;
    let var = ((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// Stable per-trial seed derivation (splitmix64 over master ⊕ index).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Push an input rank distribution through one hop under a policy:
/// h'_j = Σ_r h_r Σ_t α_{t|r} Σ_i P_t(i) ζ_j^{i,r}.
///
/// The mean of the result equals the resource-weighted objective
/// Σ_r h_r E_r(t_r) by construction.
pub fn propagate_rank_dist(
    model: &LossModel,
    q: FieldSize,
    m: usize,
    h: &RankDistribution,
    policy: &RecodingPolicy,
) -> Result<RankDistribution> {
    if h.r_max() != m || policy.max_rank() != m {
        return Err(Error::InvalidDistribution(format!(
            "rank distribution ({}) and policy ({}) must both cover 0..={m}",
            h.r_max(),
            policy.max_rank()
        )));
    }
    let t_need = (0..=m)
        .flat_map(|r| policy.conditional_dist(r))
        .map(|(t, _)| t)
        .max()
        .unwrap_or(0);
    if t_need > 100_000 {
        return Err(Error::HorizonExceeded(format!(
            "policy requires {t_need} transmissions"
        )));
    }
    let counts = model.receive_count_dists_upto(t_need);
    let mut out = vec![0.0f64; m + 1];
    for r in 0..=m {
        let hr = h.probs()[r];
        if hr == 0.0 {
            continue;
        }
        for (t, alpha) in policy.conditional_dist(r) {
            for (i, p) in counts[t].iter().enumerate() {
                if *p == 0.0 {
                    continue;
                }
                match q {
                    FieldSize::Infinite => out[i.min(r)] += hr * alpha * p,
                    FieldSize::Finite(_) => {
                        for (j, slot) in out.iter_mut().enumerate().take(i.min(r) + 1) {
                            *slot += hr * alpha * p * zeta_transfer(j, i, r, q);
                        }
                    }
                }
            }
        }
    }
    RankDistribution::new(out)
}
