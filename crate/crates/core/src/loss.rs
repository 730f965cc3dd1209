//! Packet-loss pattern models.
//!
//! A loss pattern is a binary process {Z_t} where Z_t = 1 means the t-th
//! transmitted packet of a batch arrives at the next node. All stationary
//! variants are finite Markov chains started from their stationary
//! distribution; `DeterministicPrefix` prepends a fixed bit sequence to an
//! otherwise stationary tail, which is the one deliberately non-stationary
//! model kept around for concavity counterexamples.
//!
//! All distribution computations are exact dynamic programs over
//! (chain state, received count); sampling is only used by the Monte Carlo
//! cross-checks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;
const MAX_STATES: usize = 64;

/// A packet-loss process.
///
/// Construct through the checked constructors; invalid parameters
/// (probabilities outside [0,1], non-stochastic rows, non-ergodic chains)
/// are rejected up front so the query methods never fail.
#[derive(Debug, Clone, PartialEq)]
pub struct LossModel {
    kind: Kind,
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Bernoulli {
        loss: f64,
    },
    GilbertElliott {
        p_gb: f64,
        p_bg: f64,
        loss_good: f64,
        loss_bad: f64,
    },
    MarkovModulated {
        transition: Vec<Vec<f64>>,
        loss: Vec<f64>,
        stationary: Vec<f64>,
    },
    DeterministicPrefix {
        prefix: Vec<bool>,
        tail: Box<LossModel>,
    },
}

/// Constraint that the number of received packets among Z_start..=Z_end
/// equals `count`. Indices are 1-based like the packet positions.
#[derive(Debug, Clone, Copy)]
pub struct CountWindow {
    pub start: usize,
    pub end: usize,
    pub count: usize,
}

/// Stationary-chain view: transition matrix, per-state receive probability
/// and the initial (stationary) state distribution.
struct OwnedChain {
    transition: Vec<Vec<f64>>,
    receive: Vec<f64>,
    init: Vec<f64>,
}

impl LossModel {
    /// Independent loss with the given loss probability.
    pub fn bernoulli(loss: f64) -> Result<Self> {
        check_prob("loss probability", loss)?;
        Ok(LossModel {
            kind: Kind::Bernoulli { loss },
        })
    }

    /// Two-state Gilbert-Elliott burst model. `p_gb` and `p_bg` are the
    /// Good→Bad and Bad→Good transition probabilities.
    pub fn gilbert_elliott(p_gb: f64, p_bg: f64, loss_good: f64, loss_bad: f64) -> Result<Self> {
        check_prob("p_gb", p_gb)?;
        check_prob("p_bg", p_bg)?;
        check_prob("loss_good", loss_good)?;
        check_prob("loss_bad", loss_bad)?;
        let transition = vec![vec![1.0 - p_gb, p_gb], vec![p_bg, 1.0 - p_bg]];
        // Rejects the reducible configurations (p_gb or p_bg zero).
        stationary_of(&transition)?;
        Ok(LossModel {
            kind: Kind::GilbertElliott {
                p_gb,
                p_bg,
                loss_good,
                loss_bad,
            },
        })
    }

    /// General Markov-modulated loss: row-stochastic transition matrix and a
    /// per-state loss probability. The chain must be irreducible.
    pub fn markov_modulated(transition: Vec<Vec<f64>>, loss: Vec<f64>) -> Result<Self> {
        let n = transition.len();
        if n == 0 || n > MAX_STATES {
            return Err(Error::InvalidModel(format!(
                "state count {n} outside 1..={MAX_STATES}"
            )));
        }
        if loss.len() != n {
            return Err(Error::InvalidModel(format!(
                "loss vector length {} != {n} states",
                loss.len()
            )));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidModel(format!("transition row {i} length")));
            }
            for &p in row {
                check_prob("transition entry", p)?;
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidModel(format!(
                    "transition row {i} sums to {sum}"
                )));
            }
        }
        for &p in &loss {
            check_prob("per-state loss", p)?;
        }
        let stationary = stationary_of(&transition)?;
        Ok(LossModel {
            kind: Kind::MarkovModulated {
                transition,
                loss,
                stationary,
            },
        })
    }

    /// Fixed leading bits (true = received) followed by `tail`.
    pub fn with_prefix(prefix: Vec<bool>, tail: LossModel) -> Self {
        LossModel {
            kind: Kind::DeterministicPrefix {
                prefix,
                tail: Box::new(tail),
            },
        }
    }

    /// Whether the process is stationary (no deterministic prefix).
    pub fn is_stationary(&self) -> bool {
        match &self.kind {
            Kind::DeterministicPrefix { prefix, tail } => prefix.is_empty() && tail.is_stationary(),
            _ => true,
        }
    }

    /// Short human-readable identifier used to tag derived tables.
    pub fn tag(&self) -> String {
        match &self.kind {
            Kind::Bernoulli { loss } => format!("bernoulli({loss})"),
            Kind::GilbertElliott {
                p_gb,
                p_bg,
                loss_good,
                loss_bad,
            } => format!("ge({p_gb},{p_bg},{loss_good},{loss_bad})"),
            Kind::MarkovModulated { transition, .. } => format!("markov({})", transition.len()),
            Kind::DeterministicPrefix { prefix, tail } => {
                let bits: String = prefix.iter().map(|&b| if b { '1' } else { '0' }).collect();
                format!("prefix[{bits}]+{}", tail.tag())
            }
        }
    }

    /// Stationary distribution of the underlying state chain.
    ///
    /// Bernoulli is its own single-state chain. Prefixed models have no
    /// stationary law and are rejected.
    pub fn stationary_distribution(&self) -> Result<Vec<f64>> {
        match &self.kind {
            Kind::Bernoulli { .. } => Ok(vec![1.0]),
            Kind::GilbertElliott { p_gb, p_bg, .. } => {
                stationary_of(&[vec![1.0 - p_gb, *p_gb], vec![*p_bg, 1.0 - p_bg]])
            }
            Kind::MarkovModulated { stationary, .. } => Ok(stationary.clone()),
            Kind::DeterministicPrefix { .. } => Err(Error::InvalidModel(
                "prefixed process has no stationary distribution".into(),
            )),
        }
    }

    fn prefix_and_tail(&self) -> (Vec<bool>, &LossModel) {
        let mut bits = Vec::new();
        let mut cur = self;
        while let Kind::DeterministicPrefix { prefix, tail } = &cur.kind {
            bits.extend_from_slice(prefix);
            cur = tail;
        }
        (bits, cur)
    }

    fn chain(&self) -> OwnedChain {
        match &self.kind {
            Kind::Bernoulli { loss } => OwnedChain {
                transition: vec![vec![1.0]],
                receive: vec![1.0 - loss],
                init: vec![1.0],
            },
            Kind::GilbertElliott {
                p_gb,
                p_bg,
                loss_good,
                loss_bad,
            } => {
                let transition = vec![vec![1.0 - p_gb, *p_gb], vec![*p_bg, 1.0 - p_bg]];
                let init = stationary_of(&transition).expect("validated at construction");
                OwnedChain {
                    transition,
                    receive: vec![1.0 - loss_good, 1.0 - loss_bad],
                    init,
                }
            }
            Kind::MarkovModulated {
                transition,
                loss,
                stationary,
            } => OwnedChain {
                transition: transition.clone(),
                receive: loss.iter().map(|&p| 1.0 - p).collect(),
                init: stationary.clone(),
            },
            Kind::DeterministicPrefix { .. } => unreachable!("prefix peeled by caller"),
        }
    }

    /// Distribution of the number of received packets among the first `t`.
    ///
    /// Exact DP over (state, count); the result has length t + 1 and sums
    /// to one up to rounding.
    pub fn receive_count_dist(&self, t: usize) -> Vec<f64> {
        self.receive_count_dist_after(0, t)
    }

    /// Distribution of received packets among Z_{burnin+1} .. Z_{burnin+t}.
    ///
    /// For stationary models this is independent of `burnin`, which is what
    /// the stationarity tests exercise.
    pub fn receive_count_dist_after(&self, burnin: usize, t: usize) -> Vec<f64> {
        let (bits, tail) = self.prefix_and_tail();
        let skipped = burnin.min(bits.len());
        let in_window = &bits[skipped..bits.len().min(skipped + t)];
        let base: usize = in_window.iter().filter(|&&b| b).count();
        let chain_burnin = burnin - skipped;
        let chain_t = t - in_window.len();

        let chain = tail.chain();
        let counts = chain_count_dist(&chain, chain_burnin, chain_t);

        let mut out = vec![0.0; t + 1];
        for (c, p) in counts.iter().enumerate() {
            out[c + base] += p;
        }
        out
    }

    /// Received-count distributions for every horizon 0..=t_max in one
    /// forward pass. `out[t]` equals `receive_count_dist(t)`.
    pub fn receive_count_dists_upto(&self, t_max: usize) -> Vec<Vec<f64>> {
        let (bits, tail) = self.prefix_and_tail();
        let chain = tail.chain();
        let n = chain.init.len();
        let chain_steps = t_max.saturating_sub(bits.len());

        // Forward DP over the stationary part; marginals recorded per step.
        let mut f = vec![vec![0.0f64; chain_steps + 1]; n];
        for s in 0..n {
            f[s][0] = chain.init[s];
        }
        let mut chain_marginals: Vec<Vec<f64>> = Vec::with_capacity(chain_steps + 1);
        let marginal = |f: &Vec<Vec<f64>>, len: usize| -> Vec<f64> {
            let mut out = vec![0.0; len + 1];
            for row in f {
                for (c, item) in out.iter_mut().enumerate() {
                    *item += row[c];
                }
            }
            out
        };
        chain_marginals.push(marginal(&f, 0));
        for step in 0..chain_steps {
            let mut g = vec![vec![0.0f64; chain_steps + 1]; n];
            for s in 0..n {
                let pr = chain.receive[s];
                for c in 0..=step {
                    let mass = f[s][c];
                    if mass == 0.0 {
                        continue;
                    }
                    for s2 in 0..n {
                        let tp = chain.transition[s][s2];
                        if tp == 0.0 {
                            continue;
                        }
                        g[s2][c + 1] += mass * pr * tp;
                        g[s2][c] += mass * (1.0 - pr) * tp;
                    }
                }
            }
            f = g;
            chain_marginals.push(marginal(&f, step + 1));
        }

        (0..=t_max)
            .map(|t| {
                let in_prefix = t.min(bits.len());
                let base: usize = bits[..in_prefix].iter().filter(|&&b| b).count();
                let mut out = vec![0.0; t + 1];
                if t <= bits.len() {
                    out[base] = 1.0;
                } else {
                    for (c, p) in chain_marginals[t - bits.len()].iter().enumerate() {
                        if c + base <= t {
                            out[c + base] += p;
                        }
                    }
                }
                out
            })
            .collect()
    }

    /// Exact probability of a joint event on the pattern: fixed bits at
    /// given 1-based positions, plus an optional received-count constraint
    /// over a window. Contradictory bit constraints yield probability zero.
    pub fn joint_event_prob(
        &self,
        constraints: &[(usize, bool)],
        window: Option<CountWindow>,
    ) -> f64 {
        let mut fixed: std::collections::BTreeMap<usize, bool> = std::collections::BTreeMap::new();
        for &(idx, bit) in constraints {
            assert!(idx >= 1, "constraint positions are 1-based");
            if let Some(&prev) = fixed.get(&idx) {
                if prev != bit {
                    return 0.0;
                }
            }
            fixed.insert(idx, bit);
        }
        let mut t_end = fixed.keys().next_back().copied().unwrap_or(0);
        if let Some(w) = &window {
            assert!(w.start >= 1 && w.start <= w.end, "bad count window");
            if w.count > w.end - w.start + 1 {
                return 0.0;
            }
            t_end = t_end.max(w.end);
        }

        let (bits, tail) = self.prefix_and_tail();
        let chain = tail.chain();
        let n = chain.transition.len();
        let k_max = window.map(|w| w.count + 1).unwrap_or(1);
        // f[s][k]: chain state before the next step, window count so far
        // (clamped at count + 1 so overshoot stays representable).
        let mut f = vec![vec![0.0f64; k_max + 1]; n];
        for s in 0..n {
            f[s][0] = chain.init[s];
        }

        for i in 1..=t_end {
            let deterministic = bits.get(i - 1).copied();
            let mut g = vec![vec![0.0f64; k_max + 1]; n];
            for s in 0..n {
                for k in 0..=k_max {
                    let mass = f[s][k];
                    if mass == 0.0 {
                        continue;
                    }
                    let step = |z: bool, pz: f64, g: &mut Vec<Vec<f64>>| {
                        if let Some(&want) = fixed.get(&i) {
                            if want != z {
                                return;
                            }
                        }
                        let mut k2 = k;
                        if let Some(w) = &window {
                            if z && i >= w.start && i <= w.end {
                                k2 = (k + 1).min(k_max);
                            }
                        }
                        if deterministic.is_some() {
                            // State does not advance during the prefix.
                            g[s][k2] += mass * pz;
                        } else {
                            for s2 in 0..n {
                                g[s2][k2] += mass * pz * chain.transition[s][s2];
                            }
                        }
                    };
                    match deterministic {
                        Some(bit) => step(bit, 1.0, &mut g),
                        None => {
                            step(true, chain.receive[s], &mut g);
                            step(false, 1.0 - chain.receive[s], &mut g);
                        }
                    }
                }
            }
            f = g;
        }

        let mut total = 0.0;
        for s in 0..n {
            match &window {
                Some(w) => total += f[s][w.count],
                None => total += f[s].iter().sum::<f64>(),
            }
        }
        total
    }

    /// Sample a loss pattern of length t. Deterministic given the seed.
    pub fn sample_pattern(&self, t: usize, seed: u64) -> Vec<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_pattern_with(t, &mut rng)
    }

    /// Sample using an externally provided RNG (used by the simulator).
    pub fn sample_pattern_with<R: Rng>(&self, t: usize, rng: &mut R) -> Vec<bool> {
        let (bits, tail) = self.prefix_and_tail();
        let mut out = Vec::with_capacity(t);
        out.extend(bits.iter().take(t).copied());
        if out.len() == t {
            return out;
        }
        let chain = tail.chain();
        let mut state = sample_index(&chain.init, rng);
        for _ in out.len()..t {
            out.push(rng.random_bool(chain.receive[state].clamp(0.0, 1.0)));
            state = sample_index(&chain.transition[state], rng);
        }
        out
    }
}

fn check_prob(what: &str, p: f64) -> Result<()> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("{what} = {p} outside [0, 1]")))
    }
}

fn sample_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Received-count distribution after `burnin` steps of a stationary chain.
fn chain_count_dist(view: &OwnedChain, burnin: usize, t: usize) -> Vec<f64> {
    let n = view.init.len();
    let mut state = view.init.clone();
    for _ in 0..burnin {
        let mut next = vec![0.0; n];
        for s in 0..n {
            for s2 in 0..n {
                next[s2] += state[s] * view.transition[s][s2];
            }
        }
        state = next;
    }
    // f[s][c]
    let mut f = vec![vec![0.0f64; t + 1]; n];
    for s in 0..n {
        f[s][0] = state[s];
    }
    for step in 0..t {
        let mut g = vec![vec![0.0f64; t + 1]; n];
        for s in 0..n {
            let pr = view.receive[s];
            for c in 0..=step {
                let mass = f[s][c];
                if mass == 0.0 {
                    continue;
                }
                for s2 in 0..n {
                    let tp = view.transition[s][s2];
                    if tp == 0.0 {
                        continue;
                    }
                    g[s2][c + 1] += mass * pr * tp;
                    g[s2][c] += mass * (1.0 - pr) * tp;
                }
            }
        }
        f = g;
    }
    let mut out = vec![0.0; t + 1];
    for s in 0..n {
        for c in 0..=t {
            out[c] += f[s][c];
        }
    }
    out
}

/// Unique stationary distribution of a row-stochastic matrix, or an error
/// when the chain is not irreducible.
fn stationary_of(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = transition.len();
    if !strongly_connected(transition) {
        return Err(Error::NonErgodicModel(format!(
            "{n}-state chain is not irreducible"
        )));
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    // Solve pi^T T = pi^T with sum(pi) = 1: rows of (T^T - I), last row
    // replaced by the normalization constraint.
    let mut a = vec![vec![0.0f64; n + 1]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = transition[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[n - 1][j] = 1.0;
    }
    a[n - 1][n] = 1.0;

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-14 {
            return Err(Error::NonErgodicModel(
                "stationary system is singular".into(),
            ));
        }
        a.swap(col, pivot);
        let d = a[col][col];
        for j in col..=n {
            a[col][j] /= d;
        }
        for i in 0..n {
            if i != col && a[i][col] != 0.0 {
                let factor = a[i][col];
                for j in col..=n {
                    a[i][j] -= factor * a[col][j];
                }
            }
        }
    }
    let mut pi: Vec<f64> = (0..n).map(|i| a[i][n].max(0.0)).collect();
    let sum: f64 = pi.iter().sum();
    for p in &mut pi {
        *p /= sum;
    }
    Ok(pi)
}

fn strongly_connected(transition: &[Vec<f64>]) -> bool {
    let n = transition.len();
    let reach = |forward: bool| -> usize {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(s) = stack.pop() {
            for s2 in 0..n {
                let edge = if forward {
                    transition[s][s2]
                } else {
                    transition[s2][s]
                };
                if edge > 0.0 && !seen[s2] {
                    seen[s2] = true;
                    count += 1;
                    stack.push(s2);
                }
            }
        }
        count
    };
    reach(true) == n && reach(false) == n
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn stationary_examples() {
        let ge = LossModel::gilbert_elliott(0.1, 0.3, 0.0, 1.0).unwrap();
        let pi = ge.stationary_distribution().unwrap();
        assert!((pi[0] - 0.75).abs() < TOL);
        assert!((pi[1] - 0.25).abs() < TOL);

        let b = LossModel::bernoulli(0.3).unwrap();
        assert_eq!(b.stationary_distribution().unwrap(), vec![1.0]);

        let sym = LossModel::gilbert_elliott(0.5, 0.5, 0.0, 1.0).unwrap();
        let pi = sym.stationary_distribution().unwrap();
        assert!((pi[0] - 0.5).abs() < TOL && (pi[1] - 0.5).abs() < TOL);
    }

    #[test]
    fn non_ergodic_rejected() {
        assert!(matches!(
            LossModel::gilbert_elliott(0.0, 0.3, 0.0, 1.0),
            Err(Error::NonErgodicModel(_))
        ));
        let err = LossModel::markov_modulated(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.1, 0.9],
        );
        assert!(matches!(err, Err(Error::NonErgodicModel(_))));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(LossModel::bernoulli(1.5).is_err());
        assert!(LossModel::bernoulli(-0.1).is_err());
        let err = LossModel::markov_modulated(vec![vec![0.6, 0.6], vec![0.5, 0.5]], vec![0.0, 0.0]);
        assert!(matches!(err, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn receive_count_binomial() {
        let m = LossModel::bernoulli(0.2).unwrap();
        let d = m.receive_count_dist(2);
        assert!((d[0] - 0.04).abs() < TOL);
        assert!((d[1] - 0.32).abs() < TOL);
        assert!((d[2] - 0.64).abs() < TOL);
    }

    #[test]
    fn receive_count_t_zero() {
        for m in [
            LossModel::bernoulli(0.7).unwrap(),
            LossModel::gilbert_elliott(0.1, 0.3, 0.0, 1.0).unwrap(),
        ] {
            assert_eq!(m.receive_count_dist(0), vec![1.0]);
        }
    }

    #[test]
    fn receive_count_sums_to_one() {
        let models = [
            LossModel::bernoulli(0.35).unwrap(),
            LossModel::gilbert_elliott(0.05, 0.2, 0.01, 0.8).unwrap(),
            LossModel::markov_modulated(
                vec![
                    vec![0.7, 0.2, 0.1],
                    vec![0.3, 0.4, 0.3],
                    vec![0.25, 0.25, 0.5],
                ],
                vec![0.0, 0.5, 0.9],
            )
            .unwrap(),
            LossModel::with_prefix(vec![true, false], LossModel::bernoulli(0.4).unwrap()),
        ];
        for m in &models {
            for t in 0..=64 {
                let d = m.receive_count_dist(t);
                let sum: f64 = d.iter().sum();
                assert!((sum - 1.0).abs() < TOL, "{} t={t}: {sum}", m.tag());
            }
        }
    }

    #[test]
    fn stationarity_under_burn_in() {
        let models = [
            LossModel::bernoulli(0.35).unwrap(),
            LossModel::gilbert_elliott(0.1, 0.3, 0.0, 1.0).unwrap(),
            LossModel::markov_modulated(
                vec![vec![0.9, 0.1], vec![0.4, 0.6]],
                vec![0.05, 0.75],
            )
            .unwrap(),
        ];
        for m in &models {
            let base = m.receive_count_dist(12);
            for burnin in [1usize, 5] {
                let shifted = m.receive_count_dist_after(burnin, 12);
                for (a, b) in base.iter().zip(&shifted) {
                    assert!((a - b).abs() < TOL, "{} burnin={burnin}", m.tag());
                }
            }
        }
    }

    #[test]
    fn prefix_semantics() {
        let m = LossModel::with_prefix(vec![true], LossModel::bernoulli(0.2).unwrap());
        assert!(!m.is_stationary());
        // Pr(Z_1 = 1) = 1 exactly.
        assert_eq!(m.joint_event_prob(&[(1, true)], None), 1.0);
        let d = m.receive_count_dist(1);
        assert_eq!(d, vec![0.0, 1.0]);
        // Two packets: first always arrives, second is Bernoulli.
        let d = m.receive_count_dist(2);
        assert!((d[1] - 0.2).abs() < TOL);
        assert!((d[2] - 0.8).abs() < TOL);
    }

    #[test]
    fn ge_equals_two_state_markov() {
        let ge = LossModel::gilbert_elliott(0.1, 0.3, 0.0, 1.0).unwrap();
        let mk = LossModel::markov_modulated(
            vec![vec![0.9, 0.1], vec![0.3, 0.7]],
            vec![0.0, 1.0],
        )
        .unwrap();
        for t in 0..=32 {
            let a = ge.receive_count_dist(t);
            let b = mk.receive_count_dist(t);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-14, "t={t}");
            }
        }
    }

    #[test]
    fn joint_event_examples() {
        let m = LossModel::bernoulli(0.5).unwrap();
        let p = m.joint_event_prob(&[(1, true), (3, true)], None);
        assert!((p - 0.25).abs() < TOL);

        let m = LossModel::bernoulli(1.0).unwrap();
        assert_eq!(m.joint_event_prob(&[(1, true)], None), 0.0);

        // Contradiction is probability zero, not an error.
        let m = LossModel::bernoulli(0.2).unwrap();
        assert_eq!(m.joint_event_prob(&[(2, true), (2, false)], None), 0.0);
    }

    #[test]
    fn joint_event_with_window() {
        // Bernoulli(0.5): Pr(Z_1=1, Z_4=1, exactly one of Z_2..Z_3) =
        // 0.5 * 0.5 * (2 * 0.25) = 0.125.
        let m = LossModel::bernoulli(0.5).unwrap();
        let w = CountWindow {
            start: 2,
            end: 3,
            count: 1,
        };
        let p = m.joint_event_prob(&[(1, true), (4, true)], Some(w));
        assert!((p - 0.125).abs() < TOL);

        // Impossible target count.
        let w = CountWindow {
            start: 2,
            end: 3,
            count: 5,
        };
        assert_eq!(m.joint_event_prob(&[], Some(w)), 0.0);
    }

    #[test]
    fn joint_event_matches_sampling_on_ge() {
        let m = LossModel::gilbert_elliott(0.1, 0.3, 0.0, 1.0).unwrap();
        let exact = m.joint_event_prob(&[(1, true), (4, true)], None);
        let trials = 1_000_000u64;
        let mut hits = 0u64;
        for i in 0..trials {
            let pat = m.sample_pattern(4, 9000 + i);
            if pat[0] && pat[3] {
                hits += 1;
            }
        }
        let est = hits as f64 / trials as f64;
        let se = (est * (1.0 - est) / trials as f64).sqrt();
        assert!(
            (est - exact).abs() <= 3.0 * se.max(1e-9),
            "exact {exact}, sampled {est} ± {se}"
        );
    }

    #[test]
    fn receive_count_matches_sampling_on_ge() {
        let m = LossModel::gilbert_elliott(0.1, 0.3, 0.0, 1.0).unwrap();
        let exact = m.receive_count_dist(3);
        let trials = 1_000_000usize;
        let mut counts = vec![0u64; 4];
        for i in 0..trials {
            let pat = m.sample_pattern(3, 31_000 + i as u64);
            counts[pat.iter().filter(|&&b| b).count()] += 1;
        }
        for (c, (&exp, &got)) in exact.iter().zip(&counts).enumerate() {
            let est = got as f64 / trials as f64;
            let se = (exp * (1.0 - exp) / trials as f64).sqrt();
            assert!(
                (est - exp).abs() <= 3.0 * se.max(1e-9),
                "count {c}: exact {exp}, sampled {est}"
            );
        }
    }

    #[test]
    fn batch_count_dists_match_single_calls() {
        let models = [
            LossModel::bernoulli(0.25).unwrap(),
            LossModel::gilbert_elliott(0.05, 0.2, 0.01, 0.8).unwrap(),
            LossModel::with_prefix(
                vec![false, true, true],
                LossModel::bernoulli(0.4).unwrap(),
            ),
        ];
        for m in &models {
            let all = m.receive_count_dists_upto(20);
            for (t, batch) in all.iter().enumerate() {
                let single = m.receive_count_dist(t);
                assert_eq!(batch.len(), single.len());
                for (a, b) in batch.iter().zip(&single) {
                    assert!((a - b).abs() < TOL, "{} t={t}", m.tag());
                }
            }
        }
    }

    #[test]
    fn sample_pattern_edges() {
        let m = LossModel::bernoulli(0.0).unwrap();
        assert!(m.sample_pattern(8, 1).iter().all(|&b| b));
        let m = LossModel::bernoulli(1.0).unwrap();
        assert!(m.sample_pattern(5, 2).iter().all(|&b| !b));
    }

    #[test]
    fn sample_pattern_deterministic_and_unbiased() {
        let m = LossModel::bernoulli(0.2).unwrap();
        assert_eq!(m.sample_pattern(100, 7), m.sample_pattern(100, 7));
        let pat = m.sample_pattern(1_000_000, 42);
        let frac = pat.iter().filter(|&&b| b).count() as f64 / 1e6;
        assert!((frac - 0.8).abs() < 0.002, "received fraction {frac}");
    }
}
