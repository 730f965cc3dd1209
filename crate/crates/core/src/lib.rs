//! Analysis and simulation toolkit for adaptive recoding in batched
//! network coding.
//!
//! The crate has three layers:
//!
//! * **Channel and rank analytics** — loss-pattern models ([`loss`]),
//!   finite-field rank probabilities ([`rank`]), and the expected-rank
//!   tables E_r(t) built from them ([`table`]).
//! * **Resource allocation** — the recoding-number optimizer
//!   ([`optimizer`]): greedy slope filling, tuning of arbitrary feasible
//!   points, a bisection dual solver, and certification of the
//!   error-tolerant "preferred" structure.
//! * **Simulation** — an RLNC recoder over GF(2^m) with per-hop loss
//!   ([`sim`]) used to validate the analytics end to end.

pub mod error;
pub mod field;
pub mod fmt;
pub mod gf;
pub mod loss;
pub mod optimizer;
pub mod policy;
pub mod rank;
pub mod sim;
pub mod table;

pub use error::{Error, Result};
pub use field::FieldSize;
pub use loss::{CountWindow, LossModel};
pub use policy::RecodingPolicy;
pub use rank::{
    random_matrix_rank_delta, random_matrix_rank_dist, zeta, zeta_transfer, RankDistribution,
};
pub use table::{
    default_t_max, monte_carlo_er, propagate_rank_dist, ConcavityReport, ExpectedRankTable,
};
