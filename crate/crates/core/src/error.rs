//! Error type shared by the whole crate.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by model construction, table building, solving and
/// simulation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A Markov loss model whose state graph is not strongly connected has
    /// no unique stationary distribution.
    #[error("NonErgodicModel: {0}")]
    NonErgodicModel(String),

    /// A loss model parameter is outside its valid range.
    #[error("InvalidModel: {0}")]
    InvalidModel(String),

    /// The field size is not a prime power (or not supported in context).
    #[error("InvalidField: {0}")]
    InvalidField(String),

    /// A rank distribution is malformed (wrong length, negative mass, or
    /// does not sum to one).
    #[error("InvalidDistribution: {0}")]
    InvalidDistribution(String),

    /// A recoding policy is malformed (negative or out-of-horizon entries,
    /// or inconsistent with the stated resource).
    #[error("InvalidPolicy: {0}")]
    InvalidPolicy(String),

    /// Building the expected-rank table would exceed the configured work
    /// budget.
    #[error("TableBudgetExceeded: requested {requested} work units, budget {budget}")]
    TableBudgetExceeded { requested: u64, budget: u64 },

    /// An evaluation or allocation falls beyond the table horizon.
    #[error("HorizonExceeded: {0}")]
    HorizonExceeded(String),

    /// Every slope in the table is zero, so no resource can be allocated
    /// meaningfully (e.g. loss probability one).
    #[error("DegenerateChannel: all expected-rank slopes are zero")]
    DegenerateChannel,

    /// The simulator only supports GF(2^m) with m in {1, 2, 4, 8}.
    #[error("UnsupportedSimulationField: q = {0}")]
    UnsupportedSimulationField(u64),

    /// The exhaustive reference search would visit too many points.
    #[error("OracleBudgetExceeded: {0}")]
    OracleBudgetExceeded(String),

    /// An iterative solver exceeded its safety iteration cap.
    #[error("IterationLimit: {0}")]
    IterationLimit(&'static str),
}

impl Error {
    /// Stable machine-readable name, used by the CLI for exit diagnostics.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NonErgodicModel(_) => "NonErgodicModel",
            Error::InvalidModel(_) => "InvalidModel",
            Error::InvalidField(_) => "InvalidField",
            Error::InvalidDistribution(_) => "InvalidDistribution",
            Error::InvalidPolicy(_) => "InvalidPolicy",
            Error::TableBudgetExceeded { .. } => "TableBudgetExceeded",
            Error::HorizonExceeded(_) => "HorizonExceeded",
            Error::DegenerateChannel => "DegenerateChannel",
            Error::UnsupportedSimulationField(_) => "UnsupportedSimulationField",
            Error::OracleBudgetExceeded(_) => "OracleBudgetExceeded",
            Error::IterationLimit(_) => "IterationLimit",
        }
    }
}
