use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A value violates a documented domain invariant (unknown target, wrong
    /// position kind, masses not summing to one, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A positive-mass target has more than one closest position.
    #[error("target `{target}` has {minimizers} tied closest positions")]
    ConditionViolated { target: String, minimizers: usize },

    #[error("{count} pseudo-targets exceed the cap of {cap}")]
    CapExceeded { count: usize, cap: usize },

    #[error("n = {n} is below the minimum {required} players for the construction")]
    NTooSmall { n: usize, required: usize },

    #[error("enumeration needs {required} evaluations, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("empirical distribution puts mass on index {index} where the reference is zero")]
    SupportMismatch { index: usize },

    #[error("p = {p} is outside [{lo}, {hi}]")]
    OutOfRange { p: f64, lo: f64, hi: f64 },

    #[error("invalid instance: {0}")]
    InvalidSpec(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        Error::InvalidSpec(msg.into())
    }
}
