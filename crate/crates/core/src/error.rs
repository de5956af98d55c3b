use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the operation (bad element id,
    /// element already in the set, coordinate outside [0, 1], ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// The instance is too large for the requested exhaustive method.
    #[error("size error: {what} is {actual}, limit is {limit}")]
    Size {
        what: &'static str,
        actual: u128,
        limit: u128,
    },

    /// The fairness requirement cannot be met with the given budget.
    #[error("infeasible fairness requirement: sum of r is {sum_r} but k is {k}")]
    Infeasible { sum_r: f64, k: usize },

    /// A precondition on an intermediate value did not hold.
    #[error("contract violated: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("solver failure: {0}")]
    Solver(String),
}
