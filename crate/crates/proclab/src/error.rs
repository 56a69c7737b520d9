//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input matrix fails the Hermiticity check.
    #[error("matrix is not Hermitian: max asymmetry {max_asymmetry:.3e} exceeds tolerance {tol:.3e}")]
    NotHermitian { max_asymmetry: f64, tol: f64 },

    /// Operator or state dimensions are inconsistent.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A labeled leg was expected but not found on an operator.
    #[error("leg {0} not present on operator")]
    MissingLeg(String),

    /// The same leg label appears twice on one operator.
    #[error("duplicate leg {0}")]
    DuplicateLeg(String),

    /// Two operators that should share a leg structure do not.
    #[error("leg mismatch: {0}")]
    LegMismatch(String),

    /// Positivity violated beyond tolerance.
    #[error("operator is not positive semidefinite: min eigenvalue {0:.3e}")]
    NotPositive(f64),

    /// Input is not a valid density matrix.
    #[error("not a valid state: {0}")]
    NotAState(String),

    /// Energy-level index out of range.
    #[error("level index {index} out of range for {levels} levels")]
    LevelOutOfRange { index: usize, levels: usize },

    /// Exact summation would exceed the desk-scale term cap.
    #[error("term cap exceeded: sum has {terms} terms, cap is {cap}")]
    CapExceeded { terms: u128, cap: u128 },

    /// Numerical evaluation budget exceeded.
    #[error("evaluation budget exceeded: {0}")]
    BudgetExceeded(String),

    /// A state with zero trace cannot be renormalized.
    #[error("state has zero trace")]
    ZeroTrace,

    /// An operation over an empty collection.
    #[error("empty set: {0}")]
    EmptySet(String),

    /// Experiment configuration is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// Serialized file violates the declared format.
    #[error("file format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
