//! Error type shared by all solvers and channel operations.

/// Errors produced by construction, validation, and the solvers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Matrix or vector dimensions do not match the operation's contract.
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    /// A domain invariant was violated (non-Hermitian covariance, negative
    /// probability, non-positive budget, ...).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Covariance factorization failed after jitter escalation; the matrix
    /// is indefinite beyond tolerance.
    #[error("factorization failed: {0}")]
    Factorization(String),

    /// Water-filling was asked for an identically zero channel matrix; the
    /// optimal covariance is non-unique there and is not returned.
    #[error("channel matrix is identically zero; capacity is 0 and the optimal covariance is not unique")]
    ZeroChannel,

    /// An internal numerical operation produced a non-finite value.
    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
