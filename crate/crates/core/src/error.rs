//! Crate-wide error type.

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Hurst parameter outside the open interval (0, 1/2).
    #[error("hurst parameter must lie strictly in (0, 1/2), got {0}")]
    InvalidHurst(f64),
    /// A scalar or structural parameter failed validation.
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    /// Kernel evaluation outside its domain 0 < s < t.
    #[error("kernel K_H(t, s) requires 0 < s < t, got t = {t}, s = {s}")]
    KernelDomain { t: f64, s: f64 },
    /// Two grid-indexed objects do not share the same grid.
    #[error("grid mismatch: {0}")]
    GridMismatch(&'static str),
    /// The requested operation is not defined for the given inputs.
    #[error("not supported: {0}")]
    Capability(&'static str),
    /// Cholesky factorisation failed even after jitter.
    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,
    /// A regression needs more data points than were supplied.
    #[error("least-squares fit needs at least {needed} points, got {got}")]
    FitUnderdetermined { needed: usize, got: usize },
    /// Normalisation check on a weight function failed.
    #[error("weight function must integrate to 1 over [0, T], got {integral}")]
    WeightNotNormalized { integral: f64 },
    /// A payoff or estimator produced a non-finite value.
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
