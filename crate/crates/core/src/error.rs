use thiserror::Error;

/// Errors raised by the quadrature library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BqError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point outside kernel domain: {0}")]
    DomainViolation(String),

    #[error("kernel {kernel} is not differentiable here: {reason}")]
    NotDifferentiable { kernel: String, reason: String },

    #[error("no closed-form kernel mean for {kernel} under {measure} and the oracle fallback is disabled")]
    UnsupportedPair { kernel: String, measure: String },

    #[error("Gram matrix of {n} points is not positive definite with jitter {jitter:e} (near-duplicate points?)")]
    Factorization { n: usize, jitter: f64 },

    #[error("posterior variance {0:e} is negative beyond round-off; the Gram system is badly conditioned")]
    NegativeVariance(f64),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("fill distance needs a bounded domain")]
    UnboundedDomain,

    #[error("singular system: {0}")]
    Singular(String),

    #[error("integration did not converge after {subdivisions} subdivisions (error estimate {error:e})")]
    NoConvergence { subdivisions: usize, error: f64 },
}

pub type Result<T, E = BqError> = std::result::Result<T, E>;
