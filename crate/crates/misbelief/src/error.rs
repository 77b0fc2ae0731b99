//! Error types shared across the crate.

/// Errors raised by model construction, solvers, and simulations.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// A design matrix or covariance failed a structural invariant.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Vector/matrix shapes do not line up.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A dogmatic constraint is internally inconsistent or out of range.
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    /// A society scenario failed a structural invariant.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// Two scenarios that must describe the same society do not.
    #[error("mismatched societies: {0}")]
    MismatchedSocieties(String),

    /// A check's precondition does not hold for the given scenario.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    /// The numerical optimizer failed to reach its gradient tolerance.
    #[error("optimizer did not converge: {0}")]
    NonConvergence(String),

    /// A matrix required by a closed form is numerically too ill-conditioned
    /// to trust; refusing to regularize silently.
    #[error("ill-conditioned matrix: {0}")]
    IllConditioned(String),
}

pub type Result<T> = std::result::Result<T, Error>;
