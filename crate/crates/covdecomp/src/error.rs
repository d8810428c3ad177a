use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A Cholesky pivot fell below the positive-definiteness tolerance.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    /// Power iteration failed to reach the requested tolerance within its cap.
    #[error("spectral radius estimate did not converge within {0} iterations")]
    NoConvergence(usize),

    /// A composed covariance (inverse precision plus residual) is not positive definite.
    #[error("composite covariance is not positive definite")]
    CompositeNotPD,

    /// The residual support is not contained in the Markov support.
    #[error("residual support is not contained in the Markov support: pair ({0}, {1})")]
    SupportViolation(usize, usize),

    /// Synthetic model generation exhausted its retry budget.
    #[error("model generation failed after {0} attempts: incompatible parameters")]
    GenerationFailed(usize),

    /// Operands have incompatible dimensions.
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    /// The recovered residual violates the dual feasibility bound.
    #[error(
        "recovered residual violates dual feasibility by {0:.3e}; primal likely not converged"
    )]
    DualInfeasible(f64),

    /// The Hessian submatrix on the non-residual support is singular or too ill-conditioned.
    #[error("Hessian block on the non-residual support is singular or ill-conditioned")]
    SingularGamma,

    /// A pair index lies outside the matrix dimension.
    #[error("pair index ({0}, {1}) out of range for dimension {2}")]
    IndexOutOfRange(usize, usize, usize),

    /// Invalid argument or malformed value.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed file contents.
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
