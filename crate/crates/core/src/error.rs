use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model constraint is violated. The message names the inequality.
    #[error("constraint violated: {0}")]
    Constraint(String),

    /// The requested moment of a heavy-tailed profile diverges.
    #[error("infinite moment: |x|^{order} is not integrable against the profile ({reason})")]
    InfiniteMoment { order: f64, reason: String },

    /// A precondition of the operation does not hold for the given input.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// An adaptive routine did not reach the requested tolerance.
    #[error("no convergence after {subdivisions} subdivisions (best estimate {best}, error estimate {abs_error})")]
    Convergence {
        best: f64,
        abs_error: f64,
        subdivisions: usize,
    },

    /// Input size outside what the routine supports.
    #[error("unsupported size: {0}")]
    Unsupported(String),

    /// Overflow of a quantity that is only representable in the log domain.
    #[error("overflow: result has log-magnitude {log_magnitude}")]
    Overflow { log_magnitude: f64 },

    /// Time step above the stability bound, or audited mass loss exceeded.
    #[error("stability: {0}")]
    Stability(String),

    /// Grid too coarse for the requested profile.
    #[error("resolution: {0}")]
    Resolution(String),

    /// A fit or statistic was requested on too few data points.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
