use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A physical or numerical parameter violates its invariant.
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("grid too narrow: boundary amplitude ratio {ratio:.3e} exceeds {limit:.1e}")]
    GridTooNarrow { ratio: f64, limit: f64 },

    #[error("wave functions live on different grids")]
    GridMismatch,

    #[error("norm grew by {growth:.3e} (relative) at step {step}")]
    NumericalInstability { step: usize, growth: f64 },

    #[error("boundary leak {fraction:.3e} exceeds {limit:.1e} at step {step}")]
    BoundaryLeak {
        step: usize,
        fraction: f64,
        limit: f64,
    },

    #[error("effective variance is not positive (Re = {value:.6e})")]
    NonPositiveVariance { value: f64 },

    #[error("probability profile integrates to zero")]
    DegenerateProfile,

    #[error("profile vanishes at epsilon = 0")]
    ZeroPeak,

    #[error("gaussian fit diverged: {0}")]
    FitDiverged(String),

    #[error("problem size {size} exceeds guard {limit}")]
    SizeGuard { size: usize, limit: usize },

    /// Malformed configuration text.
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("cannot access {path}: {message}")]
    Io { path: String, message: String },

    #[error("at epsilon = {epsilon:.6e}: {source}")]
    AtEpsilon {
        epsilon: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            field,
            reason: reason.into(),
        }
    }

    pub fn at_epsilon(self, epsilon: f64) -> Self {
        Error::AtEpsilon {
            epsilon,
            source: Box::new(self),
        }
    }
}
