use thiserror::Error;

/// Errors raised by the workbench.
///
/// Configuration-class problems (bad input, unknown names, violated
/// preconditions) are distinguished from numerical failures so that the
/// driver can map them onto separate exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeylError {
    #[error("form is not positive definite (smallest eigenvalue {min_eig:e})")]
    NotPositiveDefinite { min_eig: f64 },

    #[error("form is not symmetric (relative defect {defect:e})")]
    NotSymmetric { defect: f64 },

    #[error("form is too ill-conditioned (eigenvalue ratio {ratio:e} > 1e12)")]
    IllConditioned { ratio: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("derivative of order {requested} unavailable (max {available})")]
    OrderUnavailable { requested: usize, available: usize },

    #[error("{what} did not converge within {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("aliasing certificate failed: out-of-band fraction {fraction:e} exceeds {tolerance:e}")]
    Aliasing { fraction: f64, tolerance: f64 },

    #[error("tail-mass certificate failed: boundary fraction {fraction:e} exceeds {tolerance:e}")]
    TailMass { fraction: f64, tolerance: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("partition normalizer fell below floor at {point:?} (value {value:e})")]
    PartitionFloor { point: Vec<f64>, value: f64 },

    #[error("certification failed: {reason}; witness X={x:?}, Y={y:?}")]
    Certification {
        reason: String,
        x: Vec<f64>,
        y: Vec<f64>,
    },

    #[error("truncation not converged: last shell fraction {tail:e}")]
    Truncation { tail: f64 },

    #[error("symbol is not confined: sup grows with truncation ({inner:e} -> {outer:e})")]
    NotConfined { inner: f64, outer: f64 },

    #[error("decay fit failed: {0}")]
    Fit(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl WeylError {
    /// `true` for errors caused by the caller's input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            WeylError::UnknownName { .. }
                | WeylError::InvalidParameter { .. }
                | WeylError::Precondition(_)
                | WeylError::DimensionMismatch { .. }
                | WeylError::Unsupported(_)
                | WeylError::OrderUnavailable { .. }
        )
    }
}

impl From<std::io::Error> for WeylError {
    fn from(e: std::io::Error) -> Self {
        WeylError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, WeylError>;
