use alloc::string::String;

/// Errors produced by the latent-variable model and its numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index {index} out of range (bound {bound})")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("kernel matrix of source {source_index} is not positive definite (jitter reached {jitter:e})")]
    NotPositiveDefinite { source_index: usize, jitter: f64 },

    #[error("Hessian is not positive definite: eigenvalues span [{min:e}, {max:e}]")]
    IndefiniteHessian { min: f64, max: f64 },

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("error measure undefined: {0}")]
    UndefinedMeasure(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
