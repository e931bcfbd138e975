use thiserror::Error;

/// Errors raised by region construction, bound evaluation and the harness.
#[derive(Debug, Error)]
pub enum SpsError {
    #[error("ridge parameter must be positive, got {0}")]
    NonPositiveLambda(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid regression data: {0}")]
    InvalidData(String),

    #[error("linear system is numerically singular")]
    SingularSystem,

    #[error("Gram matrix is singular (smallest eigenvalue {0:e})")]
    SingularGram(f64),

    #[error("confidence level {0} is not a rational with denominator <= 1e6 in (0, 1)")]
    IrrationalConfidence(String),

    #[error("index {index} out of range (must be < {bound})")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("invalid SPS state: {0}")]
    InvalidState(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("region is unbounded (infinite radius)")]
    InfiniteRegion,

    #[error("matrix is rank deficient (singular value ratio {0:e})")]
    RankDeficient(f64),

    #[error("argument out of domain: {0}")]
    DomainError(String),

    #[error("sample size {n} too small for the bound; need n >= {min_n}")]
    SampleTooSmall { n: usize, min_n: u64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SpsError>;
