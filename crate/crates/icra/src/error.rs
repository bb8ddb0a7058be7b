use thiserror::Error;

/// Errors shared across the recovery library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("decomposition failed: {0}")]
    DecompositionFailure(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("ill-conditioned weights (cond ≈ {cond:.3e}); increase the delta floor")]
    IllConditionedWeights { cond: f64 },

    #[error("measurement operator has a trivial null space")]
    TrivialNullSpace,

    #[error("operator is rank deficient: {0}")]
    RankDeficient(String),

    #[error("undefined bound: {0}")]
    UndefinedBound(String),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
