use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid exponent {0}: must lie in (0, inf]")]
    InvalidExponent(f64),

    #[error("invalid measure space: {0}")]
    InvalidMeasure(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("need at least {needed} directions, got {got}")]
    TooFewDirections { needed: usize, got: usize },

    #[error("point set has rank {rank}, ambient dimension is {dim}")]
    RankDeficient { rank: usize, dim: usize },

    #[error("exponent {0} < 1 has a trivial dual space")]
    TrivialDual(f64),

    #[error("assumed bound violated: lhs {lhs} exceeds rhs {rhs}")]
    BoundViolated { lhs: f64, rhs: f64 },

    #[error("regularization path did not converge (last change {last_change:e} over {} values of eps)", trace.len())]
    NotConverged { trace: Vec<f64>, last_change: f64 },

    #[error("parameters outside the admissible regime: {0}")]
    Regime(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
