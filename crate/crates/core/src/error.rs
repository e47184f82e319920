use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel order b={0}: must be an integer in 2..=8")]
    InvalidOrder(u32),

    #[error("invalid dimension d={0}: must be at least 1")]
    InvalidDimension(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported sample size m={0}: the half-sample size must be at least 21")]
    UnsupportedSampleSize(usize),

    #[error("empty bandwidth grid for m={m}, d={d}")]
    EmptyGrid { m: usize, d: usize },

    #[error("odd number of observations n={0}: the estimator needs n = 2m (an even sample size)")]
    OddSampleSize(usize),

    #[error("input format error at row {row}, column {column}: {message}")]
    InputFormat {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("unknown density '{0}'")]
    UnknownDensity(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureFailure(String),

    #[error("unsupported smoothness parameters: {0}")]
    UnsupportedParameters(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("replication {index} of {density} at m={m} failed: {source}")]
    Replication {
        density: String,
        m: usize,
        index: usize,
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
