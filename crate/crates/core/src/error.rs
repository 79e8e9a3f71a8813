use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} requires at least {min} observations, got {n}")]
    TooFewObservations {
        what: &'static str,
        min: usize,
        n: usize,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("mixture density vanishes at observation {row}; the grid does not cover the data")]
    DegenerateRow { row: usize },

    #[error("non-finite observation at index {0}")]
    NonFinite(usize),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid scenario at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
