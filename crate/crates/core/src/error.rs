use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error(
        "non-stationary parameters: spectral radius of the branching matrix is {radius:.6} (must be < 1); \
         set allow_nonstationary to simulate anyway"
    )]
    NonStationary { radius: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite log-likelihood term at event {event_index} (type {event_type}): intensity {intensity}")]
    NonFinite {
        event_index: usize,
        event_type: usize,
        intensity: f64,
    },

    #[error("malformed stream: {0}")]
    Stream(String),

    #[error("concurrent events at {timestamp_ms} ms do not follow the crossing-order pattern: {detail}")]
    Concurrency { timestamp_ms: u64, detail: String },

    #[error("invalid order: {0}")]
    InvalidOrder(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("statistical test: {0}")]
    Test(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
