use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("graph is disconnected; components: {0}")]
    Disconnected(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("time {t} lies beyond the control grid (last node {last})")]
    BeyondGrid { t: f64, last: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("not monotone: {0}")]
    NotMonotone(String),
    #[error("rank deficient: achieved rank {achieved} of {required}")]
    RankDeficient { achieved: usize, required: usize },
    #[error("too close to the spectrum: distance {0:e}")]
    NearSpectrum(f64),
    #[error("control is not admissible: {0}")]
    Control(String),
    #[error("quotient is inconsistent: {0}")]
    Quotient(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
