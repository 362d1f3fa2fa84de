use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid length: {0}")]
    InvalidLength(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("invalid sparsity level k = {k} (allowed {min}..{max_exclusive})")]
    InvalidK {
        k: usize,
        min: usize,
        max_exclusive: usize,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Residual energy is at the numerical floor for every admissible k.
    #[error("degenerate signal: residual energy vanishes from k = {k}")]
    DegenerateSignal { k: usize },
    #[error("empty series")]
    EmptySeries,
    #[error("insufficient data: need {needed} samples, have {available}")]
    InsufficientData { needed: usize, available: usize },
    #[error("degenerate baseline: mean standard deviation before the split is zero")]
    DegenerateBaseline,
    #[error("empty dictionary")]
    EmptyDictionary,
    #[error("unknown wavelet basis '{0}'")]
    UnknownBasis(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
