use crate::spectral::{Channel, Representation};

/// Errors raised by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("representation mismatch: expected {expected:?}, found {found:?}")]
    Representation {
        expected: Representation,
        found: Representation,
    },
    #[error("grid mismatch between operands")]
    GridMismatch,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unresolvable partition: {0}")]
    Resolution(String),
    #[error("index {index} out of range (length {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("degenerate samples: {0}")]
    Degenerate(String),
    #[error("trajectory has no channel {0:?}")]
    MissingChannel(Channel),
    #[error("blowup guard tripped at t = {t}: max|u| = {max_abs:e} exceeds {threshold:e}")]
    Blowup { t: f64, max_abs: f64, threshold: f64 },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("internal consistency violation: {0}")]
    Internal(String),
    #[error("malformed snapshot: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
