use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SsrError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index {index} out of range for {len} bands")]
    BandIndex { index: usize, len: usize },
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("degenerate transform: {0}")]
    DegenerateTransform(String),
    #[error("dimensions {h}x{w} are not divisible by factor {r}")]
    NotDivisible { h: usize, w: usize, r: usize },
    #[error("negative observation {value} at sample {index}")]
    NegativeObservation { index: usize, value: f64 },
    #[error("system matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("too few training samples: got {got}, need at least {need}")]
    TooFewSamples { got: usize, need: usize },
    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, SsrError>;
