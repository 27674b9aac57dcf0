use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("level {requested} exceeds sampled resolution {available}")]
    Resolution { requested: u32, available: u32 },

    #[error("window extension required: {0}")]
    WindowExtension(String),

    #[error("weight is not step-normalized (expected rho(x) = rho(floor(x)))")]
    Normalization,

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("inconsistent pseudo-shift data: {0}")]
    SpecInconsistency(String),

    #[error("horizon {horizon} too small: {reason}")]
    HorizonTooSmall { horizon: u64, reason: String },

    #[error("frequency set generation failed: {0}")]
    Generation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
