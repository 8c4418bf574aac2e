use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("non-finite value {value} in state `{state}`")]
    NonFinite { state: &'static str, value: f64 },

    #[error("calibration failed after {iterations} iterations (residual {residual:.3e}): {reason}")]
    Calibration {
        iterations: usize,
        residual: f64,
        reason: String,
    },

    #[error("patient table: {0}")]
    Load(String),

    #[error("patient `{id}`: {reason}")]
    InvalidRecord { id: String, reason: String },

    #[error("adaptation: {0}")]
    Adaptation(String),

    #[error("episode already terminated")]
    Terminated,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("singular normal equations (lambda = {lambda}); use lambda > 0")]
    Singular { lambda: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("insufficient history: need {needed} samples, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
