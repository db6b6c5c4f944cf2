use thiserror::Error;

/// Errors produced by tree construction, training and I/O.
#[derive(Debug, Error)]
pub enum GradTreeError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("model load error: {0}")]
    ModelLoad(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, GradTreeError>;
