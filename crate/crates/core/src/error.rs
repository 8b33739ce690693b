use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown CNOT location {0}")]
    UnknownLocation(usize),

    #[error("fit did not converge: {0}")]
    FitFailed(String),

    #[error("integration failed at t = {time:e}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("optimizer did not converge, best value {best:e}")]
    Optimizer { best: f64 },

    #[error("level identification: {0}")]
    LevelIdentification(String),

    #[error("decoding graph: {0}")]
    Graph(String),

    #[error("empty record set")]
    EmptyRecords,

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
