use thiserror::Error;

/// Raw (unnormalized) grid carried by empty-region failures.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGrid {
    pub axes: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("model evaluation error: {0}")]
    ModelEvaluation(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("empty region: {detail}")]
    EmptyRegion { detail: String, raw: Box<RawGrid> },
    #[error("sampler diagnostics: {0}")]
    Diagnostics(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) | Error::Config(_) => 2,
            Error::Unsupported(_) => 3,
            Error::ModelEvaluation(_) | Error::Numerical(_) | Error::EmptyRegion { .. } | Error::Diagnostics(_) => 4,
            // Unreadable inputs and unwritable outputs.
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
