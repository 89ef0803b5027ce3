use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration or argument supplied by the caller.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input data violates the observed-data structure.
    #[error("data error: {0}")]
    Data(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// A numerical routine failed (degenerate estimate, singular system, non-finite value).
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("learner failure: {0}")]
    Learner(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Parse { .. } | Error::Io(_) | Error::Csv(_) => 3,
            Error::Numeric(_) | Error::Learner(_) | Error::Json(_) => 4,
        }
    }
}
