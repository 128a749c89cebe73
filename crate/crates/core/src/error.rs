use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("zero mass in {what} {index}")]
    ZeroMass { what: &'static str, index: usize },

    #[error("instance too large for dense oracle: {0} > 8")]
    OracleTooLarge(usize),

    #[error("adaptive solver exceeded {0} steps")]
    MaxStepsExceeded(usize),

    #[error("degenerate k-NN radius (duplicated points) in {0} set")]
    DegenerateRadius(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("missing column `{column}` in {path}")]
    MissingColumn { column: String, path: PathBuf },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension(_) => "dimension",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NonFinite(_) => "non_finite",
            Error::ZeroMass { .. } => "zero_mass",
            Error::OracleTooLarge(_) => "oracle_too_large",
            Error::MaxStepsExceeded(_) => "max_steps",
            Error::DegenerateRadius(_) => "degenerate_radius",
            Error::Config(_) => "config",
            Error::Checkpoint(_) => "checkpoint",
            Error::MissingColumn { .. } => "missing_column",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
