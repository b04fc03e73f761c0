use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("ingestion error: {0}")]
    Ingestion(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("architecture audit failed at layer {layer}: {msg}")]
    Audit { layer: String, msg: String },

    #[error("training failed at epoch {epoch}: {msg}")]
    Training { epoch: usize, msg: String },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("numerical error: {0}")]
    Numerical(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 user/config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Input(_) | Error::Parameter(_) | Error::Shape(_) => 1,
            Error::Parse { .. } | Error::Ingestion(_) | Error::Format(_) | Error::Io { .. } => 2,
            Error::Audit { .. } | Error::Training { .. } | Error::Fit(_) | Error::Numerical(_) => 3,
        }
    }
}
