use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid {element}: {reason}")]
    Validation { element: String, reason: String },

    #[error("obstacles {0} and {1} overlap")]
    Overlap(usize, usize),

    #[error("unreachable: {0}")]
    Unreachable(String),

    #[error("graph has no vertices")]
    EmptyGraph,

    #[error("resolution must be positive, got {0}")]
    InvalidResolution(f64),

    #[error("placement failed after {attempts} attempts: {what}")]
    Placement { what: String, attempts: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{}: {source}", path.display())]
    File {
        path: std::path::PathBuf,
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(element: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            element: element.into(),
            reason: reason.into(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
