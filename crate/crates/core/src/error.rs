use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("degenerate weights: every log-weight is -inf or NaN")]
    DegenerateWeights,

    #[error("impossible evidence: observation {observation} has zero probability under the predicted belief")]
    ImpossibleEvidence { observation: usize },

    #[error("numerical error at step {step}: {message}")]
    Numerical { step: usize, message: String },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error("non-finite loss at segment {segment} (frames {frames}): {diagnostics}")]
    NonFiniteLoss {
        segment: u64,
        frames: u64,
        diagnostics: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("metrics csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
