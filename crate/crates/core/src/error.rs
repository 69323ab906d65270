use thiserror::Error;

use crate::model::Parameters;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid layout at word {index}: {reason}")]
    Layout { index: usize, reason: String },

    #[error("invalid gaze trace: {0}")]
    Trace(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("no gaze samples cover the context of word {word}")]
    NoCoverage { word: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("id {id} out of range for {what} (size {size})")]
    OutOfRange { what: &'static str, id: usize, size: usize },

    #[error("missing embedding row for document {doc_id:?}, token {token}")]
    MissingEmbedding { doc_id: String, token: usize },

    #[error("training diverged at epoch {epoch}, step {step}")]
    Diverged {
        epoch: usize,
        step: usize,
        last_good: Box<Parameters>,
    },

    #[error("infeasible request: {0}")]
    Infeasible(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
