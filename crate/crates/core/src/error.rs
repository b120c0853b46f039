use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("rank error: {0}")]
    Rank(String),

    #[error("invalid mask: every entry is masked out")]
    InvalidMask,

    #[error("gradient buffer is not initialized")]
    UninitializedGradient,

    #[error("parameter `{0}` has no gradient")]
    MissingGradient(String),

    #[error("token id {id} is outside the vocabulary of size {vocab_size}")]
    Vocabulary { id: usize, vocab_size: usize },

    #[error("label {label} is out of range for {n_classes} classes")]
    Label { label: usize, n_classes: usize },

    #[error("template error: {0}")]
    Template(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("checkpoint error in `{tensor}`: {message}")]
    Checkpoint { tensor: String, message: String },

    #[error("non-finite {term} loss at step {step}")]
    Divergence { term: &'static str, step: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence { .. } => 4,
            Error::Config(_) => 2,
            _ => 3,
        }
    }
}
