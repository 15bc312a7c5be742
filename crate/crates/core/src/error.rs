use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed input line (CoNLL files, cluster files, model files).
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Invalid UTF-8 in a plain-text corpus.
    #[error("invalid UTF-8 at byte offset {offset}")]
    Utf8 { offset: usize },

    /// A label that violates the declared tag scheme or label set.
    #[error("sentence {sentence}, token {position}: {msg}")]
    Label {
        sentence: usize,
        position: usize,
        msg: String,
    },

    /// Contract violation on otherwise well-formed data.
    #[error("{0}")]
    Data(String),

    /// Non-finite values or a diverging optimizer.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
