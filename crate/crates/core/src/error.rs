use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An op received operands whose shapes it cannot combine.
    #[error("{op}: shape mismatch: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Malformed RTF container.
    #[error("rtf format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },

    /// Input data is inconsistent (mismatched image sets, overlapping splits, ...).
    #[error("data error: {0}")]
    Data(String),

    /// A statistic or correlation is undefined for the given input.
    #[error("numeric degeneracy: {0}")]
    Degenerate(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
