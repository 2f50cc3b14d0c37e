// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

pub type Result<T, E = CrocError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CrocError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A full enumeration was requested whose size exceeds the configured cap.
    #[error("{what} has {size} elements, exceeding the enumeration cap of {cap}{hint}")]
    EnumerationTooLarge {
        what: &'static str,
        size: String,
        cap: u64,
        hint: &'static str,
    },

    #[error("configuration {0} is missing from the table")]
    MissingConfig(String),

    #[error("configuration {0} has no unique minimizing stream")]
    TiedArgmin(String),

    #[error("i/o error")]
    Io(#[from] std::io::Error),

    #[error("malformed csv")]
    Csv(#[from] csv::Error),

    #[error("malformed json")]
    Json(#[from] serde_json::Error),
}

impl CrocError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Self::InvalidInput(msg.into())
    }

    pub fn is_io(&self) -> bool {
        matches!(self, Self::Io(_) | Self::Csv(_) | Self::Json(_))
    }
}
