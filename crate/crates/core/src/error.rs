use std::path::PathBuf;

use thiserror::Error;

use crate::tokenset::{Modality, Violation};

/// Failures while reading or writing token and selection files.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic at byte 0: expected \"TPK1\", found {found:?}")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported format version {version} at byte 4")]
    UnsupportedVersion { version: u32 },
    #[error("unsupported dtype code {code} at byte 8")]
    UnsupportedDtype { code: u8 },
    #[error("unknown modality code {code} at byte 9")]
    UnknownModality { code: u8 },
    #[error("truncated file: needed {expected} bytes, found {actual} (payload breaks at byte {actual})")]
    Truncated { expected: u64, actual: u64 },
    #[error("trailing bytes after payload: expected {expected} bytes, found {actual}")]
    TrailingBytes { expected: u64, actual: u64 },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("invalid matrix: {0}")]
    Invalid(String),
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("duplicate index {index} in selection")]
    DuplicateIndex { index: usize },
    #[error("index {index} out of range for source of {source_rows} rows")]
    IndexOutOfRange { index: usize, source_rows: usize },
    #[error("scores length {scores} does not match indices length {indices}")]
    ScoresLength { indices: usize, scores: usize },
    #[error("malformed selection file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FormatError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<Vec<Violation>> for FormatError {
    fn from(violations: Vec<Violation>) -> Self {
        // Surface the first non-finite entry with its coordinates; that is the
        // only violation a well-formed header can still produce.
        for v in &violations {
            if let Violation::NonFinite { row, col } = *v {
                return FormatError::NonFinite { row, col };
            }
        }
        let text = violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        FormatError::Invalid(text)
    }
}

/// Errors raised by the scoring, selection and pipeline operations.
#[derive(Debug, Error)]
pub enum PruneError {
    #[error("dimension mismatch: visual dim {visual}, textual dim {textual}")]
    DimMismatch { visual: usize, textual: usize },
    #[error("textual token set is empty")]
    EmptyText,
    #[error("{modality:?} token at row {row} has zero norm")]
    ZeroNormToken { row: usize, modality: Modality },
    #[error("embedding dim {dim} must exceed knn k = {k}")]
    DimTooSmall { dim: usize, k: usize },
    #[error("keep count {keep} out of range 1..={available}")]
    KeepOutOfRange { keep: usize, available: usize },
    #[error("objective needs at least two tokens, got {got}")]
    TooFewTokens { got: usize },
    #[error("exact enumeration of {subsets} subsets exceeds cap {cap}")]
    TooLarge { subsets: u128, cap: u128 },
    #[error("selection index {index} out of range for {rows} rows")]
    IndexOutOfRange { index: usize, rows: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

pub type Result<T, E = PruneError> = std::result::Result<T, E>;
