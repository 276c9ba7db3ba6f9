//! Token embedding containers and their on-disk formats.
//!
//! Two token-matrix encodings are supported:
//!
//! * **TPK** binary: a 26-byte little-endian header followed by the row-major
//!   `f32` payload.
//!
//!   | bytes  | field                                             |
//!   |--------|---------------------------------------------------|
//!   | 0..4   | magic `TPK1`                                      |
//!   | 4..8   | `u32` version, always 1                           |
//!   | 8      | dtype code (0 = f32)                              |
//!   | 9      | modality (0 visual, 1 textual, 255 unspecified)   |
//!   | 10..18 | `u64` row count                                   |
//!   | 18..26 | `u64` embedding dim                               |
//!
//! * **CSV**: a `dim=<d>` line followed by one comma-separated row per token.
//!
//! Selections are stored as JSON objects with `source_rows`, `indices` and an
//! optional `scores` array.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::FormatError;

pub const TPK_MAGIC: [u8; 4] = *b"TPK1";
pub const TPK_VERSION: u32 = 1;
pub const TPK_HEADER_LEN: usize = 26;
const DTYPE_F32: u8 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Visual,
    Textual,
    Unspecified,
}

impl Modality {
    pub fn code(self) -> u8 {
        match self {
            Modality::Visual => 0,
            Modality::Textual => 1,
            Modality::Unspecified => 255,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Modality::Visual),
            1 => Some(Modality::Textual),
            255 => Some(Modality::Unspecified),
            _ => None,
        }
    }
}

/// A violated [`TokenMatrix`] invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoRows,
    NoDims,
    LengthMismatch { expected: usize, actual: usize },
    NonFinite { row: usize, col: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoRows => write!(f, "row count must be at least 1"),
            Violation::NoDims => write!(f, "dim must be at least 1"),
            Violation::LengthMismatch { expected, actual } => {
                write!(f, "length mismatch: expected {expected} values, found {actual}")
            }
            Violation::NonFinite { row, col } => {
                write!(f, "non-finite value at row {row}, column {col}")
            }
        }
    }
}

/// Checks the raw parts of a token matrix. Violations are returned as data;
/// an empty list means the parts form a valid [`TokenMatrix`].
pub fn validate(rows: usize, dim: usize, data: &[f32]) -> Vec<Violation> {
    let mut out = Vec::new();
    if rows == 0 {
        out.push(Violation::NoRows);
    }
    if dim == 0 {
        out.push(Violation::NoDims);
    }
    if rows.checked_mul(dim) != Some(data.len()) {
        out.push(Violation::LengthMismatch {
            expected: rows.saturating_mul(dim),
            actual: data.len(),
        });
    }
    if dim > 0 {
        for (pos, v) in data.iter().enumerate() {
            if !v.is_finite() {
                out.push(Violation::NonFinite {
                    row: pos / dim,
                    col: pos % dim,
                });
            }
        }
    }
    out
}

/// An `rows x dim` matrix of token embeddings, one token per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix {
    modality: Modality,
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl TokenMatrix {
    pub fn new(
        modality: Modality,
        rows: usize,
        dim: usize,
        data: Vec<f32>,
    ) -> Result<Self, Vec<Violation>> {
        let violations = validate(rows, dim, &data);
        if !violations.is_empty() {
            return Err(violations);
        }
        Ok(TokenMatrix {
            modality,
            rows,
            dim,
            data,
        })
    }

    /// Builds a matrix from nested rows. All rows must share one width.
    pub fn from_rows<R: AsRef<[f32]>>(
        modality: Modality,
        rows: &[R],
    ) -> Result<Self, Vec<Violation>> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let data: Vec<f32> = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(modality, rows.len(), dim, data)
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn with_modality(mut self, modality: Modality) -> Self {
        self.modality = modality;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Copies the given rows, in order, into a new matrix.
    ///
    /// Panics if an index is out of range.
    pub fn gather(&self, indices: &[usize]) -> TokenMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        TokenMatrix {
            modality: self.modality,
            rows: indices.len(),
            dim: self.dim,
            data,
        }
    }

    /// Applies `f` to every entry. The result must stay finite.
    pub fn map(&self, f: impl Fn(usize, usize, f32) -> f32) -> Result<TokenMatrix, Vec<Violation>> {
        let dim = self.dim;
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(pos, &v)| f(pos / dim, pos % dim, v))
            .collect();
        TokenMatrix::new(self.modality, self.rows, self.dim, data)
    }
}

/// An ordered set of row indices with optional per-index scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSelection")]
pub struct Selection {
    source_rows: usize,
    indices: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scores: Option<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawSelection {
    source_rows: usize,
    indices: Vec<usize>,
    #[serde(default)]
    scores: Option<Vec<f64>>,
}

impl TryFrom<RawSelection> for Selection {
    type Error = FormatError;

    fn try_from(raw: RawSelection) -> Result<Self, Self::Error> {
        Selection::new(raw.source_rows, raw.indices, raw.scores)
    }
}

impl Selection {
    pub fn new(
        source_rows: usize,
        indices: Vec<usize>,
        scores: Option<Vec<f64>>,
    ) -> Result<Self, FormatError> {
        let mut seen = HashSet::with_capacity(indices.len());
        for &index in &indices {
            if index >= source_rows {
                return Err(FormatError::IndexOutOfRange { index, source_rows });
            }
            if !seen.insert(index) {
                return Err(FormatError::DuplicateIndex { index });
            }
        }
        if let Some(s) = &scores {
            if s.len() != indices.len() {
                return Err(FormatError::ScoresLength {
                    indices: indices.len(),
                    scores: s.len(),
                });
            }
        }
        Ok(Selection {
            source_rows,
            indices,
            scores,
        })
    }

    /// Every index of a `source_rows`-sized set, ascending.
    pub fn all(source_rows: usize) -> Self {
        Selection {
            source_rows,
            indices: (0..source_rows).collect(),
            scores: None,
        }
    }

    pub fn source_rows(&self) -> usize {
        self.source_rows
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn scores(&self) -> Option<&[f64]> {
        self.scores.as_deref()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Indices sorted ascending, as a set view.
    pub fn sorted_indices(&self) -> Vec<usize> {
        let mut v = self.indices.clone();
        v.sort_unstable();
        v
    }

    /// Rewrites indices through `map` (a local-to-global table), keeping order
    /// and scores.
    pub fn remap(&self, map: &[usize], source_rows: usize) -> Result<Selection, FormatError> {
        let indices = self.indices.iter().map(|&i| map[i]).collect();
        Selection::new(source_rows, indices, self.scores.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Binary,
    Csv,
}

pub fn encode_tpk(matrix: &TokenMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(TPK_HEADER_LEN + matrix.data.len() * 4);
    out.extend_from_slice(&TPK_MAGIC);
    out.extend_from_slice(&TPK_VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    out.push(matrix.modality.code());
    out.extend_from_slice(&(matrix.rows as u64).to_le_bytes());
    out.extend_from_slice(&(matrix.dim as u64).to_le_bytes());
    for v in &matrix.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tpk(bytes: &[u8]) -> Result<TokenMatrix, FormatError> {
    if bytes.len() < TPK_HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != TPK_MAGIC {
            return Err(FormatError::BadMagic {
                found: bytes[..4].try_into().unwrap(),
            });
        }
        return Err(FormatError::Truncated {
            expected: TPK_HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != TPK_MAGIC {
        return Err(FormatError::BadMagic { found: magic });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != TPK_VERSION {
        return Err(FormatError::UnsupportedVersion { version });
    }
    if bytes[8] != DTYPE_F32 {
        return Err(FormatError::UnsupportedDtype { code: bytes[8] });
    }
    let modality =
        Modality::from_code(bytes[9]).ok_or(FormatError::UnknownModality { code: bytes[9] })?;
    let rows = u64::from_le_bytes(bytes[10..18].try_into().unwrap());
    let dim = u64::from_le_bytes(bytes[18..26].try_into().unwrap());

    let expected = rows
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(TPK_HEADER_LEN as u64))
        .ok_or_else(|| FormatError::Invalid(format!("header dims {rows}x{dim} overflow")))?;
    let actual = bytes.len() as u64;
    if actual < expected {
        return Err(FormatError::Truncated { expected, actual });
    }
    if actual > expected {
        return Err(FormatError::TrailingBytes { expected, actual });
    }

    let data: Vec<f32> = bytes[TPK_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(TokenMatrix::new(modality, rows as usize, dim as usize, data)?)
}

pub fn encode_csv(matrix: &TokenMatrix) -> String {
    let mut out = format!("dim={}\n", matrix.dim);
    for row in matrix.iter_rows() {
        let line = row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn decode_csv(text: &str, modality: Modality) -> Result<TokenMatrix, FormatError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(FormatError::Csv {
        line: 1,
        message: "empty file".into(),
    })?;
    let dim: usize = header
        .trim()
        .strip_prefix("dim=")
        .and_then(|d| d.trim().parse().ok())
        .ok_or_else(|| FormatError::Csv {
            line: 1,
            message: format!("expected `dim=<d>` header, found {header:?}"),
        })?;

    let mut data = Vec::new();
    let mut rows = 0;
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let start = data.len();
        for field in line.split(',') {
            let v: f32 = field.trim().parse().map_err(|_| FormatError::Csv {
                line: lineno + 1,
                message: format!("cannot parse {field:?} as a number"),
            })?;
            data.push(v);
        }
        if data.len() - start != dim {
            return Err(FormatError::Csv {
                line: lineno + 1,
                message: format!("expected {dim} values, found {}", data.len() - start),
            });
        }
        rows += 1;
    }
    Ok(TokenMatrix::new(modality, rows, dim, data)?)
}

/// Reads a token file, detecting CSV by its `dim=` header and treating
/// everything else as TPK binary.
pub fn read_token_file(path: impl AsRef<Path>) -> Result<TokenMatrix, FormatError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| FormatError::io(path, e))?;
    if bytes.starts_with(b"dim=") {
        let text = std::str::from_utf8(&bytes).map_err(|e| FormatError::Csv {
            line: 1,
            message: e.to_string(),
        })?;
        decode_csv(text, Modality::Unspecified)
    } else {
        decode_tpk(&bytes)
    }
}

pub fn write_token_file(
    matrix: &TokenMatrix,
    path: impl AsRef<Path>,
    format: FileFormat,
) -> Result<(), FormatError> {
    let path = path.as_ref();
    let bytes = match format {
        FileFormat::Binary => encode_tpk(matrix),
        FileFormat::Csv => encode_csv(matrix).into_bytes(),
    };
    let mut file = fs::File::create(path).map_err(|e| FormatError::io(path, e))?;
    file.write_all(&bytes).map_err(|e| FormatError::io(path, e))
}

pub fn write_selection(selection: &Selection, path: impl AsRef<Path>) -> Result<(), FormatError> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(selection)?;
    fs::write(path, json).map_err(|e| FormatError::io(path, e))
}

pub fn read_selection(path: impl AsRef<Path>) -> Result<Selection, FormatError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    parse_selection(&text)
}

pub fn parse_selection(text: &str) -> Result<Selection, FormatError> {
    // serde_json wraps the TryFrom error in its own type; unwrap it back out
    // so duplicate/out-of-range indices keep their dedicated variants.
    let raw: RawSelection = serde_json::from_str(text)?;
    Selection::try_from(raw)
}
