//! `.embm` embedding-matrix files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"EMBM"          magic
//! u8               format version (1)
//! u64              m, rows
//! u64              d, columns
//! f32 * m * d      values, row-major
//! u32              metadata length in bytes
//! [u8]             metadata, UTF-8 JSON object
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::MiError;

pub const MAGIC: &[u8; 4] = b"EMBM";
pub const FORMAT_VERSION: u8 = 1;
const HEADER_LEN: usize = 4 + 1 + 8 + 8;

/// Provenance of an embedding matrix.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    #[serde(default)]
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_hash: Option<String>,
    /// Any further keys written by the producer.
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// An `m x d` row-major matrix of per-trace embeddings, held in f64.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    pub meta: EmbeddingMeta,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, meta: EmbeddingMeta) -> Result<Self, MiError> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(MiError::Shape { rows, cols, len: data.len() });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(MiError::NonFinite { row: pos / cols.max(1), col: pos % cols.max(1) });
        }
        Ok(Self { rows, cols, data, meta })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MiError> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(MiError::Shape { rows: rows.len(), cols, len: bad.len() });
        }
        Self::new(rows.len(), cols, rows.concat(), EmbeddingMeta::default())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Rescales every column to zero mean and unit (population) variance.
    /// Constant columns are only centered.
    pub fn standardized(&self) -> Self {
        let mut out = self.clone();
        if self.rows == 0 {
            return out;
        }
        let m = self.rows as f64;
        for c in 0..self.cols {
            let mean = (0..self.rows).map(|r| self.data[r * self.cols + c]).sum::<f64>() / m;
            let var = (0..self.rows).map(|r| (self.data[r * self.cols + c] - mean).powi(2)).sum::<f64>() / m;
            let sd = var.sqrt();
            for r in 0..self.rows {
                let v = &mut out.data[r * self.cols + c];
                *v -= mean;
                if sd > 0.0 {
                    *v /= sd;
                }
            }
        }
        out
    }

    /// Serializes to the `.embm` layout. Values are narrowed to f32.
    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = serde_json::to_vec(&self.meta).expect("metadata serializes");
        let mut buf = Vec::with_capacity(HEADER_LEN + 4 * self.data.len() + 4 + meta.len());
        buf.extend_from_slice(MAGIC);
        buf.push(FORMAT_VERSION);
        buf.extend_from_slice(&(self.rows as u64).to_le_bytes());
        buf.extend_from_slice(&(self.cols as u64).to_le_bytes());
        for &v in &self.data {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        buf.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        buf.extend_from_slice(&meta);
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, MiError> {
        let header = parse_header(bytes)?;
        let body = &bytes[HEADER_LEN..HEADER_LEN + header.values_len];
        let data = body
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        Self::new(header.rows, header.cols, data, header.meta)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), MiError> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| MiError::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, MiError> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| MiError::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Header fields of a checked `.embm` file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbmHeader {
    pub version: u8,
    pub rows: usize,
    pub cols: usize,
    pub meta: EmbeddingMeta,
    #[serde(skip)]
    values_len: usize,
}

fn parse_header(bytes: &[u8]) -> Result<EmbmHeader, MiError> {
    if bytes.len() < HEADER_LEN {
        return Err(MiError::Format(format!("file is {} bytes, header needs {HEADER_LEN}", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(MiError::Format("bad magic, expected EMBM".into()));
    }
    let version = bytes[4];
    if version != FORMAT_VERSION {
        return Err(MiError::Format(format!("unsupported format version {version}")));
    }
    let rows = u64::from_le_bytes(bytes[5..13].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[13..21].try_into().unwrap());
    let values_len = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| MiError::Format(format!("matrix size {rows} x {cols} overflows")))?;
    let meta_at = HEADER_LEN
        .checked_add(values_len)
        .filter(|&at| at.checked_add(4).is_some_and(|end| end <= bytes.len()))
        .ok_or_else(|| MiError::Format(format!("truncated: {rows} x {cols} values do not fit")))?;
    let meta_len = u32::from_le_bytes(bytes[meta_at..meta_at + 4].try_into().unwrap()) as usize;
    let meta_end = meta_at + 4 + meta_len;
    if meta_end != bytes.len() {
        return Err(MiError::Format(format!(
            "metadata length {meta_len} does not match remaining {} bytes",
            bytes.len() - meta_at - 4
        )));
    }
    let meta: EmbeddingMeta = serde_json::from_slice(&bytes[meta_at + 4..meta_end])
        .map_err(|e| MiError::Format(format!("metadata: {e}")))?;
    Ok(EmbmHeader { version, rows: rows as usize, cols: cols as usize, meta, values_len })
}

/// Reads and checks a `.embm` file's framing and metadata, and that every value is finite.
pub fn validate_file(path: impl AsRef<Path>) -> Result<EmbmHeader, MiError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| MiError::io(path, e))?;
    let header = parse_header(&bytes)?;
    EmbeddingMatrix::from_bytes(&bytes)?;
    Ok(header)
}
