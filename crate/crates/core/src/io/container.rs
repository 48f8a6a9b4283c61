use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_bytes, write_atomic, IoError, Location};
use crate::matrix::RowMatrix;

/// First line of a container file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContainerHeader {
    pub rows: usize,
    pub cols: usize,
    pub frame_shift_ms: f64,
    /// Column labels (phone symbols for posteriors); empty for embeddings.
    #[serde(default)]
    pub labels: Vec<String>,
}

/// A matrix of little-endian `f32` values with its header.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub header: ContainerHeader,
    pub matrix: RowMatrix,
}

impl Container {
    pub fn new(matrix: RowMatrix, frame_shift_ms: f64, labels: Vec<String>) -> Self {
        Self {
            header: ContainerHeader {
                rows: matrix.rows(),
                cols: matrix.cols(),
                frame_shift_ms,
                labels,
            },
            matrix,
        }
    }
}

/// Parses a container from memory. `path` is only used in error messages.
pub fn decode_container(bytes: &[u8], path: &Path) -> Result<Container, IoError> {
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| IoError::invalid(path, Location::Byte(0), "missing header line"))?;
    let header: ContainerHeader = serde_json::from_slice(&bytes[..newline]).map_err(|e| {
        IoError::invalid(path, Location::Byte(e.column().saturating_sub(1) as u64), format!("header: {e}"))
    })?;
    if !(header.frame_shift_ms.is_finite() && header.frame_shift_ms > 0.0) {
        return Err(IoError::invalid(
            path,
            Location::Byte(0),
            format!("header: frame_shift_ms must be positive, got {}", header.frame_shift_ms),
        ));
    }
    if !header.labels.is_empty() && header.labels.len() != header.cols {
        return Err(IoError::invalid(
            path,
            Location::Byte(0),
            format!("header: {} labels for {} columns", header.labels.len(), header.cols),
        ));
    }

    let start = newline + 1;
    let payload = &bytes[start..];
    let expected = header
        .rows
        .checked_mul(header.cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| IoError::invalid(path, Location::Byte(0), "header: shape overflows"))?;
    if payload.len() < expected {
        return Err(IoError::invalid(
            path,
            Location::Byte(bytes.len() as u64),
            format!(
                "truncated payload: header declares {}x{} ({expected} bytes), found {} bytes",
                header.rows,
                header.cols,
                payload.len()
            ),
        ));
    }
    if payload.len() > expected {
        return Err(IoError::invalid(
            path,
            Location::Byte((start + expected) as u64),
            format!(
                "payload has {} bytes beyond the declared {}x{} matrix",
                payload.len() - expected,
                header.rows,
                header.cols
            ),
        ));
    }

    let mut data = Vec::with_capacity(header.rows * header.cols);
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        if !v.is_finite() {
            return Err(IoError::invalid(
                path,
                Location::Byte((start + 4 * i) as u64),
                format!(
                    "non-finite value {v} at frame {}, column {}",
                    i / header.cols,
                    i % header.cols
                ),
            ));
        }
        data.push(f64::from(v));
    }
    let matrix = RowMatrix::new(header.rows, header.cols, data).expect("length checked");
    Ok(Container { header, matrix })
}

/// Serializes a container. Values are narrowed to `f32`; anything that is
/// not finite after narrowing is rejected.
pub fn encode_container(container: &Container, path: &Path) -> Result<Vec<u8>, IoError> {
    let m = &container.matrix;
    let h = &container.header;
    if h.rows != m.rows() || h.cols != m.cols() {
        return Err(IoError::invalid(
            path,
            Location::Byte(0),
            format!("header declares {}x{}, matrix is {}x{}", h.rows, h.cols, m.rows(), m.cols()),
        ));
    }
    let mut out = serde_json::to_vec(h).expect("header serializes");
    out.push(b'\n');
    let start = out.len();
    out.reserve(m.rows() * m.cols() * 4);
    for (i, &v) in m.as_slice().iter().enumerate() {
        let narrow = v as f32;
        if !narrow.is_finite() {
            return Err(IoError::invalid(
                path,
                Location::Byte((start + 4 * i) as u64),
                format!(
                    "value {v} at frame {}, column {} is not representable",
                    i / m.cols().max(1),
                    i % m.cols().max(1)
                ),
            ));
        }
        out.extend_from_slice(&narrow.to_le_bytes());
    }
    Ok(out)
}

pub fn read_container(path: &Path) -> Result<Container, IoError> {
    decode_container(&read_bytes(path)?, path)
}

pub fn write_container(path: &Path, container: &Container) -> Result<(), IoError> {
    write_atomic(path, &encode_container(container, path)?)
}
