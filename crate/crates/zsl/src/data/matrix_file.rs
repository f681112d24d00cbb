//! `ZSLM` matrix files.
//!
//! Layout, little-endian: magic `ZSLM`, `u16` version, `u32` rows, `u32`
//! cols, then `rows * cols` IEEE-754 `f32` values row-major. Values are
//! promoted to `f64` on load.

use std::path::Path;

use zsl_core::Matrix;

use super::{io_err, DataError};

pub const MATRIX_MAGIC: &[u8; 4] = b"ZSLM";
pub const MATRIX_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4;

pub fn encode_matrix(m: &Matrix) -> Result<Vec<u8>, DataError> {
    let rows = u32::try_from(m.rows())
        .map_err(|_| DataError::Config(format!("{} rows do not fit in u32", m.rows())))?;
    let cols = u32::try_from(m.cols())
        .map_err(|_| DataError::Config(format!("{} cols do not fit in u32", m.cols())))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.as_slice().len());
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&MATRIX_VERSION.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for &v in m.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(out)
}

/// Parses a matrix file image; `path` only labels errors.
pub fn decode_matrix(bytes: &[u8], path: &Path) -> Result<Matrix, DataError> {
    if bytes.len() < 4 || &bytes[..4] != MATRIX_MAGIC {
        return Err(DataError::Magic {
            path: path.into(),
            expected: "ZSLM",
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(DataError::Truncated {
            path: path.into(),
            what: "header".into(),
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != MATRIX_VERSION {
        return Err(DataError::Version {
            path: path.into(),
            found: version,
            supported: MATRIX_VERSION,
        });
    }
    let rows = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let body = &bytes[HEADER_LEN..];
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| DataError::Dimension {
            path: path.into(),
            detail: format!("{rows}x{cols} overflows"),
        })?;
    if body.len() < expected {
        return Err(DataError::Truncated {
            path: path.into(),
            what: format!("payload: {rows}x{cols} needs {expected} bytes, found {}", body.len()),
        });
    }
    if body.len() > expected {
        return Err(DataError::Dimension {
            path: path.into(),
            detail: format!(
                "{} trailing bytes after {rows}x{cols} payload",
                body.len() - expected
            ),
        });
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok(Matrix::from_vec(rows, cols, data)?)
}

pub fn save_matrix(path: impl AsRef<Path>, m: &Matrix) -> Result<(), DataError> {
    let path = path.as_ref();
    std::fs::write(path, encode_matrix(m)?).map_err(io_err(path))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Matrix, DataError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    decode_matrix(&bytes, path)
}
