//! Binary cache for kernel and regularizer matrices.
//!
//! Layout, little-endian throughout:
//!
//! | bytes  | content                                   |
//! |--------|-------------------------------------------|
//! | 0..4   | magic `MHRM`                              |
//! | 4      | format version (1)                        |
//! | 5      | kind: 0 kernel, 1 Laplacian, 2 Hessian    |
//! | 6      | dtype: 1 = f64                            |
//! | 7      | reserved, 0                               |
//! | 8..16  | `n` as u64                                |
//! | 16..   | `n²` f64 values, row-major                |

use std::path::Path;

use nalgebra::DMatrix;

use crate::manifold::ManifoldKind;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"MHRM";
const VERSION: u8 = 1;
const DTYPE_F64: u8 = 1;
const HEADER_LEN: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheKind {
    Kernel,
    Manifold(ManifoldKind),
}

impl CacheKind {
    fn code(self) -> u8 {
        match self {
            CacheKind::Kernel => 0,
            CacheKind::Manifold(ManifoldKind::Laplacian) => 1,
            CacheKind::Manifold(ManifoldKind::Hessian) => 2,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(CacheKind::Kernel),
            1 => Ok(CacheKind::Manifold(ManifoldKind::Laplacian)),
            2 => Ok(CacheKind::Manifold(ManifoldKind::Hessian)),
            other => Err(Error::Cache(format!("unknown matrix kind {other}"))),
        }
    }
}

pub fn encode(kind: CacheKind, matrix: &DMatrix<f64>) -> Result<Vec<u8>> {
    if !matrix.is_square() {
        return Err(Error::Cache(format!(
            "matrix is {:?}, not square",
            matrix.shape()
        )));
    }
    let n = matrix.nrows();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * n * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[VERSION, kind.code(), DTYPE_F64, 0]);
    out.extend_from_slice(&(n as u64).to_le_bytes());
    for i in 0..n {
        for j in 0..n {
            out.extend_from_slice(&matrix[(i, j)].to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(CacheKind, DMatrix<f64>)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Cache("file shorter than header".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Cache("bad magic".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Cache(format!("unsupported version {}", bytes[4])));
    }
    let kind = CacheKind::from_code(bytes[5])?;
    if bytes[6] != DTYPE_F64 {
        return Err(Error::Cache(format!("unsupported dtype {}", bytes[6])));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let expected = n
        .checked_mul(n)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Cache(format!("size {n} overflows")))?;
    if bytes.len() != expected {
        return Err(Error::Cache(format!(
            "expected {expected} bytes for n = {n}, found {}",
            bytes.len()
        )));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    Ok((kind, DMatrix::from_row_iterator(n, n, values)))
}

pub fn write_matrix(path: &Path, kind: CacheKind, matrix: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, encode(kind, matrix)?).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<(CacheKind, DMatrix<f64>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
