//! IDX containers (the MNIST distribution format).
//!
//! Layout: two zero bytes, a type code (0x08 for unsigned bytes), the rank,
//! then one big-endian `u32` per dimension, then the payload.

use std::fs;
use std::path::Path;

use tridrop_core::Matrix;

use crate::error::{CliError, Result};

pub const TYPE_U8: u8 = 0x08;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxHeader {
    pub type_code: u8,
    pub dims: Vec<usize>,
}

impl IdxHeader {
    pub fn len(&self) -> usize {
        4 + 4 * self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn payload_len(&self) -> usize {
        self.dims.iter().product()
    }
}

/// Validates the header and returns it with the payload.
pub fn parse_idx(bytes: &[u8], expected_rank: u8) -> Result<(IdxHeader, &[u8])> {
    if bytes.len() < 4 {
        return Err(CliError::format(bytes.len() as u64, "file shorter than the IDX magic"));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(CliError::format(0, "IDX magic must start with two zero bytes"));
    }
    if bytes[2] != TYPE_U8 {
        return Err(CliError::format(
            2,
            format!("unsupported IDX type code 0x{:02x}", bytes[2]),
        ));
    }
    let rank = bytes[3];
    if rank != expected_rank {
        return Err(CliError::format(
            3,
            format!("expected rank {expected_rank}, found {rank}"),
        ));
    }
    let mut dims = Vec::with_capacity(rank as usize);
    for d in 0..rank as usize {
        let at = 4 + 4 * d;
        let raw = bytes.get(at..at + 4).ok_or_else(|| {
            CliError::format(bytes.len() as u64, format!("header truncated in dimension {d}"))
        })?;
        dims.push(u32::from_be_bytes(raw.try_into().unwrap()) as usize);
    }
    let header = IdxHeader {
        type_code: TYPE_U8,
        dims,
    };
    let start = header.len();
    let need = header.payload_len();
    let have = bytes.len() - start;
    if have < need {
        return Err(CliError::format(
            bytes.len() as u64,
            format!("payload truncated: expected {need} bytes, found {have}"),
        ));
    }
    if have > need {
        return Err(CliError::format(
            (start + need) as u64,
            format!("{} trailing bytes after payload", have - need),
        ));
    }
    Ok((header, &bytes[start..]))
}

/// Images as an `N x (rows * cols)` matrix with pixels scaled to `[0, 1]`.
pub fn decode_images(bytes: &[u8]) -> Result<Matrix> {
    let (header, payload) = parse_idx(bytes, 3)?;
    let n = header.dims[0];
    let d = header.dims[1] * header.dims[2];
    let data = payload.iter().map(|&b| b as f32 / 255.0).collect();
    Ok(Matrix::new(n, d, data)?)
}

pub fn decode_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let (_, payload) = parse_idx(bytes, 1)?;
    Ok(payload.to_vec())
}

pub fn load_idx_images(path: &Path) -> Result<Matrix> {
    decode_images(&fs::read(path).map_err(|e| CliError::io(path, e))?)
}

pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    decode_labels(&fs::read(path).map_err(|e| CliError::io(path, e))?)
}

/// Serializes unsigned-byte data with the given dimensions.
pub fn encode_idx(dims: &[usize], payload: &[u8]) -> Vec<u8> {
    let mut out = vec![0, 0, TYPE_U8, dims.len() as u8];
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(payload);
    out
}
