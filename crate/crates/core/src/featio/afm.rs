//! AFM1: `AFM1` magic, u32 version, u32 n_frames, u32 n_dims, f64 frame
//! rate, then `n_frames · n_dims` row-major f32 values. All little-endian.

use std::fs;
use std::path::Path;

use super::{FeatError, FeatureMatrix};
use crate::matrix::Matrix;

pub const AFM_MAGIC: &[u8; 4] = b"AFM1";
pub const AFM_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8;

/// Serializes to AFM1 bytes. Values are narrowed to f32; anything that is
/// not finite after narrowing is rejected.
pub fn encode_afm(m: &FeatureMatrix) -> Result<Vec<u8>, FeatError> {
    let n_frames = u32::try_from(m.n_frames()).map_err(|_| FeatError::ShapeMismatch("too many frames".into()))?;
    let n_dims = u32::try_from(m.n_dims()).map_err(|_| FeatError::ShapeMismatch("too many dims".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * m.data().len());
    out.extend_from_slice(AFM_MAGIC);
    out.extend_from_slice(&AFM_VERSION.to_le_bytes());
    out.extend_from_slice(&n_frames.to_le_bytes());
    out.extend_from_slice(&n_dims.to_le_bytes());
    out.extend_from_slice(&m.frame_rate().to_le_bytes());
    for &v in m.data().as_slice() {
        let f = v as f32;
        if !f.is_finite() {
            return Err(FeatError::NonFinite);
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_afm(bytes: &[u8]) -> Result<FeatureMatrix, FeatError> {
    if bytes.len() < 4 || &bytes[..4] != AFM_MAGIC {
        return Err(FeatError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(FeatError::Truncated { expected: HEADER_LEN, got: bytes.len() });
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != AFM_VERSION {
        return Err(FeatError::BadVersion(version));
    }
    let n_frames = u32_at(8) as usize;
    let n_dims = u32_at(12) as usize;
    let frame_rate = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expected = n_frames
        .checked_mul(n_dims)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or(FeatError::Truncated { expected: usize::MAX, got: bytes.len() })?;
    if bytes.len() != expected {
        return Err(FeatError::Truncated { expected, got: bytes.len() });
    }
    let data: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    if !frame_rate.is_finite() || data.iter().any(|v| !v.is_finite()) {
        return Err(FeatError::NonFinite);
    }
    FeatureMatrix::new(frame_rate, Matrix::from_vec(n_frames, n_dims, data))
}

pub fn write_afm(path: impl AsRef<Path>, m: &FeatureMatrix) -> Result<(), FeatError> {
    fs::write(path, encode_afm(m)?)?;
    Ok(())
}

pub fn read_afm(path: impl AsRef<Path>) -> Result<FeatureMatrix, FeatError> {
    decode_afm(&fs::read(path)?)
}
