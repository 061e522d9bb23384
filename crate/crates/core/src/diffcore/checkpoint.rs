//! Checkpoint container, little-endian like AFM1:
//!
//! ```text
//! "AAIC" | u32 version=1 | u64 config_hash | u32 len | config text (UTF-8)
//! u32 n_tensors, then per tensor:
//!   u32 name_len | name | u32 rows | u32 cols | u8 trainable | u64 adam_step
//!   rows·cols f64 value | rows·cols f64 first moment | rows·cols f64 second moment
//! ```
//!
//! `config_hash` is the first 8 bytes (LE) of SHA-256 over the config text.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::params::{ParamStore, Parameter};
use super::DiffError;
use crate::matrix::Matrix;

pub const CKPT_MAGIC: &[u8; 4] = b"AAIC";
pub const CKPT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config_text: String,
    pub tensors: Vec<Parameter>,
}

pub fn config_hash(text: &str) -> u64 {
    let digest = Sha256::digest(text.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

impl Checkpoint {
    pub fn new(config_text: impl Into<String>) -> Self {
        Self { config_text: config_text.into(), tensors: Vec::new() }
    }

    /// Appends every parameter of `store`, names prefixed with `prefix`.
    pub fn add_store(&mut self, prefix: &str, store: &ParamStore) {
        for (_, p) in store.iter() {
            let mut t = p.clone();
            t.name = format!("{prefix}{}", p.name);
            t.grad = Matrix::zeros(0, 0);
            self.tensors.push(t);
        }
    }

    /// Restores values and optimizer state into `store` by name.
    pub fn load_store(&self, prefix: &str, store: &mut ParamStore) -> Result<(), DiffError> {
        for p in store.iter_mut() {
            let name = format!("{prefix}{}", p.name);
            let t = self
                .tensors
                .iter()
                .find(|t| t.name == name)
                .ok_or_else(|| DiffError::Checkpoint(format!("missing tensor {name}")))?;
            if t.value.shape() != p.value.shape() {
                return Err(DiffError::Checkpoint(format!(
                    "tensor {name} has shape {:?}, model expects {:?}",
                    t.value.shape(),
                    p.value.shape()
                )));
            }
            p.value = t.value.clone();
            p.m = t.m.clone();
            p.v = t.v.clone();
            p.step = t.step;
            p.trainable = t.trainable;
            p.grad = Matrix::zeros(p.value.rows(), p.value.cols());
        }
        Ok(())
    }
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CKPT_MAGIC);
    out.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    out.extend_from_slice(&config_hash(&ck.config_text).to_le_bytes());
    out.extend_from_slice(&(ck.config_text.len() as u32).to_le_bytes());
    out.extend_from_slice(ck.config_text.as_bytes());
    out.extend_from_slice(&(ck.tensors.len() as u32).to_le_bytes());
    for t in &ck.tensors {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.extend_from_slice(&(t.value.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(t.value.cols() as u32).to_le_bytes());
        out.push(t.trainable as u8);
        out.extend_from_slice(&t.step.to_le_bytes());
        for m in [&t.value, &t.m, &t.v] {
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DiffError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| DiffError::Checkpoint("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, DiffError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DiffError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, DiffError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| DiffError::Checkpoint("invalid UTF-8".into()))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix, DiffError> {
        let n = rows.checked_mul(cols).ok_or_else(|| DiffError::Checkpoint("tensor too large".into()))?;
        let raw = self.take(n.checked_mul(8).ok_or_else(|| DiffError::Checkpoint("tensor too large".into()))?)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Matrix::from_vec(rows, cols, data))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint, DiffError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).ok() != Some(CKPT_MAGIC.as_slice()) {
        return Err(DiffError::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CKPT_VERSION {
        return Err(DiffError::Checkpoint(format!("unsupported version {version}")));
    }
    let hash = r.u64()?;
    let config_text = r.string()?;
    if config_hash(&config_text) != hash {
        return Err(DiffError::Checkpoint("config hash mismatch".into()));
    }
    let n = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(n.min(4096));
    for _ in 0..n {
        let name = r.string()?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let trainable = r.take(1)?[0] != 0;
        let step = r.u64()?;
        let value = r.matrix(rows, cols)?;
        let m = r.matrix(rows, cols)?;
        let v = r.matrix(rows, cols)?;
        tensors.push(Parameter { name, value, grad: Matrix::zeros(0, 0), m, v, step, trainable });
    }
    if r.pos != bytes.len() {
        return Err(DiffError::Checkpoint("trailing bytes".into()));
    }
    Ok(Checkpoint { config_text, tensors })
}

pub fn write_checkpoint(path: impl AsRef<Path>, ck: &Checkpoint) -> Result<(), DiffError> {
    fs::write(path, encode_checkpoint(ck))?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint, DiffError> {
    decode_checkpoint(&fs::read(path)?)
}
