//! Minimal reverse-mode differentiation engine in double precision.
//!
//! Everything is a 2-D matrix; sequences are `time × dim`. Recurrent and
//! normalization layers are fused tape operations with hand-written
//! backward passes, which keeps graphs small for long utterances.

pub mod check;
mod checkpoint;
mod graph;
pub mod nn;
mod params;

pub use checkpoint::{config_hash, decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, Checkpoint, CKPT_MAGIC, CKPT_VERSION};
pub use graph::{Gradients, Graph, StatUpdate, Var};
pub use params::{clip_grad_norm, Adam, Init, ParamId, ParamStore, Parameter};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dropout probability must be in [0, 1), got {0}")]
    BadProbability(f64),
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NotScalar((usize, usize)),
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("sequence of length {len} is shorter than the required {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests;
