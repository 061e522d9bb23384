//! Feature ingestion and interchange.
//!
//! Acoustic features (MFCCs, self-supervised features, speaker embeddings,
//! mel-cepstra) all travel as [`FeatureMatrix`] values and are stored on disk
//! in the little-endian AFM1 container. Phone alignments are read from
//! `start<TAB>end<TAB>label` files.

mod afm;
mod alignment;
mod features;
mod inventory;

pub use afm::{decode_afm, encode_afm, read_afm, write_afm, AFM_MAGIC, AFM_VERSION};
pub use alignment::{frame_labels, read_alignment_tsv, write_alignment_tsv, Interval, PhonemeAlignment};
pub use features::{concat_speaker_embedding, resample_linear, resampled_len, FeatureMatrix};
pub use inventory::{
    encode_phoneme_pm, encode_phoneme_pm_seq, parse_inventory_tsv, phoneme_class_id, phoneme_label,
    render_inventory_tsv, PhonemeInventory, PlaceManner, INVENTORY_TSV, N_PHONEME_CLASSES, PM_DIMS, SILENCE,
    VOWELS,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatError {
    #[error("bad magic: expected AFM1")]
    BadMagic,
    #[error("unsupported AFM version {0}")]
    BadVersion(u32),
    #[error("truncated AFM data: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("non-finite value in feature data")]
    NonFinite,
    #[error("frame rate must be positive, got {0}")]
    BadRate(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("unknown phoneme {0:?}")]
    UnknownPhoneme(String),
    #[error("line {line}: interval overlaps its predecessor")]
    Overlap { line: usize },
    #[error("line {line}: intervals are not sorted by start time")]
    Unsorted { line: usize },
    #[error("line {line}: bad label {label:?}")]
    BadLabel { line: usize, label: String },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
