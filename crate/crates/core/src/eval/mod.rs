//! Evaluation metrics. All functions are pure.

mod dtw;
mod pcc;
mod phoneme;
mod report;
mod vowel;

pub use dtw::{dtw, dtw_mcd, euclidean, mcd, mcd_frame_cost, DtwResult, MCD_CONST};
pub use pcc::{channel_pcc, mean_pcc, pearson, PccMode, PccReport};
pub use phoneme::{phoneme_accuracy_logits, phoneme_accuracy_pm, per_phoneme_l1, PhonemeL1};
pub use report::{format_l1, format_l1_comparison, l1_comparison_tsv, format_mcd, format_mcd_summary, mean_std, EvalReport};
pub use vowel::{vowel_la_summary, VowelLaRow, VowelLaSummary, VOWEL_LA_HEADER};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("series has zero variance")]
    ZeroVariance,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("frame rate mismatch: {0} vs {1}")]
    RateMismatch(f64, f64),
    #[error("no frames labelled {0}")]
    NoVowelFrames(String),
    #[error("empty input")]
    EmptyInput,
}
