//! Inversion models: the multi-task baseline, the chunked autoregressive
//! adversarial model with its CNN discriminator, and the resynthesis decoder.

mod baseline;
pub mod config;
mod decoder;
mod discriminator;
mod proposed;
mod train;
mod trunk;

pub use baseline::{baseline_loss, BaselineLoss, BaselineModel, BaselineOut};
pub use config::{
    BaselineConfig, DecoderConfig, DiscInput, DiscriminatorConfig, KvConfig, ModelKind, ProposedConfig, TrainConfig,
};
pub use decoder::Decoder;
pub use discriminator::{DiscOut, Discriminator};
pub use proposed::{proposed_loss, ProposedLoss, ProposedModel, ProposedOut};
pub use train::{
    train_baseline, train_decoder, train_proposed, validate, DecoderSample, EpochLog, Sample, TrainReport,
    TRAIN_LOG_HEADER,
};
pub use trunk::{zero_all, Trunk};

use std::path::Path;

use rand::{Rng, SeedableRng};
use thiserror::Error;

use crate::diffcore::{read_checkpoint, write_checkpoint, Checkpoint, DiffError};
use crate::eval::EvalError;
use crate::matrix::Matrix;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("config: {0}")]
    Config(String),
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("empty training set")]
    EmptyDataset,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A trained inverter of either kind.
#[derive(Debug, Clone)]
pub enum Inverter {
    Baseline(BaselineModel),
    Proposed(ProposedModel, Discriminator),
}

impl Inverter {
    /// Builds a freshly initialized model from a config carrying `model = ...`.
    pub fn from_kv<R: Rng + ?Sized>(kv: &KvConfig, rng: &mut R) -> Result<Self, ModelError> {
        let kind: ModelKind = kv.get("model", ModelKind::Baseline)?;
        match kind {
            ModelKind::Baseline => Ok(Inverter::Baseline(BaselineModel::new(BaselineConfig::from_kv(kv)?, rng)?)),
            ModelKind::Proposed => {
                let c = ProposedConfig::from_kv(kv)?;
                let channels = match c.discriminator.input {
                    DiscInput::Tv => c.out_tv,
                    DiscInput::TvPm => c.out_tv + c.phoneme_pm_dim,
                };
                let model = ProposedModel::new(c.clone(), rng)?;
                let disc = Discriminator::new(c.discriminator.clone(), channels, rng)?;
                Ok(Inverter::Proposed(model, disc))
            }
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Inverter::Baseline(_) => ModelKind::Baseline,
            Inverter::Proposed(..) => ModelKind::Proposed,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Inverter::Baseline(m) => m.config.input_dim,
            Inverter::Proposed(m, _) => m.config.input_dim,
        }
    }

    /// Model section of the config (training keys excluded).
    pub fn config_kv(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        kv.set("model", self.kind());
        match self {
            Inverter::Baseline(m) => m.config.write_kv(&mut kv),
            Inverter::Proposed(m, _) => m.config.write_kv(&mut kv),
        }
        kv
    }

    /// Eval-mode TVs and the auxiliary phoneme output (logits or pm).
    pub fn predict(&self, features: &Matrix) -> Result<(Matrix, Matrix), DiffError> {
        match self {
            Inverter::Baseline(m) => m.predict(features),
            Inverter::Proposed(m, _) => m.predict(features),
        }
    }

    pub fn train(
        &mut self,
        train: &[Sample],
        val: &[Sample],
        cfg: &TrainConfig,
        on_epoch: impl FnMut(&EpochLog),
    ) -> Result<TrainReport, ModelError> {
        match self {
            Inverter::Baseline(m) => train_baseline(m, train, val, cfg, on_epoch),
            Inverter::Proposed(m, d) => train_proposed(m, d, train, val, cfg, on_epoch),
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(self.config_kv().render());
        match self {
            Inverter::Baseline(m) => ck.add_store("gen.", &m.store),
            Inverter::Proposed(m, d) => {
                ck.add_store("gen.", &m.store);
                ck.add_store("disc.", &d.store);
            }
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, ModelError> {
        let kv = KvConfig::parse(&ck.config_text)?;
        // every value is overwritten below; the seed only fixes shapes
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut inv = Self::from_kv(&kv, &mut rng)?;
        match &mut inv {
            Inverter::Baseline(m) => ck.load_store("gen.", &mut m.store)?,
            Inverter::Proposed(m, d) => {
                ck.load_store("gen.", &mut m.store)?;
                ck.load_store("disc.", &mut d.store)?;
            }
        }
        Ok(inv)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        Ok(write_checkpoint(path, &self.to_checkpoint())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::from_checkpoint(&read_checkpoint(path)?)
    }
}

#[cfg(test)]
mod tests;
