use rand::Rng;

use super::config::BaselineConfig;
use super::trunk::Trunk;
use super::ModelError;
use crate::diffcore::nn::Ctx;
use crate::diffcore::{DiffError, Graph, ParamStore, Var};
use crate::matrix::Matrix;

/// Multi-task BiGRU inverter: tanh TVs plus phoneme logits.
#[derive(Debug, Clone)]
pub struct BaselineModel {
    pub config: BaselineConfig,
    pub store: ParamStore,
    pub trunk: Trunk,
}

#[derive(Debug, Clone, Copy)]
pub struct BaselineOut {
    /// `T × out_tv`, tanh-squashed.
    pub tv: Var,
    /// `T × out_phoneme`, raw logits.
    pub logits: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct BaselineLoss {
    pub total: Var,
    pub tv_mae: Var,
    pub ce: Var,
}

impl BaselineModel {
    pub fn new<R: Rng + ?Sized>(config: BaselineConfig, rng: &mut R) -> Result<Self, ModelError> {
        config.validate()?;
        let mut store = ParamStore::new();
        let c = &config;
        let trunk = Trunk::new(&mut store, "trunk", c.input_dim, c.gru_hidden, c.gru_layers, c.mlp_hidden, c.out_dim(), c.dropout, rng);
        Ok(Self { config, store, trunk })
    }

    pub fn forward(&self, g: &mut Graph, x: Var, ctx: &mut Ctx) -> Result<BaselineOut, DiffError> {
        self.forward_with(g, &self.store, x, ctx)
    }

    /// Forward pass reading parameters from `store` (same layout as `self.store`).
    pub fn forward_with(&self, g: &mut Graph, store: &ParamStore, x: Var, ctx: &mut Ctx) -> Result<BaselineOut, DiffError> {
        self.forward_batch(g, store, &[x], ctx)
    }

    /// Runs the BiGRU per utterance and the head once over the stacked
    /// frames, so batch norm sees time × batch. Outputs are stacked in input
    /// order.
    pub fn forward_batch(&self, g: &mut Graph, store: &ParamStore, xs: &[Var], ctx: &mut Ctx) -> Result<BaselineOut, DiffError> {
        let mut hs = Vec::with_capacity(xs.len());
        for &x in xs {
            let d = g.shape(x).1;
            if d != self.config.input_dim {
                return Err(DiffError::ShapeMismatch(format!("input has {d} dims, model expects {}", self.config.input_dim)));
            }
            hs.push(self.trunk.encode(g, store, x, ctx)?);
        }
        let h = g.concat_rows(&hs)?;
        let y = self.trunk.head(g, store, h, ctx)?;
        let tv = g.slice_cols(y, 0, self.config.out_tv)?;
        let tv = g.tanh(tv);
        let logits = g.slice_cols(y, self.config.out_tv, self.config.out_dim())?;
        Ok(BaselineOut { tv, logits })
    }

    /// Eval-mode prediction: `(tv, logits)`.
    pub fn predict(&self, features: &Matrix) -> Result<(Matrix, Matrix), DiffError> {
        let mut g = Graph::new();
        let x = g.input(features.clone());
        let out = self.forward(&mut g, x, &mut Ctx::eval())?;
        Ok((g.value(out.tv).clone(), g.value(out.logits).clone()))
    }
}

/// `MAE(tv) + ce_weight · CE(logits, labels)`.
pub fn baseline_loss(
    g: &mut Graph,
    tv_pred: Var,
    tv_true: &Matrix,
    logits: Var,
    labels: &[usize],
    ce_weight: f64,
) -> Result<BaselineLoss, DiffError> {
    let tv_mae = g.mae(tv_pred, tv_true)?;
    let ce = g.cross_entropy(logits, labels)?;
    let total = g.weighted_sum(&[(1.0, tv_mae), (ce_weight, ce)])?;
    Ok(BaselineLoss { total, tv_mae, ce })
}
