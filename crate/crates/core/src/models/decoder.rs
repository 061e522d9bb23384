use rand::Rng;

use super::config::DecoderConfig;
use super::trunk::Trunk;
use super::ModelError;
use crate::diffcore::nn::Ctx;
use crate::diffcore::{DiffError, Graph, ParamStore, Var};
use crate::matrix::Matrix;

/// Resynthesis decoder: TVs with the speaker embedding appended to every
/// frame, mapped to acoustic feature frames at the same rate.
#[derive(Debug, Clone)]
pub struct Decoder {
    pub config: DecoderConfig,
    pub store: ParamStore,
    pub trunk: Trunk,
}

impl Decoder {
    pub fn new<R: Rng + ?Sized>(config: DecoderConfig, rng: &mut R) -> Result<Self, ModelError> {
        config.validate()?;
        let mut store = ParamStore::new();
        let c = &config;
        let trunk =
            Trunk::new(&mut store, "dec", c.tv_dim + c.emb_dim, c.gru_hidden, c.gru_layers, c.mlp_hidden, c.out_dim, c.dropout, rng);
        Ok(Self { config, store, trunk })
    }

    pub fn forward(&self, g: &mut Graph, tv: Var, emb: &[f64], ctx: &mut Ctx) -> Result<Var, DiffError> {
        self.forward_with(g, &self.store, tv, emb, ctx)
    }

    pub fn forward_with(&self, g: &mut Graph, store: &ParamStore, tv: Var, emb: &[f64], ctx: &mut Ctx) -> Result<Var, DiffError> {
        self.forward_batch(g, store, &[(tv, emb)], ctx)
    }

    /// Per-utterance BiGRU, one head pass over the stacked frames.
    pub fn forward_batch(&self, g: &mut Graph, store: &ParamStore, items: &[(Var, &[f64])], ctx: &mut Ctx) -> Result<Var, DiffError> {
        let mut hs = Vec::with_capacity(items.len());
        for &(tv, emb) in items {
            let (len, d) = g.shape(tv);
            if d != self.config.tv_dim || emb.len() != self.config.emb_dim {
                return Err(DiffError::ShapeMismatch(format!(
                    "decoder input {d} TVs + {} embedding dims, expects {} + {}",
                    emb.len(),
                    self.config.tv_dim,
                    self.config.emb_dim
                )));
            }
            let inp = if emb.is_empty() {
                tv
            } else {
                let e = g.input(Matrix::row_vector(emb));
                let eb = g.broadcast_rows(e, len)?;
                g.concat_cols(&[tv, eb])?
            };
            hs.push(self.trunk.encode(g, store, inp, ctx)?);
        }
        let h = g.concat_rows(&hs)?;
        self.trunk.head(g, store, h, ctx)
    }

    pub fn predict(&self, tv: &Matrix, emb: &[f64]) -> Result<Matrix, DiffError> {
        let mut g = Graph::new();
        let x = g.input(tv.clone());
        let y = self.forward(&mut g, x, emb, &mut Ctx::eval())?;
        Ok(g.value(y).clone())
    }
}
