use rand::Rng;

use super::config::ProposedConfig;
use super::trunk::Trunk;
use super::ModelError;
use crate::diffcore::nn::{Activation, Ctx, Mlp};
use crate::diffcore::{DiffError, Graph, Init, ParamId, ParamStore, Var};
use crate::matrix::Matrix;

/// Chunked autoregressive inverter: before each chunk, the previous chunk's
/// TVs are encoded by an MLP and the encoding is appended to every input
/// frame of the chunk. Chunks run through the trunk independently.
#[derive(Debug, Clone)]
pub struct ProposedModel {
    pub config: ProposedConfig,
    pub store: ParamStore,
    pub trunk: Trunk,
    pub ar: Mlp,
    /// Encoding used for the first chunk (`1 × ar_dim`).
    pub start: ParamId,
}

#[derive(Debug, Clone, Copy)]
pub struct ProposedOut {
    /// `T × out_tv`, tanh.
    pub tv: Var,
    /// `T × phoneme_pm_dim`, sigmoid.
    pub pm: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct ProposedLoss {
    pub total: Var,
    pub tv_mae: Var,
    pub pm_mae: Var,
    pub adv: Option<Var>,
}

impl ProposedModel {
    pub fn new<R: Rng + ?Sized>(config: ProposedConfig, rng: &mut R) -> Result<Self, ModelError> {
        config.validate()?;
        let mut store = ParamStore::new();
        let c = &config;
        let trunk = Trunk::new(
            &mut store,
            "trunk",
            c.input_dim + c.ar_dim,
            c.gru_hidden,
            c.gru_layers,
            c.mlp_hidden,
            c.out_dim(),
            c.dropout,
            rng,
        );
        let mut sizes = vec![c.chunk_len * c.out_tv];
        sizes.extend(&c.ar_hidden);
        sizes.push(c.ar_dim);
        let ar = Mlp::new(&mut store, "ar", &sizes, Activation::Relu, rng);
        let start = store.add("ar.start", 1, c.ar_dim, Init::FanIn(c.ar_dim), rng);
        Ok(Self { config, store, trunk, ar, start })
    }

    /// Chunk boundaries `[start, end)` for an utterance of `len` frames.
    pub fn chunks(&self, len: usize) -> Vec<(usize, usize)> {
        let l = self.config.chunk_len;
        (0..len.div_ceil(l)).map(|k| (k * l, ((k + 1) * l).min(len))).collect()
    }

    pub fn forward(&self, g: &mut Graph, x: Var, teacher: Option<&Matrix>, ctx: &mut Ctx) -> Result<ProposedOut, DiffError> {
        self.forward_with(g, &self.store, x, teacher, ctx)
    }

    /// With `teacher`, previous-chunk TVs come from it (teacher forcing) and
    /// the head runs once over all frames; otherwise each chunk is conditioned
    /// on the model's own previous output.
    pub fn forward_with(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        x: Var,
        teacher: Option<&Matrix>,
        ctx: &mut Ctx,
    ) -> Result<ProposedOut, DiffError> {
        let teachers = teacher.map(|t| vec![t]);
        Ok(self.forward_batch(g, store, &[x], teachers.as_deref(), ctx)?.remove(0))
    }

    /// Batched forward pass with one output per utterance. Batch norm sees
    /// every frame of the batch (teacher forcing) or chunk `k` of every
    /// utterance at once (free running).
    pub fn forward_batch(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        xs: &[Var],
        teachers: Option<&[&Matrix]>,
        ctx: &mut Ctx,
    ) -> Result<Vec<ProposedOut>, DiffError> {
        let c = &self.config;
        let mut plans = Vec::with_capacity(xs.len());
        for (i, &x) in xs.iter().enumerate() {
            let (len, d) = g.shape(x);
            if d != c.input_dim {
                return Err(DiffError::ShapeMismatch(format!("input has {d} dims, model expects {}", c.input_dim)));
            }
            if len == 0 {
                return Err(DiffError::ShapeMismatch("empty input".into()));
            }
            if let Some(t) = teachers.map(|ts| ts[i]) {
                if t.shape() != (len, c.out_tv) {
                    return Err(DiffError::ShapeMismatch(format!("teacher {:?} for {len} frames", t.shape())));
                }
            }
            plans.push(self.chunks(len));
        }
        match teachers {
            Some(ts) => {
                let mut hs = Vec::new();
                let mut offsets = vec![0];
                for ((&x, chunks), t) in xs.iter().zip(&plans).zip(ts) {
                    for (k, &(s, e)) in chunks.iter().enumerate() {
                        let prev = (k > 0).then(|| g.input(t.slice_rows(chunks[k - 1].0, chunks[k - 1].1)));
                        hs.push(self.encode_chunk(g, store, x, s, e, prev, ctx)?);
                    }
                    offsets.push(offsets[offsets.len() - 1] + chunks[chunks.len() - 1].1);
                }
                let h = g.concat_rows(&hs)?;
                let y = self.trunk.head(g, store, h, ctx)?;
                let out = self.split(g, y)?;
                if xs.len() == 1 {
                    return Ok(vec![out]);
                }
                offsets
                    .windows(2)
                    .map(|w| {
                        Ok(ProposedOut { tv: g.slice_rows(out.tv, w[0], w[1])?, pm: g.slice_rows(out.pm, w[0], w[1])? })
                    })
                    .collect()
            }
            None => {
                let n_chunks = plans.iter().map(Vec::len).max().unwrap_or(0);
                // previous chunk outputs stay in the graph, so gradients flow
                // through the autoregressive feedback
                let mut prev: Vec<Option<Var>> = vec![None; xs.len()];
                let mut parts: Vec<(Vec<Var>, Vec<Var>)> = vec![(Vec::new(), Vec::new()); xs.len()];
                for k in 0..n_chunks {
                    let active: Vec<usize> = (0..xs.len()).filter(|&i| k < plans[i].len()).collect();
                    let mut hs = Vec::with_capacity(active.len());
                    let mut offsets = vec![0];
                    for &i in &active {
                        let (s, e) = plans[i][k];
                        hs.push(self.encode_chunk(g, store, xs[i], s, e, prev[i], ctx)?);
                        offsets.push(offsets[offsets.len() - 1] + e - s);
                    }
                    let h = g.concat_rows(&hs)?;
                    let y = self.trunk.head(g, store, h, ctx)?;
                    let out = self.split(g, y)?;
                    for (j, &i) in active.iter().enumerate() {
                        let (tv, pm) = if active.len() == 1 {
                            (out.tv, out.pm)
                        } else {
                            (g.slice_rows(out.tv, offsets[j], offsets[j + 1])?, g.slice_rows(out.pm, offsets[j], offsets[j + 1])?)
                        };
                        prev[i] = Some(tv);
                        parts[i].0.push(tv);
                        parts[i].1.push(pm);
                    }
                }
                parts
                    .into_iter()
                    .map(|(tvs, pms)| Ok(ProposedOut { tv: g.concat_rows(&tvs)?, pm: g.concat_rows(&pms)? }))
                    .collect()
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn encode_chunk(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        x: Var,
        s: usize,
        e: usize,
        prev: Option<Var>,
        ctx: &mut Ctx,
    ) -> Result<Var, DiffError> {
        let enc = match prev {
            None => g.param(store, self.start),
            Some(p) => {
                let (r, c) = g.shape(p);
                let flat = g.reshape(p, 1, r * c)?;
                self.ar.forward(g, store, flat)?
            }
        };
        let xs = g.slice_rows(x, s, e)?;
        let eb = g.broadcast_rows(enc, e - s)?;
        let inp = g.concat_cols(&[xs, eb])?;
        self.trunk.encode(g, store, inp, ctx)
    }

    fn split(&self, g: &mut Graph, y: Var) -> Result<ProposedOut, DiffError> {
        let c = &self.config;
        let tv = g.slice_cols(y, 0, c.out_tv)?;
        let pm = g.slice_cols(y, c.out_tv, c.out_dim())?;
        Ok(ProposedOut { tv: g.tanh(tv), pm: g.sigmoid(pm) })
    }

    /// Free-running eval-mode prediction: `(tv, pm)`.
    pub fn predict(&self, features: &Matrix) -> Result<(Matrix, Matrix), DiffError> {
        let mut g = Graph::new();
        let x = g.input(features.clone());
        let out = self.forward(&mut g, x, None, &mut Ctx::eval())?;
        Ok((g.value(out.tv).clone(), g.value(out.pm).clone()))
    }

    /// Teacher-forced eval-mode prediction.
    pub fn predict_teacher_forced(&self, features: &Matrix, teacher: &Matrix) -> Result<(Matrix, Matrix), DiffError> {
        let mut g = Graph::new();
        let x = g.input(features.clone());
        let out = self.forward(&mut g, x, Some(teacher), &mut Ctx::eval())?;
        Ok((g.value(out.tv).clone(), g.value(out.pm).clone()))
    }
}

/// `MAE(tv) + pm_weight · MAE(pm) + adv_weight · mean((d_fake − 1)²)`.
#[allow(clippy::too_many_arguments)]
pub fn proposed_loss(
    g: &mut Graph,
    tv_pred: Var,
    tv_true: &Matrix,
    pm_pred: Var,
    pm_true: &Matrix,
    d_fake: Option<Var>,
    pm_weight: f64,
    adv_weight: f64,
) -> Result<ProposedLoss, DiffError> {
    let tv_mae = g.mae(tv_pred, tv_true)?;
    let pm_mae = g.mae(pm_pred, pm_true)?;
    let mut terms = vec![(1.0, tv_mae), (pm_weight, pm_mae)];
    let adv = match d_fake {
        Some(d) => {
            let a = g.sq_err(d, 1.0)?;
            terms.push((adv_weight, a));
            Some(a)
        }
        None => None,
    };
    let total = g.weighted_sum(&terms)?;
    Ok(ProposedLoss { total, tv_mae, pm_mae, adv })
}
