//! Training loops. One utterance per step by default; with `batch_utts > 1`
//! the utterances of a batch are stacked along time, so losses are
//! frame-weighted means over the batch and batch norm sees every frame.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::baseline::{baseline_loss, BaselineModel};
use super::config::{DiscInput, TrainConfig};
use super::decoder::Decoder;
use super::discriminator::Discriminator;
use super::proposed::{proposed_loss, ProposedModel};
use super::ModelError;
use crate::diffcore::nn::{lsgan_losses, Ctx};
use crate::diffcore::{clip_grad_norm, Adam, DiffError, Graph, ParamStore, Var};
use crate::eval::{mean_pcc, PccMode};
use crate::matrix::Matrix;

/// One training utterance, all matrices at the TV frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    /// `T × input_dim`
    pub features: Matrix,
    /// `T × 9`, normalized
    pub tv: Matrix,
    /// `T` phoneme class ids
    pub labels: Vec<usize>,
    /// `T × 18`
    pub pm: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_tv_mae: f64,
    pub d_loss: Option<f64>,
    pub val_tv_mae: Option<f64>,
    pub val_pcc: Option<f64>,
}

pub const TRAIN_LOG_HEADER: &str = "epoch\ttrain_loss\ttrain_tv_mae\td_loss\tval_tv_mae\tval_pcc";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

impl EpochLog {
    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.6}\t{}\t{}\t{}",
            self.epoch,
            self.train_loss,
            self.train_tv_mae,
            opt(self.d_loss),
            opt(self.val_tv_mae),
            opt(self.val_pcc)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from(TRAIN_LOG_HEADER);
        s.push('\n');
        for e in &self.epochs {
            let _ = writeln!(s, "{}", e.tsv_row());
        }
        s
    }
}

fn nonfinite(e: DiffError) -> ModelError {
    match e {
        DiffError::NonFinite(m) => ModelError::NonFinite(m),
        other => ModelError::Diff(other),
    }
}

fn check_loss(g: &Graph, v: Var, what: &str, id: &str) -> Result<f64, ModelError> {
    let x = g.value(v)[(0, 0)];
    if !x.is_finite() {
        return Err(ModelError::NonFinite(format!("{what} on utterance {id}")));
    }
    Ok(x)
}

fn adam(cfg: &TrainConfig) -> Adam {
    Adam { lr: cfg.lr, beta1: cfg.beta1, beta2: cfg.beta2, eps: cfg.eps }
}

fn step(store: &mut ParamStore, opt: &Adam, clip: f64) -> Result<(), ModelError> {
    clip_grad_norm(&mut [&mut *store], clip);
    opt.step(store);
    store.check_finite().map_err(nonfinite)
}

/// Validation TV-MAE over all frames and mean PCC over concatenated frames
/// (`None` when a channel has zero variance).
pub fn validate<F>(val: &[Sample], predict: F) -> Result<(f64, Option<f64>), ModelError>
where
    F: Fn(&Matrix) -> Result<Matrix, DiffError>,
{
    let preds: Vec<Matrix> = val.iter().map(|s| predict(&s.features)).collect::<Result<_, _>>()?;
    let (mut sum, mut n) = (0.0, 0usize);
    for (p, s) in preds.iter().zip(val) {
        sum += p.as_slice().iter().zip(s.tv.as_slice()).map(|(a, b)| (a - b).abs()).sum::<f64>();
        n += p.len();
    }
    let pairs: Vec<(&Matrix, &Matrix)> = preds.iter().zip(val).map(|(p, s)| (p, &s.tv)).collect();
    let pcc = mean_pcc(&pairs, PccMode::Concatenated).ok().map(|r| r.mean);
    Ok((sum / n.max(1) as f64, pcc))
}

struct StepStats {
    loss: f64,
    tv_mae: f64,
    d_loss: Option<f64>,
}

/// Shared epoch / early-stopping driver. `snapshot` must capture everything
/// `restore` needs to reinstate the best epoch.
#[allow(clippy::too_many_arguments)]
fn run<S, V, Snap, R, T>(
    n_train: usize,
    has_val: bool,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
    mut step_batch: S,
    validate_fn: V,
    snapshot: Snap,
    restore: R,
) -> Result<TrainReport, ModelError>
where
    S: FnMut(&[usize], &mut Ctx) -> Result<StepStats, ModelError>,
    V: Fn() -> Result<(f64, Option<f64>), ModelError>,
    Snap: Fn() -> T,
    R: FnOnce(T),
{
    if n_train == 0 {
        return Err(ModelError::EmptyDataset);
    }
    let mut ctx = Ctx::train(ChaCha8Rng::seed_from_u64(cfg.seed));
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut epochs = Vec::new();
    let mut best: Option<(f64, usize, T)> = None;
    let mut since_best = 0;
    let mut stopped_early = false;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut ctx.rng);
        let (mut loss, mut mae, mut d, mut nb) = (0.0, 0.0, 0.0, 0usize);
        let mut has_d = false;
        for batch in order.chunks(cfg.batch_utts) {
            let st = step_batch(batch, &mut ctx)?;
            loss += st.loss;
            mae += st.tv_mae;
            if let Some(x) = st.d_loss {
                d += x;
                has_d = true;
            }
            nb += 1;
        }
        let nb = nb as f64;
        let (val_tv_mae, val_pcc) = if !has_val {
            (None, None)
        } else {
            let (m, p) = validate_fn()?;
            (Some(m), p)
        };
        let log = EpochLog {
            epoch,
            train_loss: loss / nb,
            train_tv_mae: mae / nb,
            d_loss: has_d.then_some(d / nb),
            val_tv_mae,
            val_pcc,
        };
        on_epoch(&log);
        epochs.push(log);
        let score = val_tv_mae.unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|b| score < b.0) || !has_val {
            best = Some((score, epoch, snapshot()));
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience > 0 && since_best >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    let best_epoch = match best {
        Some((_, e, snap)) => {
            restore(snap);
            e
        }
        None => 0,
    };
    Ok(TrainReport { epochs, best_epoch, stopped_early })
}

fn stack_targets(batch: &[&Sample]) -> (Matrix, Vec<usize>) {
    let tvs: Vec<&Matrix> = batch.iter().map(|s| &s.tv).collect();
    (Matrix::vconcat(&tvs), batch.iter().flat_map(|s| s.labels.iter().copied()).collect())
}

fn batch_id(batch: &[&Sample]) -> String {
    batch.iter().map(|s| s.id.as_str()).collect::<Vec<_>>().join(",")
}

pub fn train_baseline(
    model: &mut BaselineModel,
    train: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainReport, ModelError> {
    let opt = adam(cfg);
    let cell = std::cell::RefCell::new(model);
    let step_batch = |batch: &[usize], ctx: &mut Ctx| {
        let mut m = cell.borrow_mut();
        let m = &mut **m;
        let batch: Vec<&Sample> = batch.iter().map(|&i| &train[i]).collect();
        let mut g = Graph::new();
        let xs: Vec<Var> = batch.iter().map(|s| g.input(s.features.clone())).collect();
        let out = m.forward_batch(&mut g, &m.store, &xs, ctx)?;
        let (tv, labels) = stack_targets(&batch);
        let l = baseline_loss(&mut g, out.tv, &tv, out.logits, &labels, m.config.ce_weight)?;
        let loss = check_loss(&g, l.total, "loss", &batch_id(&batch))?;
        let mae = g.value(l.tv_mae)[(0, 0)];
        let grads = g.backward(l.total).map_err(nonfinite)?;
        m.store.accumulate(&grads).map_err(nonfinite)?;
        let ups = g.take_stat_updates();
        m.store.apply_stat_updates(&ups);
        step(&mut m.store, &opt, cfg.clip_norm)?;
        Ok(StepStats { loss, tv_mae: mae, d_loss: None })
    };
    let validate_fn = || {
        let m = cell.borrow();
        validate(val, |f| m.predict(f).map(|p| p.0))
    };
    let snapshot = || cell.borrow().store.clone();
    let restore = |snap: ParamStore| cell.borrow_mut().store.copy_values_from(&snap);
    run(train.len(), !val.is_empty(), cfg, on_epoch, step_batch, validate_fn, snapshot, restore)
}

/// Discriminator input for one utterance: TVs, optionally with pm channels.
fn disc_input(g: &mut Graph, input: DiscInput, tv: Var, pm: Var) -> Result<Var, DiffError> {
    match input {
        DiscInput::Tv => Ok(tv),
        DiscInput::TvPm => g.concat_cols(&[tv, pm]),
    }
}

fn disc_input_const(input: DiscInput, tv: &Matrix, pm: &Matrix) -> Matrix {
    match input {
        DiscInput::Tv => tv.clone(),
        DiscInput::TvPm => Matrix::hconcat(&[tv, pm]),
    }
}

/// Alternating LSGAN training: per batch one discriminator update on
/// real vs detached generated sequences, then one generator update against
/// the updated discriminator. Utterances shorter than the discriminator's
/// receptive field train on the regression terms only.
pub fn train_proposed(
    model: &mut ProposedModel,
    disc: &mut Discriminator,
    train: &[Sample],
    val: &[Sample],
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainReport, ModelError> {
    let opt = adam(cfg);
    let cell = std::cell::RefCell::new((model, disc));
    let step_batch = |batch: &[usize], ctx: &mut Ctx| {
        let batch: Vec<&Sample> = batch.iter().map(|&i| &train[i]).collect();
        let mut pair = cell.borrow_mut();
        let (m, d) = &mut *pair;
        let (m, d) = (&mut **m, &mut **d);
        let c = m.config.clone();
        let din = c.discriminator.input;
        let rf = c.discriminator.receptive_field();

        // generator forward pass, kept for the generator update
        let mut g = Graph::new();
        let xs: Vec<Var> = batch.iter().map(|s| g.input(s.features.clone())).collect();
        let teachers: Vec<&Matrix> = batch.iter().map(|s| &s.tv).collect();
        let teachers = (!c.free_running_train).then_some(teachers.as_slice());
        let outs = m.forward_batch(&mut g, &m.store, &xs, teachers, ctx)?;
        let id = batch_id(&batch);

        // discriminator update on every utterance long enough to score
        let use_adv = c.adv_weight != 0.0 || c.feature_matching;
        let scored: Vec<usize> = if use_adv { (0..batch.len()).filter(|&i| batch[i].tv.rows() >= rf).collect() } else { Vec::new() };
        let mut d_loss = None;
        if !scored.is_empty() {
            let mut dg = Graph::new();
            let (mut reals, mut fakes) = (Vec::new(), Vec::new());
            for &i in &scored {
                let s = batch[i];
                let real = dg.input(disc_input_const(din, &s.tv, &s.pm));
                let fake = dg.input(disc_input_const(din, g.value(outs[i].tv), g.value(outs[i].pm)));
                reals.push(d.forward(&mut dg, real)?.scores);
                fakes.push(d.forward(&mut dg, fake)?.scores);
            }
            let (dr, df) = (dg.concat_rows(&reals)?, dg.concat_rows(&fakes)?);
            let (dl, _) = lsgan_losses(&mut dg, dr, df)?;
            d_loss = Some(check_loss(&dg, dl, "discriminator loss", &id)?);
            let grads = dg.backward(dl).map_err(nonfinite)?;
            d.store.accumulate(&grads).map_err(nonfinite)?;
            step(&mut d.store, &opt, cfg.clip_norm)?;
        }

        // generator update against the updated discriminator
        let mut d_fake = None;
        let mut fm = None;
        if !scored.is_empty() {
            let mut scores = Vec::new();
            let mut fm_terms = Vec::new();
            let w = 1.0 / scored.len() as f64;
            for &i in &scored {
                let s = batch[i];
                let fake_in = disc_input(&mut g, din, outs[i].tv, outs[i].pm)?;
                let df = d.forward(&mut g, fake_in)?;
                scores.push(df.scores);
                if c.feature_matching {
                    let real = g.input(disc_input_const(din, &s.tv, &s.pm));
                    let dr = d.forward(&mut g, real)?;
                    for (ff, fr) in df.features.iter().zip(&dr.features) {
                        let target = g.value(*fr).clone();
                        fm_terms.push((w, g.mae(*ff, &target)?));
                    }
                }
            }
            d_fake = Some(g.concat_rows(&scores)?);
            if !fm_terms.is_empty() {
                fm = Some(g.weighted_sum(&fm_terms)?);
            }
        }
        let tv_pred: Vec<Var> = outs.iter().map(|o| o.tv).collect();
        let pm_pred: Vec<Var> = outs.iter().map(|o| o.pm).collect();
        let (tv_pred, pm_pred) = if outs.len() == 1 {
            (outs[0].tv, outs[0].pm)
        } else {
            (g.concat_rows(&tv_pred)?, g.concat_rows(&pm_pred)?)
        };
        let (tv, _) = stack_targets(&batch);
        let pms: Vec<&Matrix> = batch.iter().map(|s| &s.pm).collect();
        let pm = Matrix::vconcat(&pms);
        let l = proposed_loss(&mut g, tv_pred, &tv, pm_pred, &pm, d_fake, c.pm_weight, c.adv_weight)?;
        let total = match fm {
            Some(f) => g.weighted_sum(&[(1.0, l.total), (c.fm_weight, f)])?,
            None => l.total,
        };
        let loss = check_loss(&g, total, "loss", &id)?;
        let mae = g.value(l.tv_mae)[(0, 0)];
        let grads = g.backward(total).map_err(nonfinite)?;
        m.store.accumulate(&grads).map_err(nonfinite)?;
        let ups = g.take_stat_updates();
        m.store.apply_stat_updates(&ups);
        step(&mut m.store, &opt, cfg.clip_norm)?;
        // the generator pass also filled discriminator gradients; drop them
        d.store.zero_grad();
        Ok(StepStats { loss, tv_mae: mae, d_loss })
    };
    let validate_fn = || {
        let pair = cell.borrow();
        validate(val, |f| pair.0.predict(f).map(|p| p.0))
    };
    let snapshot = || {
        let pair = cell.borrow();
        (pair.0.store.clone(), pair.1.store.clone())
    };
    let restore = |snap: (ParamStore, ParamStore)| {
        let mut pair = cell.borrow_mut();
        pair.0.store.copy_values_from(&snap.0);
        pair.1.store.copy_values_from(&snap.1);
    };
    run(train.len(), !val.is_empty(), cfg, on_epoch, step_batch, validate_fn, snapshot, restore)
}

/// One decoder training utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderSample {
    pub id: String,
    /// `T × 9` normalized TVs
    pub tv: Matrix,
    pub embedding: Vec<f64>,
    /// `T × out_dim` reference acoustic features
    pub target: Matrix,
}

/// Trains the decoder with feature MAE. The log's TV columns hold feature MAE.
pub fn train_decoder(
    dec: &mut Decoder,
    train: &[DecoderSample],
    val: &[DecoderSample],
    cfg: &TrainConfig,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainReport, ModelError> {
    let opt = adam(cfg);
    let cell = std::cell::RefCell::new(dec);
    let step_batch = |batch: &[usize], ctx: &mut Ctx| {
        let mut d = cell.borrow_mut();
        let d = &mut **d;
        let batch: Vec<&DecoderSample> = batch.iter().map(|&i| &train[i]).collect();
        let mut g = Graph::new();
        let items: Vec<(Var, &[f64])> = batch.iter().map(|s| (g.input(s.tv.clone()), s.embedding.as_slice())).collect();
        let y = d.forward_batch(&mut g, &d.store, &items, ctx)?;
        let targets: Vec<&Matrix> = batch.iter().map(|s| &s.target).collect();
        let l = g.mae(y, &Matrix::vconcat(&targets))?;
        let id = batch.iter().map(|s| s.id.as_str()).collect::<Vec<_>>().join(",");
        let loss = check_loss(&g, l, "decoder loss", &id)?;
        let grads = g.backward(l).map_err(nonfinite)?;
        d.store.accumulate(&grads).map_err(nonfinite)?;
        let ups = g.take_stat_updates();
        d.store.apply_stat_updates(&ups);
        step(&mut d.store, &opt, cfg.clip_norm)?;
        Ok(StepStats { loss, tv_mae: loss, d_loss: None })
    };
    let validate_fn = || {
        let d = cell.borrow();
        let (mut sum, mut n) = (0.0, 0usize);
        for s in val {
            let p = d.predict(&s.tv, &s.embedding)?;
            sum += p.as_slice().iter().zip(s.target.as_slice()).map(|(a, b)| (a - b).abs()).sum::<f64>();
            n += p.len();
        }
        Ok((sum / n.max(1) as f64, None))
    };
    let snapshot = || cell.borrow().store.clone();
    let restore = |snap: ParamStore| cell.borrow_mut().store.copy_values_from(&snap);
    run(train.len(), !val.is_empty(), cfg, on_epoch, step_batch, validate_fn, snapshot, restore)
}
