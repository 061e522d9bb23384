use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::diffcore::check::check_params;
use crate::diffcore::nn::{lsgan_losses, Ctx};
use crate::diffcore::{Adam, Graph};
use crate::matrix::Matrix;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Matrix {
    Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-scale..scale)).collect())
}

fn tiny_baseline(input_dim: usize) -> BaselineConfig {
    BaselineConfig { gru_hidden: 3, mlp_hidden: 4, ..BaselineConfig::new(input_dim) }
}

fn tiny_proposed(input_dim: usize, chunk_len: usize) -> ProposedConfig {
    ProposedConfig { gru_hidden: 3, mlp_hidden: 4, chunk_len, ar_hidden: vec![4], ar_dim: 2, ..ProposedConfig::new(input_dim) }
}

#[test]
fn zero_initialized_baseline_predicts_zero_tvs() {
    let mut m = BaselineModel::new(tiny_baseline(5), &mut rng(1)).unwrap();
    zero_all(&mut m.store);
    let (tv, logits) = m.predict(&rand_matrix(&mut rng(2), 7, 5, 1.0)).unwrap();
    assert_eq!(tv, Matrix::zeros(7, 9));
    assert_eq!(logits.shape(), (7, 41));
}

#[test]
fn baseline_shapes() {
    let m = BaselineModel::new(tiny_baseline(5), &mut rng(1)).unwrap();
    for len in [1, 4, 8] {
        let (tv, logits) = m.predict(&rand_matrix(&mut rng(3), len, 5, 1.0)).unwrap();
        assert_eq!(tv.cols() + logits.cols(), 50);
        assert_eq!((tv.rows(), logits.rows()), (len, len));
        assert!(tv.as_slice().iter().all(|v| v.abs() < 1.0));
    }
    assert!(m.predict(&Matrix::zeros(4, 6)).is_err());
}

#[test]
fn baseline_loss_fixtures() {
    let mut r = rng(4);
    let tv = rand_matrix(&mut r, 6, 9, 0.9);
    let labels = [0usize, 3, 39, 40, 7, 7];

    let mut g = Graph::new();
    let p = g.input(tv.clone());
    let logits = g.input(Matrix::zeros(6, 41));
    let l = baseline_loss(&mut g, p, &tv, logits, &labels, 0.5).unwrap();
    let v = g.value(l.total)[(0, 0)];
    assert!((v - 0.5 * 41f64.ln()).abs() < 1e-9);
    assert!((v - 1.8568).abs() < 1e-4);

    let mut confident = Matrix::zeros(6, 41);
    for (i, &c) in labels.iter().enumerate() {
        confident[(i, c)] = 60.0;
    }
    let mut g = Graph::new();
    let p = g.input(tv.map(|x| x + 0.1));
    let logits = g.input(confident.clone());
    let l = baseline_loss(&mut g, p, &tv, logits, &labels, 0.5).unwrap();
    assert!((g.value(l.total)[(0, 0)] - 0.1).abs() < 1e-12);

    let mut g = Graph::new();
    let p = g.input(tv.clone());
    let logits = g.input(confident);
    let l = baseline_loss(&mut g, p, &tv, logits, &labels, 0.5).unwrap();
    assert!(g.value(l.total)[(0, 0)] < 1e-20);
}

#[test]
fn loss_terms_sum_exactly() {
    let mut r = rng(5);
    let tv = rand_matrix(&mut r, 5, 9, 0.9);
    let pm = rand_matrix(&mut r, 5, 18, 0.5).map(|v| v + 0.5);
    let labels: Vec<usize> = (0..5).map(|_| r.random_range(0..41)).collect();
    let (tvp, lg, pmp, dfake) = (rand_matrix(&mut r, 5, 9, 0.9), rand_matrix(&mut r, 5, 41, 3.0), rand_matrix(&mut r, 5, 18, 0.5), rand_matrix(&mut r, 3, 1, 2.0));

    // independent term computation
    let mae = |a: &Matrix, b: &Matrix| a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
    let ce: f64 = (0..5)
        .map(|i| {
            let row = lg.row(i);
            let lse = row.iter().map(|v| v.exp()).sum::<f64>().ln();
            lse - row[labels[i]]
        })
        .sum::<f64>()
        / 5.0;
    let adv = dfake.as_slice().iter().map(|d| (d - 1.0).powi(2)).sum::<f64>() / 3.0;

    let mut g = Graph::new();
    let (a, b) = (g.input(tvp.clone()), g.input(lg.clone()));
    let l = baseline_loss(&mut g, a, &tv, b, &labels, 0.5).unwrap();
    assert!((g.value(l.total)[(0, 0)] - (mae(&tvp, &tv) + 0.5 * ce)).abs() < 1e-12);

    let mut g = Graph::new();
    let (a, b, d) = (g.input(tvp.clone()), g.input(pmp.clone()), g.input(dfake));
    let l = proposed_loss(&mut g, a, &tv, b, &pm, Some(d), 0.5, 0.7).unwrap();
    let expect = mae(&tvp, &tv) + 0.5 * mae(&pmp, &pm) + 0.7 * adv;
    assert!((g.value(l.total)[(0, 0)] - expect).abs() < 1e-12);
}

#[test]
fn proposed_loss_fixtures() {
    let mut r = rng(6);
    let tv = rand_matrix(&mut r, 4, 9, 0.9);
    let pm = rand_matrix(&mut r, 4, 18, 0.4).map(|v| v + 0.5);
    let mut g = Graph::new();
    let (a, b, d) = (g.input(tv.clone()), g.input(pm.clone()), g.input(Matrix::filled(2, 1, 1.0)));
    let l = proposed_loss(&mut g, a, &tv, b, &pm, Some(d), 0.5, 1.0).unwrap();
    assert_eq!(g.value(l.total)[(0, 0)], 0.0);

    let mut g = Graph::new();
    let (a, b, d) = (g.input(tv.map(|v| v + 0.2)), g.input(pm.clone()), g.input(Matrix::filled(2, 1, -3.0)));
    let l = proposed_loss(&mut g, a, &tv, b, &pm, Some(d), 0.5, 0.0).unwrap();
    assert!((g.value(l.total)[(0, 0)] - 0.2).abs() < 1e-12);
}

#[test]
fn proposed_shapes_and_ranges() {
    let m = ProposedModel::new(tiny_proposed(4, 3), &mut rng(7)).unwrap();
    let x = rand_matrix(&mut rng(8), 10, 4, 1.0);
    let (tv, pm) = m.predict(&x).unwrap();
    assert_eq!((tv.shape(), pm.shape()), ((10, 9), (10, 18)));
    assert_eq!(tv.cols() + pm.cols(), 27);
    assert!(tv.as_slice().iter().all(|v| v.abs() < 1.0));
    assert!(pm.as_slice().iter().all(|v| *v > 0.0 && *v < 1.0));
    assert_eq!(m.chunks(10), vec![(0, 3), (3, 6), (6, 9), (9, 10)]);
}

#[test]
fn zeroed_ar_encoder_makes_chunks_independent() {
    let mut m = ProposedModel::new(tiny_proposed(4, 4), &mut rng(9)).unwrap();
    for layer in m.ar.layers.clone() {
        m.store.get_mut(layer.w).value.as_mut_slice().fill(0.0);
        m.store.get_mut(layer.b).value.as_mut_slice().fill(0.0);
    }
    let mut r = rng(10);
    let x = rand_matrix(&mut r, 12, 4, 1.0);
    let mut y = x.clone();
    for i in 0..4 {
        for j in 0..4 {
            y[(i, j)] = r.random_range(-1.0..1.0);
        }
    }
    // chunk 0 changed; chunks 1 and 2 must not move
    let (a, _) = m.predict(&x).unwrap();
    let (b, _) = m.predict(&y).unwrap();
    assert_ne!(a.slice_rows(0, 4), b.slice_rows(0, 4));
    assert_eq!(a.slice_rows(4, 12), b.slice_rows(4, 12));

    // each later chunk equals a standalone pass with a zero encoding
    let teacher = rand_matrix(&mut r, 12, 9, 0.9);
    let (c, _) = m.predict_teacher_forced(&x, &teacher).unwrap();
    assert_eq!(a.slice_rows(4, 12), c.slice_rows(4, 12));
}

#[test]
fn long_chunk_is_single_pass_from_start_vector() {
    let m = ProposedModel::new(tiny_proposed(3, 50), &mut rng(11)).unwrap();
    let x = rand_matrix(&mut rng(12), 20, 3, 1.0);
    assert_eq!(m.chunks(20), vec![(0, 20)]);
    let teacher = rand_matrix(&mut rng(13), 20, 9, 0.9);
    let free = m.predict(&x).unwrap();
    let forced = m.predict_teacher_forced(&x, &teacher).unwrap();
    assert_eq!(free, forced);
}

#[test]
fn teacher_forcing_fixed_point() {
    // feeding the free-running output back as the teacher reproduces it
    let m = ProposedModel::new(tiny_proposed(3, 4), &mut rng(14)).unwrap();
    let x = rand_matrix(&mut rng(15), 14, 3, 1.0);
    let (free_tv, free_pm) = m.predict(&x).unwrap();
    let (tf_tv, tf_pm) = m.predict_teacher_forced(&x, &free_tv).unwrap();
    for (a, b) in free_tv.as_slice().iter().zip(tf_tv.as_slice()).chain(free_pm.as_slice().iter().zip(tf_pm.as_slice())) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn discriminator_fixtures() {
    let cfg = DiscriminatorConfig::default();
    let mut d = Discriminator::new(cfg.clone(), 9, &mut rng(16)).unwrap();
    let x = rand_matrix(&mut rng(17), 200, 9, 1.0);
    let s = d.score(&x).unwrap();
    assert_eq!(s.shape(), (cfg.output_len(200).unwrap(), 1));
    // (200-5)/2+1 = 98 → 47 → 22 → 9
    assert_eq!(s.rows(), 9);

    // shifting the input by the total stride shifts scores by one
    let shifted = x.slice_rows(16, 200);
    let s2 = d.score(&shifted).unwrap();
    for i in 0..s2.rows() {
        assert!((s2[(i, 0)] - s[(i + 1, 0)]).abs() < 1e-12);
    }

    assert!(matches!(d.score(&Matrix::zeros(60, 9)), Err(DiffError::TooShort { len: 60, needed: 61 })));
    assert!(d.score(&Matrix::zeros(80, 8)).is_err());

    zero_all(&mut d.store);
    assert_eq!(d.score(&x).unwrap(), Matrix::zeros(9, 1));
}

#[test]
fn untrained_discriminator_is_indifferent() {
    let d = Discriminator::new(DiscriminatorConfig::default(), 9, &mut rng(18)).unwrap();
    let mut r = rng(19);
    let (mut real, mut fake) = (0.0, 0.0);
    for k in 0..10 {
        let smooth = Matrix::from_vec(120, 9, (0..120 * 9).map(|i| (0.05 * (i / 9) as f64 + k as f64 + (i % 9) as f64).sin() * 0.8).collect());
        let noise = rand_matrix(&mut r, 120, 9, 0.8);
        real += d.score(&smooth).unwrap().sum() / 4.0;
        fake += d.score(&noise).unwrap().sum() / 4.0;
    }
    assert!(((real - fake) / 10.0).abs() < 0.1);
}

#[test]
fn discriminator_separates_real_from_noise() {
    let cfg = DiscriminatorConfig { channels: vec![8, 8], kernels: vec![5, 5], strides: vec![2, 2], input: DiscInput::Tv };
    let mut d = Discriminator::new(cfg, 9, &mut rng(20)).unwrap();
    let opt = Adam { lr: 3e-3, ..Adam::default() };
    let mut r = rng(21);
    let mut last = f64::INFINITY;
    for step in 0..400 {
        let phase = r.random_range(0.0..6.0);
        let real = Matrix::from_vec(40, 9, (0..360).map(|i| ((i / 9) as f64 * 0.1 + phase + (i % 9) as f64).sin() * 0.5).collect());
        let fake = rand_matrix(&mut r, 40, 9, 1.0);
        let mut g = Graph::new();
        let (a, b) = (g.input(real), g.input(fake));
        let (dr, df) = (d.forward(&mut g, a).unwrap(), d.forward(&mut g, b).unwrap());
        let (dl, _) = lsgan_losses(&mut g, dr.scores, df.scores).unwrap();
        last = g.value(dl)[(0, 0)];
        d.store.accumulate(&g.backward(dl).unwrap()).unwrap();
        opt.step(&mut d.store);
        if step > 100 && last < 0.05 {
            break;
        }
    }
    assert!(last < 0.1, "d_loss {last}");
}

#[test]
fn full_model_gradients_match_finite_differences() {
    let mut r = rng(22);
    let m = BaselineModel::new(tiny_baseline(2), &mut r).unwrap();
    let x = rand_matrix(&mut r, 3, 2, 1.0);
    let tv = rand_matrix(&mut r, 3, 9, 0.9);
    let labels = [1usize, 0, 40];
    let err = check_params(&m.store, |g, s| {
        let xv = g.input(x.clone());
        let mut ctx = Ctx::train(rng(0));
        let out = m.forward_with(g, s, xv, &mut ctx).unwrap();
        // sq_err keeps the objective smooth; MAE kinks would break differencing
        let a = g.sq_err(out.tv, 0.1).unwrap();
        let b = g.cross_entropy(out.logits, &labels).unwrap();
        g.weighted_sum(&[(1.0, a), (0.5, b)]).unwrap()
    });
    assert!(err < 1e-4, "baseline {err}");

    let p = ProposedModel::new(tiny_proposed(2, 2), &mut r).unwrap();
    let pm = rand_matrix(&mut r, 3, 18, 0.5);
    let err = check_params(&p.store, |g, s| {
        let xv = g.input(x.clone());
        let mut ctx = Ctx::train(rng(0));
        let out = p.forward_with(g, s, xv, Some(&tv), &mut ctx).unwrap();
        let a = g.sq_err(out.tv, 0.1).unwrap();
        let pm_v = g.input(pm.clone());
        let diff = g.scale(pm_v, -1.0);
        let d = g.add(out.pm, diff).unwrap();
        let b = g.sq_err(d, 0.0).unwrap();
        g.weighted_sum(&[(1.0, a), (0.5, b)]).unwrap()
    });
    assert!(err < 1e-4, "proposed {err}");
}

#[test]
fn decoder_fixtures() {
    let cfg = DecoderConfig { gru_hidden: 4, mlp_hidden: 6, ..DecoderConfig::new(3, 5) };
    let mut dec = Decoder::new(cfg, &mut rng(23)).unwrap();
    let tv = rand_matrix(&mut rng(24), 11, 9, 0.9);
    let y = dec.predict(&tv, &[0.1, 0.2, 0.3]).unwrap();
    assert_eq!(y.shape(), (11, 5));
    assert!(dec.predict(&tv, &[0.1]).is_err());
    zero_all(&mut dec.store);
    assert_eq!(dec.predict(&tv, &[0.1, 0.2, 0.3]).unwrap(), Matrix::zeros(11, 5));
}

fn overfit_sample(r: &mut ChaCha8Rng, len: usize, input_dim: usize) -> Sample {
    let tv = Matrix::from_vec(len, 9, (0..len * 9).map(|i| 0.6 * ((i / 9) as f64 * 0.15 + (i % 9) as f64).sin()).collect());
    let mix = rand_matrix(r, 9, input_dim, 1.0);
    let labels: Vec<usize> = (0..len).map(|i| (i / 5) % 41).collect();
    Sample { id: "u0".into(), features: tv.matmul(&mix), tv, pm: crate::featio::encode_phoneme_pm_seq(&labels), labels }
}

#[test]
fn baseline_overfits_one_utterance() {
    let mut r = rng(25);
    let s = overfit_sample(&mut r, 30, 6);
    let cfg = BaselineConfig { gru_hidden: 16, mlp_hidden: 32, dropout: 0.0, ..BaselineConfig::new(6) };
    let mut m = BaselineModel::new(cfg, &mut r).unwrap();
    let tc = TrainConfig { lr: 3e-3, epochs: 2000, patience: 0, ..TrainConfig::default() };
    let mut best = f64::INFINITY;
    let report = train_baseline(&mut m, std::slice::from_ref(&s), &[], &tc, |e| best = best.min(e.train_tv_mae)).unwrap();
    assert!(best < 0.01, "train TV-MAE {best} after {} steps", report.epochs.len());
}

#[test]
fn decoder_overfits_one_utterance() {
    let mut r = rng(26);
    let tv = Matrix::from_vec(30, 9, (0..270).map(|i| 0.6 * ((i / 9) as f64 * 0.2 + (i % 9) as f64).sin()).collect());
    let target = tv.matmul(&rand_matrix(&mut r, 9, 4, 0.5));
    let cfg = DecoderConfig { gru_hidden: 16, mlp_hidden: 32, dropout: 0.0, ..DecoderConfig::new(2, 4) };
    let mut dec = Decoder::new(cfg, &mut r).unwrap();
    let data = [DecoderSample { id: "u".into(), tv, embedding: vec![0.3, -0.2], target }];
    let tc = TrainConfig { lr: 3e-3, epochs: 1500, patience: 0, ..TrainConfig::default() };
    let mut best = f64::INFINITY;
    train_decoder(&mut dec, &data, &[], &tc, |e| best = best.min(e.train_loss)).unwrap();
    assert!(best < 0.05, "feature MAE {best}");
}

#[test]
fn training_is_deterministic_and_logs() {
    let mut r = rng(27);
    let s1 = overfit_sample(&mut r, 70, 4);
    let mut s2 = overfit_sample(&mut r, 70, 4);
    s2.id = "u1".into();
    let data = [s1, s2];
    let run = || {
        let mut kv = KvConfig::new();
        let mut c = tiny_proposed(4, 20);
        c.discriminator = DiscriminatorConfig { channels: vec![4, 4], kernels: vec![5, 5], strides: vec![2, 2], input: DiscInput::Tv };
        c.write_kv(&mut kv);
        kv.set("model", "proposed");
        let mut inv = Inverter::from_kv(&kv, &mut rng(1)).unwrap();
        let tc = TrainConfig { lr: 1e-3, epochs: 3, ..TrainConfig::default() };
        let rep = inv.train(&data[..1], &data[1..], &tc, |_| {}).unwrap();
        (inv.predict(&data[1].features).unwrap(), rep)
    };
    let (a, ra) = run();
    let (b, rb) = run();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert_eq!(ra.epochs.len(), 3);
    assert!(ra.epochs.iter().all(|e| e.d_loss.is_some() && e.val_pcc.is_some()));
    let tsv = ra.to_tsv();
    assert!(tsv.starts_with(TRAIN_LOG_HEADER));
    assert_eq!(tsv.lines().count(), 4);
}

#[test]
fn non_finite_input_aborts_training() {
    let mut r = rng(28);
    let mut s = overfit_sample(&mut r, 10, 3);
    s.features[(2, 1)] = f64::NAN;
    let mut m = BaselineModel::new(tiny_baseline(3), &mut r).unwrap();
    let err = train_baseline(&mut m, &[s], &[], &TrainConfig { epochs: 1, ..TrainConfig::default() }, |_| {}).unwrap_err();
    assert!(matches!(err, ModelError::NonFinite(_)), "{err}");
}

#[test]
fn early_stopping_restores_best_epoch() {
    let mut r = rng(29);
    let s = overfit_sample(&mut r, 20, 3);
    let mut val = overfit_sample(&mut r, 20, 3);
    // validation targets unrelated to the inputs, so validation cannot keep improving
    val.tv = rand_matrix(&mut r, 20, 9, 0.9);
    let mut m = BaselineModel::new(tiny_baseline(3), &mut r).unwrap();
    let tc = TrainConfig { lr: 1e-2, epochs: 60, patience: 2, ..TrainConfig::default() };
    let rep = train_baseline(&mut m, std::slice::from_ref(&s), std::slice::from_ref(&val), &tc, |_| {}).unwrap();
    assert!(rep.stopped_early);
    let best = rep.epochs[rep.best_epoch - 1].val_tv_mae.unwrap();
    let (now, _) = validate(std::slice::from_ref(&val), |f| m.predict(f).map(|p| p.0)).unwrap();
    assert!((now - best).abs() < 1e-12);
}

#[test]
fn checkpoint_round_trip() {
    let mut kv = KvConfig::new();
    tiny_proposed(3, 5).write_kv(&mut kv);
    kv.set("model", "proposed");
    let inv = Inverter::from_kv(&kv, &mut rng(30)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    inv.save(&path).unwrap();
    let back = Inverter::load(&path).unwrap();
    let x = rand_matrix(&mut rng(31), 12, 3, 1.0);
    assert_eq!(inv.predict(&x).unwrap(), back.predict(&x).unwrap());
    assert_eq!(back.kind(), ModelKind::Proposed);
    assert_eq!(back.config_kv(), inv.config_kv());
}
