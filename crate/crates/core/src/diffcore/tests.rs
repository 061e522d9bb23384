use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::nn::{lsgan_losses, BatchNorm, BiGru, Conv1d, Ctx, Linear, Mlp, Activation};
use super::*;
use crate::matrix::Matrix;

fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn grad_check<F>(inputs: &[Matrix], f: F, tol: f64)
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let err = check::check_inputs(inputs, f);
    assert!(err < tol, "relative error {err}");
}

/// Random projection to a scalar, `Σ x ⊙ w`, so every entry gets a distinct weight.
fn project(g: &mut Graph, x: Var, seed: u64) -> Var {
    let (r, c) = g.shape(x);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = g.input(rand_matrix(&mut rng, r * c, 1));
    let flat = g.reshape(x, 1, r * c).unwrap();
    g.matmul(flat, w).unwrap()
}

#[test]
fn matmul_and_bias() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ins = [rand_matrix(&mut rng, 3, 4), rand_matrix(&mut rng, 4, 2), rand_matrix(&mut rng, 1, 2)];
    grad_check(&ins, |g, v| {
        let y = g.matmul(v[0], v[1]).unwrap();
        let y = g.add_bias(y, v[2]).unwrap();
        project(g, y, 9)
    }, 1e-6);
}

#[test]
fn pointwise_activations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // keep away from the relu kinks
    let x = rand_matrix(&mut rng, 3, 3).map(|v| if v.abs() < 0.05 { v + 0.2 } else { v });
    grad_check(std::slice::from_ref(&x), |g, v| {
        let a = g.tanh(v[0]);
        let b = g.sigmoid(v[0]);
        let c = g.relu(v[0]);
        let d = g.leaky_relu(v[0], 0.2);
        let e = g.scale(v[0], -1.7);
        let s1 = g.add(a, b).unwrap();
        let s2 = g.add(c, d).unwrap();
        let s = g.add(s1, s2).unwrap();
        let s = g.add(s, e).unwrap();
        project(g, s, 3)
    }, 1e-6);
}

#[test]
fn structural_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ins = [rand_matrix(&mut rng, 4, 2), rand_matrix(&mut rng, 4, 3), rand_matrix(&mut rng, 1, 5)];
    grad_check(&ins, |g, v| {
        let cc = g.concat_cols(&[v[0], v[1]]).unwrap();
        let b = g.broadcast_rows(v[2], 4).unwrap();
        let cr = g.concat_rows(&[cc, b]).unwrap();
        let s = g.slice_rows(cr, 1, 7).unwrap();
        let s = g.slice_cols(s, 1, 4).unwrap();
        let s = g.reshape(s, 3, 6).unwrap();
        project(g, s, 4)
    }, 1e-6);
}

#[test]
fn losses() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = rand_matrix(&mut rng, 5, 4);
    let target = rand_matrix(&mut rng, 5, 4);
    let labels = [0usize, 3, 2, 2, 1];
    grad_check(std::slice::from_ref(&x), |g, v| {
        let a = g.mae(v[0], &target).unwrap();
        let b = g.cross_entropy(v[0], &labels).unwrap();
        let c = g.sq_err(v[0], 0.3).unwrap();
        let d = g.mean(v[0]);
        g.weighted_sum(&[(1.0, a), (0.5, b), (2.0, c), (-1.0, d)]).unwrap()
    }, 1e-6);
}

#[test]
fn cross_entropy_value() {
    let mut g = Graph::new();
    let x = g.input(Matrix::from_rows(&[vec![0.0, 0.0], vec![(3.0f64).ln(), 0.0]]));
    let l = g.cross_entropy(x, &[1, 0]).unwrap();
    // rows: −ln ½ and −ln ¾
    let expected = (2.0f64.ln() + (4.0f64 / 3.0).ln()) / 2.0;
    assert!((g.value(l)[(0, 0)] - expected).abs() < 1e-12);
}

#[test]
fn batch_norm_training_and_eval() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ins = [rand_matrix(&mut rng, 6, 3), rand_matrix(&mut rng, 1, 3), rand_matrix(&mut rng, 1, 3)];
    let rm = rand_matrix(&mut rng, 1, 3);
    let rv = rand_matrix(&mut rng, 1, 3).map(|v| v.abs() + 0.5);
    for training in [true, false] {
        grad_check(&ins, |g, v| {
            let (y, _) = g.batch_norm(v[0], v[1], v[2], &rm, &rv, training, 1e-5).unwrap();
            project(g, y, 6)
        }, 1e-5);
    }
}

#[test]
fn batch_norm_training_output_is_standardized() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut g = Graph::new();
    let x = g.input(rand_matrix(&mut rng, 50, 2));
    let gamma = g.input(Matrix::filled(1, 2, 1.0));
    let beta = g.input(Matrix::zeros(1, 2));
    let (y, stats) = g.batch_norm(x, gamma, beta, &Matrix::zeros(1, 2), &Matrix::filled(1, 2, 1.0), true, 0.0).unwrap();
    assert!(stats.is_some());
    for j in 0..2 {
        let col = g.value(y).column(j);
        let mean = col.iter().sum::<f64>() / 50.0;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 50.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-9);
    }
}

#[test]
fn gru_both_directions() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (t, d, h) = (5, 3, 4);
    let ins = [
        rand_matrix(&mut rng, t, d),
        rand_matrix(&mut rng, d, 3 * h),
        rand_matrix(&mut rng, h, 3 * h),
        rand_matrix(&mut rng, 1, 3 * h),
        rand_matrix(&mut rng, 1, 3 * h),
    ];
    for reverse in [false, true] {
        grad_check(&ins, |g, v| {
            let y = g.gru(v[0], v[1], v[2], v[3], v[4], reverse).unwrap();
            project(g, y, 8)
        }, 1e-6);
    }
}

/// Plain per-step GRU cell, written out from the gate equations.
fn gru_oracle(x: &Matrix, w_ih: &Matrix, w_hh: &Matrix, b_ih: &Matrix, b_hh: &Matrix) -> Matrix {
    let h = w_hh.rows();
    let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
    let mut state = vec![0.0; h];
    let mut out = Matrix::zeros(x.rows(), h);
    for t in 0..x.rows() {
        let pre = |w: &Matrix, inp: &[f64], b: &Matrix, col: usize| -> f64 {
            inp.iter().enumerate().map(|(k, v)| v * w[(k, col)]).sum::<f64>() + b[(0, col)]
        };
        let mut next = vec![0.0; h];
        for j in 0..h {
            let r = sig(pre(w_ih, x.row(t), b_ih, j) + pre(w_hh, &state, b_hh, j));
            let z = sig(pre(w_ih, x.row(t), b_ih, h + j) + pre(w_hh, &state, b_hh, h + j));
            let n = (pre(w_ih, x.row(t), b_ih, 2 * h + j) + r * pre(w_hh, &state, b_hh, 2 * h + j)).tanh();
            next[j] = (1.0 - z) * n + z * state[j];
        }
        state = next;
        out.row_mut(t).copy_from_slice(&state);
    }
    out
}

#[test]
fn gru_matches_unrolled_cell() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (t, d, h) = (7, 2, 3);
    let x = rand_matrix(&mut rng, t, d);
    let ws = [rand_matrix(&mut rng, d, 3 * h), rand_matrix(&mut rng, h, 3 * h), rand_matrix(&mut rng, 1, 3 * h), rand_matrix(&mut rng, 1, 3 * h)];
    let mut g = Graph::new();
    let vars: Vec<Var> = std::iter::once(&x).chain(&ws).map(|m| g.input(m.clone())).collect();
    let fwd = g.gru(vars[0], vars[1], vars[2], vars[3], vars[4], false).unwrap();
    let bwd = g.gru(vars[0], vars[1], vars[2], vars[3], vars[4], true).unwrap();
    let expect_fwd = gru_oracle(&x, &ws[0], &ws[1], &ws[2], &ws[3]);
    let expect_bwd = gru_oracle(&x.reverse_rows(), &ws[0], &ws[1], &ws[2], &ws[3]).reverse_rows();
    for (a, b) in g.value(fwd).as_slice().iter().zip(expect_fwd.as_slice()) {
        assert!((a - b).abs() < 1e-12);
    }
    for (a, b) in g.value(bwd).as_slice().iter().zip(expect_bwd.as_slice()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn im2col_conv() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ins = [rand_matrix(&mut rng, 11, 2), rand_matrix(&mut rng, 6, 3)];
    grad_check(&ins, |g, v| {
        let c = g.im2col(v[0], 3, 2).unwrap();
        assert_eq!(g.shape(c), (5, 6));
        let y = g.matmul(c, v[1]).unwrap();
        project(g, y, 10)
    }, 1e-6);
}

#[test]
fn conv_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut store = ParamStore::new();
    let conv = Conv1d::new(&mut store, "c", 2, 3, 4, 2, &mut rng);
    let x = rand_matrix(&mut rng, 13, 2);
    let mut g = Graph::new();
    let xv = g.input(x.clone());
    let y = conv.forward(&mut g, &store, xv).unwrap();
    assert_eq!(g.shape(y), (5, 3));
    assert_eq!(conv.output_len(13), Some(5));
    let w = &store.get(conv.w).value;
    let b = &store.get(conv.b).value;
    for o in 0..5 {
        for co in 0..3 {
            let mut s = b[(0, co)];
            for k in 0..4 {
                for ci in 0..2 {
                    s += x[(2 * o + k, ci)] * w[(k * 2 + ci, co)];
                }
            }
            assert!((g.value(y)[(o, co)] - s).abs() < 1e-12);
        }
    }
    let mut g = Graph::new();
    let short = g.input(Matrix::zeros(3, 2));
    assert!(matches!(conv.forward(&mut g, &store, short), Err(DiffError::TooShort { len: 3, needed: 4 })));
}

#[test]
fn sum_gives_ones() {
    let mut g = Graph::new();
    let x = g.input(Matrix::from_rows(&[vec![1.0, -2.0], vec![3.5, 0.0]]));
    let s = g.sum(x);
    let grads = g.backward(s).unwrap();
    assert_eq!(grads.wrt(x).unwrap(), &Matrix::filled(2, 2, 1.0));
}

#[test]
fn backward_needs_scalar() {
    let mut g = Graph::new();
    let x = g.input(Matrix::zeros(2, 2));
    assert!(matches!(g.backward(x), Err(DiffError::NotScalar((2, 2)))));
}

#[test]
fn shape_errors() {
    let mut g = Graph::new();
    let a = g.input(Matrix::zeros(2, 3));
    let b = g.input(Matrix::zeros(2, 3));
    assert!(matches!(g.matmul(a, b), Err(DiffError::ShapeMismatch(_))));
    let c = g.input(Matrix::zeros(3, 3));
    assert!(g.add(a, c).is_err());
    assert!(g.concat_cols(&[a, c]).is_err());
    assert!(g.cross_entropy(a, &[0, 3]).is_err());
}

#[test]
fn dropout_rules() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut g = Graph::new();
    let x = g.input(Matrix::filled(200, 100, 1.0));
    assert!(matches!(g.dropout(x, 1.0, true, &mut rng), Err(DiffError::BadProbability(_))));
    assert!(matches!(g.dropout(x, -0.1, true, &mut rng), Err(DiffError::BadProbability(_))));
    assert_eq!(g.dropout(x, 0.5, false, &mut rng).unwrap(), x);
    assert_eq!(g.dropout(x, 0.0, true, &mut rng).unwrap(), x);

    let y = g.dropout(x, 0.3, true, &mut rng).unwrap();
    let mean = g.value(y).sum() / 20_000.0;
    assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    let zeros = g.value(y).as_slice().iter().filter(|&&v| v == 0.0).count() as f64 / 20_000.0;
    assert!((zeros - 0.3).abs() < 0.02);
    let s = g.sum(y);
    let grads = g.backward(s).unwrap();
    assert_eq!(grads.wrt(x).unwrap(), g.value(y));
}

#[test]
fn param_nodes_are_shared_and_accumulate() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut store = ParamStore::new();
    let w = store.add("w", 2, 2, Init::FanIn(2), &mut rng);
    let mut g = Graph::new();
    let a = g.param(&store, w);
    let b = g.param(&store, w);
    assert_eq!(a, b);
    let s = g.add(a, b).unwrap();
    let l = g.sum(s);
    let grads = g.backward(l).unwrap();
    store.accumulate(&grads).unwrap();
    assert_eq!(store.get(w).grad, Matrix::filled(2, 2, 2.0));

    let other = store.clone();
    assert_ne!(other.uid(), store.uid());
    let mut fresh = other.clone();
    fresh.zero_grad();
    fresh.accumulate(&grads).unwrap();
    assert_eq!(fresh.get(w).grad, Matrix::zeros(2, 2));
}

#[test]
fn buffers_do_not_receive_gradients() {
    let mut store = ParamStore::new();
    let b = store.add_buffer("b", Matrix::filled(1, 2, 1.0));
    let mut g = Graph::new();
    let v = g.param(&store, b);
    let l = g.sum(v);
    store.accumulate(&g.backward(l).unwrap()).unwrap();
    Adam { lr: 0.1, ..Adam::default() }.step(&mut store);
    assert_eq!(store.get(b).value, Matrix::filled(1, 2, 1.0));
}

#[test]
fn adam_converges_on_quadratic_bowl() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut store = ParamStore::new();
    let w = store.add("w", 1, 4, Init::FanIn(1), &mut rng);
    store.get_mut(w).value = Matrix::row_vector(&[3.0, -2.0, 1.5, 4.0]);
    let opt = Adam { lr: 0.1, ..Adam::default() };
    let target = Matrix::row_vector(&[0.5, 0.5, -1.0, 2.0]);
    for _ in 0..200 {
        let mut g = Graph::new();
        let p = g.param(&store, w);
        let t = g.input(target.map(|v| -v));
        let d = g.add(p, t).unwrap();
        let l = g.sq_err(d, 0.0).unwrap();
        store.accumulate(&g.backward(l).unwrap()).unwrap();
        opt.step(&mut store);
    }
    for (a, b) in store.get(w).value.as_slice().iter().zip(target.as_slice()) {
        assert!((a - b).abs() < 0.05, "{a} vs {b}");
    }
}

#[test]
fn adam_first_step_is_lr_times_sign() {
    let mut store = ParamStore::new();
    let w = store.add_value("w", Matrix::row_vector(&[1.0, 1.0]));
    store.get_mut(w).grad = Matrix::row_vector(&[0.3, -7.0]);
    Adam { lr: 0.01, ..Adam::default() }.step(&mut store);
    let v = &store.get(w).value;
    assert!((v[(0, 0)] - 0.99).abs() < 1e-6 && (v[(0, 1)] - 1.01).abs() < 1e-6);
    assert_eq!(store.get(w).grad, Matrix::zeros(1, 2));
}

#[test]
fn clipping_bounds_joint_norm() {
    let mut a = ParamStore::new();
    let wa = a.add_value("w", Matrix::zeros(1, 2));
    a.get_mut(wa).grad = Matrix::row_vector(&[3.0, 0.0]);
    let mut b = ParamStore::new();
    let wb = b.add_value("w", Matrix::zeros(1, 1));
    b.get_mut(wb).grad = Matrix::row_vector(&[4.0]);
    let before = clip_grad_norm(&mut [&mut a, &mut b], 1.0);
    assert!((before - 5.0).abs() < 1e-12);
    assert!(((a.grad_squared_norm() + b.grad_squared_norm()).sqrt() - 1.0).abs() < 1e-12);
    assert!((a.get(wa).grad[(0, 0)] - 0.6).abs() < 1e-12);
}

#[test]
fn batch_norm_layer_updates_running_stats() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut store = ParamStore::new();
    let bn = BatchNorm::new(&mut store, "bn", 2);
    let x = Matrix::from_rows(&[vec![1.0, 4.0], vec![3.0, 8.0]]);
    let mut g = Graph::new();
    let xv = g.input(x);
    let mut ctx = Ctx::train(ChaCha8Rng::seed_from_u64(0));
    bn.forward(&mut g, &store, xv, &ctx).unwrap();
    let ups = g.take_stat_updates();
    store.apply_stat_updates(&ups);
    // mean (2, 6), unbiased var (2, 8), momentum 0.1
    let rm = &store.get(bn.running_mean).value;
    assert!((rm[(0, 0)] - 0.2).abs() < 1e-12 && (rm[(0, 1)] - 0.6).abs() < 1e-12);
    let rv = &store.get(bn.running_var).value;
    assert!((rv[(0, 0)] - 1.1).abs() < 1e-12 && (rv[(0, 1)] - 1.7).abs() < 1e-12);

    ctx.training = false;
    let mut g = Graph::new();
    let xv = g.input(rand_matrix(&mut rng, 3, 2));
    bn.forward(&mut g, &store, xv, &ctx).unwrap();
    assert!(g.take_stat_updates().is_empty());
}

#[test]
fn non_finite_gradients_are_reported() {
    let mut g = Graph::new();
    let x = g.input(Matrix::filled(1, 1, f64::INFINITY));
    let y = g.tanh(x);
    let z = g.scale(y, f64::INFINITY);
    let l = g.sum(z);
    assert!(matches!(g.backward(l), Err(DiffError::NonFinite(_))));
}

#[test]
fn lsgan_fixtures() {
    let mut g = Graph::new();
    let real = g.input(Matrix::filled(3, 1, 1.0));
    let fake = g.input(Matrix::zeros(3, 1));
    let (d, gl) = lsgan_losses(&mut g, real, fake).unwrap();
    assert_eq!(g.value(d)[(0, 0)], 0.0);
    assert_eq!(g.value(gl)[(0, 0)], 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let ins = [rand_matrix(&mut rng, 4, 1), rand_matrix(&mut rng, 4, 1)];
    grad_check(&ins, |g, v| {
        let (d, gl) = lsgan_losses(g, v[0], v[1]).unwrap();
        g.weighted_sum(&[(1.0, d), (0.7, gl)]).unwrap()
    }, 1e-6);
}

#[test]
fn uniform_logits_cross_entropy_is_ln_41() {
    let mut g = Graph::new();
    let x = g.input(Matrix::filled(4, 41, 0.37));
    let l = g.cross_entropy(x, &[0, 5, 40, 17]).unwrap();
    assert!((g.value(l)[(0, 0)] - 41f64.ln()).abs() < 1e-12);
    assert!((41f64.ln() - 3.7136).abs() < 1e-4);
}

#[test]
fn linear_identity_and_zero_weight() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut store = ParamStore::new();
    let lin = Linear::new(&mut store, "l", 3, 3, &mut rng);
    store.get_mut(lin.w).value = Matrix::identity(3);
    store.get_mut(lin.b).value = Matrix::zeros(1, 3);
    let x = rand_matrix(&mut rng, 4, 3);
    let mut g = Graph::new();
    let xv = g.input(x.clone());
    let y = lin.forward(&mut g, &store, xv).unwrap();
    assert_eq!(g.value(y), &x);

    store.get_mut(lin.w).value = Matrix::zeros(3, 3);
    store.get_mut(lin.b).value = Matrix::row_vector(&[1.0, 2.0, 3.0]);
    let mut g = Graph::new();
    let xv = g.input(x);
    let y = lin.forward(&mut g, &store, xv).unwrap();
    for r in g.value(y).row_iter() {
        assert_eq!(r, &[1.0, 2.0, 3.0]);
    }
}

#[test]
fn mlp_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut store = ParamStore::new();
    let mlp = Mlp::new(&mut store, "m", &[3, 4, 2], Activation::Relu, &mut rng);
    let x = rand_matrix(&mut rng, 5, 3);
    let mut g = Graph::new();
    let xv = g.input(x.clone());
    let y = mlp.forward(&mut g, &store, xv).unwrap();
    let affine = |x: &Matrix, l: &Linear| {
        let (w, b) = (&store.get(l.w).value, &store.get(l.b).value);
        let mut out = Matrix::zeros(x.rows(), w.cols());
        for i in 0..x.rows() {
            for j in 0..w.cols() {
                let mut s = b[(0, j)];
                for k in 0..w.rows() {
                    s += x[(i, k)] * w[(k, j)];
                }
                out[(i, j)] = s;
            }
        }
        out
    };
    let h = affine(&x, &mlp.layers[0]).map(|v| v.max(0.0));
    let expect = affine(&h, &mlp.layers[1]);
    for (a, b) in g.value(y).as_slice().iter().zip(expect.as_slice()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn zero_weight_gru_outputs_zero() {
    let mut g = Graph::new();
    let x = g.input(Matrix::filled(4, 2, 0.9));
    let w_ih = g.input(Matrix::zeros(2, 9));
    let w_hh = g.input(Matrix::zeros(3, 9));
    let b = g.input(Matrix::zeros(1, 9));
    let y = g.gru(x, w_ih, w_hh, b, b, false).unwrap();
    assert_eq!(g.value(y), &Matrix::zeros(4, 3));
}

#[test]
fn bigru_reversal_swaps_halves() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let mut store = ParamStore::new();
    let mut net = BiGru::new(&mut store, "g", 2, 3, 1, 0.0, &mut rng);
    // tie the two directions so reversal is an exact symmetry
    let (f, b) = net.layers[0].clone();
    for (src, dst) in [(f.w_ih, b.w_ih), (f.w_hh, b.w_hh), (f.b_ih, b.b_ih), (f.b_hh, b.b_hh)] {
        store.get_mut(dst).value = store.get(src).value.clone();
    }
    net.dropout = 0.0;
    let x = rand_matrix(&mut rng, 6, 2);
    let run = |x: Matrix| {
        let mut g = Graph::new();
        let v = g.input(x);
        let y = net.forward(&mut g, &store, v, &mut Ctx::eval()).unwrap();
        g.value(y).clone()
    };
    let y = run(x.clone());
    let yr = run(x.reverse_rows());
    let swapped = Matrix::hconcat(&[&yr.slice_cols(3, 6), &yr.slice_cols(0, 3)]).reverse_rows();
    for (a, b) in y.as_slice().iter().zip(swapped.as_slice()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn bigru_two_layers_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut store = ParamStore::new();
    let net = BiGru::new(&mut store, "g", 2, 3, 2, 0.3, &mut rng);
    let x = rand_matrix(&mut rng, 4, 2);
    let err = check::check_params(&store, |g, s| {
        let xv = g.input(x.clone());
        let y = net.forward(g, s, xv, &mut Ctx::eval()).unwrap();
        project(g, y, 20)
    });
    assert!(err < 1e-6, "{err}");
}

#[test]
fn eval_forward_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut store = ParamStore::new();
    let net = BiGru::new(&mut store, "g", 2, 3, 2, 0.3, &mut rng);
    let x = rand_matrix(&mut rng, 5, 2);
    let run = || {
        let mut g = Graph::new();
        let v = g.input(x.clone());
        let y = net.forward(&mut g, &store, v, &mut Ctx::eval()).unwrap();
        g.value(y).clone()
    };
    assert_eq!(run(), run());
}
