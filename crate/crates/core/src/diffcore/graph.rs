//! Tape-based reverse-mode differentiation over 2-D matrices.
//!
//! A [`Graph`] is built fresh for every forward pass. Nodes only reference
//! earlier nodes, so the tape is a topological order by construction and the
//! backward sweep is a single reverse scan.

use std::collections::HashMap;

use rand::Rng;

use super::params::{ParamId, ParamStore};
use super::DiffError;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    BroadcastRows(Var),
    Reshape(Var),
    Dropout(Var, Vec<f64>),
    BatchNorm { x: Var, gamma: Var, beta: Var, xhat: Matrix, inv_std: Vec<f64>, training: bool },
    Gru(Box<GruTape>),
    Im2Col { x: Var, kernel: usize, stride: usize },
    MaeConst { x: Var, target: Matrix },
    SqErrConst { x: Var, target: f64 },
    CrossEntropy { logits: Var, labels: Vec<usize>, probs: Matrix },
    Sum(Var),
    Mean(Var),
}

#[derive(Debug)]
struct GruTape {
    x: Var,
    w_ih: Var,
    w_hh: Var,
    b_ih: Var,
    b_hh: Var,
    reverse: bool,
    // per time step (original time index), width H
    r: Matrix,
    z: Matrix,
    n: Matrix,
    gh_n: Matrix,
    h_prev: Matrix,
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
}

/// A pending running-statistics update produced by a training-mode batch norm.
#[derive(Debug, Clone)]
pub struct StatUpdate {
    pub store: u64,
    pub id: ParamId,
    pub value: Matrix,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<(u64, ParamId), Var>,
    stat_updates: Vec<StatUpdate>,
}

/// Adjoints of every node reachable from a scalar loss.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    params: Vec<(u64, ParamId, Var)>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }

    /// Parameter gradients belonging to the store with uid `store`.
    pub fn for_store(&self, store: u64) -> impl Iterator<Item = (ParamId, &Matrix)> + '_ {
        self.params
            .iter()
            .filter(move |(s, _, _)| *s == store)
            .filter_map(|(_, id, v)| self.grads[v.0].as_ref().map(|g| (*id, g)))
    }
}

fn check_shape(ok: bool, what: impl FnOnce() -> String) -> Result<(), DiffError> {
    if ok {
        Ok(())
    } else {
        Err(DiffError::ShapeMismatch(what()))
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn col_sums(m: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(1, m.cols());
    for r in m.row_iter() {
        for (o, v) in out.as_mut_slice().iter_mut().zip(r) {
            *o += v;
        }
    }
    out
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// A constant input; gradients are still reported for it.
    pub fn input(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Leaf)
    }

    /// Inserts a parameter once per graph; repeated calls reuse the node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let key = (store.uid(), id);
        if let Some(&v) = self.params.get(&key) {
            return v;
        }
        let v = self.push(store.get(id).value.clone(), Op::Param);
        self.params.insert(key, v);
        v
    }

    pub fn take_stat_updates(&mut self) -> Vec<StatUpdate> {
        std::mem::take(&mut self.stat_updates)
    }

    pub(crate) fn push_stat_update(&mut self, u: StatUpdate) {
        self.stat_updates.push(u);
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (av, bv) = (self.value(a), self.value(b));
        check_shape(av.cols() == bv.rows(), || format!("matmul {:?} x {:?}", av.shape(), bv.shape()))?;
        let out = av.matmul(bv);
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    /// `x + b` with the `1 × d` row `b` broadcast over rows.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var, DiffError> {
        let (xv, bv) = (self.value(x), self.value(b));
        check_shape(bv.rows() == 1 && bv.cols() == xv.cols(), || {
            format!("bias {:?} for input {:?}", bv.shape(), xv.shape())
        })?;
        let mut out = xv.clone();
        for i in 0..out.rows() {
            for (o, bb) in out.row_mut(i).iter_mut().zip(bv.as_slice()) {
                *o += bb;
            }
        }
        Ok(self.push(out, Op::AddBias(x, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (av, bv) = (self.value(a), self.value(b));
        check_shape(av.shape() == bv.shape(), || format!("add {:?} + {:?}", av.shape(), bv.shape()))?;
        let out = av.zip_map(bv, |x, y| x + y);
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let out = self.value(x).map(|v| v * c);
        self.push(out, Op::Scale(x, c))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).map(f64::tanh);
        self.push(out, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(sigmoid);
        self.push(out, Op::Sigmoid(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.max(0.0));
        self.push(out, Op::Relu(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let out = self.value(x).map(|v| if v > 0.0 { v } else { slope * v });
        self.push(out, Op::LeakyRelu(x, slope))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, DiffError> {
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let rows = mats.first().map_or(0, |m| m.rows());
        check_shape(!mats.is_empty() && mats.iter().all(|m| m.rows() == rows), || "concat_cols row counts".into())?;
        let out = Matrix::hconcat(&mats);
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, DiffError> {
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let cols = mats.first().map_or(0, |m| m.cols());
        check_shape(!mats.is_empty() && mats.iter().all(|m| m.cols() == cols), || "concat_rows col counts".into())?;
        let out = Matrix::vconcat(&mats);
        Ok(self.push(out, Op::ConcatRows(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var, DiffError> {
        let xv = self.value(x);
        check_shape(start <= end && end <= xv.cols(), || format!("slice_cols {start}..{end} of {:?}", xv.shape()))?;
        let out = xv.slice_cols(start, end);
        Ok(self.push(out, Op::SliceCols(x, start)))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var, DiffError> {
        let xv = self.value(x);
        check_shape(start <= end && end <= xv.rows(), || format!("slice_rows {start}..{end} of {:?}", xv.shape()))?;
        let out = xv.slice_rows(start, end);
        Ok(self.push(out, Op::SliceRows(x, start)))
    }

    /// Repeats a `1 × d` row `n` times.
    pub fn broadcast_rows(&mut self, x: Var, n: usize) -> Result<Var, DiffError> {
        let xv = self.value(x);
        check_shape(xv.rows() == 1, || format!("broadcast_rows needs a row vector, got {:?}", xv.shape()))?;
        let d = xv.cols();
        let out = Matrix::from_vec(n, d, xv.as_slice().iter().copied().cycle().take(n * d).collect());
        Ok(self.push(out, Op::BroadcastRows(x)))
    }

    /// Row-major reshape; the data order is unchanged.
    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var, DiffError> {
        let xv = self.value(x);
        check_shape(xv.len() == rows * cols, || format!("reshape {:?} to {rows}x{cols}", xv.shape()))?;
        let out = xv.clone().reshape(rows, cols);
        Ok(self.push(out, Op::Reshape(x)))
    }

    /// Inverted dropout: in training, zeroes each entry with probability `p`
    /// and scales survivors by `1/(1-p)`. Identity when not training.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, training: bool, rng: &mut R) -> Result<Var, DiffError> {
        if !(0.0..1.0).contains(&p) {
            return Err(DiffError::BadProbability(p));
        }
        if !training || p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let xv = self.value(x);
        let mask: Vec<f64> = (0..xv.len()).map(|_| if rng.random::<f64>() < p { 0.0 } else { keep }).collect();
        let out = Matrix::from_vec(
            xv.rows(),
            xv.cols(),
            xv.as_slice().iter().zip(&mask).map(|(v, m)| v * m).collect(),
        );
        Ok(self.push(out, Op::Dropout(x, mask)))
    }

    /// Batch normalization over rows. In training the batch statistics are
    /// used and returned as `(mean, biased variance)`; otherwise the given
    /// running statistics are applied.
    #[allow(clippy::too_many_arguments)]
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: &Matrix,
        running_var: &Matrix,
        training: bool,
        eps: f64,
    ) -> Result<(Var, Option<(Matrix, Matrix)>), DiffError> {
        let xv = self.value(x);
        let (n, d) = xv.shape();
        for p in [gamma, beta] {
            check_shape(self.shape(p) == (1, d), || format!("batch norm affine {:?} for width {d}", self.shape(p)))?;
        }
        check_shape(running_mean.shape() == (1, d) && running_var.shape() == (1, d), || "running stats".into())?;
        if training && n == 0 {
            return Err(DiffError::ShapeMismatch("batch norm over zero rows".into()));
        }
        let (mean, var) = if training {
            let mean: Vec<f64> = col_sums(xv).as_slice().iter().map(|s| s / n as f64).collect();
            let mut var = vec![0.0; d];
            for r in xv.row_iter() {
                for j in 0..d {
                    var[j] += (r[j] - mean[j]).powi(2);
                }
            }
            var.iter_mut().for_each(|v| *v /= n as f64);
            (mean, var)
        } else {
            (running_mean.as_slice().to_vec(), running_var.as_slice().to_vec())
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let mut xhat = xv.clone();
        for i in 0..n {
            for (j, v) in xhat.row_mut(i).iter_mut().enumerate() {
                *v = (*v - mean[j]) * inv_std[j];
            }
        }
        let (g, b) = (self.value(gamma).as_slice().to_vec(), self.value(beta).as_slice().to_vec());
        let mut out = xhat.clone();
        for i in 0..n {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = *v * g[j] + b[j];
            }
        }
        let stats = training.then(|| (Matrix::row_vector(&mean), Matrix::row_vector(&var)));
        let v = self.push(out, Op::BatchNorm { x, gamma, beta, xhat, inv_std, training });
        Ok((v, stats))
    }

    /// Runs a GRU over the rows of `x` with zero initial state.
    ///
    /// Gate columns are ordered (reset, update, candidate):
    /// `r = σ(x W_ir + b_ir + h W_hr + b_hr)`, `z` likewise,
    /// `n = tanh(x W_in + b_in + r ⊙ (h W_hn + b_hn))`, `h' = (1 − z) ⊙ n + z ⊙ h`.
    /// With `reverse` the sequence is consumed last-to-first; row `t` of the
    /// output is always the state after consuming input row `t`.
    pub fn gru(&mut self, x: Var, w_ih: Var, w_hh: Var, b_ih: Var, b_hh: Var, reverse: bool) -> Result<Var, DiffError> {
        let (t_len, in_dim) = self.shape(x);
        let h = self.shape(w_hh).0;
        check_shape(self.shape(w_ih) == (in_dim, 3 * h), || format!("GRU W_ih {:?}", self.shape(w_ih)))?;
        check_shape(self.shape(w_hh) == (h, 3 * h), || format!("GRU W_hh {:?}", self.shape(w_hh)))?;
        check_shape(self.shape(b_ih) == (1, 3 * h) && self.shape(b_hh) == (1, 3 * h), || "GRU biases".into())?;

        let mut gi = self.value(x).matmul(self.value(w_ih));
        let bi = self.value(b_ih).as_slice().to_vec();
        for i in 0..t_len {
            for (v, b) in gi.row_mut(i).iter_mut().zip(&bi) {
                *v += b;
            }
        }
        let w_hh_v = self.value(w_hh);
        let bh = self.value(b_hh).as_slice();
        let mut out = Matrix::zeros(t_len, h);
        let (mut r, mut z, mut n) = (Matrix::zeros(t_len, h), Matrix::zeros(t_len, h), Matrix::zeros(t_len, h));
        let (mut gh_n, mut h_prev) = (Matrix::zeros(t_len, h), Matrix::zeros(t_len, h));
        let mut state = vec![0.0; h];
        let mut gh = vec![0.0; 3 * h];
        for step in 0..t_len {
            let t = if reverse { t_len - 1 - step } else { step };
            gh.copy_from_slice(bh);
            for (k, &s) in state.iter().enumerate() {
                if s != 0.0 {
                    for (g, w) in gh.iter_mut().zip(w_hh_v.row(k)) {
                        *g += s * w;
                    }
                }
            }
            h_prev.row_mut(t).copy_from_slice(&state);
            let gi_t = gi.row(t);
            for j in 0..h {
                let rj = sigmoid(gi_t[j] + gh[j]);
                let zj = sigmoid(gi_t[h + j] + gh[h + j]);
                let nj = (gi_t[2 * h + j] + rj * gh[2 * h + j]).tanh();
                r[(t, j)] = rj;
                z[(t, j)] = zj;
                n[(t, j)] = nj;
                gh_n[(t, j)] = gh[2 * h + j];
                state[j] = (1.0 - zj) * nj + zj * state[j];
            }
            out.row_mut(t).copy_from_slice(&state);
        }
        let tape = GruTape { x, w_ih, w_hh, b_ih, b_hh, reverse, r, z, n, gh_n, h_prev };
        Ok(self.push(out, Op::Gru(Box::new(tape))))
    }

    /// Unfolds `x` (`T × C`) into windows of `kernel` rows taken every
    /// `stride` rows: output is `(⌊(T − kernel)/stride⌋ + 1) × (kernel·C)`.
    pub fn im2col(&mut self, x: Var, kernel: usize, stride: usize) -> Result<Var, DiffError> {
        let (t_len, c) = self.shape(x);
        if kernel == 0 || stride == 0 {
            return Err(DiffError::ShapeMismatch("kernel and stride must be positive".into()));
        }
        if t_len < kernel {
            return Err(DiffError::TooShort { len: t_len, needed: kernel });
        }
        let t_out = (t_len - kernel) / stride + 1;
        let xv = self.value(x);
        let mut data = Vec::with_capacity(t_out * kernel * c);
        for o in 0..t_out {
            data.extend_from_slice(&xv.as_slice()[o * stride * c..(o * stride + kernel) * c]);
        }
        let out = Matrix::from_vec(t_out, kernel * c, data);
        Ok(self.push(out, Op::Im2Col { x, kernel, stride }))
    }

    /// Mean absolute error against a constant target.
    pub fn mae(&mut self, x: Var, target: &Matrix) -> Result<Var, DiffError> {
        let xv = self.value(x);
        check_shape(xv.shape() == target.shape() && !xv.is_empty(), || {
            format!("mae {:?} vs {:?}", xv.shape(), target.shape())
        })?;
        let loss = xv.as_slice().iter().zip(target.as_slice()).map(|(a, b)| (a - b).abs()).sum::<f64>()
            / xv.len() as f64;
        Ok(self.push(Matrix::filled(1, 1, loss), Op::MaeConst { x, target: target.clone() }))
    }

    /// `mean((x − target)²)` for a scalar target.
    pub fn sq_err(&mut self, x: Var, target: f64) -> Result<Var, DiffError> {
        let xv = self.value(x);
        check_shape(!xv.is_empty(), || "sq_err of empty tensor".into())?;
        let loss = xv.as_slice().iter().map(|v| (v - target).powi(2)).sum::<f64>() / xv.len() as f64;
        Ok(self.push(Matrix::filled(1, 1, loss), Op::SqErrConst { x, target }))
    }

    /// Mean over rows of `−log softmax(logits)[label]`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var, DiffError> {
        let lv = self.value(logits);
        check_shape(lv.rows() == labels.len() && lv.rows() > 0, || {
            format!("cross entropy over {} rows with {} labels", lv.rows(), labels.len())
        })?;
        if let Some(&bad) = labels.iter().find(|&&l| l >= lv.cols()) {
            return Err(DiffError::ShapeMismatch(format!("label {bad} out of {} classes", lv.cols())));
        }
        let mut probs = lv.clone();
        let mut loss = 0.0;
        for (i, &label) in labels.iter().enumerate() {
            let row = probs.row_mut(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[label];
            row.iter_mut().for_each(|v| *v = (*v - lse).exp());
        }
        loss /= labels.len() as f64;
        Ok(self.push(Matrix::filled(1, 1, loss), Op::CrossEntropy { logits, labels: labels.to_vec(), probs }))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        self.push(Matrix::filled(1, 1, s), Op::Sum(x))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let s = xv.sum() / xv.len().max(1) as f64;
        self.push(Matrix::filled(1, 1, s), Op::Mean(x))
    }

    /// Weighted sum of scalar nodes.
    pub fn weighted_sum(&mut self, terms: &[(f64, Var)]) -> Result<Var, DiffError> {
        let mut acc: Option<Var> = None;
        for &(w, v) in terms {
            check_shape(self.shape(v) == (1, 1), || "weighted_sum expects scalars".into())?;
            let term = if w == 1.0 { v } else { self.scale(v, w) };
            acc = Some(match acc {
                None => term,
                Some(a) => self.add(a, term)?,
            });
        }
        acc.ok_or_else(|| DiffError::ShapeMismatch("weighted_sum of nothing".into()))
    }

    /// Reverse sweep from a scalar loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients, DiffError> {
        if self.shape(loss) != (1, 1) {
            return Err(DiffError::NotScalar(self.shape(loss)));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        fn acc(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf | Op::Param => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    acc(&mut grads, *a, g.matmul_nt(bv));
                    acc(&mut grads, *b, av.matmul_tn(&g));
                }
                Op::AddBias(x, b) => {
                    acc(&mut grads, *b, col_sums(&g));
                    acc(&mut grads, *x, g);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Scale(x, c) => acc(&mut grads, *x, g.map(|v| v * c)),
                Op::Tanh(x) => acc(&mut grads, *x, g.zip_map(&node.value, |gv, y| gv * (1.0 - y * y))),
                Op::Sigmoid(x) => acc(&mut grads, *x, g.zip_map(&node.value, |gv, y| gv * y * (1.0 - y))),
                Op::Relu(x) => acc(&mut grads, *x, g.zip_map(&node.value, |gv, y| if y > 0.0 { gv } else { 0.0 })),
                Op::LeakyRelu(x, slope) => {
                    let gx = g.zip_map(self.value(*x), |gv, xv| if xv > 0.0 { gv } else { slope * gv });
                    acc(&mut grads, *x, gx);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.shape(p).1;
                        acc(&mut grads, p, g.slice_cols(start, start + w));
                        start += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let h = self.shape(p).0;
                        acc(&mut grads, p, g.slice_rows(start, start + h));
                        start += h;
                    }
                }
                Op::SliceCols(x, start) => {
                    let mut gx = Matrix::zeros(self.shape(*x).0, self.shape(*x).1);
                    for r in 0..g.rows() {
                        gx.row_mut(r)[*start..*start + g.cols()].copy_from_slice(g.row(r));
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::SliceRows(x, start) => {
                    let (rows, cols) = self.shape(*x);
                    let mut gx = Matrix::zeros(rows, cols);
                    gx.as_mut_slice()[start * cols..(start + g.rows()) * cols].copy_from_slice(g.as_slice());
                    acc(&mut grads, *x, gx);
                }
                Op::BroadcastRows(x) => acc(&mut grads, *x, col_sums(&g)),
                Op::Reshape(x) => {
                    let (r, c) = self.shape(*x);
                    acc(&mut grads, *x, g.reshape(r, c));
                }
                Op::Dropout(x, mask) => {
                    let gx = Matrix::from_vec(g.rows(), g.cols(), g.as_slice().iter().zip(mask).map(|(a, m)| a * m).collect());
                    acc(&mut grads, *x, gx);
                }
                Op::BatchNorm { x, gamma, beta, xhat, inv_std, training } => {
                    let (n, d) = g.shape();
                    let gam = self.value(*gamma).as_slice();
                    acc(&mut grads, *beta, col_sums(&g));
                    acc(&mut grads, *gamma, col_sums(&g.zip_map(xhat, |a, b| a * b)));
                    let dxhat = {
                        let mut m = g.clone();
                        for r in 0..n {
                            for (j, v) in m.row_mut(r).iter_mut().enumerate() {
                                *v *= gam[j];
                            }
                        }
                        m
                    };
                    let mut gx = Matrix::zeros(n, d);
                    if *training {
                        let s1 = col_sums(&dxhat);
                        let s2 = col_sums(&dxhat.zip_map(xhat, |a, b| a * b));
                        for r in 0..n {
                            for j in 0..d {
                                gx[(r, j)] = inv_std[j] / n as f64
                                    * (n as f64 * dxhat[(r, j)] - s1.as_slice()[j] - xhat[(r, j)] * s2.as_slice()[j]);
                            }
                        }
                    } else {
                        for r in 0..n {
                            for j in 0..d {
                                gx[(r, j)] = dxhat[(r, j)] * inv_std[j];
                            }
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::Gru(tape) => {
                    let (gx, gw_ih, gw_hh, gb_ih, gb_hh) = self.gru_backward(tape, &g);
                    acc(&mut grads, tape.x, gx);
                    acc(&mut grads, tape.w_ih, gw_ih);
                    acc(&mut grads, tape.w_hh, gw_hh);
                    acc(&mut grads, tape.b_ih, gb_ih);
                    acc(&mut grads, tape.b_hh, gb_hh);
                }
                Op::Im2Col { x, kernel, stride } => {
                    let (rows, c) = self.shape(*x);
                    let mut gx = Matrix::zeros(rows, c);
                    let gxs = gx.as_mut_slice();
                    for o in 0..g.rows() {
                        let base = o * stride * c;
                        for (k, v) in g.row(o).iter().enumerate().take(kernel * c) {
                            gxs[base + k] += v;
                        }
                    }
                    acc(&mut grads, *x, gx);
                }
                Op::MaeConst { x, target } => {
                    let s = g.as_slice()[0] / target.len() as f64;
                    let gx = self.value(*x).zip_map(target, |a, b| {
                        let d = a - b;
                        if d > 0.0 {
                            s
                        } else if d < 0.0 {
                            -s
                        } else {
                            0.0
                        }
                    });
                    acc(&mut grads, *x, gx);
                }
                Op::SqErrConst { x, target } => {
                    let xv = self.value(*x);
                    let s = 2.0 * g.as_slice()[0] / xv.len() as f64;
                    acc(&mut grads, *x, xv.map(|v| s * (v - target)));
                }
                Op::CrossEntropy { logits, labels, probs } => {
                    let s = g.as_slice()[0] / labels.len() as f64;
                    let mut gx = probs.clone();
                    for (r, &l) in labels.iter().enumerate() {
                        gx[(r, l)] -= 1.0;
                    }
                    gx.scale_in_place(s);
                    acc(&mut grads, *logits, gx);
                }
                Op::Sum(x) => {
                    let (r, c) = self.shape(*x);
                    acc(&mut grads, *x, Matrix::filled(r, c, g.as_slice()[0]));
                }
                Op::Mean(x) => {
                    let (r, c) = self.shape(*x);
                    acc(&mut grads, *x, Matrix::filled(r, c, g.as_slice()[0] / (r * c).max(1) as f64));
                }
            }
        }
        let params = self.params.iter().map(|(&(s, id), &v)| (s, id, v)).collect();
        let grads = Gradients { grads, params };
        if let Some(bad) = grads.grads.iter().flatten().find(|m| !m.is_finite()) {
            return Err(DiffError::NonFinite(format!("gradient of shape {:?}", bad.shape())));
        }
        Ok(grads)
    }

    fn gru_backward(&self, tape: &GruTape, d_out: &Matrix) -> (Matrix, Matrix, Matrix, Matrix, Matrix) {
        let (t_len, h) = d_out.shape();
        let w_hh = self.value(tape.w_hh);
        let mut d_gi = Matrix::zeros(t_len, 3 * h);
        let mut d_gh = Matrix::zeros(t_len, 3 * h);
        let mut carry = vec![0.0; h];
        for step in (0..t_len).rev() {
            let t = if tape.reverse { t_len - 1 - step } else { step };
            let (r, z, n) = (tape.r.row(t), tape.z.row(t), tape.n.row(t));
            let (gh_n, h_prev) = (tape.gh_n.row(t), tape.h_prev.row(t));
            let mut dh_prev = vec![0.0; h];
            {
                let gi_row = d_gi.row_mut(t);
                for j in 0..h {
                    let dh = d_out[(t, j)] + carry[j];
                    let dn = dh * (1.0 - z[j]);
                    let dz = dh * (h_prev[j] - n[j]);
                    dh_prev[j] = dh * z[j];
                    let dn_pre = dn * (1.0 - n[j] * n[j]);
                    let dz_pre = dz * z[j] * (1.0 - z[j]);
                    let dr_pre = dn_pre * gh_n[j] * r[j] * (1.0 - r[j]);
                    gi_row[j] = dr_pre;
                    gi_row[h + j] = dz_pre;
                    gi_row[2 * h + j] = dn_pre;
                }
            }
            let gh_row = d_gh.row_mut(t);
            for j in 0..h {
                gh_row[j] = d_gi[(t, j)];
                gh_row[h + j] = d_gi[(t, h + j)];
                gh_row[2 * h + j] = d_gi[(t, 2 * h + j)] * r[j];
            }
            // dh_prev += dgh · W_hhᵀ
            let gh_row = d_gh.row(t);
            for (k, dp) in dh_prev.iter_mut().enumerate() {
                *dp += crate::matrix::dot(gh_row, w_hh.row(k));
            }
            carry = dh_prev;
        }
        let x = self.value(tape.x);
        let w_ih = self.value(tape.w_ih);
        let gx = d_gi.matmul_nt(w_ih);
        let gw_ih = x.matmul_tn(&d_gi);
        let gw_hh = tape.h_prev.matmul_tn(&d_gh);
        (gx, gw_ih, gw_hh, col_sums(&d_gi), col_sums(&d_gh))
    }
}
