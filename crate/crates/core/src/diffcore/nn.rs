//! Layers built on [`Graph`] primitives. Each layer registers its parameters
//! in a [`ParamStore`] at construction and only keeps their ids.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::graph::{Graph, StatUpdate, Var};
use super::params::{Init, ParamId, ParamStore};
use super::DiffError;
use crate::matrix::Matrix;

/// Forward-pass context: train/eval switch plus the dropout RNG.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub training: bool,
    pub rng: ChaCha8Rng,
}

impl Ctx {
    pub fn train(rng: ChaCha8Rng) -> Self {
        Self { training: true, rng }
    }

    /// Eval mode; the RNG is never consulted.
    pub fn eval() -> Self {
        Self { training: false, rng: ChaCha8Rng::seed_from_u64(0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    LeakyRelu,
    Identity,
}

impl Activation {
    pub fn apply(self, g: &mut Graph, x: Var) -> Var {
        match self {
            Activation::Relu => g.relu(x),
            Activation::Tanh => g.tanh(x),
            Activation::LeakyRelu => g.leaky_relu(x, 0.2),
            Activation::Identity => x,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let w = store.add(&format!("{name}.weight"), in_dim, out_dim, Init::FanIn(in_dim), rng);
        let b = store.add(&format!("{name}.bias"), 1, out_dim, Init::FanIn(in_dim), rng);
        Self { w, b, in_dim, out_dim }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var, DiffError> {
        let w = g.param(store, self.w);
        let b = g.param(store, self.b);
        let y = g.matmul(x, w)?;
        g.add_bias(y, b)
    }
}

/// Stack of linear layers with an activation between (not after) them.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
    pub activation: Activation,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, sizes: &[usize], activation: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Self { layers, activation }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, mut x: Var) -> Result<Var, DiffError> {
        for (i, l) in self.layers.iter().enumerate() {
            x = l.forward(g, store, x)?;
            if i + 1 < self.layers.len() {
                x = self.activation.apply(g, x);
            }
        }
        Ok(x)
    }
}

#[derive(Debug, Clone)]
pub struct GruLayer {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b_ih: ParamId,
    pub b_hh: ParamId,
    pub hidden: usize,
}

impl GruLayer {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, name: &str, in_dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            w_ih: store.add(&format!("{name}.w_ih"), in_dim, 3 * hidden, Init::FanIn(hidden), rng),
            w_hh: store.add(&format!("{name}.w_hh"), hidden, 3 * hidden, Init::FanIn(hidden), rng),
            b_ih: store.add(&format!("{name}.b_ih"), 1, 3 * hidden, Init::FanIn(hidden), rng),
            b_hh: store.add(&format!("{name}.b_hh"), 1, 3 * hidden, Init::FanIn(hidden), rng),
            hidden,
        }
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var, reverse: bool) -> Result<Var, DiffError> {
        let w_ih = g.param(store, self.w_ih);
        let w_hh = g.param(store, self.w_hh);
        let b_ih = g.param(store, self.b_ih);
        let b_hh = g.param(store, self.b_hh);
        g.gru(x, w_ih, w_hh, b_ih, b_hh, reverse)
    }
}

/// Multi-layer bidirectional GRU; each layer outputs forward ∥ backward
/// states (width `2·hidden`) and is followed by dropout.
#[derive(Debug, Clone)]
pub struct BiGru {
    pub layers: Vec<(GruLayer, GruLayer)>,
    pub dropout: f64,
}

impl BiGru {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        hidden: usize,
        n_layers: usize,
        dropout: f64,
        rng: &mut R,
    ) -> Self {
        let layers = (0..n_layers)
            .map(|l| {
                let d = if l == 0 { in_dim } else { 2 * hidden };
                (
                    GruLayer::new(store, &format!("{name}.{l}.fwd"), d, hidden, rng),
                    GruLayer::new(store, &format!("{name}.{l}.bwd"), d, hidden, rng),
                )
            })
            .collect();
        Self { layers, dropout }
    }

    pub fn out_dim(&self) -> usize {
        2 * self.layers.last().map_or(0, |l| l.0.hidden)
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, mut x: Var, ctx: &mut Ctx) -> Result<Var, DiffError> {
        for (fwd, bwd) in &self.layers {
            let f = fwd.forward(g, store, x, false)?;
            let b = bwd.forward(g, store, x, true)?;
            x = g.concat_cols(&[f, b])?;
            x = g.dropout(x, self.dropout, ctx.training, &mut ctx.rng)?;
        }
        Ok(x)
    }
}

#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Self {
        Self {
            gamma: store.add_value(&format!("{name}.gamma"), Matrix::filled(1, dim, 1.0)),
            beta: store.add_value(&format!("{name}.beta"), Matrix::zeros(1, dim)),
            running_mean: store.add_buffer(&format!("{name}.running_mean"), Matrix::zeros(1, dim)),
            running_var: store.add_buffer(&format!("{name}.running_var"), Matrix::filled(1, dim, 1.0)),
            momentum: 0.1,
            eps: 1e-5,
        }
    }

    /// In training mode, queues a running-statistics update on the graph
    /// (exponential average with unbiased batch variance).
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var, ctx: &Ctx) -> Result<Var, DiffError> {
        let gamma = g.param(store, self.gamma);
        let beta = g.param(store, self.beta);
        let rm = &store.get(self.running_mean).value;
        let rv = &store.get(self.running_var).value;
        let (y, stats) = g.batch_norm(x, gamma, beta, rm, rv, ctx.training, self.eps)?;
        if let Some((mean, var)) = stats {
            let n = g.shape(x).0 as f64;
            let unbiased = if n > 1.0 { n / (n - 1.0) } else { 1.0 };
            let m = self.momentum;
            let new_mean = rm.zip_map(&mean, |r, b| (1.0 - m) * r + m * b);
            let new_var = rv.zip_map(&var, |r, b| (1.0 - m) * r + m * b * unbiased);
            g.push_stat_update(StatUpdate { store: store.uid(), id: self.running_mean, value: new_mean });
            g.push_stat_update(StatUpdate { store: store.uid(), id: self.running_var, value: new_var });
        }
        Ok(y)
    }
}

/// Strided 1-D convolution over time (no padding): `T × C_in → T_out × C_out`.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub w: ParamId,
    pub b: ParamId,
    pub kernel: usize,
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl Conv1d {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        rng: &mut R,
    ) -> Self {
        let fan_in = kernel * in_channels;
        Self {
            w: store.add(&format!("{name}.weight"), fan_in, out_channels, Init::FanIn(fan_in), rng),
            b: store.add(&format!("{name}.bias"), 1, out_channels, Init::FanIn(fan_in), rng),
            kernel,
            stride,
            in_channels,
            out_channels,
        }
    }

    pub fn output_len(&self, len: usize) -> Option<usize> {
        (len >= self.kernel).then(|| (len - self.kernel) / self.stride + 1)
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var, DiffError> {
        let cols = g.im2col(x, self.kernel, self.stride)?;
        let w = g.param(store, self.w);
        let b = g.param(store, self.b);
        let y = g.matmul(cols, w)?;
        g.add_bias(y, b)
    }
}

/// Least-squares GAN objectives:
/// `d_loss = mean((d_real − 1)²) + mean(d_fake²)`, `g_loss = mean((d_fake − 1)²)`.
pub fn lsgan_losses(g: &mut Graph, d_real: Var, d_fake: Var) -> Result<(Var, Var), DiffError> {
    let real = g.sq_err(d_real, 1.0)?;
    let fake = g.sq_err(d_fake, 0.0)?;
    let d_loss = g.add(real, fake)?;
    let g_loss = g.sq_err(d_fake, 1.0)?;
    Ok((d_loss, g_loss))
}
