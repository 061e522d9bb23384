use rand::Rng;

use super::config::DiscriminatorConfig;
use super::ModelError;
use crate::diffcore::nn::{Conv1d, Linear};
use crate::diffcore::{DiffError, Graph, ParamStore, Var};
use crate::matrix::Matrix;

/// Strided 1-D CNN scoring sequences for realism: leaky-ReLU(0.2) after
/// every convolution, then a per-frame linear projection to one score.
#[derive(Debug, Clone)]
pub struct Discriminator {
    pub config: DiscriminatorConfig,
    pub in_channels: usize,
    pub store: ParamStore,
    pub convs: Vec<Conv1d>,
    pub proj: Linear,
}

#[derive(Debug, Clone)]
pub struct DiscOut {
    /// `T_out × 1`
    pub scores: Var,
    /// Activations after each convolution.
    pub features: Vec<Var>,
}

impl Discriminator {
    pub fn new<R: Rng + ?Sized>(config: DiscriminatorConfig, in_channels: usize, rng: &mut R) -> Result<Self, ModelError> {
        config.validate()?;
        let mut store = ParamStore::new();
        let mut convs = Vec::new();
        let mut c_in = in_channels;
        for (i, ((&c, &k), &s)) in config.channels.iter().zip(&config.kernels).zip(&config.strides).enumerate() {
            convs.push(Conv1d::new(&mut store, &format!("disc.conv{i}"), c_in, c, k, s, rng));
            c_in = c;
        }
        let proj = Linear::new(&mut store, "disc.proj", c_in, 1, rng);
        Ok(Self { config, in_channels, store, convs, proj })
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<DiscOut, DiffError> {
        self.forward_with(g, &self.store, x)
    }

    pub fn forward_with(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<DiscOut, DiffError> {
        let (len, c) = g.shape(x);
        if c != self.in_channels {
            return Err(DiffError::ShapeMismatch(format!("discriminator input has {c} channels, expects {}", self.in_channels)));
        }
        let rf = self.config.receptive_field();
        if len < rf {
            return Err(DiffError::TooShort { len, needed: rf });
        }
        let mut h = x;
        let mut features = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            h = conv.forward(g, store, h)?;
            h = g.leaky_relu(h, 0.2);
            features.push(h);
        }
        let scores = self.proj.forward(g, store, h)?;
        Ok(DiscOut { scores, features })
    }

    pub fn score(&self, seq: &Matrix) -> Result<Matrix, DiffError> {
        let mut g = Graph::new();
        let x = g.input(seq.clone());
        let out = self.forward(&mut g, x)?;
        Ok(g.value(out.scores).clone())
    }
}
