use rand::Rng;

use crate::diffcore::nn::{BatchNorm, BiGru, Ctx, Linear};
use crate::diffcore::{DiffError, Graph, ParamStore, Var};

/// BiGRU followed by a two-layer MLP head:
/// `BiGRU → Linear → ReLU → dropout → BatchNorm → Linear`.
/// Every GRU layer is followed by dropout as well.
#[derive(Debug, Clone)]
pub struct Trunk {
    pub gru: BiGru,
    pub hidden: Linear,
    pub norm: BatchNorm,
    pub out: Linear,
    pub dropout: f64,
}

impl Trunk {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        gru_hidden: usize,
        gru_layers: usize,
        mlp_hidden: usize,
        out_dim: usize,
        dropout: f64,
        rng: &mut R,
    ) -> Self {
        let gru = BiGru::new(store, &format!("{name}.gru"), in_dim, gru_hidden, gru_layers, dropout, rng);
        let hidden = Linear::new(store, &format!("{name}.mlp.0"), gru.out_dim(), mlp_hidden, rng);
        let norm = BatchNorm::new(store, &format!("{name}.mlp.norm"), mlp_hidden);
        let out = Linear::new(store, &format!("{name}.mlp.1"), mlp_hidden, out_dim, rng);
        Self { gru, hidden, norm, out, dropout }
    }

    pub fn encode(&self, g: &mut Graph, store: &ParamStore, x: Var, ctx: &mut Ctx) -> Result<Var, DiffError> {
        self.gru.forward(g, store, x, ctx)
    }

    pub fn head(&self, g: &mut Graph, store: &ParamStore, h: Var, ctx: &mut Ctx) -> Result<Var, DiffError> {
        let h = self.hidden.forward(g, store, h)?;
        let h = g.relu(h);
        let h = g.dropout(h, self.dropout, ctx.training, &mut ctx.rng)?;
        let h = self.norm.forward(g, store, h, ctx)?;
        self.out.forward(g, store, h)
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var, ctx: &mut Ctx) -> Result<Var, DiffError> {
        let h = self.encode(g, store, x, ctx)?;
        self.head(g, store, h, ctx)
    }
}

/// Sets every value in `store` to zero (buffers included).
pub fn zero_all(store: &mut ParamStore) {
    for p in store.iter_mut() {
        p.value.as_mut_slice().fill(0.0);
    }
}
