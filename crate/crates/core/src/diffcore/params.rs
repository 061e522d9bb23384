use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use super::graph::{Gradients, StatUpdate};
use super::DiffError;
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

/// A named tensor with its gradient buffer and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
    pub m: Matrix,
    pub v: Matrix,
    pub step: u64,
    pub trainable: bool,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Matrix, trainable: bool) -> Self {
        let (r, c) = value.shape();
        Self {
            name: name.into(),
            value,
            grad: Matrix::zeros(r, c),
            m: Matrix::zeros(r, c),
            v: Matrix::zeros(r, c),
            step: 0,
            trainable,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Init {
    Zeros,
    Ones,
    /// uniform(−1/√fan_in, +1/√fan_in)
    FanIn(usize),
}

static NEXT_UID: AtomicU64 = AtomicU64::new(1);

/// Owns every parameter of one model.
#[derive(Debug)]
pub struct ParamStore {
    uid: u64,
    params: Vec<Parameter>,
    names: BTreeMap<String, ParamId>,
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl Clone for ParamStore {
    /// Clones get a fresh uid so graphs never confuse the two.
    fn clone(&self) -> Self {
        Self { uid: NEXT_UID.fetch_add(1, Ordering::Relaxed), params: self.params.clone(), names: self.names.clone() }
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self { uid: NEXT_UID.fetch_add(1, Ordering::Relaxed), params: Vec::new(), names: BTreeMap::new() }
    }

    pub fn uid(&self) -> u64 {
        self.uid
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Registers a parameter. Panics on duplicate names (a model bug).
    pub fn add<R: Rng + ?Sized>(&mut self, name: &str, rows: usize, cols: usize, init: Init, rng: &mut R) -> ParamId {
        let value = match init {
            Init::Zeros => Matrix::zeros(rows, cols),
            Init::Ones => Matrix::filled(rows, cols, 1.0),
            Init::FanIn(fan_in) => {
                let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
                Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-bound..=bound)).collect())
            }
        };
        self.insert(Parameter::new(name, value, true))
    }

    /// Registers a trainable parameter with an explicit initial value.
    pub fn add_value(&mut self, name: &str, value: Matrix) -> ParamId {
        self.insert(Parameter::new(name, value, true))
    }

    /// Registers a non-trainable buffer (e.g. running statistics).
    pub fn add_buffer(&mut self, name: &str, value: Matrix) -> ParamId {
        self.insert(Parameter::new(name, value, false))
    }

    fn insert(&mut self, p: Parameter) -> ParamId {
        assert!(!self.names.contains_key(&p.name), "duplicate parameter {}", p.name);
        let id = ParamId(self.params.len());
        self.names.insert(p.name.clone(), id);
        self.params.push(p);
        id
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn n_trainable_values(&self) -> usize {
        self.params.iter().filter(|p| p.trainable).map(|p| p.value.len()).sum()
    }

    /// Adds this store's share of `grads` into the gradient buffers.
    pub fn accumulate(&mut self, grads: &Gradients) -> Result<(), DiffError> {
        for (id, g) in grads.for_store(self.uid) {
            let p = &mut self.params[id.0];
            if !p.trainable {
                continue;
            }
            if !g.is_finite() {
                return Err(DiffError::NonFinite(format!("gradient of parameter {}", p.name)));
            }
            p.grad.add_assign(g);
        }
        Ok(())
    }

    pub fn apply_stat_updates(&mut self, updates: &[StatUpdate]) {
        for u in updates.iter().filter(|u| u.store == self.uid) {
            self.params[u.id.0].value = u.value.clone();
        }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.as_mut_slice().fill(0.0);
        }
    }

    pub fn scale_grads(&mut self, s: f64) {
        for p in &mut self.params {
            p.grad.scale_in_place(s);
        }
    }

    pub fn grad_squared_norm(&self) -> f64 {
        self.params.iter().filter(|p| p.trainable).map(|p| p.grad.squared_norm()).sum()
    }

    /// Copies values (not optimizer state) from a store with the same layout.
    pub fn copy_values_from(&mut self, other: &ParamStore) {
        assert_eq!(self.params.len(), other.params.len());
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            debug_assert_eq!(a.name, b.name);
            a.value = b.value.clone();
        }
    }

    pub fn check_finite(&self) -> Result<(), DiffError> {
        match self.params.iter().find(|p| !p.value.is_finite()) {
            Some(p) => Err(DiffError::NonFinite(format!("value of parameter {}", p.name))),
            None => Ok(()),
        }
    }
}

/// Rescales the gradients of all stores so their joint L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_grad_norm(stores: &mut [&mut ParamStore], max_norm: f64) -> f64 {
    let norm = stores.iter().map(|s| s.grad_squared_norm()).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for st in stores.iter_mut() {
            st.scale_grads(s);
        }
    }
    norm
}

/// Adam with bias correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for Adam {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl Adam {
    /// Applies one update to every trainable parameter and clears gradients.
    pub fn step(&self, store: &mut ParamStore) {
        for p in store.params.iter_mut().filter(|p| p.trainable) {
            p.step += 1;
            let bc1 = 1.0 - self.beta1.powi(p.step as i32);
            let bc2 = 1.0 - self.beta2.powi(p.step as i32);
            let (val, g, m, v) = (p.value.as_mut_slice(), p.grad.as_slice(), p.m.as_mut_slice(), p.v.as_mut_slice());
            for i in 0..val.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                val[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        store.zero_grad();
    }
}
