//! Central finite-difference gradient checks.
//!
//! Error per tensor is `‖a − n‖ / max(‖a‖, ‖n‖, GRAD_FLOOR)`; the functions
//! return the worst tensor. Below the floor a tensor's gradient is within
//! differencing noise of zero (dead ReLU units, for example) and is compared
//! absolutely.

use super::graph::{Graph, Var};
use super::params::ParamStore;
use crate::matrix::Matrix;

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_FLOOR: f64 = 1e-6;

fn relative_error(analytic: &Matrix, numeric: &Matrix) -> f64 {
    let diff = analytic.zip_map(numeric, |a, b| a - b).squared_norm().sqrt();
    let scale = analytic.squared_norm().sqrt().max(numeric.squared_norm().sqrt()).max(GRAD_FLOOR);
    diff / scale
}

/// Checks gradients with respect to graph inputs. `f` must build a scalar.
pub fn check_inputs<F>(inputs: &[Matrix], f: F) -> f64
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let eval = |ms: &[Matrix]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = ms.iter().map(|m| g.input(m.clone())).collect();
        let out = f(&mut g, &vars);
        g.value(out)[(0, 0)]
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|m| g.input(m.clone())).collect();
    let out = f(&mut g, &vars);
    let grads = g.backward(out).expect("backward");
    let mut worst: f64 = 0.0;
    let mut work = inputs.to_vec();
    for (k, v) in vars.iter().enumerate() {
        let (r, c) = inputs[k].shape();
        let analytic = grads.wrt(*v).cloned().unwrap_or_else(|| Matrix::zeros(r, c));
        let mut numeric = Matrix::zeros(r, c);
        for i in 0..r * c {
            let orig = work[k].as_slice()[i];
            work[k].as_mut_slice()[i] = orig + FD_STEP;
            let plus = eval(&work);
            work[k].as_mut_slice()[i] = orig - FD_STEP;
            let minus = eval(&work);
            work[k].as_mut_slice()[i] = orig;
            numeric.as_mut_slice()[i] = (plus - minus) / (2.0 * FD_STEP);
        }
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    worst
}

/// Checks gradients with respect to every trainable parameter of `store`.
pub fn check_params<F>(store: &ParamStore, f: F) -> f64
where
    F: Fn(&mut Graph, &ParamStore) -> Var,
{
    let mut g = Graph::new();
    let out = f(&mut g, store);
    let grads = g.backward(out).expect("backward");
    let analytic: std::collections::BTreeMap<_, _> = grads.for_store(store.uid()).collect();

    let mut work = store.clone();
    let eval = |s: &ParamStore| {
        let mut g = Graph::new();
        let out = f(&mut g, s);
        g.value(out)[(0, 0)]
    };
    let mut worst: f64 = 0.0;
    let ids: Vec<_> = store.iter().filter(|(_, p)| p.trainable).map(|(id, _)| id).collect();
    for id in ids {
        let n = store.get(id).value.len();
        let (r, c) = store.get(id).value.shape();
        let mut numeric = Matrix::zeros(r, c);
        for i in 0..n {
            let orig = work.get(id).value.as_slice()[i];
            work.get_mut(id).value.as_mut_slice()[i] = orig + FD_STEP;
            let plus = eval(&work);
            work.get_mut(id).value.as_mut_slice()[i] = orig - FD_STEP;
            let minus = eval(&work);
            work.get_mut(id).value.as_mut_slice()[i] = orig;
            numeric.as_mut_slice()[i] = (plus - minus) / (2.0 * FD_STEP);
        }
        let zero = Matrix::zeros(r, c);
        worst = worst.max(relative_error(analytic.get(&id).copied().unwrap_or(&zero), &numeric));
    }
    worst
}
