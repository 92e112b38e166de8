use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::nncore::params::ParameterStore;

/// Adam optimizer state: first/second moment accumulators keyed by parameter
/// name, plus hyperparameters. Gradients are clipped by global norm before
/// each step when `clip_norm` is set (the default, at 1.0).
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: Option<f64>,
    pub t: u64,
    m: IndexMap<String, Vec<f64>>,
    v: IndexMap<String, Vec<f64>>,
}

impl AdamState {
    pub fn new(store: &ParameterStore, lr: f64) -> Result<Self> {
        Self::with_hyper(store, lr, 0.9, 0.999, 1e-8, Some(1.0))
    }

    pub fn with_hyper(
        store: &ParameterStore,
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        clip_norm: Option<f64>,
    ) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        if !(0.0 < beta1 && beta1 < 1.0) || !(0.0 < beta2 && beta2 < 1.0) {
            return Err(Error::Config(format!(
                "adam betas must lie in (0, 1), got {beta1} and {beta2}"
            )));
        }
        if !(eps > 0.0) {
            return Err(Error::Config(format!("adam eps must be positive, got {eps}")));
        }
        if let Some(c) = clip_norm {
            if !(c > 0.0) {
                return Err(Error::Config(format!("clip norm must be positive, got {c}")));
            }
        }
        let mut m = IndexMap::new();
        let mut v = IndexMap::new();
        for (name, e) in store.entries() {
            m.insert(name.to_string(), vec![0.0; e.values.len()]);
            v.insert(name.to_string(), vec![0.0; e.values.len()]);
        }
        Ok(AdamState {
            lr,
            beta1,
            beta2,
            eps,
            clip_norm,
            t: 0,
            m,
            v,
        })
    }
}

/// One Adam update over every parameter in the store, with bias correction.
/// Consumes the accumulated gradients and zeroes them afterwards. Fails on
/// non-finite gradients or if an update drives a value non-finite, naming
/// the offending parameter.
pub fn adam_step(store: &mut ParameterStore, state: &mut AdamState) -> Result<()> {
    if let Some(name) = store.find_nonfinite_grad() {
        return Err(Error::Training(format!(
            "non-finite gradient for parameter \"{name}\""
        )));
    }

    let scale = match state.clip_norm {
        Some(clip) => {
            let norm = store.grad_global_norm();
            if norm > clip {
                clip / norm
            } else {
                1.0
            }
        }
        None => 1.0,
    };

    state.t += 1;
    let t = state.t as i32;
    let bias1 = 1.0 - state.beta1.powi(t);
    let bias2 = 1.0 - state.beta2.powi(t);

    let mut bad: Option<String> = None;
    for (name, e) in store.iter_entries_mut() {
        let m = state
            .m
            .get_mut(name)
            .ok_or_else(|| Error::State(format!("optimizer has no slot for \"{name}\"")))?;
        let v = state
            .v
            .get_mut(name)
            .ok_or_else(|| Error::State(format!("optimizer has no slot for \"{name}\"")))?;
        for i in 0..e.values.len() {
            let g = e.grads[i] * scale;
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            e.values[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
        if bad.is_none() && e.values.iter().any(|x| !x.is_finite()) {
            bad = Some(name.to_string());
        }
    }
    if let Some(name) = bad {
        return Err(Error::Training(format!(
            "non-finite value for parameter \"{name}\" after update"
        )));
    }
    store.zero_grads();
    store.step_count += 1;
    Ok(())
}
