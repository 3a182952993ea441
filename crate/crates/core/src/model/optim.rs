//! AdamW: Adam moments with bias correction and decoupled weight decay.

use serde::{Deserialize, Serialize};

use super::params::{ModelConfig, Weights};
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub m: Weights,
    pub v: Weights,
    pub step: u64,
    pub hyper: AdamWConfig,
}

impl OptimState {
    pub fn new(cfg: &ModelConfig, hyper: AdamWConfig) -> Self {
        Self {
            m: Weights::zeros(cfg),
            v: Weights::zeros(cfg),
            step: 0,
            hyper,
        }
    }
}

/// One update applied in place to `params`.
pub fn adamw_step(
    params: &mut Weights,
    grads: &Weights,
    state: &mut OptimState,
) -> Result<(), ModelError> {
    if !params.same_shape(grads) || !params.same_shape(&state.m) || !params.same_shape(&state.v) {
        return Err(ModelError::ShapeMismatch(
            "parameters, gradients and optimizer moments differ in shape".into(),
        ));
    }
    let h = state.hyper;
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - h.beta1.powi(t);
    let bc2 = 1.0 - h.beta2.powi(t);
    let decay = 1.0 - h.lr * h.weight_decay;
    let tensors = params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.m.tensors_mut())
        .zip(state.v.tensors_mut());
    for (((p, g), m), v) in tensors {
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * gi;
            v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] *= decay;
            p[i] -= h.lr * m_hat / (v_hat.sqrt() + h.eps);
        }
    }
    Ok(())
}
