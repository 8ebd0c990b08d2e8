//! Adam with global gradient-norm clipping.

use serde::{Deserialize, Serialize};

use super::net::{PolicyNet, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Gradients whose global L2 norm exceeds this are rescaled to it.
    pub max_grad_norm: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 2.5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_grad_norm: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        AdamState {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step: 0,
        }
    }
}

pub fn global_norm<T: Scalar>(grads: &[T]) -> f64 {
    grads.iter().map(|g| g.f64() * g.f64()).sum::<f64>().sqrt()
}

/// Factor applied to gradients with the given norm.
pub fn clip_scale(norm: f64, max_norm: f64) -> f64 {
    if norm > max_norm && norm > 0.0 {
        max_norm / norm
    } else {
        1.0
    }
}

/// One bias-corrected Adam step on a raw parameter slice. Returns the
/// pre-clip gradient norm.
pub fn adam_step<T: Scalar>(params: &mut [T], grads: &[T], state: &mut AdamState, cfg: &AdamConfig) -> f64 {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    let norm = global_norm(grads);
    let scale = clip_scale(norm, cfg.max_grad_norm);
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i].f64() * scale;
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        let delta = cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        params[i] = T::of(params[i].f64() - delta);
    }
    norm
}

pub fn adam_update<T: Scalar>(net: &mut PolicyNet<T>, grads: &[T], state: &mut AdamState, cfg: &AdamConfig) -> f64 {
    adam_step(net.params_mut(), grads, state, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::NetConfig;

    #[test]
    fn zero_grads_leave_weights() {
        let mut net = PolicyNet::<f32>::new(NetConfig::shrunken(), 4).unwrap();
        let before = net.clone();
        let mut st = AdamState::new(net.param_count());
        let zeros = vec![0.0f32; net.param_count()];
        adam_update(&mut net, &zeros, &mut st, &AdamConfig::default());
        assert_eq!(net, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn clip_factor() {
        assert!((clip_scale(10.0, 0.5) - 0.05).abs() < 1e-15);
        assert_eq!(clip_scale(0.3, 0.5), 1.0);
        assert_eq!(clip_scale(0.0, 0.5), 1.0);
    }
}
