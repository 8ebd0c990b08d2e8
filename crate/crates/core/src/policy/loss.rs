//! Clipped-surrogate PPO loss and its analytic gradient.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dist::log_softmax;
use super::net::{NetError, PolicyNet, Scalar};
use crate::sim::ACTION_COUNT;

/// Loss coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LossHyper {
    pub clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

impl Default for LossHyper {
    fn default() -> Self {
        LossHyper {
            clip: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.01,
        }
    }
}

/// One training sample. `obs` is a flat network input.
#[derive(Clone, Copy, Debug)]
pub struct Sample<'a, T> {
    pub obs: &'a [T],
    pub action: usize,
    pub old_log_prob: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LossStats {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("loss or gradient is not finite")]
    NonFiniteLoss,
    #[error("empty minibatch")]
    EmptyBatch,
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Evaluates the loss over `batch` only (no gradients).
pub fn loss_value<T: Scalar>(
    net: &PolicyNet<T>,
    batch: &[Sample<'_, T>],
    hyper: &LossHyper,
) -> Result<LossStats, LossError> {
    run(net, batch, hyper, None)
}

/// Total loss `policy + value_coef * mse - entropy_coef * entropy`, averaged
/// over the minibatch, together with its gradient w.r.t. every parameter.
pub fn loss_gradients<T: Scalar>(
    net: &PolicyNet<T>,
    batch: &[Sample<'_, T>],
    hyper: &LossHyper,
) -> Result<(Vec<T>, LossStats), LossError> {
    let mut grads = vec![T::zero(); net.param_count()];
    let stats = run(net, batch, hyper, Some(&mut grads))?;
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(LossError::NonFiniteLoss);
    }
    Ok((grads, stats))
}

fn run<T: Scalar>(
    net: &PolicyNet<T>,
    batch: &[Sample<'_, T>],
    hyper: &LossHyper,
    mut grads: Option<&mut Vec<T>>,
) -> Result<LossStats, LossError> {
    if batch.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    let n = batch.len() as f64;
    let mut stats = LossStats::default();
    for s in batch {
        let acts = net.activations(s.obs)?;
        let logits = acts.logits.map(|l| l.f64());
        let value = acts.value.f64();
        let logp = log_softmax(&logits);
        let p: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        let entropy: f64 = -p.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();

        let log_ratio = logp[s.action] - s.old_log_prob;
        let ratio = log_ratio.exp();
        let clipped = ratio.clamp(1.0 - hyper.clip, 1.0 + hyper.clip);
        let surr1 = ratio * s.advantage;
        let surr2 = clipped * s.advantage;
        let unclipped_active = surr1 <= surr2;
        let err = value - s.ret;

        stats.policy_loss -= surr1.min(surr2) / n;
        stats.value_loss += err * err / n;
        stats.entropy += entropy / n;
        stats.approx_kl += ((ratio - 1.0) - log_ratio) / n;
        if (ratio - 1.0).abs() > hyper.clip {
            stats.clip_fraction += 1.0 / n;
        }

        if let Some(g) = grads.as_deref_mut() {
            let d_logp_a = if unclipped_active { -surr1 / n } else { 0.0 };
            let mut dlogits = [T::zero(); ACTION_COUNT];
            for (j, d) in dlogits.iter_mut().enumerate() {
                let onehot = if j == s.action { 1.0 } else { 0.0 };
                let d_policy = d_logp_a * (onehot - p[j]);
                let d_entropy = -p[j] * (logp[j] + entropy);
                *d = T::of(d_policy - hyper.entropy_coef * d_entropy / n);
            }
            let dvalue = T::of(hyper.value_coef * 2.0 * err / n);
            net.backward(s.obs, &acts, &dlogits, dvalue, g);
        }
    }
    stats.loss = stats.policy_loss + hyper.value_coef * stats.value_loss - hyper.entropy_coef * stats.entropy;
    let all = [
        stats.loss,
        stats.policy_loss,
        stats.value_loss,
        stats.entropy,
    ];
    if all.iter().any(|v| !v.is_finite()) {
        return Err(LossError::NonFiniteLoss);
    }
    Ok(stats)
}
