//! Analytic PPO-loss gradients against central finite differences on a
//! shrunken double-precision network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trackpilot_core::policy::dist::log_softmax;
use trackpilot_core::policy::{loss_gradients, loss_value, LossHyper, NetConfig, PolicyNet, Sample};

pub const H: f64 = 1e-4;
pub const BATCHES: u64 = 20;
pub const BATCH: usize = 8;

struct Batch {
    obs: Vec<Vec<f64>>,
    actions: Vec<usize>,
    old: Vec<f64>,
    adv: Vec<f64>,
    ret: Vec<f64>,
}

impl Batch {
    fn samples(&self) -> Vec<Sample<'_, f64>> {
        (0..self.obs.len())
            .map(|i| Sample {
                obs: &self.obs[i],
                action: self.actions[i],
                old_log_prob: self.old[i],
                advantage: self.adv[i],
                ret: self.ret[i],
            })
            .collect()
    }
}

fn random_batch(net: &PolicyNet<f64>, rng: &mut ChaCha8Rng) -> Batch {
    let n_in = net.config().input_len();
    let obs: Vec<Vec<f64>> = (0..BATCH)
        .map(|_| (0..n_in).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let actions: Vec<usize> = (0..BATCH).map(|_| rng.random_range(0..5)).collect();
    // old log-probs near the current ones so both clip branches occur
    let old = obs
        .iter()
        .zip(&actions)
        .map(|(o, &a)| {
            let (l, _) = net.forward(o).unwrap();
            log_softmax(&l)[a] + rng.random_range(-0.4..0.4)
        })
        .collect();
    Batch {
        obs,
        actions,
        old,
        adv: (0..BATCH).map(|_| rng.random_range(-2.0..2.0)).collect(),
        ret: (0..BATCH).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}

/// Which rectifiers are off and which clip branch is active, per sample.
/// The loss is smooth in a neighbourhood where this pattern is constant.
fn regime(net: &PolicyNet<f64>, batch: &Batch, hyper: &LossHyper) -> Vec<bool> {
    let mut out = Vec::new();
    for s in batch.samples() {
        let a = net.activations(s.obs).unwrap();
        for v in a.conv1.iter().chain(&a.conv2).chain(&a.dense) {
            out.push(*v == 0.0);
        }
        let ratio = (log_softmax(&a.logits)[s.action] - s.old_log_prob).exp();
        let clipped = ratio.clamp(1.0 - hyper.clip, 1.0 + hyper.clip);
        out.push(ratio * s.advantage <= clipped * s.advantage);
        out.push((ratio - 1.0).abs() > hyper.clip);
    }
    out
}

/// Central-difference oracle, independent of the backward pass. `None`
/// when some perturbation crosses a kink, where the derivative the
/// difference quotient estimates does not exist.
fn numeric_gradient(net: &PolicyNet<f64>, batch: &Batch, hyper: &LossHyper) -> Option<Vec<f64>> {
    let base = regime(net, batch, hyper);
    let mut probe = net.clone();
    (0..net.param_count())
        .map(|i| {
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + H;
            let up = loss_value(&probe, &batch.samples(), hyper).unwrap().loss;
            let smooth_up = regime(&probe, batch, hyper) == base;
            probe.params_mut()[i] = orig - H;
            let down = loss_value(&probe, &batch.samples(), hyper).unwrap().loss;
            let smooth_down = regime(&probe, batch, hyper) == base;
            probe.params_mut()[i] = orig;
            (smooth_up && smooth_down).then(|| (up - down) / (2.0 * H))
        })
        .collect()
}

pub struct GradientCheck {
    pub worst: f64,
    pub checked: u64,
    pub rejected: u64,
}

/// Compares gradients on `BATCHES` smooth minibatches. Draws whose finite
/// differences straddle a kink are skipped and counted.
pub fn run_gradient_check() -> GradientCheck {
    let hyper = LossHyper::default();
    let mut worst = 0.0f64;
    let mut checked = 0;
    let mut rejected = 0;
    for b in 0.. {
        if checked == BATCHES {
            break;
        }
        let net = PolicyNet::<f64>::new(NetConfig::shrunken(), 100 + b).unwrap();
        // perturb the tiny policy head so the distribution is not uniform
        let mut net = net;
        let mut rng = ChaCha8Rng::seed_from_u64(b);
        for p in net.params_mut() {
            *p += rng.random_range(-0.3..0.3);
        }
        let batch = random_batch(&net, &mut rng);
        let (analytic, _) = loss_gradients(&net, &batch.samples(), &hyper).unwrap();
        let Some(numeric) = numeric_gradient(&net, &batch, &hyper) else {
            rejected += 1;
            continue;
        };
        checked += 1;
        for (a, n) in analytic.iter().zip(&numeric) {
            let rel = (a - n).abs() / (a.abs() + n.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    GradientCheck {
        worst,
        checked,
        rejected,
    }
}
