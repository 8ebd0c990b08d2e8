//! Brute-force GAE oracle: sums discounted deltas directly instead of
//! running the reverse recursion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trackpilot_core::ppo::compute_gae;

pub const GAMMA: f64 = 0.99;
pub const LAMBDA: f64 = 0.95;

pub struct Instance {
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub dones: Vec<bool>,
    pub bootstrap: f64,
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.random_range(1..=20);
    Instance {
        rewards: (0..n).map(|_| rng.random_range(-100.0..100.0)).collect(),
        values: (0..n).map(|_| rng.random_range(-50.0..50.0)).collect(),
        dones: (0..n).map(|_| rng.random_bool(0.2)).collect(),
        bootstrap: rng.random_range(-50.0..50.0),
    }
}

/// `A_t = sum_l (gamma lambda)^l delta_{t+l}`, truncated after the first
/// terminal step at or after `t`.
pub fn brute_force(inst: &Instance, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = inst.rewards.len();
    let value_after = |k: usize| if k + 1 < n { inst.values[k + 1] } else { inst.bootstrap };
    let delta = |k: usize| {
        let next = if inst.dones[k] { 0.0 } else { value_after(k) };
        inst.rewards[k] + gamma * next - inst.values[k]
    };
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            for k in t..n {
                sum += (gamma * lambda).powi((k - t) as i32) * delta(k);
                if inst.dones[k] {
                    break;
                }
            }
            sum
        })
        .collect()
}

/// Largest absolute difference between recursion and oracle over
/// `instances` random cases, including returns = advantages + values.
pub fn max_gae_error(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let inst = random_instance(&mut rng);
        let (adv, ret) = compute_gae(&inst.rewards, &inst.values, &inst.dones, inst.bootstrap, GAMMA, LAMBDA);
        let oracle = brute_force(&inst, GAMMA, LAMBDA);
        for t in 0..oracle.len() {
            worst = worst.max((adv[t] - oracle[t]).abs());
            worst = worst.max((ret[t] - (oracle[t] + inst.values[t])).abs());
        }
    }
    worst
}
