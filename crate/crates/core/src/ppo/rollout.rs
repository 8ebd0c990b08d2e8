//! Rollout collection from a single environment.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::policy::dist::sample_action;
use crate::policy::{NetError, PolicyNet};
use crate::sim::{Action, Environment, Episode};

/// Parallel per-step arrays for one rollout.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RolloutBuffer {
    /// Flat observations, `input_len` floats per step.
    pub obs: Vec<f32>,
    pub input_len: usize,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub values: Vec<f64>,
    pub log_probs: Vec<f64>,
    /// Value estimate of the state after the last step (0 when it ended an
    /// episode).
    pub bootstrap: f64,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn obs_at(&self, i: usize) -> &[f32] {
        &self.obs[i * self.input_len..(i + 1) * self.input_len]
    }
}

/// Runs episodes back to back across rollouts. An episode cut by the end of
/// a rollout continues in the next one.
pub struct Collector<'a> {
    env: Environment<'a>,
    rng: ChaCha8Rng,
    in_episode: bool,
    next_ordinal: u64,
}

impl<'a> Collector<'a> {
    /// `rng` draws the episode seeds.
    pub fn new(env: Environment<'a>, rng: ChaCha8Rng) -> Self {
        Collector {
            env,
            rng,
            in_episode: false,
            next_ordinal: 1,
        }
    }

    pub fn env(&self) -> &Environment<'a> {
        &self.env
    }

    /// Ordinal the next finished episode will carry.
    pub fn next_ordinal(&self) -> u64 {
        self.next_ordinal
    }

    /// Collects up to `steps` steps, stopping early once `max_episodes`
    /// episodes have finished during this call. Finished episodes are passed
    /// to `sink` in completion order with increasing ordinals as ids.
    /// `stop` is polled before every step; when it returns true the partial
    /// buffer is returned as is.
    pub fn collect(
        &mut self,
        net: &PolicyNet<f32>,
        steps: usize,
        max_episodes: Option<usize>,
        sink: &mut dyn FnMut(&Episode),
        stop: &dyn Fn() -> bool,
    ) -> Result<RolloutBuffer, NetError> {
        let input_len = net.config().input_len();
        let mut buf = RolloutBuffer {
            input_len,
            obs: Vec::with_capacity(steps * input_len),
            ..RolloutBuffer::default()
        };
        let mut finished = 0;
        while buf.len() < steps && max_episodes.is_none_or(|m| finished < m) {
            if stop() {
                break;
            }
            if !self.in_episode {
                let seed = self.rng.random::<u64>();
                self.env.reset(seed);
                self.in_episode = true;
            }
            let start = buf.obs.len();
            buf.obs.extend_from_slice(&self.env.observation().data);
            let (logits, value) = net.forward(&buf.obs[start..])?;
            let logits = logits.map(|l| l as f64);
            let (a, logp) = sample_action(&logits, self.env.rng());
            let out = self.env.step(Action::from_index(a).expect("sampled index is an action"));
            buf.actions.push(a);
            buf.rewards.push(out.reward);
            buf.dones.push(out.done.is_some());
            buf.values.push(value as f64);
            buf.log_probs.push(logp);
            if out.done.is_some() {
                let episode = self.env.take_episode(self.next_ordinal);
                self.next_ordinal += 1;
                self.in_episode = false;
                finished += 1;
                sink(&episode);
            }
        }
        buf.bootstrap = if self.in_episode && !buf.is_empty() {
            net.forward(&self.env.observation().data)?.1 as f64
        } else {
            0.0
        };
        Ok(buf)
    }
}
