//! The PPO training loop.

use std::sync::atomic::{AtomicBool, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::gae::{compute_gae, normalize_advantages};
use super::rollout::{Collector, RolloutBuffer};
use crate::policy::{
    adam_update, loss_gradients, AdamConfig, AdamState, LossError, LossHyper, NetError, PolicyNet,
    Sample,
};
use crate::sim::{Environment, Episode, Outcome, SimError, SimParams};
use crate::track::Track;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct TrainHyper {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub rollout: usize,
    pub lr: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
    /// Multiplier applied to rewards before advantage and return targets are
    /// computed. Stored episodes keep the unscaled rewards.
    pub reward_scale: f64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            minibatch: 64,
            rollout: 1024,
            lr: 2.5e-4,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            normalize_advantages: true,
            reward_scale: 0.01,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidHyper(m));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad("gamma and lambda must be in (0, 1]".into());
        }
        if self.epochs == 0 || self.minibatch == 0 || self.rollout == 0 {
            return bad("epochs, minibatch and rollout must be positive".into());
        }
        if self.rollout % self.minibatch != 0 {
            return bad(format!(
                "rollout {} is not divisible by minibatch {}",
                self.rollout, self.minibatch
            ));
        }
        for (name, v) in [
            ("clip", self.clip),
            ("lr", self.lr),
            ("maxGradNorm", self.max_grad_norm),
            ("rewardScale", self.reward_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.entropy_coef >= 0.0 && self.value_coef >= 0.0) {
            return bad("loss coefficients must be non-negative".into());
        }
        Ok(())
    }

    pub fn loss(&self) -> LossHyper {
        LossHyper {
            clip: self.clip,
            value_coef: self.value_coef,
            entropy_coef: self.entropy_coef,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            max_grad_norm: self.max_grad_norm,
            ..AdamConfig::default()
        }
    }
}

/// One line of the training summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EpisodeSummary {
    pub episode: u64,
    pub total_reward: f64,
    pub steps: usize,
    pub outcome: Outcome,
}

impl EpisodeSummary {
    pub fn of(ep: &Episode) -> Self {
        EpisodeSummary {
            episode: ep.id,
            total_reward: ep.total_reward,
            steps: ep.steps.len(),
            outcome: ep.outcome,
        }
    }
}

/// Averages over the minibatches of one update.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UpdateStats {
    pub steps: usize,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrainSummary {
    pub episodes: Vec<EpisodeSummary>,
    pub updates: Vec<UpdateStats>,
    /// Episodes whose steps went into an applied update.
    pub trained_episodes: u64,
}

pub const CSV_HEADER: &str = "episode,total_reward,steps,outcome";

impl TrainSummary {
    /// `episode,total_reward,steps,outcome` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for e in &self.episodes {
            out.push_str(&format!("{},{},{},{}\n", e.episode, e.total_reward, e.steps, e.outcome));
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training cancelled after {} episodes", .0.trained_episodes)]
    Cancelled(Box<TrainSummary>),
    #[error("loss or gradients became non-finite")]
    NonFiniteLoss,
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Net(#[from] NetError),
}

impl From<LossError> for TrainError {
    fn from(e: LossError) -> Self {
        match e {
            LossError::Net(n) => TrainError::Net(n),
            LossError::NonFiniteLoss | LossError::EmptyBatch => TrainError::NonFiniteLoss,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOptions {
    pub episodes: usize,
    pub seed: u64,
    pub hyper: TrainHyper,
    pub sim: SimParams,
}

impl TrainOptions {
    pub fn new(episodes: usize, seed: u64) -> Self {
        TrainOptions {
            episodes,
            seed,
            hyper: TrainHyper::default(),
            sim: SimParams::default(),
        }
    }
}

/// Trains `net` on `track` until `opts.episodes` episodes have finished.
///
/// Rollouts hold `hyper.rollout` steps; the last one stops as soon as the
/// episode quota is met, so exactly `opts.episodes` episodes reach `sink`
/// (ids 1..=n) unless cancelled. `cancel` is polled before every step; a
/// cancelled rollout is discarded, leaving `net` with the updates applied
/// so far.
pub fn train(
    net: &mut PolicyNet<f32>,
    track: &Track,
    opts: &TrainOptions,
    sink: &mut dyn FnMut(&Episode),
    cancel: &AtomicBool,
) -> Result<TrainSummary, TrainError> {
    let hyper = &opts.hyper;
    hyper.validate()?;
    let env = Environment::new(track, opts.sim.clone(), net.config().obs_config())?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let seed_rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed_5eed_5eed_5eed);
    let mut collector = Collector::new(env, seed_rng);
    let mut adam = AdamState::new(net.param_count());
    let mut summary = TrainSummary::default();
    let stop = || cancel.load(Ordering::SeqCst);

    while summary.episodes.len() < opts.episodes.max(1) {
        let remaining = opts.episodes.max(1) - summary.episodes.len();
        let mut finished = Vec::new();
        let buf = collector.collect(
            net,
            hyper.rollout,
            Some(remaining),
            &mut |ep| {
                finished.push(EpisodeSummary::of(ep));
                sink(ep);
            },
            &stop,
        )?;
        summary.episodes.extend(finished.iter().cloned());
        if stop() {
            return Err(TrainError::Cancelled(Box::new(summary)));
        }
        let stats = update(net, &buf, hyper, &mut adam, &mut rng)?;
        summary.updates.push(stats);
        summary.trained_episodes += finished.len() as u64;
    }
    Ok(summary)
}

/// Advantages and returns for a buffer, normalized per rollout if enabled.
pub fn advantages(buf: &RolloutBuffer, hyper: &TrainHyper) -> (Vec<f64>, Vec<f64>) {
    let rewards: Vec<f64> = buf.rewards.iter().map(|r| r * hyper.reward_scale).collect();
    let (mut adv, ret) = compute_gae(
        &rewards,
        &buf.values,
        &buf.dones,
        buf.bootstrap,
        hyper.gamma,
        hyper.lambda,
    );
    if hyper.normalize_advantages {
        normalize_advantages(&mut adv);
    }
    (adv, ret)
}

/// `epochs` passes of shuffled minibatch Adam steps over one rollout.
pub fn update(
    net: &mut PolicyNet<f32>,
    buf: &RolloutBuffer,
    hyper: &TrainHyper,
    adam: &mut AdamState,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats, TrainError> {
    let (adv, ret) = advantages(buf, hyper);
    let loss = hyper.loss();
    let adam_cfg = hyper.adam();
    let mut order: Vec<usize> = (0..buf.len()).collect();
    let mut stats = UpdateStats {
        steps: buf.len(),
        ..UpdateStats::default()
    };
    let mut batches = 0usize;
    for _ in 0..hyper.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(hyper.minibatch) {
            let samples: Vec<Sample<'_, f32>> = chunk
                .iter()
                .map(|&i| Sample {
                    obs: buf.obs_at(i),
                    action: buf.actions[i],
                    old_log_prob: buf.log_probs[i],
                    advantage: adv[i],
                    ret: ret[i],
                })
                .collect();
            let (grads, s) = loss_gradients(net, &samples, &loss)?;
            stats.grad_norm += adam_update(net, &grads, adam, &adam_cfg);
            stats.policy_loss += s.policy_loss;
            stats.value_loss += s.value_loss;
            stats.entropy += s.entropy;
            stats.clip_fraction += s.clip_fraction;
            stats.approx_kl += s.approx_kl;
            batches += 1;
        }
    }
    if !net.is_finite() {
        return Err(TrainError::NonFiniteLoss);
    }
    let k = batches.max(1) as f64;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.clip_fraction /= k;
    stats.approx_kl /= k;
    stats.grad_norm /= k;
    Ok(stats)
}
