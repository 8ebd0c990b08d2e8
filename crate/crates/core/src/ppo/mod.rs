//! Rollout collection, generalized advantage estimation and the PPO update
//! loop.

mod gae;
mod rollout;
mod train;

pub use gae::{compute_gae, normalize_advantages};
pub use rollout::{Collector, RolloutBuffer};
pub use train::{
    advantages, train, update, EpisodeSummary, TrainError, TrainHyper, TrainOptions, TrainSummary,
    UpdateStats, CSV_HEADER,
};
