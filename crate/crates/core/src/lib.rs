//! Core of the trackpilot desk-scale driving platform.
//!
//! * [`track`]: track geometry, tiles, waypoints, builtin courses.
//! * [`sim`]: deterministic vehicle dynamics, observations, rewards and episodes.
//! * [`policy`]: the convolutional actor-critic network and its optimizer.
//! * [`ppo`]: rollout collection, advantage estimation and the training loop.
//! * [`dsl`]: the waypoint/event callback language and objective checker.
//! * [`store`]: on-disk persistence for tracks, models and episodes.

pub mod track;
pub mod sim;
pub mod dsl;
pub mod policy;
pub mod ppo;
pub mod store;
