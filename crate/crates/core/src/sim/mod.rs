//! Deterministic episode simulation: kinematics, observation rasters,
//! progress reward, termination and waypoint events.

mod dynamics;
mod episode;
mod observe;
mod reward;

pub use dynamics::{normalize_angle, step_dynamics};
pub use episode::{
    run_episode, run_episode_with, Driver, Environment, Episode, EpisodeFormatError,
    EpisodeHeader, EpisodeRun, Outcome, RunMode, StepOutcome, StepRecord,
};
pub use observe::{render_frame, render_observation, FrameStack, ObsConfig, Observation};
pub use reward::{check_termination, check_waypoints, compute_reward, TileSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::Diagnostic;
use crate::track::Point;

pub const ACTION_COUNT: usize = 5;

/// The five discrete controls, serialized as integers 0-4 in declaration order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Accelerate = 0,
    Brake = 1,
    SteerLeft = 2,
    SteerRight = 3,
    NoChange = 4,
}

impl Action {
    pub const ALL: [Action; ACTION_COUNT] = [
        Action::Accelerate,
        Action::Brake,
        Action::SteerLeft,
        Action::SteerRight,
        Action::NoChange,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }
}

impl Serialize for Action {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*self as u8)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let i = u8::deserialize(d)?;
        Action::from_index(i as usize)
            .ok_or_else(|| serde::de::Error::custom(format!("action {i} out of range 0-4")))
    }
}

/// Dynamics and reward constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimParams {
    pub dt: f64,
    pub accel: f64,
    pub brake_decel: f64,
    pub drag: f64,
    pub v_max: f64,
    pub turn_rate: f64,
    /// Speed at which steering reaches full authority.
    pub full_turn_speed: f64,
    pub off_track_margin: f64,
    pub max_steps: usize,
    pub tile_reward_total: f64,
    pub step_penalty: f64,
    pub off_track_penalty: f64,
    pub completion_bonus: f64,
    pub completion_fraction: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            dt: 0.1,
            accel: 2.0,
            brake_decel: 4.0,
            drag: 0.2,
            v_max: 12.0,
            turn_rate: 1.5,
            full_turn_speed: 4.0,
            off_track_margin: 1.0,
            max_steps: 1000,
            tile_reward_total: 1000.0,
            step_penalty: 0.1,
            off_track_penalty: 100.0,
            completion_bonus: 100.0,
            completion_fraction: 0.95,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("dt", self.dt),
            ("accel", self.accel),
            ("brake_decel", self.brake_decel),
            ("drag", self.drag),
            ("v_max", self.v_max),
            ("turn_rate", self.turn_rate),
            ("full_turn_speed", self.full_turn_speed),
            ("off_track_margin", self.off_track_margin),
            ("tile_reward_total", self.tile_reward_total),
            ("step_penalty", self.step_penalty),
            ("off_track_penalty", self.off_track_penalty),
            ("completion_bonus", self.completion_bonus),
            ("completion_fraction", self.completion_fraction),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if self.dt > 1.0 {
            return Err(SimError::InvalidParams(format!("dt must be in (0, 1], got {}", self.dt)));
        }
        if self.max_steps == 0 {
            return Err(SimError::InvalidParams("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Kinematic state of the vehicle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VehicleState {
    pub position: Point,
    /// Radians in (-pi, pi].
    pub heading: f64,
    /// m/s, never negative.
    pub speed: f64,
    /// Simulation clock in seconds.
    pub time: f64,
    /// While the clock is below this value every action is forced to Brake.
    pub paused_until: Option<f64>,
}

impl VehicleState {
    pub fn at_rest(position: Point, heading: f64) -> Self {
        VehicleState {
            position,
            heading: normalize_angle(heading),
            speed: 0.0,
            time: 0.0,
            paused_until: None,
        }
    }

    pub fn is_paused(&self) -> bool {
        self.paused_until.is_some_and(|until| self.time < until - 1e-9)
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("observation shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize, usize),
        actual: (usize, usize, usize),
    },
    #[error("program rejected: {}", summarize(.0))]
    ProgramError(Vec<Diagnostic>),
    #[error("invalid simulation parameters: {0}")]
    InvalidParams(String),
    #[error("policy produced non-finite logits")]
    NonFinite,
}

fn summarize(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}
