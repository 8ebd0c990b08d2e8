//! Progress reward, termination and waypoint triggering.

use std::collections::HashSet;

use super::{Outcome, SimParams};
use crate::track::{Point, Projection, Track};

/// Set of visited tile indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TileSet {
    visited: Vec<bool>,
    count: usize,
}

impl TileSet {
    pub fn new(tile_count: usize) -> Self {
        TileSet {
            visited: vec![false; tile_count],
            count: 0,
        }
    }

    pub fn contains(&self, tile: usize) -> bool {
        self.visited.get(tile).copied().unwrap_or(false)
    }

    /// Returns true when the tile was not yet visited.
    pub fn insert(&mut self, tile: usize) -> bool {
        if self.visited[tile] {
            false
        } else {
            self.visited[tile] = true;
            self.count += 1;
            true
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn capacity(&self) -> usize {
        self.visited.len()
    }
}

/// Reward for one step and the tiles it newly visits.
///
/// Only the tile under the current projection can be new; skipped tiles are
/// not back-filled. `outcome` is the termination decided for this step.
pub fn compute_reward(
    track: &Track,
    prev_visited: &TileSet,
    projection: &Projection,
    outcome: Option<Outcome>,
    params: &SimParams,
) -> (f64, Vec<usize>) {
    let newly: Vec<usize> = if prev_visited.contains(projection.tile_index) {
        Vec::new()
    } else {
        vec![projection.tile_index]
    };
    let per_tile = params.tile_reward_total / track.tile_count() as f64;
    let mut reward = per_tile * newly.len() as f64 - params.step_penalty;
    match outcome {
        Some(Outcome::OffTrack) => reward -= params.off_track_penalty,
        Some(Outcome::Completed) => reward += params.completion_bonus,
        _ => {}
    }
    (reward, newly)
}

/// Decides whether the episode ends after `steps_taken` steps.
/// Priority: off-track, then completed, then timeout.
pub fn check_termination(
    visited: usize,
    tile_count: usize,
    lateral: f64,
    half_width: f64,
    steps_taken: usize,
    params: &SimParams,
) -> Option<Outcome> {
    if lateral.abs() > half_width + params.off_track_margin {
        Some(Outcome::OffTrack)
    } else if visited as f64 >= params.completion_fraction * tile_count as f64 - 1e-9 {
        Some(Outcome::Completed)
    } else if steps_taken >= params.max_steps {
        Some(Outcome::Timeout)
    } else {
        None
    }
}

/// Waypoints whose disk contains `position` and that have not fired yet,
/// in track declaration order.
pub fn check_waypoints(track: &Track, position: Point, already_triggered: &HashSet<String>) -> Vec<String> {
    track
        .waypoints()
        .iter()
        .filter(|w| w.contains(position) && !already_triggered.contains(&w.name))
        .map(|w| w.name.clone())
        .collect()
}
