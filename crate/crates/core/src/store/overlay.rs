//! Decimated episode paths for drawing on top of a track.

use serde::{Deserialize, Serialize};

use super::CorruptRecord;
use crate::sim::{Episode, Outcome};
use crate::track::Point;

pub const MAX_OVERLAY_POINTS: usize = 500;

/// Keeps every `ceil((n-1)/(max-1))`-th point starting at the first, then
/// appends the last point if the stride skipped it. First and last points
/// always survive and the result never exceeds `max` points.
pub fn decimate(points: &[Point], max: usize) -> Vec<Point> {
    assert!(max >= 2, "need room for both endpoints");
    let n = points.len();
    if n <= max {
        return points.to_vec();
    }
    let stride = (n - 1).div_ceil(max - 1);
    let mut out: Vec<Point> = points.iter().step_by(stride).copied().collect();
    if (n - 1) % stride != 0 {
        out.push(points[n - 1]);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OverlayEpisode {
    pub id: u64,
    pub total_reward: f64,
    pub outcome: Outcome,
    pub endpoint: Point,
    pub path: Vec<Point>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OverlayPayload {
    pub model_id: String,
    pub track_id: String,
    /// In training order.
    pub episodes: Vec<OverlayEpisode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<CorruptRecord>,
}

impl OverlayPayload {
    pub fn build(model_id: &str, track_id: &str, episodes: &[&Episode], warnings: Vec<CorruptRecord>) -> Self {
        let episodes = episodes
            .iter()
            .map(|e| {
                let pts: Vec<Point> = e.steps.iter().map(|s| s.position).collect();
                OverlayEpisode {
                    id: e.id,
                    total_reward: e.total_reward,
                    outcome: e.outcome,
                    endpoint: e.endpoint,
                    path: decimate(&pts, MAX_OVERLAY_POINTS),
                }
            })
            .collect();
        OverlayPayload {
            model_id: model_id.to_string(),
            track_id: track_id.to_string(),
            episodes,
            warnings,
        }
    }
}
