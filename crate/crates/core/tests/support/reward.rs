//! The three reward examples on a straight 20-tile track.

use trackpilot_core::sim::{check_termination, compute_reward, Outcome, SimParams, TileSet};
use trackpilot_core::track::{build_track, Point, Track, TrackSpec};

pub fn straight_k20() -> Track {
    build_track(TrackSpec {
        id: "straight".into(),
        name: "straight".into(),
        width: 5.0,
        closed: false,
        tile_count: 20,
        centerline: vec![Point::new(0.0, 0.0), Point::new(100.0, 0.0)],
        waypoints: vec![],
    })
    .expect("valid track")
}

/// Returns the three rewards `(no new tile, one new tile, off track)`.
pub fn reward_examples() -> Result<[f64; 3], String> {
    let track = straight_k20();
    let params = SimParams::default();
    let mut visited = TileSet::new(20);
    visited.insert(0);

    let proj = track.project(Point::new(1.0, 0.0));
    let (idle, new) = compute_reward(&track, &visited, &proj, None, &params);
    if !new.is_empty() {
        return Err(format!("tile 0 reported new: {new:?}"));
    }

    let proj = track.project(Point::new(6.0, 0.0));
    let (fresh, new) = compute_reward(&track, &visited, &proj, None, &params);
    if new != [1] {
        return Err(format!("expected tile 1 new, got {new:?}"));
    }

    let proj = track.project(Point::new(1.0, 9.0));
    let outcome = check_termination(visited.len(), 20, proj.lateral, track.width() / 2.0, 1, &params);
    if outcome != Some(Outcome::OffTrack) {
        return Err(format!("expected off-track termination, got {outcome:?}"));
    }
    let (off, _) = compute_reward(&track, &visited, &proj, outcome, &params);
    Ok([idle, fresh, off])
}

pub const EXPECTED_REWARDS: [f64; 3] = [-0.1, 49.9, -100.1];
