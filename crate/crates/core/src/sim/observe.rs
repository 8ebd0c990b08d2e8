//! Egocentric binary rasters of the track around the vehicle.

use std::collections::VecDeque;

use super::VehicleState;
use crate::track::{Point, Track};

/// Raster geometry. The vehicle sits at column `size / 2`, row `3 * size / 4`
/// (row 0 is furthest ahead), looking toward row 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObsConfig {
    pub frames: usize,
    pub size: usize,
    /// Cell edge in meters.
    pub cell: f64,
}

impl Default for ObsConfig {
    fn default() -> Self {
        ObsConfig {
            frames: 3,
            size: 24,
            cell: 1.0,
        }
    }
}

impl ObsConfig {
    pub fn frame_len(&self) -> usize {
        self.size * self.size
    }

    pub fn vehicle_cell(&self) -> (usize, usize) {
        (self.size / 2, self.size * 3 / 4)
    }
}

/// `frames` stacked `size x size` grids, oldest first. Values are exactly 0 or 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    /// Row-major `[frame][row][col]`.
    pub data: Vec<f32>,
}

impl Observation {
    pub fn zeros(cfg: &ObsConfig) -> Self {
        Observation {
            frames: cfg.frames,
            height: cfg.size,
            width: cfg.size,
            data: vec![0.0; cfg.frames * cfg.frame_len()],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.frames, self.height, self.width)
    }

    pub fn frame(&self, f: usize) -> &[f32] {
        let len = self.height * self.width;
        &self.data[f * len..(f + 1) * len]
    }

    pub fn at(&self, f: usize, row: usize, col: usize) -> f32 {
        self.data[(f * self.height + row) * self.width + col]
    }
}

/// Rasterizes the track around `state`: a cell is 1.0 when its center is on
/// the track (zero margin).
pub fn render_frame(track: &Track, state: &VehicleState, cfg: &ObsConfig) -> Vec<f32> {
    let (vc, vr) = cfg.vehicle_cell();
    let forward = Point::new(state.heading.cos(), state.heading.sin());
    let right = Point::new(forward.y, -forward.x);
    let mut frame = vec![0.0f32; cfg.frame_len()];
    for row in 0..cfg.size {
        let ahead = (vr as f64 - row as f64) * cfg.cell;
        let row_origin = state.position.add(forward.scale(ahead));
        for col in 0..cfg.size {
            let side = (col as f64 - vc as f64) * cfg.cell;
            let p = row_origin.add(right.scale(side));
            if track.is_on_track(p, 0.0) {
                frame[row * cfg.size + col] = 1.0;
            }
        }
    }
    frame
}

/// Rolling history of rendered frames, zero-padded at episode start.
#[derive(Clone, Debug)]
pub struct FrameStack {
    cfg: ObsConfig,
    frames: VecDeque<Vec<f32>>,
}

impl FrameStack {
    pub fn new(cfg: ObsConfig) -> Self {
        let frames = (0..cfg.frames).map(|_| vec![0.0; cfg.frame_len()]).collect();
        FrameStack { cfg, frames }
    }

    pub fn config(&self) -> &ObsConfig {
        &self.cfg
    }

    pub fn push(&mut self, frame: Vec<f32>) {
        debug_assert_eq!(frame.len(), self.cfg.frame_len());
        self.frames.pop_front();
        self.frames.push_back(frame);
    }

    pub fn observation(&self) -> Observation {
        let mut data = Vec::with_capacity(self.cfg.frames * self.cfg.frame_len());
        for f in &self.frames {
            data.extend_from_slice(f);
        }
        Observation {
            frames: self.cfg.frames,
            height: self.cfg.size,
            width: self.cfg.size,
            data,
        }
    }
}

/// Renders the current frame onto `history` and returns the stacked
/// observation `[t-2, t-1, t]`.
pub fn render_observation(track: &Track, state: &VehicleState, history: &mut FrameStack) -> Observation {
    let frame = render_frame(track, state, &history.cfg);
    history.push(frame);
    history.observation()
}
