//! Track geometry: smoothing freehand strokes into centerlines, progress
//! tiles, named waypoints and point-to-track projection.
//!
//! A [`Track`] is immutable once built. Everything downstream (the simulator,
//! the observation raster, the reward) queries it through [`Track::project`]
//! and [`Track::is_on_track`].

mod builtin;
mod grid;
mod smooth;

pub use builtin::{builtin_rapid_tracks, builtin_track, bus_route, oval, BUILTIN_EXTRA_IDS};
pub use smooth::{resample_uniform, smooth_polyline};

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use grid::SegmentGrid;

/// Consecutive centerline points closer than this are treated as coincident.
pub const MIN_POINT_SEPARATION: f64 = 1e-6;
/// Resample spacing used when a caller does not pick one.
pub const DEFAULT_SPACING: f64 = 2.0;
pub const DEFAULT_WAYPOINT_RADIUS: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid waypoint `{name}`: {reason}")]
    InvalidWaypoint { name: String, reason: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed track file: {0}")]
    Malformed(String),
}

/// A point in the track plane, in meters. Serialized as `[x, y]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }

    pub fn scale(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point) -> f64 {
        self.sub(o).norm()
    }

    pub fn lerp(self, o: Point, t: f64) -> Point {
        Point::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }

    /// Reflection across the x-axis.
    pub fn mirrored(self) -> Point {
        Point::new(self.x, -self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Equal arc-length slice of the centerline used for progress reward.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub index: usize,
    pub s_start: f64,
    pub s_end: f64,
}

impl Tile {
    pub fn length(&self) -> f64 {
        self.s_end - self.s_start
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaypointKind {
    Pickup,
    Dropoff,
    Custom,
}

impl fmt::Display for WaypointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WaypointKind::Pickup => "pickup",
            WaypointKind::Dropoff => "dropoff",
            WaypointKind::Custom => "custom",
        })
    }
}

fn default_radius() -> f64 {
    DEFAULT_WAYPOINT_RADIUS
}

/// A named trigger disk on the course.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub name: String,
    pub kind: WaypointKind,
    pub position: Point,
    #[serde(default = "default_radius")]
    pub radius: f64,
}

impl Waypoint {
    pub fn new(name: impl Into<String>, kind: WaypointKind, position: Point) -> Self {
        Self {
            name: name.into(),
            kind,
            position,
            radius: DEFAULT_WAYPOINT_RADIUS,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.position.distance(p) <= self.radius
    }
}

/// Nearest centerline location for a query point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    /// Arc length of the foot point.
    pub s: f64,
    /// Signed distance from the centerline, positive to the left of travel.
    pub lateral: f64,
    pub tile_index: usize,
}

/// Everything needed to build a [`Track`]; also the on-disk JSON layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrackSpec {
    pub id: String,
    pub name: String,
    pub width: f64,
    pub closed: bool,
    pub tile_count: usize,
    pub centerline: Vec<Point>,
    #[serde(default)]
    pub waypoints: Vec<Waypoint>,
}

/// `max(16, round(arc_length / 5 m))`.
pub fn default_tile_count(arc_length: f64) -> usize {
    ((arc_length / 5.0).round() as usize).max(16)
}

#[derive(Clone, Debug)]
pub struct Track {
    id: String,
    name: String,
    centerline: Vec<Point>,
    width: f64,
    closed: bool,
    tiles: Vec<Tile>,
    waypoints: Vec<Waypoint>,
    /// Arc length at each centerline vertex; for closed tracks one extra
    /// entry holds the full loop length.
    cumulative: Vec<f64>,
    length: f64,
    grid: SegmentGrid,
}

impl PartialEq for Track {
    fn eq(&self, other: &Self) -> bool {
        self.to_spec() == other.to_spec()
    }
}

/// Validates `spec` and derives tiles and the spatial index.
pub fn build_track(spec: TrackSpec) -> Result<Track, TrackError> {
    let TrackSpec {
        id,
        name,
        width,
        closed,
        tile_count,
        mut centerline,
        waypoints,
    } = spec;

    if !(width.is_finite() && width > 0.0) {
        return Err(TrackError::InvalidParameter(format!(
            "width must be positive, got {width}"
        )));
    }
    if tile_count < 4 {
        return Err(TrackError::InvalidParameter(format!(
            "tile_count must be at least 4, got {tile_count}"
        )));
    }
    if centerline.iter().any(|p| !p.is_finite()) {
        return Err(TrackError::DegenerateInput("non-finite centerline point".into()));
    }
    if closed
        && centerline.len() > 2
        && centerline[0].distance(centerline[centerline.len() - 1]) <= MIN_POINT_SEPARATION
    {
        centerline.pop();
    }
    if centerline.len() < 2 {
        return Err(TrackError::DegenerateInput(
            "centerline needs at least two points".into(),
        ));
    }
    for (i, w) in centerline.windows(2).enumerate() {
        if w[0].distance(w[1]) <= MIN_POINT_SEPARATION {
            return Err(TrackError::DegenerateInput(format!(
                "centerline points {i} and {} coincide",
                i + 1
            )));
        }
    }

    let mut cumulative = Vec::with_capacity(centerline.len() + 1);
    cumulative.push(0.0);
    let seg_count = if closed { centerline.len() } else { centerline.len() - 1 };
    for i in 0..seg_count {
        let a = centerline[i];
        let b = centerline[(i + 1) % centerline.len()];
        cumulative.push(cumulative[i] + a.distance(b));
    }
    let length = *cumulative.last().expect("non-empty");

    let tile_len = length / tile_count as f64;
    let tiles = (0..tile_count)
        .map(|k| Tile {
            index: k,
            s_start: k as f64 * tile_len,
            s_end: if k + 1 == tile_count {
                length
            } else {
                (k + 1) as f64 * tile_len
            },
        })
        .collect();

    let grid = SegmentGrid::new(&centerline, closed, width);
    let mut track = Track {
        id,
        name,
        centerline,
        width,
        closed,
        tiles,
        waypoints: Vec::new(),
        cumulative,
        length,
        grid,
    };

    let mut seen = HashSet::new();
    for wp in &waypoints {
        if !seen.insert(wp.name.as_str()) {
            return Err(TrackError::InvalidWaypoint {
                name: wp.name.clone(),
                reason: "duplicate name".into(),
            });
        }
        if !(wp.radius.is_finite() && wp.radius > 0.0) {
            return Err(TrackError::InvalidWaypoint {
                name: wp.name.clone(),
                reason: format!("radius must be positive, got {}", wp.radius),
            });
        }
        if !wp.position.is_finite() {
            return Err(TrackError::InvalidWaypoint {
                name: wp.name.clone(),
                reason: "non-finite position".into(),
            });
        }
        let lateral = track.project(wp.position).lateral.abs();
        if lateral > track.width / 2.0 + wp.radius {
            return Err(TrackError::InvalidWaypoint {
                name: wp.name.clone(),
                reason: format!("{lateral:.3} m from the centerline is off the track"),
            });
        }
    }
    track.waypoints = waypoints;
    Ok(track)
}

impl Track {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn centerline(&self) -> &[Point] {
        &self.centerline
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn closed(&self) -> bool {
        self.closed
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    pub fn tile_count(&self) -> usize {
        self.tiles.len()
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn waypoint(&self, name: &str) -> Option<&Waypoint> {
        self.waypoints.iter().find(|w| w.name == name)
    }

    /// Total centerline arc length in meters.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Returns a copy with a different id.
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    fn segment_count(&self) -> usize {
        self.cumulative.len() - 1
    }

    fn segment(&self, i: usize) -> (Point, Point) {
        let n = self.centerline.len();
        (self.centerline[i], self.centerline[(i + 1) % n])
    }

    pub fn tile_at(&self, s: f64) -> usize {
        let k = self.tiles.len();
        let idx = (s / (self.length / k as f64)).floor();
        if idx <= 0.0 {
            0
        } else {
            (idx as usize).min(k - 1)
        }
    }

    /// Nearest centerline point. Ties go to the smaller arc length.
    pub fn project(&self, p: Point) -> Projection {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..self.segment_count() {
            let (a, b) = self.segment(i);
            let (dist, t, side) = point_segment(p, a, b);
            if dist < best.0 {
                let s = self.cumulative[i] + t * (self.cumulative[i + 1] - self.cumulative[i]);
                best = (dist, s, if side < 0.0 { -dist } else { dist });
            }
        }
        let s = best.1.clamp(0.0, self.length);
        Projection {
            s,
            lateral: best.2,
            tile_index: self.tile_at(s),
        }
    }

    /// Distance from `p` to the centerline is at most `width/2 + margin`.
    pub fn is_on_track(&self, p: Point, margin: f64) -> bool {
        let reach = self.width / 2.0 + margin;
        self.grid.any_within(p, reach, |i| {
            let (a, b) = self.segment(i);
            point_segment(p, a, b).0
        })
    }

    /// Centerline point at arc length `s` (clamped; wraps for closed tracks).
    pub fn point_at(&self, s: f64) -> Point {
        let s = if self.closed {
            s.rem_euclid(self.length)
        } else {
            s.clamp(0.0, self.length)
        };
        let i = match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&s).expect("finite"))
        {
            Ok(i) => i.min(self.segment_count() - 1),
            Err(i) => i.saturating_sub(1).min(self.segment_count() - 1),
        };
        let (a, b) = self.segment(i);
        let seg = self.cumulative[i + 1] - self.cumulative[i];
        a.lerp(b, ((s - self.cumulative[i]) / seg).clamp(0.0, 1.0))
    }

    /// Unit tangent of travel at arc length `s`.
    pub fn tangent_at(&self, s: f64) -> Point {
        let s = if self.closed {
            s.rem_euclid(self.length)
        } else {
            s.clamp(0.0, self.length)
        };
        let mut i = self.cumulative.partition_point(|&c| c <= s);
        i = i.saturating_sub(1).min(self.segment_count() - 1);
        let (a, b) = self.segment(i);
        let d = b.sub(a);
        d.scale(1.0 / d.norm())
    }

    /// Starting position and heading (radians) of a vehicle on this track.
    pub fn start_pose(&self) -> (Point, f64) {
        let t = self.tangent_at(0.0);
        (self.centerline[0], t.y.atan2(t.x))
    }

    pub fn to_spec(&self) -> TrackSpec {
        TrackSpec {
            id: self.id.clone(),
            name: self.name.clone(),
            width: self.width,
            closed: self.closed,
            tile_count: self.tiles.len(),
            centerline: self.centerline.clone(),
            waypoints: self.waypoints.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_spec()).expect("track serializes")
    }

    pub fn from_json(text: &str) -> Result<Track, TrackError> {
        let spec: TrackSpec =
            serde_json::from_str(text).map_err(|e| TrackError::Malformed(e.to_string()))?;
        build_track(spec)
    }

    /// Reflection of the whole track across the x-axis (reverses turn direction).
    pub fn mirrored(&self, id: impl Into<String>, name: impl Into<String>) -> Track {
        let mut spec = self.to_spec();
        spec.id = id.into();
        spec.name = name.into();
        spec.centerline = spec.centerline.iter().map(|p| p.mirrored()).collect();
        for w in &mut spec.waypoints {
            w.position = w.position.mirrored();
        }
        build_track(spec).expect("mirror of a valid track is valid")
    }
}

/// Distance from `p` to segment `ab`, the clamped parameter of the foot point
/// and the side (sign of the cross product, positive = left of a→b).
pub(crate) fn point_segment(p: Point, a: Point, b: Point) -> (f64, f64, f64) {
    let d = b.sub(a);
    let ap = p.sub(a);
    let len2 = d.dot(d);
    let t = (ap.dot(d) / len2).clamp(0.0, 1.0);
    let foot = a.add(d.scale(t));
    (p.distance(foot), t, d.cross(ap))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(len: f64, width: f64, tiles: usize) -> Track {
        build_track(TrackSpec {
            id: "s".into(),
            name: "straight".into(),
            width,
            closed: false,
            tile_count: tiles,
            centerline: vec![Point::new(0.0, 0.0), Point::new(len, 0.0)],
            waypoints: vec![],
        })
        .unwrap()
    }

    #[test]
    fn straight_track_has_equal_tiles() {
        let t = straight(100.0, 5.0, 20);
        assert_eq!(t.tile_count(), 20);
        for tile in t.tiles() {
            assert!((tile.length() - 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn circle_tiles_match_circumference() {
        let n = 2000;
        let r = 20.0;
        let pts: Vec<Point> = (0..n)
            .map(|i| {
                let a = i as f64 / n as f64 * std::f64::consts::TAU;
                Point::new(r * a.cos(), r * a.sin())
            })
            .collect();
        let t = build_track(TrackSpec {
            id: "c".into(),
            name: "circle".into(),
            width: 5.0,
            closed: true,
            tile_count: 16,
            centerline: pts,
            waypoints: vec![],
        })
        .unwrap();
        // inscribed polygon perimeter: 2nr sin(pi/n)
        let polygon = 2.0 * n as f64 * r * (std::f64::consts::PI / n as f64).sin();
        let analytic = std::f64::consts::TAU * r / 16.0;
        for tile in t.tiles() {
            assert!((tile.length() - polygon / 16.0).abs() < 1e-6);
            assert!((tile.length() - analytic).abs() < 1e-4);
        }
    }

    #[test]
    fn off_track_waypoint_is_rejected() {
        let err = build_track(TrackSpec {
            id: "s".into(),
            name: "straight".into(),
            width: 5.0,
            closed: false,
            tile_count: 20,
            centerline: vec![Point::new(0.0, 0.0), Point::new(100.0, 0.0)],
            waypoints: vec![Waypoint::new("far", WaypointKind::Custom, Point::new(50.0, 50.0))],
        })
        .unwrap_err();
        assert!(matches!(err, TrackError::InvalidWaypoint { .. }));
    }

    #[test]
    fn duplicate_waypoint_is_rejected() {
        let wp = Waypoint::new("a", WaypointKind::Pickup, Point::new(10.0, 0.0));
        let err = build_track(TrackSpec {
            id: "s".into(),
            name: "straight".into(),
            width: 5.0,
            closed: false,
            tile_count: 20,
            centerline: vec![Point::new(0.0, 0.0), Point::new(100.0, 0.0)],
            waypoints: vec![wp.clone(), wp],
        })
        .unwrap_err();
        assert_eq!(
            err,
            TrackError::InvalidWaypoint {
                name: "a".into(),
                reason: "duplicate name".into()
            }
        );
    }

    #[test]
    fn small_tile_count_and_bad_width_rejected() {
        let mut spec = straight(10.0, 5.0, 4).to_spec();
        spec.tile_count = 3;
        assert!(matches!(build_track(spec.clone()), Err(TrackError::InvalidParameter(_))));
        spec.tile_count = 4;
        spec.width = 0.0;
        assert!(matches!(build_track(spec), Err(TrackError::InvalidParameter(_))));
    }

    #[test]
    fn coincident_points_rejected() {
        let mut spec = straight(10.0, 5.0, 4).to_spec();
        spec.centerline = vec![Point::new(1.0, 1.0), Point::new(1.0, 1.0)];
        assert!(matches!(build_track(spec), Err(TrackError::DegenerateInput(_))));
    }

    #[test]
    fn projection_on_straight() {
        let t = straight(100.0, 5.0, 20);
        let p = t.project(Point::new(30.0, 0.0));
        assert_eq!(p.s, 30.0);
        assert_eq!(p.lateral, 0.0);
        assert_eq!(p.tile_index, 6);
        let start = t.project(Point::new(0.0, 0.0));
        assert_eq!((start.s, start.tile_index), (0.0, 0));
        // left of travel (+y when heading +x) is positive
        assert!(t.project(Point::new(10.0, 2.0)).lateral > 0.0);
        assert!(t.project(Point::new(10.0, -2.0)).lateral < 0.0);
    }

    #[test]
    fn on_track_boundary() {
        let t = straight(100.0, 5.0, 20);
        assert!(t.is_on_track(Point::new(40.0, 0.0), 0.0));
        assert!(t.is_on_track(Point::new(40.0, 3.0), 0.5));
        assert!(!t.is_on_track(Point::new(40.0, 2.5 + 0.5 + 0.01), 0.5));
        assert!(!t.is_on_track(Point::new(400.0, 0.0), 0.5));
    }

    #[test]
    fn json_round_trip_and_unknown_kind() {
        let t = bus_route();
        let back = Track::from_json(&t.to_json()).unwrap();
        assert_eq!(t, back);
        let bad = t.to_json().replace("\"pickup\"", "\"teleport\"");
        assert!(matches!(Track::from_json(&bad), Err(TrackError::Malformed(_))));
    }

    #[test]
    fn waypoint_radius_defaults_in_json() {
        let text = r#"{"id":"x","name":"x","width":5.0,"closed":false,"tileCount":4,
            "centerline":[[0,0],[20,0]],
            "waypoints":[{"name":"a","kind":"custom","position":[5,0]}]}"#;
        let t = Track::from_json(text).unwrap();
        assert_eq!(t.waypoints()[0].radius, 3.0);
    }
}
