//! Predefined courses: the seven rapid-training tracks, the oval used by the
//! learning benchmark and the school-bus route.
//!
//! Courses are described as turtle paths (straights and constant-radius arcs),
//! then pass through the same smoothing and validation as drawn tracks.

use std::f64::consts::FRAC_PI_2;

use super::{
    build_track, default_tile_count, smooth_polyline, Point, Track, TrackSpec, Waypoint,
    WaypointKind, DEFAULT_SPACING,
};

pub const BUILTIN_WIDTH: f64 = 8.0;

/// Builtin ids that are not part of the rapid-training set.
pub const BUILTIN_EXTRA_IDS: [&str; 2] = ["oval", "bus-route"];

struct Turtle {
    pos: Point,
    heading: f64,
    points: Vec<Point>,
}

impl Turtle {
    fn new() -> Self {
        Turtle {
            pos: Point::new(0.0, 0.0),
            heading: 0.0,
            points: vec![Point::new(0.0, 0.0)],
        }
    }

    fn straight(mut self, len: f64) -> Self {
        let steps = len.ceil().max(1.0) as usize;
        let dir = Point::new(self.heading.cos(), self.heading.sin());
        let start = self.pos;
        for i in 1..=steps {
            self.points.push(start.add(dir.scale(len * i as f64 / steps as f64)));
        }
        self.pos = start.add(dir.scale(len));
        self
    }

    /// Constant-radius turn; positive `angle` turns left.
    fn arc(mut self, radius: f64, angle: f64) -> Self {
        let side = angle.signum();
        let center = self.pos.add(
            Point::new(-self.heading.sin(), self.heading.cos()).scale(side * radius),
        );
        let steps = (radius * angle.abs()).ceil().max(4.0) as usize;
        let start_angle = (self.pos.y - center.y).atan2(self.pos.x - center.x);
        for i in 1..=steps {
            let a = start_angle + angle * i as f64 / steps as f64;
            self.points
                .push(Point::new(center.x + radius * a.cos(), center.y + radius * a.sin()));
        }
        self.pos = *self.points.last().expect("non-empty");
        self.heading += angle;
        self
    }

    fn finish(self) -> Vec<Point> {
        self.points
    }
}

fn make(id: &str, name: &str, raw: &[Point], closed: bool, waypoints: Vec<Waypoint>) -> Track {
    let centerline = smooth_polyline(raw, DEFAULT_SPACING, closed).expect("builtin raw path is valid");
    let probe = build_track(TrackSpec {
        id: id.into(),
        name: name.into(),
        width: BUILTIN_WIDTH,
        closed,
        tile_count: 16,
        centerline: centerline.clone(),
        waypoints: vec![],
    })
    .expect("builtin centerline is valid");
    build_track(TrackSpec {
        id: id.into(),
        name: name.into(),
        width: BUILTIN_WIDTH,
        closed,
        tile_count: default_tile_count(probe.length()),
        centerline,
        waypoints,
    })
    .expect("builtin track is valid")
}

fn mirror(raw: &[Point]) -> Vec<Point> {
    raw.iter().map(|p| p.mirrored()).collect()
}

fn tight_left_raw() -> Vec<Point> {
    Turtle::new().straight(30.0).arc(8.0, FRAC_PI_2).straight(30.0).finish()
}

fn wide_left_raw() -> Vec<Point> {
    Turtle::new().straight(20.0).arc(25.0, FRAC_PI_2).straight(20.0).finish()
}

fn s_curve_left_right_raw() -> Vec<Point> {
    Turtle::new()
        .straight(15.0)
        .arc(15.0, FRAC_PI_2)
        .arc(15.0, -FRAC_PI_2)
        .straight(15.0)
        .finish()
}

/// Closed loop containing a wide left, tight left, tight right and wide right.
fn loop_raw() -> Vec<Point> {
    let mut pts = Turtle::new()
        .straight(50.0)
        .arc(20.0, FRAC_PI_2)
        .straight(10.0)
        .arc(8.0, FRAC_PI_2)
        .straight(6.0)
        .arc(8.0, -FRAC_PI_2)
        .straight(10.0)
        .arc(8.0, FRAC_PI_2)
        .straight(10.0)
        .arc(20.0, FRAC_PI_2)
        .straight(4.0)
        .arc(20.0, -FRAC_PI_2)
        .straight(4.0)
        .arc(10.0, FRAC_PI_2)
        .arc(10.0, FRAC_PI_2)
        .straight(14.0)
        .finish();
    // the path returns to the origin; the closing segment is implicit
    pts.pop();
    pts
}

/// The seven rapid-training tracks. Tracks 1/2, 3/4 and 5/6 are mirror pairs
/// across the x-axis; track 7 is a general-purpose closed loop.
pub fn builtin_rapid_tracks() -> Vec<Track> {
    let tight = tight_left_raw();
    let wide = wide_left_raw();
    let s_curve = s_curve_left_right_raw();
    vec![
        make("rapid-1", "Tight left", &tight, false, vec![]),
        make("rapid-2", "Tight right", &mirror(&tight), false, vec![]),
        make("rapid-3", "Wide left", &wide, false, vec![]),
        make("rapid-4", "Wide right", &mirror(&wide), false, vec![]),
        make("rapid-5", "S-curve left then right", &s_curve, false, vec![]),
        make("rapid-6", "S-curve right then left", &mirror(&s_curve), false, vec![]),
        make("rapid-7", "All-turns loop", &loop_raw(), true, vec![]),
    ]
}

/// Counter-clockwise stadium: 40 m straights joined by 15 m-radius half turns.
pub fn oval() -> Track {
    let mut raw = Turtle::new()
        .straight(40.0)
        .arc(15.0, 2.0 * FRAC_PI_2)
        .straight(40.0)
        .arc(15.0, 2.0 * FRAC_PI_2)
        .finish();
    raw.pop();
    make("oval", "Oval", &raw, true, vec![])
}

/// Point-to-point school-bus route with three pickups and a school dropoff.
pub fn bus_route() -> Track {
    let raw = Turtle::new()
        .straight(30.0)
        .arc(12.0, FRAC_PI_2)
        .straight(40.0)
        .arc(12.0, -FRAC_PI_2)
        .straight(40.0)
        .arc(15.0, -FRAC_PI_2)
        .straight(30.0)
        .finish();
    let base = make("bus-route", "Bus Route", &raw, false, vec![]);
    let len = base.length();
    let stops = [
        ("stop1", WaypointKind::Pickup, 0.15),
        ("stop2", WaypointKind::Pickup, 0.38),
        ("stop3", WaypointKind::Pickup, 0.60),
        ("school", WaypointKind::Dropoff, 0.82),
    ];
    let waypoints = stops
        .iter()
        .map(|&(name, kind, frac)| Waypoint::new(name, kind, base.point_at(frac * len)))
        .collect();
    let mut spec = base.to_spec();
    spec.waypoints = waypoints;
    build_track(spec).expect("bus route is valid")
}

/// Looks up any builtin course by id.
pub fn builtin_track(id: &str) -> Option<Track> {
    match id {
        "oval" => Some(oval()),
        "bus-route" => Some(bus_route()),
        _ => builtin_rapid_tracks().into_iter().find(|t| t.id() == id),
    }
}
