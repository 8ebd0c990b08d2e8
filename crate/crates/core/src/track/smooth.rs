//! Regularizing freehand strokes: corner cutting plus uniform resampling.

use super::{Point, TrackError, MIN_POINT_SEPARATION};

const CORNER_CUT_ROUNDS: usize = 2;

/// Two rounds of quarter/three-quarter corner cutting followed by uniform
/// arc-length resampling at (approximately) `spacing`.
///
/// Open polylines keep their first and last raw points. For closed input the
/// closing segment is implied; a duplicated final point is dropped.
pub fn smooth_polyline(raw: &[Point], spacing: f64, closed: bool) -> Result<Vec<Point>, TrackError> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(TrackError::InvalidParameter(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    if raw.iter().any(|p| !p.is_finite()) {
        return Err(TrackError::DegenerateInput("non-finite point".into()));
    }
    let mut pts = dedup(raw);
    if closed && pts.len() > 2 && pts[0].distance(pts[pts.len() - 1]) <= MIN_POINT_SEPARATION {
        pts.pop();
    }
    if pts.len() < 2 {
        return Err(TrackError::DegenerateInput(
            "need at least two distinct points".into(),
        ));
    }
    for _ in 0..CORNER_CUT_ROUNDS {
        pts = corner_cut(&pts, closed);
    }
    Ok(resample_uniform(&pts, spacing, closed))
}

fn dedup(raw: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::with_capacity(raw.len());
    for &p in raw {
        if out
            .last()
            .is_none_or(|q| q.distance(p) > MIN_POINT_SEPARATION)
        {
            out.push(p);
        }
    }
    out
}

fn corner_cut(pts: &[Point], closed: bool) -> Vec<Point> {
    let n = pts.len();
    let mut out = Vec::with_capacity(2 * n + 2);
    if !closed {
        out.push(pts[0]);
    }
    let segs = if closed { n } else { n - 1 };
    for i in 0..segs {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        out.push(a.lerp(b, 0.25));
        out.push(a.lerp(b, 0.75));
    }
    if !closed {
        out.push(pts[n - 1]);
    }
    out
}

/// Resamples at equal arc-length steps. The step is `length / round(length /
/// spacing)`, so open polylines end exactly on their last point.
pub fn resample_uniform(pts: &[Point], spacing: f64, closed: bool) -> Vec<Point> {
    let n = pts.len();
    let segs = if closed { n } else { n - 1 };
    let mut cum = Vec::with_capacity(segs + 1);
    cum.push(0.0);
    for i in 0..segs {
        cum.push(cum[i] + pts[i].distance(pts[(i + 1) % n]));
    }
    let length = cum[segs];
    let count = if closed {
        ((length / spacing).round() as usize).max(3)
    } else {
        ((length / spacing).round() as usize).max(1)
    };
    let step = length / count as f64;

    let samples = if closed { count } else { count + 1 };
    let mut out = Vec::with_capacity(samples);
    let mut seg = 0;
    for k in 0..samples {
        if !closed && k == count {
            out.push(pts[n - 1]);
            break;
        }
        let s = k as f64 * step;
        while seg + 1 < segs && cum[seg + 1] < s {
            seg += 1;
        }
        let a = pts[seg];
        let b = pts[(seg + 1) % n];
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { ((s - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(a.lerp(b, t));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Turning angle (degrees) at every interior vertex.
    fn turning_angles(pts: &[Point], closed: bool) -> Vec<f64> {
        let n = pts.len();
        let range: Vec<usize> = if closed { (0..n).collect() } else { (1..n - 1).collect() };
        range
            .into_iter()
            .map(|i| {
                let prev = pts[(i + n - 1) % n];
                let next = pts[(i + 1) % n];
                let u = pts[i].sub(prev);
                let v = next.sub(pts[i]);
                let c = (u.dot(v) / (u.norm() * v.norm())).clamp(-1.0, 1.0);
                c.acos().to_degrees()
            })
            .collect()
    }

    #[test]
    fn straight_line_is_fixed_point() {
        let out = smooth_polyline(&[Point::new(0.0, 0.0), Point::new(10.0, 0.0)], 2.0, false).unwrap();
        assert_eq!(out.len(), 6);
        for (i, p) in out.iter().enumerate() {
            assert!((p.x - 2.0 * i as f64).abs() < 1e-9, "{p:?}");
            assert_eq!(p.y, 0.0);
        }
        assert_eq!(out[5], Point::new(10.0, 0.0));
    }

    #[test]
    fn single_or_coincident_points_are_degenerate() {
        assert!(matches!(
            smooth_polyline(&[Point::new(0.0, 0.0)], 2.0, false),
            Err(TrackError::DegenerateInput(_))
        ));
        let same = [Point::new(1.0, 1.0); 5];
        assert!(matches!(
            smooth_polyline(&same, 2.0, true),
            Err(TrackError::DegenerateInput(_))
        ));
    }

    #[test]
    fn square_corners_are_rounded() {
        let square = [
            Point::new(0.0, 0.0),
            Point::new(10.0, 0.0),
            Point::new(10.0, 10.0),
            Point::new(0.0, 10.0),
        ];
        let out = smooth_polyline(&square, 1.0, true).unwrap();
        let worst = turning_angles(&out, true).into_iter().fold(0.0, f64::max);
        assert!(worst <= 60.0, "max turn {worst}");
    }

    #[test]
    fn open_endpoints_preserved() {
        let raw = [
            Point::new(0.0, 0.0),
            Point::new(5.0, 7.0),
            Point::new(12.0, -3.0),
            Point::new(20.0, 4.0),
        ];
        let out = smooth_polyline(&raw, 1.5, false).unwrap();
        assert_eq!(out[0], raw[0]);
        assert_eq!(*out.last().unwrap(), raw[3]);
    }

    #[test]
    fn resampling_is_uniform() {
        let raw = [Point::new(0.0, 0.0), Point::new(7.0, 0.0), Point::new(7.0, 9.0)];
        let out = smooth_polyline(&raw, 0.5, false).unwrap();
        let steps: Vec<f64> = out.windows(2).map(|w| w[0].distance(w[1])).collect();
        let max = steps.iter().cloned().fold(0.0, f64::max);
        // chords across the rounded corner are slightly shorter than the arc step
        assert!(max <= 0.5 * 1.05, "{max}");
        assert!(steps.iter().all(|&d| d > 0.4));
    }

    #[test]
    fn zero_spacing_rejected() {
        assert!(smooth_polyline(&[Point::new(0.0, 0.0), Point::new(1.0, 0.0)], 0.0, false).is_err());
    }
}
