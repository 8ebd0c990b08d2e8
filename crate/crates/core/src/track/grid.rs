//! Uniform bucket grid over centerline segments, used to answer
//! "is any segment within r of p" without scanning the whole track.

use super::Point;

#[derive(Clone, Debug)]
pub(crate) struct SegmentGrid {
    origin: Point,
    cell: f64,
    cols: usize,
    rows: usize,
    buckets: Vec<Vec<u32>>,
}

impl SegmentGrid {
    pub(crate) fn new(points: &[Point], closed: bool, width: f64) -> Self {
        let cell = width.max(4.0);
        let (mut min, mut max) = (points[0], points[0]);
        for p in points {
            min = Point::new(min.x.min(p.x), min.y.min(p.y));
            max = Point::new(max.x.max(p.x), max.y.max(p.y));
        }
        let origin = min.sub(Point::new(cell, cell));
        let cols = (((max.x - origin.x) / cell).ceil() as usize + 1).max(1);
        let rows = (((max.y - origin.y) / cell).ceil() as usize + 1).max(1);
        let mut grid = SegmentGrid {
            origin,
            cell,
            cols,
            rows,
            buckets: vec![Vec::new(); cols * rows],
        };
        let n = points.len();
        let segs = if closed { n } else { n - 1 };
        for i in 0..segs {
            let a = points[i];
            let b = points[(i + 1) % n];
            let (c0, r0) = grid.cell_of(Point::new(a.x.min(b.x), a.y.min(b.y)));
            let (c1, r1) = grid.cell_of(Point::new(a.x.max(b.x), a.y.max(b.y)));
            for r in r0..=r1 {
                for c in c0..=c1 {
                    grid.buckets[r * cols + c].push(i as u32);
                }
            }
        }
        grid
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        let c = ((p.x - self.origin.x) / self.cell).floor();
        let r = ((p.y - self.origin.y) / self.cell).floor();
        (
            (c.max(0.0) as usize).min(self.cols - 1),
            (r.max(0.0) as usize).min(self.rows - 1),
        )
    }

    /// True if `distance(segment)` is ≤ `reach` for some segment whose
    /// bounding box overlaps the query square around `p`.
    pub(crate) fn any_within(&self, p: Point, reach: f64, distance: impl Fn(usize) -> f64) -> bool {
        let lo_x = p.x - reach - self.origin.x;
        let lo_y = p.y - reach - self.origin.y;
        let hi_x = p.x + reach - self.origin.x;
        let hi_y = p.y + reach - self.origin.y;
        let extent_x = self.cols as f64 * self.cell;
        let extent_y = self.rows as f64 * self.cell;
        if hi_x < 0.0 || hi_y < 0.0 || lo_x >= extent_x || lo_y >= extent_y {
            return false;
        }
        let (c0, r0) = self.cell_of(Point::new(p.x - reach, p.y - reach));
        let (c1, r1) = self.cell_of(Point::new(p.x + reach, p.y + reach));
        for r in r0..=r1 {
            for c in c0..=c1 {
                for &seg in &self.buckets[r * self.cols + c] {
                    if distance(seg as usize) <= reach {
                        return true;
                    }
                }
            }
        }
        false
    }
}
