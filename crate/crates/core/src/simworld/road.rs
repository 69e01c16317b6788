use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Point2, Result};

const SAMPLE_SPACING: f64 = 0.5;

/// Result of projecting a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arc length of the foot point.
    pub s: f64,
    /// Signed lateral offset, positive to the left of the travel direction.
    pub lateral: f64,
    pub distance: f64,
    pub foot: Point2,
    pub tangent: f64,
}

/// Piecewise-linear road centerline with cumulative arc lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    points: Vec<Point2>,
    arc: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<Point2>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::domain("polyline needs at least one point"));
        }
        let mut arc = Vec::with_capacity(points.len());
        let mut s = 0.0;
        arc.push(0.0);
        for w in points.windows(2) {
            s += dist(w[0], w[1]);
            arc.push(s);
        }
        Ok(Self { points, arc })
    }

    /// Straight polyline from `start` along `heading`, sampled densely.
    pub fn straight(start: Point2, heading: f64, length: f64) -> Self {
        let n = (length / SAMPLE_SPACING).ceil().max(1.0) as usize;
        let (c, s) = (heading.cos(), heading.sin());
        let points = (0..=n)
            .map(|i| {
                let d = length * i as f64 / n as f64;
                [start[0] + c * d, start[1] + s * d]
            })
            .collect();
        Self::new(points).expect("non-empty")
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().unwrap_or(&0.0)
    }

    /// Point and tangent heading at arc length `s`, clamped to the ends.
    pub fn sample(&self, s: f64) -> (Point2, f64) {
        if self.points.len() == 1 {
            return (self.points[0], 0.0);
        }
        let s = s.clamp(0.0, self.length());
        let i = match self.arc.binary_search_by(|a| a.total_cmp(&s)) {
            Ok(i) => i.min(self.points.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.points.len() - 2),
        };
        let (a, b) = (self.points[i], self.points[i + 1]);
        let seg = self.arc[i + 1] - self.arc[i];
        let t = if seg > 0.0 { (s - self.arc[i]) / seg } else { 0.0 };
        (
            [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])],
            (b[1] - a[1]).atan2(b[0] - a[0]),
        )
    }

    pub fn project(&self, p: Point2) -> Projection {
        self.project_range(p, 0, self.points.len().saturating_sub(1))
    }

    /// Projects onto segments `first..last` (segment `i` joins points `i`, `i+1`).
    fn project_range(&self, p: Point2, first: usize, last: usize) -> Projection {
        if self.points.len() == 1 {
            let d = dist(p, self.points[0]);
            return Projection {
                s: 0.0,
                lateral: 0.0,
                distance: d,
                foot: self.points[0],
                tangent: 0.0,
            };
        }
        let mut best: Option<Projection> = None;
        for i in first..last {
            let (a, b) = (self.points[i], self.points[i + 1]);
            let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 {
                (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let foot = [a[0] + t * dx, a[1] + t * dy];
            let d = dist(p, foot);
            if best.is_none_or(|b| d < b.distance) {
                let cross = dx * (p[1] - a[1]) - dy * (p[0] - a[0]);
                best = Some(Projection {
                    s: self.arc[i] + t * len2.sqrt(),
                    lateral: if cross >= 0.0 { d } else { -d },
                    distance: d,
                    foot,
                    tangent: dy.atan2(dx),
                });
            }
        }
        best.expect("at least one segment")
    }

    /// Indices of segments whose bounding box intersects `[lo, hi]`.
    pub(crate) fn segments_near(&self, lo: Point2, hi: Point2) -> Vec<usize> {
        (0..self.points.len().saturating_sub(1))
            .filter(|&i| {
                let (a, b) = (self.points[i], self.points[i + 1]);
                a[0].max(b[0]) >= lo[0]
                    && a[0].min(b[0]) <= hi[0]
                    && a[1].max(b[1]) >= lo[1]
                    && a[1].min(b[1]) <= hi[1]
            })
            .collect()
    }

    pub(crate) fn distance_over(&self, p: Point2, segments: &[usize]) -> f64 {
        segments
            .iter()
            .map(|&i| self.project_range(p, i, i + 1).distance)
            .fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn dist(a: Point2, b: Point2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// A single road: centerline plus constant width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Road {
    pub centerline: Polyline,
    pub width: f64,
}

impl Road {
    /// Procedurally generates a road of at least `length` meters starting at
    /// the origin heading along +x.
    ///
    /// Segments are straight with probability `straight_fraction`, otherwise
    /// circular curves whose turning angle averages `mean_curve_deg`.
    pub fn generate<R: Rng>(
        rng: &mut R,
        length: f64,
        width: f64,
        straight_fraction: f64,
        mean_curve_deg: f64,
    ) -> Self {
        let mut points = vec![[0.0, 0.0]];
        let mut heading: f64 = 0.0;
        let mut total = 0.0;
        // A straight lead-in keeps episode starts away from a curve entry.
        let mut first = true;
        while total < length {
            let straight = first || rng.random::<f64>() < straight_fraction;
            first = false;
            let last = *points.last().unwrap();
            if straight {
                let seg = rng.random_range(20.0..60.0);
                let n = (seg / SAMPLE_SPACING).ceil() as usize;
                for k in 1..=n {
                    let d = seg * k as f64 / n as f64;
                    points.push([last[0] + heading.cos() * d, last[1] + heading.sin() * d]);
                }
                total += seg;
            } else {
                let angle = (mean_curve_deg * rng.random_range(0.5..1.5)).to_radians();
                let radius = rng.random_range(40.0..100.0);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let arc_len = angle * radius;
                let n = (arc_len / SAMPLE_SPACING).ceil().max(1.0) as usize;
                // Center of the turning circle, to the left for positive sign.
                let cx = last[0] - sign * radius * heading.sin();
                let cy = last[1] + sign * radius * heading.cos();
                let phi0 = heading - sign * std::f64::consts::FRAC_PI_2;
                for k in 1..=n {
                    let phi = phi0 + sign * angle * k as f64 / n as f64;
                    points.push([cx + radius * phi.cos(), cy + radius * phi.sin()]);
                }
                heading += sign * angle;
                total += arc_len;
            }
        }
        Road {
            centerline: Polyline::new(points).expect("non-empty"),
            width,
        }
    }

    pub fn straight(length: f64, width: f64) -> Self {
        Road {
            centerline: Polyline::straight([0.0, 0.0], 0.0, length),
            width,
        }
    }

    /// Pose on the road at arc length `s` and signed lateral offset.
    pub fn pose_at(&self, s: f64, lateral: f64) -> (Point2, f64) {
        let (p, h) = self.centerline.sample(s);
        ([p[0] - lateral * h.sin(), p[1] + lateral * h.cos()], h)
    }
}
