use serde::{Deserialize, Serialize};

use super::kinematics::VehicleState;
use super::road::Road;
use crate::{Error, Point2, Result};

/// Occupancy state of one grid cell. The discriminants are the on-disk
/// byte values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Cell {
    Free = 0,
    Occupied = 1,
    Unknown = 2,
}

impl Cell {
    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Cell::Free),
            1 => Ok(Cell::Occupied),
            2 => Ok(Cell::Unknown),
            other => Err(Error::data(format!("invalid cell byte {other}"))),
        }
    }

    /// Anything but free space blocks motion.
    pub fn is_blocking(self) -> bool {
        self != Cell::Free
    }
}

/// Grid dimensions and resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    /// Meters per cell.
    pub resolution: f64,
}

impl GridGeometry {
    pub fn new(width: usize, height: usize, resolution: f64) -> Result<Self> {
        if width == 0 || height == 0 || !(resolution > 0.0) || !resolution.is_finite() {
            return Err(Error::domain(format!(
                "grid geometry must be positive, got {width}x{height} @ {resolution}"
            )));
        }
        Ok(Self {
            width,
            height,
            resolution,
        })
    }

    /// Larger side length in meters.
    pub fn extent(&self) -> f64 {
        self.width.max(self.height) as f64 * self.resolution
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    /// World coordinate of the lower-left corner of a grid centered on `center`.
    pub fn origin_for(&self, center: Point2) -> Point2 {
        [
            center[0] - self.width as f64 * self.resolution / 2.0,
            center[1] - self.height as f64 * self.resolution / 2.0,
        ]
    }
}

impl Default for GridGeometry {
    fn default() -> Self {
        Self {
            width: 32,
            height: 32,
            resolution: 1.0,
        }
    }
}

/// An axis-aligned occupancy grid. Row `r`, column `c` is stored at
/// `r * width + c`; rows grow along +y and columns along +x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    /// World coordinate of the corner of cell `(0, 0)`.
    pub origin: Point2,
    pub cells: Vec<Cell>,
}

impl OccupancyGrid {
    pub fn filled(geometry: GridGeometry, origin: Point2, cell: Cell) -> Self {
        Self {
            width: geometry.width,
            height: geometry.height,
            resolution: geometry.resolution,
            origin,
            cells: vec![cell; geometry.cell_count()],
        }
    }

    pub fn geometry(&self) -> GridGeometry {
        GridGeometry {
            width: self.width,
            height: self.height,
            resolution: self.resolution,
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Cell {
        self.cells[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, cell: Cell) {
        self.cells[row * self.width + col] = cell;
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Point2 {
        [
            self.origin[0] + (col as f64 + 0.5) * self.resolution,
            self.origin[1] + (row as f64 + 0.5) * self.resolution,
        ]
    }

    /// `(row, col)` of the cell containing `p`, if inside the grid.
    pub fn locate(&self, p: Point2) -> Option<(usize, usize)> {
        let c = ((p[0] - self.origin[0]) / self.resolution).floor();
        let r = ((p[1] - self.origin[1]) / self.resolution).floor();
        if c < 0.0 || r < 0.0 || c >= self.width as f64 || r >= self.height as f64 {
            return None;
        }
        Some((r as usize, c as usize))
    }

    pub fn count(&self, cell: Cell) -> usize {
        self.cells.iter().filter(|&&c| c == cell).count()
    }

    /// Iterates `(row, col, cell)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Cell)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .map(|(i, &c)| (i / self.width, i % self.width, c))
    }
}

/// Planar obstacle shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    /// Rectangle rotated by `yaw` around its center.
    Box {
        center: Point2,
        half_length: f64,
        half_width: f64,
        yaw: f64,
    },
    Circle { center: Point2, radius: f64 },
}

impl Shape {
    pub fn aabb(min: Point2, max: Point2) -> Self {
        Shape::Box {
            center: [(min[0] + max[0]) / 2.0, (min[1] + max[1]) / 2.0],
            half_length: (max[0] - min[0]) / 2.0,
            half_width: (max[1] - min[1]) / 2.0,
            yaw: 0.0,
        }
    }

    /// Footprint of a vehicle at the given pose.
    pub fn vehicle(position: Point2, heading: f64, length: f64, width: f64) -> Self {
        Shape::Box {
            center: position,
            half_length: length / 2.0,
            half_width: width / 2.0,
            yaw: heading,
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        match *self {
            Shape::Box {
                center,
                half_length,
                half_width,
                yaw,
            } => {
                let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
                let (c, s) = (yaw.cos(), yaw.sin());
                let u = c * dx + s * dy;
                let v = -s * dx + c * dy;
                u.abs() <= half_length && v.abs() <= half_width
            }
            Shape::Circle { center, radius } => {
                (p[0] - center[0]).hypot(p[1] - center[1]) <= radius
            }
        }
    }

    /// Conservative axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Point2, Point2) {
        match *self {
            Shape::Box {
                center,
                half_length,
                half_width,
                yaw,
            } => {
                let (c, s) = (yaw.cos().abs(), yaw.sin().abs());
                let ex = half_length * c + half_width * s;
                let ey = half_length * s + half_width * c;
                ([center[0] - ex, center[1] - ey], [center[0] + ex, center[1] + ey])
            }
            Shape::Circle { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
        }
    }

    fn corners(&self) -> Option<[Point2; 4]> {
        match *self {
            Shape::Box {
                center,
                half_length,
                half_width,
                yaw,
            } => {
                let (c, s) = (yaw.cos(), yaw.sin());
                let pt = |u: f64, v: f64| [center[0] + c * u - s * v, center[1] + s * u + c * v];
                Some([
                    pt(half_length, half_width),
                    pt(-half_length, half_width),
                    pt(-half_length, -half_width),
                    pt(half_length, -half_width),
                ])
            }
            Shape::Circle { .. } => None,
        }
    }

    /// Overlap test between two shapes: separating axes for box pairs,
    /// bounding boxes otherwise.
    pub fn intersects(&self, other: &Shape) -> bool {
        match (self.corners(), other.corners()) {
            (Some(a), Some(b)) => !has_separating_axis(&a, &b) && !has_separating_axis(&b, &a),
            _ => {
                let ((a0, a1), (b0, b1)) = (self.bounds(), other.bounds());
                a0[0] <= b1[0] && b0[0] <= a1[0] && a0[1] <= b1[1] && b0[1] <= a1[1]
            }
        }
    }
}

fn has_separating_axis(a: &[Point2; 4], b: &[Point2; 4]) -> bool {
    for i in 0..2 {
        let e = [a[i + 1][0] - a[i][0], a[i + 1][1] - a[i][1]];
        let axis = [-e[1], e[0]];
        let proj = |p: &Point2| p[0] * axis[0] + p[1] * axis[1];
        let (amin, amax) = minmax(a.iter().map(proj));
        let (bmin, bmax) = minmax(b.iter().map(proj));
        if amax < bmin || bmax < amin {
            return true;
        }
    }
    false
}

fn minmax(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

/// Static snapshot of everything the renderer can see.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct World {
    /// Cells farther than half the road width from the centerline are unknown.
    /// Without a road every cell counts as drivable.
    pub road: Option<Road>,
    pub obstacles: Vec<Shape>,
}

/// Renders an ego-centered, world-aligned occupancy grid.
///
/// A cell is occupied iff its center lies inside an obstacle; otherwise it is
/// unknown when its center is off the road, and free when on it. The cell
/// under the ego is always free.
pub fn render_og(world: &World, ego: &VehicleState, geometry: GridGeometry) -> OccupancyGrid {
    let origin = geometry.origin_for(ego.position());
    let mut grid = OccupancyGrid::filled(geometry, origin, Cell::Free);
    let hi = [
        origin[0] + geometry.width as f64 * geometry.resolution,
        origin[1] + geometry.height as f64 * geometry.resolution,
    ];

    let visible: Vec<&Shape> = world
        .obstacles
        .iter()
        .filter(|s| {
            let (a, b) = s.bounds();
            a[0] <= hi[0] && b[0] >= origin[0] && a[1] <= hi[1] && b[1] >= origin[1]
        })
        .collect();

    let road = world.road.as_ref().map(|road| {
        let half = road.width / 2.0;
        let segs = road.centerline.segments_near(
            [origin[0] - half, origin[1] - half],
            [hi[0] + half, hi[1] + half],
        );
        (road, half, segs)
    });

    for row in 0..geometry.height {
        for col in 0..geometry.width {
            let p = grid.cell_center(row, col);
            let cell = if visible.iter().any(|s| s.contains(p)) {
                Cell::Occupied
            } else if let Some((road, half, segs)) = &road {
                if road.centerline.distance_over(p, segs) > *half {
                    Cell::Unknown
                } else {
                    Cell::Free
                }
            } else {
                Cell::Free
            };
            grid.set(row, col, cell);
        }
    }
    if let Some((r, c)) = grid.locate(ego.position()) {
        grid.set(r, c, Cell::Free);
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ego() -> VehicleState {
        VehicleState::new(0.0, 0.0, 0.0, 0.0)
    }

    #[test]
    fn empty_world_free_inside_road_unknown_outside() {
        let road = Road {
            centerline: super::super::road::Polyline::straight([-100.0, 0.0], 0.0, 200.0),
            width: 8.0,
        };
        let world = World {
            road: Some(road),
            obstacles: vec![],
        };
        let g = render_og(&world, &ego(), GridGeometry::default());
        assert_eq!(g.count(Cell::Occupied), 0);
        for (r, c, cell) in g.iter() {
            let y = g.cell_center(r, c)[1];
            let expected = if y.abs() <= 4.0 { Cell::Free } else { Cell::Unknown };
            assert_eq!(cell, expected, "cell ({r},{c})");
        }
        // Rows with centers at y = -3.5 ..= 3.5 are on the road.
        assert_eq!(g.count(Cell::Free), 8 * 32);
    }

    #[test]
    fn two_meter_box_covers_four_cells() {
        // Ego at the origin, 32x32 @ 1 m: origin (-16, -16). The box spans
        // x in [4, 6], y in [2, 4] -> columns 20, 21 and rows 18, 19.
        let world = World {
            road: None,
            obstacles: vec![Shape::aabb([4.0, 2.0], [6.0, 4.0])],
        };
        let g = render_og(&world, &ego(), GridGeometry::default());
        let occupied: Vec<(usize, usize)> = g
            .iter()
            .filter(|&(_, _, c)| c == Cell::Occupied)
            .map(|(r, c, _)| (r, c))
            .collect();
        assert_eq!(occupied, vec![(18, 20), (18, 21), (19, 20), (19, 21)]);
    }

    #[test]
    fn obstacle_outside_extent_is_ignored() {
        let geometry = GridGeometry::default();
        let empty = render_og(&World::default(), &ego(), geometry);
        let behind = World {
            road: None,
            obstacles: vec![Shape::aabb([-40.0, -1.0], [-30.0, 1.0])],
        };
        assert_eq!(render_og(&behind, &ego(), geometry), empty);
    }

    #[test]
    fn ego_cell_is_free() {
        let world = World {
            road: None,
            obstacles: vec![Shape::Circle {
                center: [0.0, 0.0],
                radius: 3.0,
            }],
        };
        let g = render_og(&world, &ego(), GridGeometry::default());
        assert_eq!(g.get(16, 16), Cell::Free);
        assert_eq!(g.get(15, 15), Cell::Occupied);
    }

    #[test]
    fn rotated_boxes_intersect() {
        let a = Shape::vehicle([0.0, 0.0], 0.0, 4.0, 2.0);
        let b = Shape::vehicle([3.5, 1.5], 0.6, 4.0, 2.0);
        let c = Shape::vehicle([0.0, 3.0], 0.0, 4.0, 2.0);
        assert!(a.intersects(&b));
        assert!(!a.intersects(&c));
    }

    #[test]
    fn cell_byte_codec() {
        for c in [Cell::Free, Cell::Occupied, Cell::Unknown] {
            assert_eq!(Cell::from_byte(c as u8).unwrap(), c);
        }
        assert!(Cell::from_byte(3).is_err());
    }
}
