mod common;

use neurotraj::dwa::{clearance, dynamic_window, plan, simulate_arc, DwaConfig, RobotState};
use neurotraj::simworld::{Cell, GridGeometry, OccupancyGrid};
use proptest::prelude::*;

fn empty() -> OccupancyGrid {
    let g = GridGeometry::new(16, 16, 1.0).unwrap();
    OccupancyGrid::filled(g, g.origin_for([0.0, 0.0]), Cell::Free)
}

#[test]
fn unit_circle_closes() {
    let s = RobotState {
        x: 2.0,
        y: -1.0,
        heading: 0.4,
        v: 1.0,
        omega: 1.0,
    };
    let n = 1000;
    let pts = simulate_arc(&s, 1.0, 1.0, n, 2.0 * std::f64::consts::PI / n as f64);
    let last = pts[n - 1];
    assert!((last[0] - 2.0).hypot(last[1] + 1.0) < 1e-6);
    // Every point lies on the circle of radius v / omega = 1.
    let center = [2.0 - 0.4f64.sin(), -1.0 + 0.4f64.cos()];
    assert!(pts.iter().all(|p| ((p[0] - center[0]).hypot(p[1] - center[1]) - 1.0).abs() < 1e-9));
}

#[test]
fn clearance_to_a_single_cell() {
    let mut og = empty();
    // Row 3, column 12 has its centre at (4.5, -4.5).
    og.set(3, 12, Cell::Occupied);
    let traj = [[0.0, 0.0], [1.0, -1.0], [2.0, -1.5]];
    let expected = (2.5f64).hypot(3.0);
    assert!((clearance(&traj, &og, 16.0) - expected).abs() < 1e-12);
    assert_eq!(clearance(&traj, &og, 2.0), 2.0);
}

#[test]
fn unknown_cells_block() {
    let mut og = empty();
    og.set(8, 8, Cell::Unknown);
    assert_eq!(clearance(&[[0.5, 0.5]], &og, 16.0), 0.0);
}

#[test]
fn gap_side_sets_the_turn_direction() {
    for left in [true, false] {
        let (og, robot, goal, cfg) = common::wall_with_gap(left);
        let p = plan(&og, &robot, goal, &cfg).unwrap();
        assert!(!p.stopped);
        assert_eq!(p.omega > 0.0, left, "omega {}", p.omega);
        assert!(p.trajectory.points.iter().any(|q| q[0] > 3.5), "plan does not enter the gap: {p:?}");
        assert!(clearance(&p.trajectory.points, &og, 16.0) > 0.0);
    }
}

#[test]
fn plans_are_deterministic() {
    let (og, robot, goal, cfg) = common::wall_with_gap(true);
    assert_eq!(plan(&og, &robot, goal, &cfg).unwrap(), plan(&og, &robot, goal, &cfg).unwrap());
}

proptest! {
    #[test]
    fn window_stays_inside_limits(v in 0.0f64..20.0, w in -3.0f64..3.0, a in 0.1f64..5.0) {
        let cfg = DwaConfig { a_max: a, ..DwaConfig::default() };
        let s = RobotState { x: 0.0, y: 0.0, heading: 0.0, v, omega: w };
        let (vw, ow) = dynamic_window(&s, &cfg);
        prop_assert!(vw.lo >= cfg.v_min && vw.hi <= cfg.v_max && vw.lo <= vw.hi);
        prop_assert!(ow.lo >= -cfg.omega_max && ow.hi <= cfg.omega_max && ow.lo <= ow.hi);
        prop_assert!(vw.hi - vw.lo <= 2.0 * a * cfg.dt + 1e-12);
    }

    #[test]
    fn empty_grid_plans_approach_the_goal(
        off in -1.5f64..1.5, v in 0.5f64..6.0, bearing in -3.1f64..3.1, dist in 15.0f64..40.0,
    ) {
        let heading = bearing + off;
        let s = RobotState { x: 0.0, y: 0.0, heading, v, omega: 0.0 };
        let goal = [dist * bearing.cos(), dist * bearing.sin()];
        let cfg = DwaConfig::default();
        let p = plan(&empty(), &s, goal, &cfg).unwrap();
        prop_assert!(!p.stopped);
        let end = *p.trajectory.points.last().unwrap();
        prop_assert!((goal[0] - end[0]).hypot(goal[1] - end[1]) < dist);
    }
}
