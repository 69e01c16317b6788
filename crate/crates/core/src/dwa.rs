//! Dynamic Window Approach baseline planner.
//!
//! Velocity pairs `(v, omega)` reachable within one control period are
//! sampled on a grid, each is rolled out as a constant-velocity unicycle arc,
//! and the best collision-free arc by
//! `alpha * heading + beta * clearance + gamma * v / v_max` is returned.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::simworld::{OccupancyGrid, ScenarioConfig, VehicleState};
use crate::util::wrap_angle;
use crate::{Error, Point2, Result, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DwaConfig {
    pub v_max: f64,
    pub v_min: f64,
    pub a_max: f64,
    pub omega_max: f64,
    pub omega_dot_max: f64,
    /// Control period that bounds the dynamic window, and rollout step.
    pub dt: f64,
    /// Rollout length in steps of `dt`.
    pub horizon: usize,
    pub samples_v: usize,
    pub samples_omega: usize,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Clearance saturates at this distance.
    pub cap_dist: f64,
    /// Points in the returned trajectory.
    pub prediction_steps: usize,
    /// Spacing in time of the returned points.
    pub setpoint_dt: f64,
}

impl DwaConfig {
    /// Limits taken from the scenario; rollout and output match its
    /// set-point period and the `tau_o` horizon.
    pub fn for_scenario(scenario: &ScenarioConfig, tau_o: usize) -> Self {
        Self {
            v_max: scenario.v_max,
            v_min: 0.0,
            a_max: scenario.a_max,
            omega_max: 1.0,
            omega_dot_max: 2.0,
            dt: scenario.dt,
            horizon: tau_o,
            samples_v: 11,
            samples_omega: 21,
            alpha: 0.8,
            beta: 0.1,
            gamma: 0.1,
            cap_dist: scenario.grid.extent(),
            prediction_steps: tau_o,
            setpoint_dt: scenario.dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("v_max", self.v_max),
            ("a_max", self.a_max),
            ("omega_max", self.omega_max),
            ("omega_dot_max", self.omega_dot_max),
            ("dt", self.dt),
            ("cap_dist", self.cap_dist),
            ("setpoint_dt", self.setpoint_dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive")));
            }
        }
        if !(self.v_min >= 0.0 && self.v_min <= self.v_max) {
            return Err(Error::domain("v_min must lie in [0, v_max]"));
        }
        if self.samples_v < 2 || self.samples_omega < 2 {
            return Err(Error::domain("at least two samples per axis are required"));
        }
        if self.horizon == 0 || self.prediction_steps == 0 {
            return Err(Error::domain("horizon and prediction_steps must be positive"));
        }
        Ok(())
    }
}

impl Default for DwaConfig {
    fn default() -> Self {
        Self::for_scenario(&ScenarioConfig::default(), 5)
    }
}

/// Planar unicycle state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
    pub omega: f64,
}

impl RobotState {
    /// Yaw rate of a single-track vehicle is `v / L * tan(steering)`.
    pub fn from_vehicle(s: &VehicleState, wheelbase: f64) -> Self {
        Self {
            x: s.x,
            y: s.y,
            heading: s.heading,
            v: s.speed,
            omega: s.speed / wheelbase * s.steering.tan(),
        }
    }

    pub fn position(&self) -> Point2 {
        [self.x, self.y]
    }
}

/// Inclusive velocity interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    fn new(current: f64, rate: f64, min: f64, max: f64) -> Self {
        let lo = (current - rate).max(min);
        let hi = (current + rate).min(max);
        if lo <= hi {
            Self { lo, hi }
        } else {
            // Current value outside the limits: pin to the nearest one.
            let v = current.clamp(min, max);
            Self { lo: v, hi: v }
        }
    }

    fn samples(&self, n: usize) -> Vec<f64> {
        if self.hi == self.lo {
            return vec![self.lo];
        }
        let span = self.hi - self.lo;
        (0..n)
            .map(|i| self.lo + span * (i as f64 / (n - 1) as f64))
            .collect()
    }
}

/// Velocities reachable within one control period, intersected with the
/// global limits. Returns `(v window, omega window)`.
pub fn dynamic_window(state: &RobotState, config: &DwaConfig) -> (Window, Window) {
    (
        Window::new(state.v, config.a_max * config.dt, config.v_min, config.v_max),
        Window::new(
            state.omega,
            config.omega_dot_max * config.dt,
            -config.omega_max,
            config.omega_max,
        ),
    )
}

fn arc_point(state: &RobotState, v: f64, omega: f64, t: f64) -> (Point2, f64) {
    let h0 = state.heading;
    if omega == 0.0 {
        let d = v * t;
        ([state.x + d * h0.cos(), state.y + d * h0.sin()], h0)
    } else {
        let h = h0 + omega * t;
        let r = v / omega;
        (
            [state.x + r * (h.sin() - h0.sin()), state.y - r * (h.cos() - h0.cos())],
            h,
        )
    }
}

/// Positions after `1..=steps` periods of constant `(v, omega)`.
pub fn simulate_arc(state: &RobotState, v: f64, omega: f64, steps: usize, dt: f64) -> Vec<Point2> {
    (1..=steps)
        .map(|k| arc_point(state, v, omega, k as f64 * dt).0)
        .collect()
}

/// Minimum distance from the trajectory to any blocking cell centre, capped
/// at `cap_dist`; zero when the polyline through the points enters a
/// blocking cell. Points outside the grid only see the cells inside it.
pub fn clearance(trajectory: &[Point2], og: &OccupancyGrid, cap_dist: f64) -> f64 {
    let blocking: Vec<Point2> = og
        .iter()
        .filter(|(_, _, c)| c.is_blocking())
        .map(|(r, c, _)| og.cell_center(r, c))
        .collect();
    clearance_to(trajectory, og, &blocking, cap_dist)
}

fn clearance_to(trajectory: &[Point2], og: &OccupancyGrid, blocking: &[Point2], cap: f64) -> f64 {
    let half = og.resolution / 2.0;
    let mut best = cap;
    for (i, p) in trajectory.iter().enumerate() {
        let a = if i == 0 { *p } else { trajectory[i - 1] };
        for b in blocking {
            if segment_hits_box(a, *p, *b, half) {
                return 0.0;
            }
            best = best.min((p[0] - b[0]).hypot(p[1] - b[1]));
        }
    }
    best
}

/// Slab test of segment `a`-`b` against the closed square of half-width
/// `half` around `c`.
fn segment_hits_box(a: Point2, b: Point2, c: Point2, half: f64) -> bool {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for k in 0..2 {
        let d = b[k] - a[k];
        let lo = c[k] - half - a[k];
        let hi = c[k] + half - a[k];
        if d == 0.0 {
            if lo > 0.0 || hi < 0.0 {
                return false;
            }
        } else {
            let (u, w) = if d > 0.0 { (lo / d, hi / d) } else { (hi / d, lo / d) };
            t0 = t0.max(u);
            t1 = t1.min(w);
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq)]
pub struct DwaPlan {
    /// `prediction_steps` world-frame positions.
    pub trajectory: Trajectory,
    pub v: f64,
    pub omega: f64,
    pub score: f64,
    /// Every candidate collided; `trajectory` holds the current position.
    pub stopped: bool,
}

struct Candidate {
    v: f64,
    omega: f64,
    score: f64,
}

impl Candidate {
    /// Higher score, then smaller |omega|, smaller v, smaller omega.
    fn better_than(&self, other: &Candidate) -> bool {
        let ord = other
            .score
            .total_cmp(&self.score)
            .then(self.omega.abs().total_cmp(&other.omega.abs()))
            .then(self.v.total_cmp(&other.v))
            .then(self.omega.total_cmp(&other.omega));
        ord == Ordering::Less
    }
}

/// Rollout from the current position, densified to 1/20 cell between points.
fn dense_rollout(state: &RobotState, v: f64, omega: f64, duration: f64, res: f64) -> Vec<Point2> {
    let n = ((v.abs() * duration) / (0.05 * res)).ceil().max(1.0) as usize;
    let dt = duration / n as f64;
    let mut path = vec![state.position()];
    path.extend(simulate_arc(state, v, omega, n, dt));
    path
}

/// Picks the best admissible arc towards `dest` (world frame).
pub fn plan(og: &OccupancyGrid, state: &RobotState, dest: Point2, config: &DwaConfig) -> Result<DwaPlan> {
    config.validate()?;
    let (vw, ow) = dynamic_window(state, config);
    let blocking: Vec<Point2> = og
        .iter()
        .filter(|(_, _, c)| c.is_blocking())
        .map(|(r, c, _)| og.cell_center(r, c))
        .collect();
    let duration = config.horizon as f64 * config.dt;

    let mut best: Option<Candidate> = None;
    for &v in &vw.samples(config.samples_v) {
        for &omega in &ow.samples(config.samples_omega) {
            let path = dense_rollout(state, v, omega, duration, og.resolution);
            let clear = clearance_to(&path, og, &blocking, config.cap_dist);
            if clear <= 0.0 {
                continue;
            }
            let (end, h_end) = arc_point(state, v, omega, duration);
            let bearing = (dest[1] - end[1]).atan2(dest[0] - end[0]);
            let heading = 1.0 - wrap_angle(bearing - h_end).abs() / std::f64::consts::PI;
            let score = config.alpha * heading
                + config.beta * clear / config.cap_dist
                + config.gamma * v / config.v_max;
            let c = Candidate { v, omega, score };
            if best.as_ref().is_none_or(|b| c.better_than(b)) {
                best = Some(c);
            }
        }
    }

    Ok(match best {
        Some(c) => DwaPlan {
            trajectory: Trajectory::new(simulate_arc(
                state,
                c.v,
                c.omega,
                config.prediction_steps,
                config.setpoint_dt,
            )),
            v: c.v,
            omega: c.omega,
            score: c.score,
            stopped: false,
        },
        None => DwaPlan {
            trajectory: Trajectory::new(vec![state.position(); config.prediction_steps]),
            v: 0.0,
            omega: 0.0,
            score: f64::NEG_INFINITY,
            stopped: true,
        },
    })
}
