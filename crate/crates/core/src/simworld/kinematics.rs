use serde::{Deserialize, Serialize};

use crate::util::wrap_angle;
use crate::{Error, Result};

/// Pose and actuator state of a single-track vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    /// Heading in `(-pi, pi]`, counter-clockwise from +x.
    pub heading: f64,
    /// Longitudinal speed, never negative.
    pub speed: f64,
    /// Front-wheel angle.
    pub steering: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, heading: f64, speed: f64) -> Self {
        Self {
            x,
            y,
            heading: wrap_angle(heading),
            speed,
            steering: 0.0,
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }

    fn is_finite(&self) -> bool {
        [self.x, self.y, self.heading, self.speed, self.steering]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Physical limits of the ego and traffic vehicles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub length: f64,
    pub width: f64,
    pub v_max: f64,
    pub a_max: f64,
    pub steering_max: f64,
    pub steer_rate_max: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wheelbase: 2.5,
            length: 4.5,
            width: 1.8,
            v_max: 13.88,
            a_max: 2.0,
            steering_max: 0.6,
            steer_rate_max: 2.0,
        }
    }
}

/// Advances the kinematic single-track model by one forward-Euler step.
///
/// Position and heading are integrated from the state at the start of the
/// step; speed and steering are then updated and clamped to the limits in
/// `params`.
pub fn step_kinematics(
    state: &VehicleState,
    accel: f64,
    steer_rate: f64,
    dt: f64,
    params: &VehicleParams,
) -> Result<VehicleState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::domain(format!("dt must be positive and finite, got {dt}")));
    }
    if !(params.wheelbase > 0.0) {
        return Err(Error::domain("wheelbase must be positive"));
    }
    if !state.is_finite() || !accel.is_finite() || !steer_rate.is_finite() {
        return Err(Error::domain("non-finite kinematic input"));
    }
    let v = state.speed;
    let h = state.heading;
    Ok(VehicleState {
        x: state.x + v * h.cos() * dt,
        y: state.y + v * h.sin() * dt,
        heading: wrap_angle(h + v / params.wheelbase * state.steering.tan() * dt),
        speed: (v + accel * dt).clamp(0.0, params.v_max),
        steering: (state.steering + steer_rate * dt)
            .clamp(-params.steering_max, params.steering_max),
    })
}
