use super::kinematics::{VehicleParams, VehicleState};
use super::road::Polyline;
use crate::util::wrap_angle;

/// Proportional speed gain, 1/s.
const SPEED_GAIN: f64 = 1.0;
/// Steering servo gain, 1/s.
const STEER_GAIN: f64 = 8.0;

/// Controls emitted by the reference driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriverCommand {
    pub accel: f64,
    pub steer_rate: f64,
    /// The lookahead point ran past the end of the centerline.
    pub finished: bool,
}

/// Pure-pursuit lane follower with proportional speed control.
///
/// Steers toward the centerline point `lookahead` meters ahead of the
/// vehicle's projection. Once that point would fall beyond the end of the
/// centerline the driver releases the controls and flags the episode end.
pub fn scripted_driver(
    centerline: &Polyline,
    state: &VehicleState,
    lookahead: f64,
    target_speed: f64,
    params: &VehicleParams,
) -> DriverCommand {
    let proj = centerline.project(state.position());
    if proj.s + lookahead > centerline.length() {
        return DriverCommand {
            accel: 0.0,
            steer_rate: 0.0,
            finished: true,
        };
    }
    let (target, _) = centerline.sample(proj.s + lookahead);
    let (dx, dy) = (target[0] - state.x, target[1] - state.y);
    let ld = dx.hypot(dy);
    let alpha = wrap_angle(dy.atan2(dx) - state.heading);
    let desired = if ld > 0.0 {
        (2.0 * params.wheelbase * alpha.sin() / ld).atan()
    } else {
        0.0
    }
    .clamp(-params.steering_max, params.steering_max);

    DriverCommand {
        accel: (SPEED_GAIN * (target_speed - state.speed)).clamp(-params.a_max, params.a_max),
        steer_rate: (STEER_GAIN * (desired - state.steering))
            .clamp(-params.steer_rate_max, params.steer_rate_max),
        finished: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Polyline {
        Polyline::straight([0.0, 0.0], 0.0, 100.0)
    }

    #[test]
    fn aligned_on_straight_line_holds_wheel() {
        let p = VehicleParams::default();
        let s = VehicleState::new(10.0, 0.0, 0.0, 5.0);
        let cmd = scripted_driver(&line(), &s, 6.0, 5.0, &p);
        assert_eq!(cmd.steer_rate, 0.0);
        assert_eq!(cmd.accel, 0.0);
        assert!(!cmd.finished);
    }

    #[test]
    fn left_offset_steers_right() {
        let p = VehicleParams::default();
        let s = VehicleState::new(10.0, 1.0, 0.0, 5.0);
        let cmd = scripted_driver(&line(), &s, 6.0, 5.0, &p);
        assert!(cmd.steer_rate < 0.0);
    }

    #[test]
    fn speed_error_sets_accel_sign_and_clamps() {
        let p = VehicleParams::default();
        let s = VehicleState::new(10.0, 0.0, 0.0, 2.0);
        assert!(scripted_driver(&line(), &s, 6.0, 3.0, &p).accel > 0.0);
        assert_eq!(scripted_driver(&line(), &s, 6.0, 30.0, &p).accel, p.a_max);
    }

    #[test]
    fn past_the_end_releases_controls() {
        let p = VehicleParams::default();
        let s = VehicleState::new(98.0, 0.5, 0.0, 5.0);
        let cmd = scripted_driver(&line(), &s, 6.0, 8.0, &p);
        assert!(cmd.finished);
        assert_eq!((cmd.accel, cmd.steer_rate), (0.0, 0.0));
    }
}
