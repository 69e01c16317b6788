//! The three-element fitness vector of a predicted trajectory.
//!
//! - `l1`: sum of squared distances from each set-point to the destination
//! - `l2`: sum of heading-change rates between consecutive displacements
//! - `l3`: sum of step speeds that fall inside `[v_min, v_max]`
//!
//! `l1` and `l2` are minimized, `l3` is maximized.

use serde::{Deserialize, Serialize};

use crate::pareto::ObjectivePoint;
use crate::util::{wrap_angle, KahanSum};
use crate::{Error, Point2, Result, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessVector {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl FitnessVector {
    pub fn as_array(&self) -> [f64; 3] {
        [self.l1, self.l2, self.l3]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self {
            l1: v[0],
            l2: v[1],
            l3: v[2],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    /// Sentinel for individuals whose evaluation failed: ten times the worst
    /// observed `l1` and `l2`, and zero speed credit.
    pub fn worst_case<'a>(observed: impl IntoIterator<Item = &'a FitnessVector>) -> Self {
        let (mut l1, mut l2) = (0.0f64, 0.0f64);
        for f in observed.into_iter().filter(|f| f.is_finite()) {
            l1 = l1.max(f.l1);
            l2 = l2.max(f.l2);
        }
        Self {
            l1: if l1 > 0.0 { l1 * 10.0 } else { 1.0 },
            l2: if l2 > 0.0 { l2 * 10.0 } else { 1.0 },
            l3: 0.0,
        }
    }

    /// Component-wise mean with compensated summation.
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a FitnessVector>) -> Option<Self> {
        let mut acc = [KahanSum::default(); 3];
        let mut n = 0usize;
        for f in items {
            for (a, v) in acc.iter_mut().zip(f.as_array()) {
                a.add(v);
            }
            n += 1;
        }
        (n > 0).then(|| Self::from_array(acc.map(|a| a.value() / n as f64)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Minimize,
    Maximize,
}

/// Optimization direction of each fitness element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectiveDirections(pub Vec<Direction>);

impl Default for ObjectiveDirections {
    fn default() -> Self {
        Self(vec![Direction::Minimize, Direction::Minimize, Direction::Maximize])
    }
}

/// Maps a fitness vector into the all-minimize frame by negating maximized
/// coordinates.
pub fn to_minimization(f: &FitnessVector, dirs: &ObjectiveDirections) -> Result<ObjectivePoint> {
    Error::check_len("objective directions", 3, dirs.0.len())?;
    let values = f
        .as_array()
        .iter()
        .zip(&dirs.0)
        .map(|(&v, d)| match d {
            Direction::Minimize => v,
            Direction::Maximize => -v,
        })
        .collect();
    ObjectivePoint::new(values)
}

/// Where a trajectory starts and where it should go.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalContext {
    pub origin: Point2,
    pub initial_heading: f64,
    pub destination: Point2,
}

impl EvalContext {
    /// Context for a trajectory expressed relative to the ego position.
    pub fn ego_relative(dest_rel: Point2, initial_heading: f64) -> Self {
        Self {
            origin: [0.0, 0.0],
            initial_heading,
            destination: dest_rel,
        }
    }
}

/// Speed band and set-point period used when scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessParams {
    pub dt: f64,
    pub v_min: f64,
    pub v_max: f64,
}

/// Reconstructs heading-change rates and step speeds from positions.
///
/// The heading of step `k` is the direction of `p_k - p_{k-1}` (with
/// `p_0 = origin`); a zero-length step keeps the previous heading. Returns
/// `(|wrap(h_k - h_{k-1})| / dt, |p_k - p_{k-1}| / dt)` per step.
pub fn derive_velocities(
    traj: &Trajectory,
    origin: Point2,
    initial_heading: f64,
    dt: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(dt > 0.0) {
        return Err(Error::domain("dt must be positive"));
    }
    if traj.is_empty() {
        return Err(Error::domain("trajectory must have at least one point"));
    }
    let mut prev_p = origin;
    let mut prev_h = initial_heading;
    let mut v_delta = Vec::with_capacity(traj.len());
    let mut v_f = Vec::with_capacity(traj.len());
    for p in &traj.points {
        let (dx, dy) = (p[0] - prev_p[0], p[1] - prev_p[1]);
        let step = dx.hypot(dy);
        let h = if step > 0.0 { dy.atan2(dx) } else { prev_h };
        v_delta.push(wrap_angle(h - prev_h).abs() / dt);
        v_f.push(step / dt);
        prev_p = *p;
        prev_h = h;
    }
    Ok((v_delta, v_f))
}

/// Scores one trajectory.
pub fn eval_fitness(
    traj: &Trajectory,
    ctx: &EvalContext,
    params: &FitnessParams,
) -> Result<FitnessVector> {
    if !traj.is_finite() {
        return Err(Error::domain("non-finite trajectory"));
    }
    let (v_delta, v_f) = derive_velocities(traj, ctx.origin, ctx.initial_heading, params.dt)?;
    let d = ctx.destination;
    let l1: KahanSum = traj
        .points
        .iter()
        .map(|p| (p[0] - d[0]).powi(2) + (p[1] - d[1]).powi(2))
        .collect();
    let l2: KahanSum = v_delta.into_iter().collect();
    let l3: KahanSum = v_f
        .into_iter()
        .filter(|v| (params.v_min..=params.v_max).contains(v))
        .collect();
    Ok(FitnessVector {
        l1: l1.value(),
        l2: l2.value(),
        l3: l3.value(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn params() -> FitnessParams {
        FitnessParams {
            dt: 0.2,
            v_min: 2.0,
            v_max: 10.0,
        }
    }

    #[test]
    fn collinear_equal_spacing() {
        let t = Trajectory::new((1..=5).map(|k| [0.8 * k as f64, 0.0]).collect());
        let (vd, vf) = derive_velocities(&t, [0.0, 0.0], 0.0, 0.2).unwrap();
        assert!(vd.iter().all(|&v| v == 0.0));
        assert!(vf.iter().all(|&v| (v - 4.0).abs() < 1e-12));
    }

    #[test]
    fn stationary_has_zero_speed() {
        let t = Trajectory::new(vec![[0.0, 0.0]; 4]);
        let (vd, vf) = derive_velocities(&t, [0.0, 0.0], 0.3, 0.2).unwrap();
        assert_eq!(vf, vec![0.0; 4]);
        assert_eq!(vd, vec![0.0; 4]);
    }

    #[test]
    fn right_angle_turn() {
        let t = Trajectory::new(vec![[1.0, 0.0], [1.0, 1.0]]);
        let (vd, _) = derive_velocities(&t, [0.0, 0.0], 0.0, 1.0).unwrap();
        assert_eq!(vd[0], 0.0);
        assert!((vd[1] - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn at_destination_l1_is_zero() {
        let t = Trajectory::new(vec![[3.0, 1.0]; 5]);
        let f = eval_fitness(&t, &EvalContext::ego_relative([3.0, 1.0], 0.0), &params()).unwrap();
        assert_eq!(f.l1, 0.0);
    }

    #[test]
    fn straight_constant_speed() {
        let v = 5.0;
        let t = Trajectory::new((1..=5).map(|k| [v * 0.2 * k as f64, 0.0]).collect());
        let f = eval_fitness(&t, &EvalContext::ego_relative([5.0, 0.0], 0.0), &params()).unwrap();
        assert_eq!(f.l2, 0.0);
        assert!((f.l3 - 5.0 * v).abs() < 1e-12);
    }

    #[test]
    fn two_point_l1() {
        let t = Trajectory::new(vec![[1.0, 0.0], [2.0, 0.0]]);
        let f = eval_fitness(&t, &EvalContext::ego_relative([2.0, 0.0], 0.0), &params()).unwrap();
        assert_eq!(f.l1, 1.0);
    }

    #[test]
    fn out_of_band_speeds_earn_nothing() {
        // Steps of 0.1 m and 5 m at dt = 0.2 -> 0.5 and 25 m/s, both outside [2, 10].
        let t = Trajectory::new(vec![[0.1, 0.0], [5.1, 0.0]]);
        let f = eval_fitness(&t, &EvalContext::ego_relative([0.0, 0.0], 0.0), &params()).unwrap();
        assert_eq!(f.l3, 0.0);
    }

    #[test]
    fn non_finite_is_an_error() {
        let t = Trajectory::new(vec![[f64::NAN, 0.0]]);
        assert!(eval_fitness(&t, &EvalContext::ego_relative([0.0, 0.0], 0.0), &params()).is_err());
        assert!(eval_fitness(&Trajectory::new(vec![]), &EvalContext::ego_relative([0.0, 0.0], 0.0), &params()).is_err());
    }

    #[test]
    fn canonical_frame() {
        let f = FitnessVector::from_array([1.0, 2.0, 3.0]);
        let p = to_minimization(&f, &ObjectiveDirections::default()).unwrap();
        assert_eq!(p.values, vec![1.0, 2.0, -3.0]);
        let all_min = ObjectiveDirections(vec![Direction::Minimize; 3]);
        assert_eq!(to_minimization(&f, &all_min).unwrap().values, vec![1.0, 2.0, 3.0]);
        assert!(to_minimization(&f, &ObjectiveDirections(vec![Direction::Minimize])).is_err());
    }

    #[test]
    fn worst_case_sentinel() {
        let obs = [
            FitnessVector::from_array([2.0, 0.5, 3.0]),
            FitnessVector::from_array([4.0, 0.1, 1.0]),
        ];
        let w = FitnessVector::worst_case(&obs);
        assert_eq!(w.as_array(), [40.0, 5.0, 0.0]);
    }
}
