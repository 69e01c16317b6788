//! Bundled 2D driving world.
//!
//! The ego follows a procedurally generated road under a scripted
//! pure-pursuit driver while lane-following traffic moves at constant speed.
//! Every sample period an ego-centered occupancy grid is rendered; a window
//! of past grids plus the driver's next few positions forms one
//! [`EpisodeRecord`]. All randomness is derived from the scenario seed.

mod dataset;
mod driver;
mod grid;
mod kinematics;
mod road;

pub use dataset::{
    decode_record, encode_record, generate_dataset, load_dataset, simulate_episodes, Dataset,
    DatasetManifest, EpisodeRecord, RecordHeader, FORMAT_VERSION, MAGIC,
};
pub use driver::{scripted_driver, DriverCommand};
pub use grid::{render_og, Cell, GridGeometry, OccupancyGrid, Shape, World};
pub use kinematics::{step_kinematics, VehicleParams, VehicleState};
pub use road::{Polyline, Projection, Road};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest integration step used by the simulator.
pub const MAX_SUBSTEP: f64 = 0.05;

/// Traffic and road parameters of one scenario type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Label carried into reports.
    pub name: String,
    pub n_participants: usize,
    pub v_max: f64,
    pub v_min: f64,
    pub a_max: f64,
    /// Probability that a generated road segment is straight.
    pub straight_fraction: f64,
    /// Mean turning angle of curved segments, in degrees.
    pub mean_curve_radius_deg: f64,
    pub road_width: f64,
    /// Number of sample periods simulated per episode.
    pub episode_length: usize,
    /// Sample period between grids and trajectory set-points, in seconds.
    pub dt: f64,
    pub seed: u64,
    pub grid: GridGeometry,
}

impl ScenarioConfig {
    /// Highway-like traffic.
    pub fn seamless() -> Self {
        Self {
            name: "seamless".into(),
            n_participants: 10,
            v_max: 13.88,
            v_min: 4.16,
            a_max: 2.0,
            straight_fraction: 0.60,
            mean_curve_radius_deg: 55.0,
            road_width: 10.0,
            episode_length: 20,
            dt: 0.2,
            seed: 0,
            grid: GridGeometry::default(),
        }
    }

    /// Denser, slower urban traffic.
    pub fn inner_city() -> Self {
        Self {
            name: "inner-city".into(),
            n_participants: 20,
            v_max: 8.33,
            v_min: 2.77,
            a_max: 2.0,
            straight_fraction: 0.45,
            mean_curve_radius_deg: 81.0,
            road_width: 8.0,
            ..Self::seamless()
        }
    }

    /// Small straight-road scenario used for quick training runs.
    pub fn toy_straight() -> Self {
        Self {
            name: "toy-straight".into(),
            n_participants: 3,
            v_max: 7.0,
            v_min: 2.0,
            a_max: 2.0,
            straight_fraction: 1.0,
            mean_curve_radius_deg: 0.0,
            road_width: 8.0,
            episode_length: 12,
            dt: 0.2,
            seed: 0,
            grid: GridGeometry {
                width: 16,
                height: 16,
                resolution: 1.0,
            },
        }
    }

    pub fn vehicle_params(&self) -> VehicleParams {
        VehicleParams {
            v_max: self.v_max,
            a_max: self.a_max,
            ..VehicleParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.v_min > 0.0 && self.v_min <= self.v_max) {
            return Err(Error::domain("scenario requires 0 < v_min <= v_max"));
        }
        if !(self.a_max > 0.0) {
            return Err(Error::domain("scenario requires a_max > 0"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::domain("scenario requires dt > 0"));
        }
        if !(0.0..=1.0).contains(&self.straight_fraction) {
            return Err(Error::domain("straight_fraction must lie in [0, 1]"));
        }
        if !(self.road_width > 0.0) {
            return Err(Error::domain("road_width must be positive"));
        }
        GridGeometry::new(self.grid.width, self.grid.height, self.grid.resolution)?;
        Ok(())
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::seamless()
    }
}
