use serde::{Deserialize, Serialize};

use super::layers::{conv2d_forward, fc_forward, lstm_cell_forward, Activation};
use super::solution::{unflatten, NetworkWeights, SolutionVector};
use super::topology::NetworkTopology;
use crate::simworld::{Cell, OccupancyGrid};
use crate::{Error, Point2, Result};

/// Predicted set-points relative to the ego position at prediction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<Point2>,
}

impl Trajectory {
    pub fn new(points: Vec<Point2>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().flatten().all(|v| v.is_finite())
    }
}

impl From<Vec<Point2>> for Trajectory {
    fn from(points: Vec<Point2>) -> Self {
        Self { points }
    }
}

fn cell_value(c: Cell) -> f64 {
    match c {
        Cell::Free => 0.0,
        Cell::Unknown => 0.5,
        Cell::Occupied => 1.0,
    }
}

/// Pre-encoded network input: one single-channel frame per grid plus the
/// relative destination.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkInput {
    pub frames: Vec<Activation>,
    pub dest_rel: Point2,
}

impl NetworkInput {
    pub fn from_grids(grids: &[OccupancyGrid], dest_rel: Point2) -> Result<Self> {
        let frames = grids
            .iter()
            .map(|g| {
                Activation::new(
                    1,
                    g.height,
                    g.width,
                    g.cells.iter().map(|&c| cell_value(c)).collect(),
                )
            })
            .collect::<Result<_>>()?;
        Ok(Self { frames, dest_rel })
    }
}

/// A network with its genome already unpacked, ready for repeated forward
/// passes.
#[derive(Debug, Clone)]
pub struct Network {
    topology: NetworkTopology,
    weights: NetworkWeights,
}

impl Network {
    pub fn new(topology: &NetworkTopology, theta: &SolutionVector) -> Result<Self> {
        Ok(Self {
            topology: topology.clone(),
            weights: unflatten(topology, theta)?,
        })
    }

    pub fn from_weights(topology: &NetworkTopology, weights: NetworkWeights) -> Result<Self> {
        // Validates shapes through the flatten path.
        super::solution::flatten(topology, &weights, super::Bounds::new(f32::MIN, f32::MAX)?)?;
        Ok(Self {
            topology: topology.clone(),
            weights,
        })
    }

    pub fn topology(&self) -> &NetworkTopology {
        &self.topology
    }

    /// Shared conv + FC features of one frame.
    fn frame_features(&self, frame: &Activation, dest: &[f64; 2]) -> Result<Vec<f64>> {
        let mut act = frame.clone();
        for layer in &self.weights.conv {
            act = conv2d_forward(&act, layer)?;
        }
        let mut v = act.data;
        v.extend_from_slice(dest);
        for layer in &self.weights.fc {
            v = fc_forward(&v, layer)?;
        }
        Ok(v)
    }

    /// Predicts `tau_o` set-points. Each branch runs its LSTM over the whole
    /// feature sequence from a zero state; its final hidden state is mapped
    /// to `R * tanh(W h + b)` with `R` half the grid extent.
    pub fn forward(&self, input: &NetworkInput) -> Result<Trajectory> {
        let t = &self.topology;
        Error::check_len("grid sequence", t.tau_i + 1, input.frames.len())?;
        let extent = t.grid.extent();
        let dest = [input.dest_rel[0] / extent, input.dest_rel[1] / extent];
        let features = input
            .frames
            .iter()
            .map(|f| {
                if (f.height, f.width) != (t.grid.height, t.grid.width) {
                    return Err(Error::domain(format!(
                        "frame is {}x{}, topology expects {}x{}",
                        f.height, f.width, t.grid.height, t.grid.width
                    )));
                }
                self.frame_features(f, &dest)
            })
            .collect::<Result<Vec<_>>>()?;

        let range = t.output_range();
        let points = self
            .weights
            .branches
            .iter()
            .zip(&self.weights.heads)
            .map(|(lstm, head)| {
                let mut h = vec![0.0; lstm.hidden];
                let mut c = vec![0.0; lstm.hidden];
                for x in &features {
                    (h, c) = lstm_cell_forward(x, &h, &c, lstm)?;
                }
                let out = head.affine(&h)?;
                Ok([range * out[0].tanh(), range * out[1].tanh()])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory { points })
    }
}

/// One-shot forward pass of the network encoded by `theta`.
pub fn network_forward(
    topology: &NetworkTopology,
    theta: &SolutionVector,
    grids: &[OccupancyGrid],
    dest_rel: Point2,
) -> Result<Trajectory> {
    Network::new(topology, theta)?.forward(&NetworkInput::from_grids(grids, dest_rel)?)
}
