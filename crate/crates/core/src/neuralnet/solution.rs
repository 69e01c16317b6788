use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{ConvWeights, DenseWeights, LstmWeights};
use super::topology::NetworkTopology;
use crate::{Error, Result};

/// Box constraint applied to every decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f32,
    pub upper: f32,
}

impl Bounds {
    pub fn new(lower: f32, upper: f32) -> Result<Self> {
        if !(lower < upper) || !lower.is_finite() || !upper.is_finite() {
            return Err(Error::domain(format!("invalid bounds [{lower}, {upper}]")));
        }
        Ok(Self { lower, upper })
    }

    pub fn contains(&self, v: f32) -> bool {
        v >= self.lower && v <= self.upper
    }

    pub fn clamp(&self, v: f32) -> f32 {
        v.clamp(self.lower, self.upper)
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            lower: -5.0,
            upper: 5.0,
        }
    }
}

/// Flat genome of one network individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionVector {
    weights: Vec<f32>,
    bounds: Bounds,
}

impl SolutionVector {
    /// Fails if any weight lies outside `bounds`.
    pub fn new(weights: Vec<f32>, bounds: Bounds) -> Result<Self> {
        if let Some(i) = weights.iter().position(|&w| !bounds.contains(w)) {
            return Err(Error::domain(format!(
                "weight {i} = {} outside [{}, {}]",
                weights[i], bounds.lower, bounds.upper
            )));
        }
        Ok(Self { weights, bounds })
    }

    /// Clamps every weight into `bounds`.
    pub fn clamped(mut weights: Vec<f32>, bounds: Bounds) -> Self {
        weights.iter_mut().for_each(|w| *w = bounds.clamp(*w));
        Self { weights, bounds }
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn into_weights(self) -> Vec<f32> {
        self.weights
    }

    /// Bitwise equality, distinguishing `0.0` from `-0.0`.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.weights.len() == other.weights.len()
            && self
                .weights
                .iter()
                .zip(&other.weights)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// All trainable tensors of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkWeights {
    pub conv: Vec<ConvWeights>,
    pub fc: Vec<DenseWeights>,
    pub branches: Vec<LstmWeights>,
    /// One `hidden -> 2` output map per branch.
    pub heads: Vec<DenseWeights>,
}

impl NetworkWeights {
    pub fn zeros(topology: &NetworkTopology) -> Result<Self> {
        topology.validate()?;
        let shapes = topology.conv_shapes()?;
        let conv = topology
            .conv_layers
            .iter()
            .zip(&shapes)
            .map(|(s, &(cin, _, _))| ConvWeights::zeros(s.filters, cin, s.kernel, s.stride))
            .collect();
        let mut fc = Vec::new();
        let mut inputs = topology.fc_input_len()?;
        for &units in &topology.fc_sizes {
            fc.push(DenseWeights::zeros(inputs, units));
            inputs = units;
        }
        let branches = (0..topology.tau_o)
            .map(|_| LstmWeights::zeros(inputs, topology.lstm_hidden))
            .collect();
        let heads = (0..topology.tau_o)
            .map(|_| DenseWeights::zeros(topology.lstm_hidden, 2))
            .collect();
        Ok(Self {
            conv,
            fc,
            branches,
            heads,
        })
    }

    /// Parameter slices in genome order: conv layers, FC layers, branch
    /// LSTMs, output maps. Weights precede biases within each layer.
    fn slices(&self) -> Vec<&[f32]> {
        let mut out: Vec<&[f32]> = Vec::new();
        for c in &self.conv {
            out.extend([&c.weights[..], &c.bias[..]]);
        }
        for d in &self.fc {
            out.extend([&d.weights[..], &d.bias[..]]);
        }
        for l in &self.branches {
            out.extend([&l.w_ih[..], &l.w_hh[..], &l.bias[..]]);
        }
        for d in &self.heads {
            out.extend([&d.weights[..], &d.bias[..]]);
        }
        out
    }

    fn slices_mut(&mut self) -> Vec<&mut [f32]> {
        let mut out: Vec<&mut [f32]> = Vec::new();
        for c in &mut self.conv {
            out.extend([&mut c.weights[..], &mut c.bias[..]]);
        }
        for d in &mut self.fc {
            out.extend([&mut d.weights[..], &mut d.bias[..]]);
        }
        for l in &mut self.branches {
            out.extend([&mut l.w_ih[..], &mut l.w_hh[..], &mut l.bias[..]]);
        }
        for d in &mut self.heads {
            out.extend([&mut d.weights[..], &mut d.bias[..]]);
        }
        out
    }
}

/// Packs structured weights into a genome.
pub fn flatten(
    topology: &NetworkTopology,
    weights: &NetworkWeights,
    bounds: Bounds,
) -> Result<SolutionVector> {
    let template = NetworkWeights::zeros(topology)?;
    let expected = template.slices();
    let actual = weights.slices();
    Error::check_len("layer count", expected.len(), actual.len())?;
    for (e, a) in expected.iter().zip(&actual) {
        Error::check_len("layer parameters", e.len(), a.len())?;
    }
    SolutionVector::new(actual.concat(), bounds)
}

/// Unpacks a genome into structured weights.
pub fn unflatten(topology: &NetworkTopology, theta: &SolutionVector) -> Result<NetworkWeights> {
    let mut weights = NetworkWeights::zeros(topology)?;
    let total: usize = weights.slices().iter().map(|s| s.len()).sum();
    Error::check_len("solution vector", total, theta.len())?;
    let mut offset = 0;
    for slot in weights.slices_mut() {
        let n = slot.len();
        slot.copy_from_slice(&theta.weights[offset..offset + n]);
        offset += n;
    }
    Ok(weights)
}

/// Draws every weight i.i.d. uniform in `[-0.5, 0.5]`, intersected with the bounds.
pub fn init_random(topology: &NetworkTopology, seed: u64, bounds: Bounds) -> Result<SolutionVector> {
    let n = topology.param_count()?;
    let lo = bounds.lower.max(-0.5);
    let hi = bounds.upper.min(0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    SolutionVector::new(weights, bounds)
}
