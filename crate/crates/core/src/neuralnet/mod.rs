//! Forward-only perception-planning network.
//!
//! Each grid of the input window passes through shared conv and fully
//! connected layers (sigmoid activations); the resulting feature sequence is
//! fed to `tau_o` independent LSTM branches, branch `k` predicting set-point
//! `k`. The whole weight set is one flat [`SolutionVector`].

mod checkpoint;
mod layers;
mod network;
mod solution;
mod topology;

pub use checkpoint::{blob_name, read_blob, write_blob, CheckpointHeader};
pub use layers::{
    conv2d_forward, conv_output_size, fc_forward, lstm_cell_forward, Activation, ConvWeights,
    DenseWeights, LstmWeights,
};
pub use network::{network_forward, Network, NetworkInput, Trajectory};
pub use solution::{flatten, init_random, unflatten, Bounds, NetworkWeights, SolutionVector};
pub use topology::{ConvSpec, NetworkTopology};
