use serde::{Deserialize, Serialize};

use super::layers::conv_output_size;
use crate::simworld::GridGeometry;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// Fixed architecture shared by every individual of a population:
/// conv stack, fully connected stack, then one LSTM branch per predicted
/// set-point, each followed by a 2-unit output map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkTopology {
    pub conv_layers: Vec<ConvSpec>,
    pub fc_sizes: Vec<usize>,
    pub lstm_hidden: usize,
    /// Past steps consumed; the network sees `tau_i + 1` grids.
    pub tau_i: usize,
    /// Number of LSTM branches and predicted set-points.
    pub tau_o: usize,
    pub grid: GridGeometry,
    /// Inputs appended to the conv features (the relative destination).
    pub extra_inputs: usize,
}

impl NetworkTopology {
    /// Small topology sized for population-based training on a desktop.
    pub fn desk_scale(grid: GridGeometry, tau_i: usize, tau_o: usize) -> Self {
        Self {
            conv_layers: vec![
                ConvSpec {
                    filters: 8,
                    kernel: 5,
                    stride: 2,
                },
                ConvSpec {
                    filters: 16,
                    kernel: 3,
                    stride: 2,
                },
            ],
            fc_sizes: vec![64, 32],
            lstm_hidden: 32,
            tau_i,
            tau_o,
            grid,
            extra_inputs: 2,
        }
    }

    /// The full-size fully connected stack (1024 and 512 units).
    pub fn full_scale(grid: GridGeometry, tau_i: usize, tau_o: usize) -> Self {
        Self {
            fc_sizes: vec![1024, 512],
            lstm_hidden: 128,
            ..Self::desk_scale(grid, tau_i, tau_o)
        }
    }

    /// `(channels, height, width)` after each conv layer, input first.
    pub fn conv_shapes(&self) -> Result<Vec<(usize, usize, usize)>> {
        let mut shapes = vec![(1, self.grid.height, self.grid.width)];
        for (i, spec) in self.conv_layers.iter().enumerate() {
            let &(_, h, w) = shapes.last().unwrap();
            match (
                conv_output_size(h, spec.kernel, spec.stride),
                conv_output_size(w, spec.kernel, spec.stride),
            ) {
                (Some(oh), Some(ow)) if spec.filters > 0 => shapes.push((spec.filters, oh, ow)),
                _ => {
                    return Err(Error::domain(format!(
                        "conv layer {i} does not fit its {h}x{w} input"
                    )))
                }
            }
        }
        Ok(shapes)
    }

    /// Length of the flattened conv output plus the extra inputs.
    pub fn fc_input_len(&self) -> Result<usize> {
        let &(c, h, w) = self.conv_shapes()?.last().unwrap();
        Ok(c * h * w + self.extra_inputs)
    }

    /// Width of the per-step feature fed to the LSTM branches.
    pub fn feature_len(&self) -> usize {
        *self.fc_sizes.last().expect("validated topology has fc layers")
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau_o == 0 {
            return Err(Error::domain("topology needs at least one branch"));
        }
        if self.fc_sizes.is_empty() || self.fc_sizes.contains(&0) {
            return Err(Error::domain("fc_sizes must be non-empty and positive"));
        }
        if self.lstm_hidden == 0 {
            return Err(Error::domain("lstm_hidden must be positive"));
        }
        GridGeometry::new(self.grid.width, self.grid.height, self.grid.resolution)?;
        self.conv_shapes()?;
        Ok(())
    }

    /// Half the grid extent: the bound on predicted coordinates.
    pub fn output_range(&self) -> f64 {
        self.grid.extent() / 2.0
    }

    /// Total number of trainable scalars.
    pub fn param_count(&self) -> Result<usize> {
        self.validate()?;
        let shapes = self.conv_shapes()?;
        let conv: usize = self
            .conv_layers
            .iter()
            .zip(&shapes)
            .map(|(s, &(cin, _, _))| s.filters * cin * s.kernel * s.kernel + s.filters)
            .sum();
        let mut fc = 0;
        let mut inputs = self.fc_input_len()?;
        for &units in &self.fc_sizes {
            fc += inputs * units + units;
            inputs = units;
        }
        let hsz = self.lstm_hidden;
        let branch = 4 * hsz * (inputs + hsz) + 4 * hsz;
        let head = 2 * hsz + 2;
        Ok(conv + fc + self.tau_o * (branch + head))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_scale_shapes() {
        let t = NetworkTopology::desk_scale(GridGeometry::default(), 4, 5);
        assert_eq!(t.conv_shapes().unwrap(), vec![(1, 32, 32), (8, 14, 14), (16, 6, 6)]);
        assert_eq!(t.fc_input_len().unwrap(), 16 * 36 + 2);
        // conv: 8*25+8 + 16*8*9+16; fc: 578*64+64 + 64*32+32;
        // per branch: 4*32*(32+32)+128 and a 2x32+2 head.
        let expected = 208 + 1168 + 37056 + 2080 + 5 * (8320 + 66);
        assert_eq!(t.param_count().unwrap(), expected);
    }

    #[test]
    fn invalid_topologies() {
        let mut t = NetworkTopology::desk_scale(GridGeometry::default(), 4, 5);
        t.tau_o = 0;
        assert!(t.validate().is_err());
        let mut t = NetworkTopology::desk_scale(GridGeometry::new(4, 4, 1.0).unwrap(), 4, 5);
        assert!(t.validate().is_err());
        t.grid = GridGeometry::default();
        t.fc_sizes.clear();
        assert!(t.param_count().is_err());
    }
}
