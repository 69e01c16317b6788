//! Forward-only numeric kernels. Weights are stored as `f32` (the genome
//! precision); activations are carried in `f64`.

use serde::{Deserialize, Serialize};

use crate::util::sigmoid;
use crate::{Error, Result};

/// A dense `channels x height x width` activation, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Activation {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Activation {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        Error::check_len("activation", channels * height * width, data.len())?;
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }
}

/// Convolution filters laid out `[filter][in_channel][ky][kx]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvWeights {
    pub filters: usize,
    pub in_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl ConvWeights {
    pub fn zeros(filters: usize, in_channels: usize, kernel: usize, stride: usize) -> Self {
        Self {
            filters,
            in_channels,
            kernel,
            stride,
            weights: vec![0.0; filters * in_channels * kernel * kernel],
            bias: vec![0.0; filters],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Output spatial size of a valid-padding convolution, if the kernel fits.
pub fn conv_output_size(input: usize, kernel: usize, stride: usize) -> Option<usize> {
    if kernel == 0 || stride == 0 || input < kernel {
        None
    } else {
        Some((input - kernel) / stride + 1)
    }
}

/// Valid-padding cross-correlation plus bias, followed by a sigmoid.
pub fn conv2d_forward(input: &Activation, layer: &ConvWeights) -> Result<Activation> {
    Error::check_len("conv input channels", layer.in_channels, input.channels)?;
    let k = layer.kernel;
    Error::check_len(
        "conv weights",
        layer.filters * layer.in_channels * k * k,
        layer.weights.len(),
    )?;
    Error::check_len("conv bias", layer.filters, layer.bias.len())?;
    let (Some(oh), Some(ow)) = (
        conv_output_size(input.height, k, layer.stride),
        conv_output_size(input.width, k, layer.stride),
    ) else {
        return Err(Error::domain(format!(
            "kernel {k} / stride {} does not fit a {}x{} input",
            layer.stride, input.height, input.width
        )));
    };

    let mut out = vec![0.0; layer.filters * oh * ow];
    let plane = input.height * input.width;
    for f in 0..layer.filters {
        let fw = &layer.weights[f * layer.in_channels * k * k..(f + 1) * layer.in_channels * k * k];
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = layer.bias[f] as f64;
                for c in 0..layer.in_channels {
                    let src = &input.data[c * plane..(c + 1) * plane];
                    let w = &fw[c * k * k..(c + 1) * k * k];
                    for ky in 0..k {
                        let row = (oy * layer.stride + ky) * input.width + ox * layer.stride;
                        for kx in 0..k {
                            acc += w[ky * k + kx] as f64 * src[row + kx];
                        }
                    }
                }
                out[(f * oh + oy) * ow + ox] = sigmoid(acc);
            }
        }
    }
    Activation::new(layer.filters, oh, ow, out)
}

/// Fully connected weights laid out `[output][input]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseWeights {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl DenseWeights {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Affine map without activation.
    pub fn affine(&self, input: &[f64]) -> Result<Vec<f64>> {
        Error::check_len("dense input", self.inputs, input.len())?;
        Error::check_len("dense weights", self.inputs * self.outputs, self.weights.len())?;
        Error::check_len("dense bias", self.outputs, self.bias.len())?;
        Ok(self
            .weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, &b)| {
                row.iter()
                    .zip(input)
                    .fold(b as f64, |acc, (&w, &x)| acc + w as f64 * x)
            })
            .collect())
    }
}

/// Affine map followed by a sigmoid.
pub fn fc_forward(input: &[f64], layer: &DenseWeights) -> Result<Vec<f64>> {
    let mut z = layer.affine(input)?;
    z.iter_mut().for_each(|v| *v = sigmoid(*v));
    Ok(z)
}

/// LSTM cell parameters. Gate blocks are stacked in the order
/// input, forget, candidate, output; each block has `hidden` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmWeights {
    pub inputs: usize,
    pub hidden: usize,
    /// `[4 * hidden][inputs]`
    pub w_ih: Vec<f32>,
    /// `[4 * hidden][hidden]`
    pub w_hh: Vec<f32>,
    /// `[4 * hidden]`
    pub bias: Vec<f32>,
}

impl LstmWeights {
    pub fn zeros(inputs: usize, hidden: usize) -> Self {
        Self {
            inputs,
            hidden,
            w_ih: vec![0.0; 4 * hidden * inputs],
            w_hh: vec![0.0; 4 * hidden * hidden],
            bias: vec![0.0; 4 * hidden],
        }
    }

    pub fn param_count(&self) -> usize {
        self.w_ih.len() + self.w_hh.len() + self.bias.len()
    }
}

/// One LSTM step:
///
/// ```text
/// i = sig(W_i x + U_i h + b_i)    f = sig(W_f x + U_f h + b_f)
/// g = tanh(W_g x + U_g h + b_g)   o = sig(W_o x + U_o h + b_o)
/// c' = f * c + i * g              h' = o * tanh(c')
/// ```
pub fn lstm_cell_forward(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    w: &LstmWeights,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, m) = (w.hidden, w.inputs);
    Error::check_len("lstm input", m, x.len())?;
    Error::check_len("lstm hidden state", n, h_prev.len())?;
    Error::check_len("lstm cell state", n, c_prev.len())?;
    Error::check_len("lstm w_ih", 4 * n * m, w.w_ih.len())?;
    Error::check_len("lstm w_hh", 4 * n * n, w.w_hh.len())?;
    Error::check_len("lstm bias", 4 * n, w.bias.len())?;

    let pre: Vec<f64> = (0..4 * n)
        .map(|r| {
            let a = w.w_ih[r * m..(r + 1) * m]
                .iter()
                .zip(x)
                .fold(w.bias[r] as f64, |acc, (&wi, &xi)| acc + wi as f64 * xi);
            w.w_hh[r * n..(r + 1) * n]
                .iter()
                .zip(h_prev)
                .fold(a, |acc, (&wh, &hi)| acc + wh as f64 * hi)
        })
        .collect();

    let mut h = Vec::with_capacity(n);
    let mut c = Vec::with_capacity(n);
    for j in 0..n {
        let i_gate = sigmoid(pre[j]);
        let f_gate = sigmoid(pre[n + j]);
        let g = pre[2 * n + j].tanh();
        let o_gate = sigmoid(pre[3 * n + j]);
        let cj = f_gate * c_prev[j] + i_gate * g;
        c.push(cj);
        h.push(o_gate * cj.tanh());
    }
    Ok((h, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_conv_is_half() {
        let input = Activation::new(1, 6, 6, (0..36).map(|v| v as f64).collect()).unwrap();
        let out = conv2d_forward(&input, &ConvWeights::zeros(3, 1, 3, 1)).unwrap();
        assert_eq!((out.channels, out.height, out.width), (3, 4, 4));
        assert!(out.data.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn unit_kernel_is_elementwise_sigmoid() {
        let data = vec![-2.0, -0.5, 0.0, 0.5, 1.0, 3.0];
        let input = Activation::new(1, 2, 3, data.clone()).unwrap();
        let mut layer = ConvWeights::zeros(1, 1, 1, 1);
        layer.weights[0] = 1.0;
        let out = conv2d_forward(&input, &layer).unwrap();
        for (o, v) in out.data.iter().zip(&data) {
            assert_eq!(*o, sigmoid(*v));
        }
    }

    #[test]
    fn conv_shape_errors() {
        let input = Activation::new(1, 2, 2, vec![0.0; 4]).unwrap();
        assert!(conv2d_forward(&input, &ConvWeights::zeros(1, 1, 3, 1)).is_err());
        assert!(conv2d_forward(&input, &ConvWeights::zeros(1, 2, 1, 1)).is_err());
        assert_eq!(conv_output_size(16, 5, 2), Some(6));
        assert_eq!(conv_output_size(6, 3, 2), Some(2));
    }

    #[test]
    fn fc_zero_and_identity() {
        assert_eq!(fc_forward(&[1.0, -2.0, 3.0], &DenseWeights::zeros(3, 2)).unwrap(), vec![0.5, 0.5]);
        let mut id = DenseWeights::zeros(1, 1);
        id.weights[0] = 1.0;
        assert_eq!(fc_forward(&[0.0], &id).unwrap(), vec![0.5]);
        assert!(fc_forward(&[0.0, 1.0], &id).is_err());
    }

    #[test]
    fn lstm_zero_weights() {
        let w = LstmWeights::zeros(3, 4);
        let (h, c) = lstm_cell_forward(&[0.3, -1.0, 2.0], &[0.0; 4], &[0.0; 4], &w).unwrap();
        assert_eq!(h, vec![0.0; 4]);
        assert_eq!(c, vec![0.0; 4]);
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        let mut w = LstmWeights::zeros(2, 3);
        for j in 0..3 {
            w.bias[3 + j] = 100.0;
        }
        let c_prev = [0.4, -0.7, 0.9];
        let (h, c) = lstm_cell_forward(&[1.0, -1.0], &[0.2, 0.1, -0.3], &c_prev, &w).unwrap();
        for j in 0..3 {
            assert!((c[j] - c_prev[j]).abs() < 1e-12);
            assert!(h[j].abs() < 1.0);
        }
    }

    #[test]
    fn lstm_shape_errors() {
        let w = LstmWeights::zeros(2, 3);
        assert!(lstm_cell_forward(&[1.0], &[0.0; 3], &[0.0; 3], &w).is_err());
        assert!(lstm_cell_forward(&[1.0, 2.0], &[0.0; 2], &[0.0; 3], &w).is_err());
    }
}
