//! Independent reference implementations used by the integration and
//! acceptance tests. The oracles never call into the library; the `*_case`
//! helpers build a random instance, run both, and report the largest
//! absolute difference.
#![allow(dead_code)]

use neurotraj::neuralnet::{
    conv2d_forward, fc_forward, lstm_cell_forward, Activation, ConvWeights, DenseWeights, LstmWeights,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// O(n^2) front: members no other point dominates.
pub fn brute_front(points: &[Vec<f64>]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().any(|q| dominates(q, &points[i])))
        .collect()
}

/// Ranks by repeatedly removing the current front.
pub fn peel_ranks(points: &[Vec<f64>]) -> Vec<usize> {
    let mut rank = vec![usize::MAX; points.len()];
    let mut left: Vec<usize> = (0..points.len()).collect();
    let mut r = 0;
    while !left.is_empty() {
        let front: Vec<usize> = left
            .iter()
            .copied()
            .filter(|&i| !left.iter().any(|&j| dominates(&points[j], &points[i])))
            .collect();
        for &i in &front {
            rank[i] = r;
        }
        left.retain(|i| !front.contains(i));
        r += 1;
    }
    rank
}

/// Exact 2-D dominated area by inclusion-exclusion over all subsets.
/// Exponential; only for small inputs.
pub fn hv2_inclusion_exclusion(points: &[[f64; 2]], reference: [f64; 2]) -> f64 {
    let n = points.len();
    assert!(n <= 16);
    let mut total = 0.0;
    for mask in 1u32..(1 << n) {
        let (mut mx, mut my) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (i, p) in points.iter().enumerate() {
            if mask & (1 << i) != 0 {
                mx = mx.max(p[0]);
                my = my.max(p[1]);
            }
        }
        let vol = (reference[0] - mx).max(0.0) * (reference[1] - my).max(0.0);
        if mask.count_ones() % 2 == 1 {
            total += vol;
        } else {
            total -= vol;
        }
    }
    total
}

/// Monte-Carlo estimate of the volume dominated by `points` inside the box
/// `[lower, reference]`.
pub fn hv_monte_carlo(points: &[Vec<f64>], lower: &[f64], reference: &[f64], samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = reference.len();
    let box_vol: f64 = (0..dim).map(|k| reference[k] - lower[k]).product();
    let mut hits = 0usize;
    let mut s = vec![0.0; dim];
    for _ in 0..samples {
        for k in 0..dim {
            s[k] = rng.random_range(lower[k]..reference[k]);
        }
        if points.iter().any(|p| p.iter().zip(&s).all(|(a, b)| a <= b)) {
            hits += 1;
        }
    }
    box_vol * hits as f64 / samples as f64
}

pub fn sigmoid(x: f64) -> f64 {
    0.5 * (1.0 + (0.5 * x).tanh())
}

/// Valid convolution over a nested `[c][y][x]` input with
/// `[f][c][ky][kx]` kernels, followed by a sigmoid.
pub fn conv_oracle(
    input: &[Vec<Vec<f64>>],
    kernels: &[Vec<Vec<Vec<f64>>>],
    bias: &[f64],
    stride: usize,
) -> Vec<Vec<Vec<f64>>> {
    let (h, w) = (input[0].len(), input[0][0].len());
    let k = kernels[0][0].len();
    let oh = (h - k) / stride + 1;
    let ow = (w - k) / stride + 1;
    let mut out = vec![vec![vec![0.0; ow]; oh]; kernels.len()];
    for (f, kern) in kernels.iter().enumerate() {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bias[f];
                for (c, plane) in kern.iter().enumerate() {
                    for ky in 0..k {
                        for kx in 0..k {
                            acc += plane[ky][kx] * input[c][oy * stride + ky][ox * stride + kx];
                        }
                    }
                }
                out[f][oy][ox] = sigmoid(acc);
            }
        }
    }
    out
}

pub fn dense_oracle(x: &[f64], w: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    w.iter()
        .zip(b)
        .map(|(row, bi)| sigmoid(row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + bi))
        .collect()
}

/// Per-gate matrices, gates in order input, forget, candidate, output.
pub struct LstmOracle {
    pub wx: [Vec<Vec<f64>>; 4],
    pub wh: [Vec<Vec<f64>>; 4],
    pub b: [Vec<f64>; 4],
}

impl LstmOracle {
    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let gate = |g: usize, j: usize| {
            let a: f64 = self.wx[g][j].iter().zip(x).map(|(w, v)| w * v).sum();
            let r: f64 = self.wh[g][j].iter().zip(h).map(|(w, v)| w * v).sum();
            a + r + self.b[g][j]
        };
        let n = h.len();
        let mut h2 = vec![0.0; n];
        let mut c2 = vec![0.0; n];
        for j in 0..n {
            let i = sigmoid(gate(0, j));
            let f = sigmoid(gate(1, j));
            let g = gate(2, j).tanh();
            let o = sigmoid(gate(3, j));
            c2[j] = f * c[j] + i * g;
            h2[j] = o * c2[j].tanh();
        }
        (h2, c2)
    }
}

/// Algebraic least-squares circle fit; returns `(cx, cy, r)`.
pub fn fit_circle(points: &[[f64; 2]]) -> (f64, f64, f64) {
    // Minimize sum (x^2 + y^2 + D x + E y + F)^2.
    let mut m = [[0.0f64; 3]; 3];
    let mut v = [0.0f64; 3];
    for p in points {
        let row = [p[0], p[1], 1.0];
        let z = -(p[0] * p[0] + p[1] * p[1]);
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            v[i] += row[i] * z;
        }
    }
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d0 = det(m);
    let mut sol = [0.0; 3];
    for (k, s) in sol.iter_mut().enumerate() {
        let mut a = m;
        for i in 0..3 {
            a[i][k] = v[i];
        }
        *s = det(a) / d0;
    }
    let (cx, cy) = (-sol[0] / 2.0, -sol[1] / 2.0);
    (cx, cy, (cx * cx + cy * cy - sol[2]).sqrt())
}

pub fn random_points(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect()
}

fn w32(rng: &mut impl Rng) -> f32 {
    rng.random_range(-2.0f32..2.0)
}

fn max_diff(a: impl IntoIterator<Item = f64>, b: impl IntoIterator<Item = f64>) -> f64 {
    a.into_iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn conv_case(rng: &mut impl Rng) -> f64 {
    let c = rng.random_range(1..4);
    let k = rng.random_range(1..5);
    let stride = rng.random_range(1..3);
    let h = rng.random_range(k..k + 8);
    let w = rng.random_range(k..k + 8);
    let filters = rng.random_range(1..5);
    let input: Vec<Vec<Vec<f64>>> = (0..c)
        .map(|_| (0..h).map(|_| (0..w).map(|_| rng.random_range(-1.0..1.0)).collect()).collect())
        .collect();
    let kernels: Vec<Vec<Vec<Vec<f32>>>> = (0..filters)
        .map(|_| (0..c).map(|_| (0..k).map(|_| (0..k).map(|_| w32(rng)).collect()).collect()).collect())
        .collect();
    let bias: Vec<f32> = (0..filters).map(|_| w32(rng)).collect();

    let layer = ConvWeights {
        filters,
        in_channels: c,
        kernel: k,
        stride,
        weights: kernels.iter().flatten().flatten().flatten().copied().collect(),
        bias: bias.clone(),
    };
    let act = Activation::new(c, h, w, input.iter().flatten().flatten().copied().collect()).unwrap();
    let got = conv2d_forward(&act, &layer).unwrap();

    let k64: Vec<Vec<Vec<Vec<f64>>>> = kernels
        .iter()
        .map(|f| f.iter().map(|p| p.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect()).collect())
        .collect();
    let b64: Vec<f64> = bias.iter().map(|&b| b as f64).collect();
    let want = conv_oracle(&input, &k64, &b64, stride);
    assert_eq!(got.channels * got.height * got.width, want.len() * want[0].len() * want[0][0].len());
    max_diff(got.data, want.into_iter().flatten().flatten())
}

pub fn dense_case(rng: &mut impl Rng) -> f64 {
    let n_in = rng.random_range(1..40);
    let n_out = rng.random_range(1..20);
    let x: Vec<f64> = (0..n_in).map(|_| rng.random_range(-1.0..1.0)).collect();
    let rows: Vec<Vec<f32>> = (0..n_out).map(|_| (0..n_in).map(|_| w32(rng)).collect()).collect();
    let bias: Vec<f32> = (0..n_out).map(|_| w32(rng)).collect();
    let layer = DenseWeights {
        inputs: n_in,
        outputs: n_out,
        weights: rows.iter().flatten().copied().collect(),
        bias: bias.clone(),
    };
    let got = fc_forward(&x, &layer).unwrap();
    let r64: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
    let b64: Vec<f64> = bias.iter().map(|&v| v as f64).collect();
    max_diff(got, dense_oracle(&x, &r64, &b64))
}

pub fn lstm_case(rng: &mut impl Rng) -> f64 {
    let m = rng.random_range(1..12);
    let n = rng.random_range(1..10);
    let mut mat = |rows: usize, cols: usize| -> Vec<Vec<f32>> {
        (0..rows).map(|_| (0..cols).map(|_| w32(rng)).collect()).collect()
    };
    let wx: Vec<Vec<Vec<f32>>> = (0..4).map(|_| mat(n, m)).collect();
    let wh: Vec<Vec<Vec<f32>>> = (0..4).map(|_| mat(n, n)).collect();
    let b: Vec<Vec<f32>> = (0..4).map(|_| mat(1, n).remove(0)).collect();
    let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let h: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();

    let w = LstmWeights {
        inputs: m,
        hidden: n,
        w_ih: wx.iter().flatten().flatten().copied().collect(),
        w_hh: wh.iter().flatten().flatten().copied().collect(),
        bias: b.iter().flatten().copied().collect(),
    };
    let (gh, gc) = lstm_cell_forward(&x, &h, &c, &w).unwrap();

    let to64 = |g: &Vec<Vec<f32>>| -> Vec<Vec<f64>> {
        g.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect()
    };
    let oracle = LstmOracle {
        wx: std::array::from_fn(|g| to64(&wx[g])),
        wh: std::array::from_fn(|g| to64(&wh[g])),
        b: std::array::from_fn(|g| b[g].iter().map(|&v| v as f64).collect()),
    };
    let (wh2, wc2) = oracle.step(&x, &h, &c);
    max_diff(gh, wh2).max(max_diff(gc, wc2))
}

/// Drives at constant speed and steering for one full turn with dt = 0.01
/// and fits a circle to the path. Returns `(fitted radius, L / tan(delta))`.
pub fn steady_turn_radius(delta: f64) -> (f64, f64) {
    use neurotraj::simworld::{step_kinematics, VehicleParams, VehicleState};
    let params = VehicleParams::default();
    let mut s = VehicleState::new(0.0, 0.0, 0.0, 5.0);
    s.steering = delta;
    let expected = params.wheelbase / delta.tan();
    let steps = (2.0 * std::f64::consts::PI * expected / 5.0 / 0.01).ceil() as usize;
    let mut path = vec![s.position()];
    for _ in 0..steps {
        s = step_kinematics(&s, 0.0, 0.0, 0.01, &params).unwrap();
        path.push(s.position());
    }
    (fit_circle(&path).2, expected)
}

/// Largest distance from the initial heading line over a zero-steering run.
pub fn straight_run_deviation(heading: f64, steps: usize) -> f64 {
    use neurotraj::simworld::{step_kinematics, VehicleParams, VehicleState};
    let params = VehicleParams::default();
    let mut s = VehicleState::new(1.5, -2.0, heading, 3.0);
    let (x0, y0, h0) = (s.x, s.y, s.heading);
    let mut worst = 0.0f64;
    for _ in 0..steps {
        s = step_kinematics(&s, 0.5, 0.0, 0.01, &params).unwrap();
        worst = worst.max((-(h0.sin()) * (s.x - x0) + h0.cos() * (s.y - y0)).abs());
    }
    worst
}

/// A wall two cells thick across a 16x16 grid, 3 m ahead of a robot at the
/// origin, with a 3 m gap on one side (left when `left` is true) and the
/// goal beyond it.
pub fn wall_with_gap(
    left: bool,
) -> (
    neurotraj::simworld::OccupancyGrid,
    neurotraj::dwa::RobotState,
    [f64; 2],
    neurotraj::dwa::DwaConfig,
) {
    use neurotraj::dwa::{DwaConfig, RobotState};
    use neurotraj::simworld::{Cell, GridGeometry, OccupancyGrid};
    let g = GridGeometry::new(16, 16, 1.0).unwrap();
    let mut og = OccupancyGrid::filled(g, g.origin_for([0.0, 0.0]), Cell::Free);
    for row in 0..16 {
        let y = og.cell_center(row, 0)[1];
        let in_gap = if left { (1.0..4.0).contains(&y) } else { (-4.0..-1.0).contains(&y) };
        if !in_gap {
            og.set(row, 11, Cell::Occupied);
            og.set(row, 12, Cell::Occupied);
        }
    }
    let robot = RobotState {
        x: 0.0,
        y: 0.0,
        heading: 0.0,
        v: 3.0,
        omega: 0.0,
    };
    let goal = [10.0, if left { 2.5 } else { -2.5 }];
    let cfg = DwaConfig {
        v_max: 5.0,
        v_min: 0.0,
        a_max: 2.0,
        omega_max: 1.0,
        omega_dot_max: 5.0,
        dt: 0.2,
        horizon: 10,
        samples_v: 11,
        samples_omega: 21,
        alpha: 0.8,
        beta: 0.1,
        gamma: 0.1,
        cap_dist: 16.0,
        prediction_steps: 10,
        setpoint_dt: 0.2,
    };
    (og, robot, goal, cfg)
}
