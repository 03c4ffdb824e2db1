//! Oracles shared by the integration tests, written without the crate's
//! own matrix code.

#![allow(dead_code)]

use mpdqn::nn::{Activation, DenseNet, Matrix};
use rand::Rng;

/// Plain-loop forward pass of every row of `input`, with the sign pattern of
/// every hidden pre-activation.
pub struct Probe {
    pub out: Vec<Vec<f64>>,
    pub pattern: Vec<bool>,
}

pub fn naive_forward(net: &DenseNet, input: &[Vec<f64>]) -> Probe {
    let mut out = Vec::new();
    let mut pattern = Vec::new();
    for row in input {
        let mut a = row.clone();
        for layer in net.layers() {
            let mut z = layer.biases.clone();
            for (i, &ai) in a.iter().enumerate() {
                for (zj, &w) in z.iter_mut().zip(layer.weights.row(i)) {
                    *zj += ai * w;
                }
            }
            a = match layer.activation {
                Activation::Linear => z,
                Activation::Relu => {
                    pattern.extend(z.iter().map(|&v| v > 0.0));
                    z.iter().map(|&v| v.max(0.0)).collect()
                }
                Activation::LeakyRelu(slope) => {
                    pattern.extend(z.iter().map(|&v| v > 0.0));
                    z.iter().map(|&v| if v > 0.0 { v } else { slope * v }).collect()
                }
            };
        }
        out.push(a);
    }
    Probe { out, pattern }
}

pub fn weighted_sum(out: &[Vec<f64>], upstream: &[Vec<f64>]) -> f64 {
    out.iter()
        .zip(upstream)
        .flat_map(|(o, u)| o.iter().zip(u).map(|(a, b)| a * b))
        .sum()
}

/// Central difference of `f` at `theta`, using the largest step from
/// 1e-2 down to 1e-7 whose endpoints share the base activation pattern.
/// Inside one pattern a piecewise-linear net is linear in any single
/// parameter or input, so the difference is exact up to rounding. `None`
/// means every step straddles a kink.
pub fn central_difference(theta: f64, base: &[bool], mut f: impl FnMut(f64) -> (f64, Vec<bool>)) -> Option<f64> {
    let mut h = 1e-2;
    while h >= 1e-7 {
        let (plus, p1) = f(theta + h);
        let (minus, p2) = f(theta - h);
        if p1 == base && p2 == base {
            return Some((plus - minus) / (2.0 * h));
        }
        h /= 10.0;
    }
    None
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub fn uniform_rows<R: Rng>(rng: &mut R, rows: usize, cols: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(lo..hi)).collect())
        .collect()
}

pub fn to_matrix(rows: &[Vec<f64>]) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

/// Result of comparing a net's backward pass against finite differences.
#[derive(Debug, Default)]
pub struct GradCheck {
    pub checked: usize,
    pub skipped: usize,
    pub max_rel: f64,
}

impl GradCheck {
    fn record(&mut self, analytic: f64, numeric: Option<f64>) {
        match numeric {
            Some(n) => {
                self.checked += 1;
                self.max_rel = self.max_rel.max(rel_err(analytic, n, REL_FLOOR));
            }
            None => self.skipped += 1,
        }
    }

    pub fn merge(&mut self, other: GradCheck) {
        self.checked += other.checked;
        self.skipped += other.skipped;
        self.max_rel = self.max_rel.max(other.max_rel);
    }
}

/// Denominator floor for relative errors: gradients smaller than this are
/// compared in absolute terms scaled by it.
pub const REL_FLOOR: f64 = 1e-6;

/// Checks every parameter and input gradient of `net` for the loss
/// `Σ upstream ⊙ net(input)`.
pub fn check_net(net: &DenseNet, input: &[Vec<f64>], upstream: &[Vec<f64>]) -> GradCheck {
    let (_, cache) = net.forward(&to_matrix(input)).unwrap();
    let (grads, input_grads) = net.backward(&cache, &to_matrix(upstream)).unwrap();
    let analytic: Vec<f64> = grads.slices().flat_map(|s| s.iter().copied()).collect();
    let mut report = GradCheck::default();
    let base = naive_forward(net, input).pattern;

    let mut probe_net = net.clone();
    let slice_lens: Vec<usize> = net.param_slices().map(|s| s.len()).collect();
    let mut flat = 0;
    for (si, &len) in slice_lens.iter().enumerate() {
        for i in 0..len {
            let theta = net.param_slices().nth(si).unwrap()[i];
            let numeric = central_difference(theta, &base, |v| {
                probe_net.param_slices_mut().nth(si).unwrap()[i] = v;
                let p = naive_forward(&probe_net, input);
                (weighted_sum(&p.out, upstream), p.pattern)
            });
            probe_net.param_slices_mut().nth(si).unwrap()[i] = theta;
            report.record(analytic[flat], numeric);
            flat += 1;
        }
    }

    let mut probe_input = input.to_vec();
    for r in 0..input.len() {
        for c in 0..input[r].len() {
            let theta = input[r][c];
            let numeric = central_difference(theta, &base, |v| {
                probe_input[r][c] = v;
                let p = naive_forward(net, &probe_input);
                (weighted_sum(&p.out, upstream), p.pattern)
            });
            probe_input[r][c] = theta;
            report.record(input_grads[(r, c)], numeric);
        }
    }
    report
}
