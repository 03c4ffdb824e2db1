//! Action-parameter policy and exploration.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::nn::{Activation, DenseNet, ForwardCache, Matrix, NetGrads};

/// Fixed linear map `s ↦ s·W + b` added to the actor output. Never trained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passthrough {
    weights: Matrix,
    bias: Vec<f64>,
}

impl Passthrough {
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        ensure_dim("Passthrough bias", weights.cols(), bias.len())?;
        Ok(Self { weights, bias })
    }

    /// A passthrough emitting the constant `bias` regardless of state.
    pub fn constant(state_dim: usize, bias: Vec<f64>) -> Self {
        Self {
            weights: Matrix::zeros(state_dim, bias.len()),
            bias,
        }
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn apply(&self, states: &Matrix) -> Result<Matrix> {
        let mut out = states.matmul(&self.weights)?;
        for r in 0..out.rows() {
            out.row_mut(r).iter_mut().zip(&self.bias).for_each(|(o, b)| *o += b);
        }
        Ok(out)
    }
}

/// Deterministic actor `x(s) = clamp(net(s) + passthrough(s))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actor {
    net: DenseNet,
    passthrough: Option<Passthrough>,
    bounds: Vec<(f64, f64)>,
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        hidden: &[usize],
        bounds: Vec<(f64, f64)>,
        activation: Activation,
        passthrough: Option<Passthrough>,
        rng: &mut R,
    ) -> Result<Self> {
        let net = DenseNet::new(state_dim, hidden, bounds.len(), activation, rng)?;
        Self::from_parts(net, passthrough, bounds)
    }

    pub fn from_parts(net: DenseNet, passthrough: Option<Passthrough>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        ensure_dim("Actor output", bounds.len(), net.output_dim())?;
        if let Some(p) = &passthrough {
            ensure_dim("Passthrough input", net.input_dim(), p.weights.rows())?;
            ensure_dim("Passthrough output", net.output_dim(), p.weights.cols())?;
        }
        Ok(Self {
            net,
            passthrough,
            bounds,
        })
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    /// The network as a one-element slice, for the optimizer helpers.
    pub fn nets_mut(&mut self) -> &mut [DenseNet] {
        std::slice::from_mut(&mut self.net)
    }

    pub fn nets(&self) -> &[DenseNet] {
        std::slice::from_ref(&self.net)
    }

    pub fn passthrough(&self) -> Option<&Passthrough> {
        self.passthrough.as_ref()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn state_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn forward(&self, s: &[f64]) -> Result<Vec<f64>> {
        ensure_dim("Actor state", self.state_dim(), s.len())?;
        Ok(self.predict_batch(&Matrix::row_vector(s)?)?.into_vec())
    }

    pub fn predict_batch(&self, states: &Matrix) -> Result<Matrix> {
        let raw = self.net.predict(states)?;
        self.finish(states, raw)
    }

    /// Batched forward pass keeping the cache for [`backward`](Self::backward).
    pub fn forward_batch(&self, states: &Matrix) -> Result<(Matrix, ForwardCache)> {
        let (raw, cache) = self.net.forward(states)?;
        Ok((self.finish(states, raw)?, cache))
    }

    fn finish(&self, states: &Matrix, mut out: Matrix) -> Result<Matrix> {
        if let Some(p) = &self.passthrough {
            let extra = p.apply(states)?;
            out.as_mut_slice()
                .iter_mut()
                .zip(extra.as_slice())
                .for_each(|(o, e)| *o += e);
        }
        for r in 0..out.rows() {
            out.row_mut(r)
                .iter_mut()
                .zip(&self.bounds)
                .for_each(|(v, (lo, hi))| *v = v.clamp(*lo, *hi));
        }
        Ok(out)
    }

    /// Parameter gradients given `∂L/∂x`. The clamp is treated as identity;
    /// bounds are enforced on the gradient by [`invert_gradients`] instead.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<NetGrads> {
        Ok(self.net.backward(cache, upstream)?.0)
    }
}

/// Scales each component of `grad` (an ascent direction, `∂Q/∂x`) by the
/// remaining headroom towards the bound it points at:
/// `(max − x)/(max − min)` when increasing, `(x − min)/(max − min)` otherwise.
pub fn invert_gradients(grad: &[f64], x: &[f64], bounds: &[(f64, f64)]) -> Result<Vec<f64>> {
    ensure_dim("invert_gradients x", grad.len(), x.len())?;
    ensure_dim("invert_gradients bounds", grad.len(), bounds.len())?;
    grad.iter()
        .zip(x)
        .zip(bounds)
        .enumerate()
        .map(|(index, ((&g, &v), &(min, max)))| {
            if !(v >= min && v <= max) {
                return Err(Error::OutOfBounds {
                    index,
                    value: v,
                    min,
                    max,
                });
            }
            let range = max - min;
            Ok(if g > 0.0 {
                g * (max - v) / range
            } else {
                g * (v - min) / range
            })
        })
        .collect()
}

/// Ornstein-Uhlenbeck process, discretised with step `dt`:
/// `n ← n + θ(μ − n)dt + σ√dt·ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuNoise {
    pub theta: f64,
    pub sigma: f64,
    pub mu: f64,
    pub dt: f64,
    state: Vec<f64>,
}

impl OuNoise {
    pub const DEFAULT_THETA: f64 = 0.15;
    pub const DEFAULT_SIGMA: f64 = 0.0001;

    pub fn new(dim: usize, theta: f64, sigma: f64, mu: f64, dt: f64) -> Result<Self> {
        if !(theta >= 0.0 && sigma >= 0.0 && dt > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "OU noise needs theta >= 0, sigma >= 0, dt > 0 (got {theta}, {sigma}, {dt})"
            )));
        }
        Ok(Self {
            theta,
            sigma,
            mu,
            dt,
            state: vec![mu; dim],
        })
    }

    pub fn with_defaults(dim: usize) -> Self {
        Self::new(dim, Self::DEFAULT_THETA, Self::DEFAULT_SIGMA, 0.0, 1.0).expect("default OU constants are valid")
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn set_state(&mut self, state: Vec<f64>) -> Result<()> {
        ensure_dim("OuNoise::set_state", self.state.len(), state.len())?;
        self.state = state;
        Ok(())
    }

    pub fn reset(&mut self) {
        self.state.fill(self.mu);
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[f64] {
        let diffusion = self.sigma * self.dt.sqrt();
        for n in &mut self.state {
            let xi: f64 = StandardNormal.sample(rng);
            *n += self.theta * (self.mu - *n) * self.dt + diffusion * xi;
        }
        &self.state
    }
}

/// Linear ε decay from `start` to `end` over `horizon` episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub horizon: u64,
    current: f64,
}

impl EpsilonSchedule {
    pub fn new(start: f64, end: f64, horizon: u64) -> Result<Self> {
        if !((0.0..=1.0).contains(&start) && (0.0..=1.0).contains(&end) && end <= start) {
            return Err(Error::InvalidArgument(format!(
                "epsilon schedule needs 1 >= start >= end >= 0 (got {start} -> {end})"
            )));
        }
        Ok(Self {
            start,
            end,
            horizon,
            current: start,
        })
    }

    /// ε = `value` forever.
    pub fn constant(value: f64) -> Result<Self> {
        Self::new(value, value, 0)
    }

    /// The default schedule: 1.0 → 0.01 over the first 10% of `total_episodes`.
    pub fn for_budget(total_episodes: u64) -> Self {
        Self::new(1.0, 0.01, total_episodes / 10).expect("default schedule is valid")
    }

    pub fn value_at(&self, episode: u64) -> f64 {
        if episode >= self.horizon {
            self.end
        } else {
            let frac = episode as f64 / self.horizon as f64;
            self.start + (self.end - self.start) * frac
        }
    }

    pub fn step(&mut self, episode: u64) -> f64 {
        self.current = self.value_at(episode);
        self.current
    }

    pub fn current(&self) -> f64 {
        self.current
    }
}

/// Affine map between environment-native parameter ranges and `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamScaler {
    native: Vec<(f64, f64)>,
}

impl ParamScaler {
    pub fn new(native: Vec<(f64, f64)>) -> Result<Self> {
        if native.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidArgument("scaler bounds need min < max".into()));
        }
        Ok(Self { native })
    }

    pub fn native_bounds(&self) -> &[(f64, f64)] {
        &self.native
    }

    pub fn scale(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.map(x, &self.native, |v, lo, hi| 2.0 * (v - lo) / (hi - lo) - 1.0)
    }

    pub fn unscale(&self, x: &[f64]) -> Result<Vec<f64>> {
        let unit = vec![(-1.0, 1.0); self.native.len()];
        self.map(x, &unit, |v, lo, hi| (lo + (v + 1.0) * (hi - lo) / 2.0).clamp(lo, hi))
    }

    fn map(&self, x: &[f64], check: &[(f64, f64)], f: impl Fn(f64, f64, f64) -> f64) -> Result<Vec<f64>> {
        ensure_dim("ParamScaler input", self.native.len(), x.len())?;
        x.iter()
            .zip(check)
            .zip(&self.native)
            .enumerate()
            .map(|(index, ((&v, &(clo, chi)), &(lo, hi)))| {
                if !(v >= clo && v <= chi) {
                    Err(Error::OutOfBounds {
                        index,
                        value: v,
                        min: clo,
                        max: chi,
                    })
                } else {
                    Ok(f(v, lo, hi))
                }
            })
            .collect()
    }
}
