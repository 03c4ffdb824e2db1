use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{ensure_dim, Error, Result};

static NEXT_NET_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_NET_ID.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu(slope) => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Linear => z,
        }
    }

    /// Derivative w.r.t. the pre-activation. The kink at zero takes the left
    /// derivative, so relu'(0) = 0.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(slope) => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Affine layer `y = act(x · W + b)` with `W` stored as `in × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Matrix, biases: Vec<f64>, activation: Activation) -> Result<Self> {
        ensure_dim("Layer::new biases", weights.cols(), biases.len())?;
        if biases.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("Layer::new"));
        }
        Ok(Self {
            weights,
            biases,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn param_count(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.biases.len()
    }
}

/// Samples an `rows × cols` weight matrix from N(0, 2 / fan_in).
pub fn he_init<R: Rng + ?Sized>(fan_in: usize, rows: usize, cols: usize, rng: &mut R) -> Result<Matrix> {
    if fan_in == 0 {
        return Err(Error::InvalidArgument("he_init: fan_in must be at least 1".into()));
    }
    let normal =
        Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).map_err(|e| Error::InvalidArgument(format!("he_init: {e}")))?;
    let data = (0..rows * cols).map(|_| normal.sample(rng)).collect();
    Matrix::from_vec(rows, cols, data)
}

/// Feedforward chain of dense layers with a linear output layer.
#[derive(Debug, Serialize, Deserialize)]
pub struct DenseNet {
    layers: Vec<Layer>,
    #[serde(skip, default = "fresh_id")]
    id: u64,
    #[serde(skip)]
    version: u64,
}

impl Clone for DenseNet {
    fn clone(&self) -> Self {
        Self {
            layers: self.layers.clone(),
            id: fresh_id(),
            version: 0,
        }
    }
}

impl PartialEq for DenseNet {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Everything `backward` needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    net_id: u64,
    version: u64,
    /// Input to each layer; `inputs[0]` is the batch itself.
    inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    pre_activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.inputs[0].rows()
    }
}

/// Gradients laid out exactly like a network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGrads {
    pub layers: Vec<LayerGrads>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl NetGrads {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrads {
                    weights: Matrix::zeros(l.weights.rows(), l.weights.cols()),
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn slices(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.biases.as_slice()])
    }

    pub fn slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()])
    }

    pub fn squared_norm(&self) -> f64 {
        self.slices().flatten().map(|g| g * g).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        self.slices_mut().flatten().for_each(|g| *g *= factor);
    }

    pub fn is_zero(&self) -> bool {
        self.slices().flatten().all(|&g| g == 0.0)
    }

    /// Accumulates `other` into `self`.
    pub fn add_assign(&mut self, other: &NetGrads) -> Result<()> {
        ensure_dim("NetGrads::add_assign", self.layers.len(), other.layers.len())?;
        for (a, b) in self.slices_mut().zip(other.slices()) {
            ensure_dim("NetGrads::add_assign", a.len(), b.len())?;
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        Ok(())
    }
}

impl DenseNet {
    /// Builds a He-initialised network. Hidden layers use `hidden_activation`;
    /// the output layer is linear. Biases start at zero.
    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        hidden_activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 || hidden.contains(&0) {
            return Err(Error::InvalidArgument(
                "DenseNet::new: every layer needs at least one unit".into(),
            ));
        }
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(hidden);
        dims.push(output_dim);
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let activation = if i == last {
                    Activation::Linear
                } else {
                    hidden_activation
                };
                Layer::new(he_init(w[0], w[0], w[1], rng)?, vec![0.0; w[1]], activation)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::InvalidArgument("DenseNet needs at least one layer".into()));
        };
        if last.activation != Activation::Linear {
            return Err(Error::InvalidArgument("DenseNet output layer must be linear".into()));
        }
        for pair in layers.windows(2) {
            ensure_dim("DenseNet layer chain", pair[0].output_dim(), pair[1].input_dim())?;
        }
        Ok(Self {
            layers,
            id: fresh_id(),
            version: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access to the layers. Invalidates outstanding forward caches.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.version += 1;
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn param_slices(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.biases.as_slice()])
    }

    /// Parameter buffers in the same order as [`NetGrads::slices`].
    /// Invalidates outstanding forward caches.
    pub fn param_slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.version += 1;
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()])
    }

    pub fn same_topology(&self, other: &DenseNet) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weights.shape() == b.weights.shape() && a.activation == b.activation)
    }

    pub fn forward(&self, batch: &Matrix) -> Result<(Matrix, ForwardCache)> {
        ensure_dim("DenseNet::forward input", self.input_dim(), batch.cols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut current = batch.clone();
        for layer in &self.layers {
            let z = affine(layer, &current)?;
            let a = z.map(|v| layer.activation.apply(v));
            inputs.push(current);
            pre_activations.push(z);
            current = a;
        }
        if !current.is_finite() {
            return Err(Error::NonFinite("DenseNet::forward"));
        }
        let cache = ForwardCache {
            net_id: self.id,
            version: self.version,
            inputs,
            pre_activations,
        };
        Ok((current, cache))
    }

    /// Forward pass without keeping activations around.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        ensure_dim("DenseNet::predict input", self.input_dim(), batch.cols())?;
        let mut current = affine(&self.layers[0], batch)?;
        apply_in_place(&mut current, self.layers[0].activation);
        for layer in &self.layers[1..] {
            current = affine(layer, &current)?;
            apply_in_place(&mut current, layer.activation);
        }
        if !current.is_finite() {
            return Err(Error::NonFinite("DenseNet::predict"));
        }
        Ok(current)
    }

    /// Gradients of `sum(upstream ⊙ outputs)` w.r.t. the parameters and the
    /// input batch.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<(NetGrads, Matrix)> {
        if cache.net_id != self.id || cache.version != self.version || cache.inputs.len() != self.layers.len() {
            return Err(Error::StaleCache);
        }
        ensure_dim("DenseNet::backward upstream rows", cache.batch_size(), upstream.rows())?;
        ensure_dim("DenseNet::backward upstream cols", self.output_dim(), upstream.cols())?;
        if !upstream.is_finite() {
            return Err(Error::NonFinite("DenseNet::backward upstream"));
        }

        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let z = &cache.pre_activations[i];
            if layer.activation != Activation::Linear {
                for (d, &zv) in delta.as_mut_slice().iter_mut().zip(z.as_slice()) {
                    *d *= layer.activation.derivative(zv);
                }
            }
            let weights = cache.inputs[i].transposed_matmul(&delta)?;
            let mut biases = vec![0.0; layer.output_dim()];
            for row in delta.row_iter() {
                biases.iter_mut().zip(row).for_each(|(b, d)| *b += d);
            }
            grads.push(LayerGrads { weights, biases });
            delta = delta.matmul_transposed(&layer.weights)?;
        }
        grads.reverse();
        Ok((NetGrads { layers: grads }, delta))
    }
}

fn affine(layer: &Layer, input: &Matrix) -> Result<Matrix> {
    let mut z = input.matmul(&layer.weights)?;
    let cols = z.cols();
    for r in 0..z.rows() {
        z.row_mut(r).iter_mut().zip(&layer.biases).for_each(|(v, b)| *v += b);
    }
    debug_assert_eq!(cols, layer.biases.len());
    Ok(z)
}

fn apply_in_place(m: &mut Matrix, activation: Activation) {
    if activation != Activation::Linear {
        m.as_mut_slice().iter_mut().for_each(|v| *v = activation.apply(*v));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(weights: &[&[f64]], biases: &[f64], act: Activation) -> DenseNet {
        let w = Matrix::from_rows(weights).unwrap();
        let mut layers = vec![Layer::new(w, biases.to_vec(), act).unwrap()];
        if act != Activation::Linear {
            let n = biases.len();
            layers.push(Layer::new(Matrix::identity(n), vec![0.0; n], Activation::Linear).unwrap());
        }
        DenseNet::from_layers(layers).unwrap()
    }

    #[test]
    fn linear_affine_identity() {
        let net = single(&[&[2.0]], &[1.0], Activation::Linear);
        let (out, _) = net.forward(&Matrix::row_vector(&[3.0]).unwrap()).unwrap();
        assert_eq!(out.as_slice(), &[7.0]);
    }

    #[test]
    fn relu_and_leaky_relu() {
        let relu = single(&[&[1.0, 0.0], &[0.0, 1.0]], &[0.0, 0.0], Activation::Relu);
        let out = relu.predict(&Matrix::row_vector(&[-1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(out.as_slice(), &[0.0, 2.0]);

        let leaky = single(&[&[1.0]], &[0.0], Activation::LeakyRelu(0.01));
        let out = leaky.predict(&Matrix::row_vector(&[-1.0]).unwrap()).unwrap();
        assert!((out[(0, 0)] + 0.01).abs() < 1e-15);
    }

    #[test]
    fn linear_backward() {
        let net = single(&[&[2.0]], &[1.0], Activation::Linear);
        let x = Matrix::row_vector(&[3.0]).unwrap();
        let (_, cache) = net.forward(&x).unwrap();
        let (grads, input) = net.backward(&cache, &Matrix::filled(1, 1, 1.0)).unwrap();
        assert_eq!(input.as_slice(), &[2.0]);
        assert_eq!(grads.layers[0].weights.as_slice(), &[3.0]);
        assert_eq!(grads.layers[0].biases, vec![1.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = DenseNet::new(4, &[8, 5], 3, Activation::Relu, &mut rng).unwrap();
        let x = he_init(1, 6, 4, &mut rng).unwrap();
        let (_, cache) = net.forward(&x).unwrap();
        let (grads, input) = net.backward(&cache, &Matrix::zeros(6, 3)).unwrap();
        assert!(grads.is_zero());
        assert!(input.as_slice().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn stale_and_foreign_caches_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = DenseNet::new(2, &[3], 1, Activation::Relu, &mut rng).unwrap();
        let other = net.clone();
        let x = Matrix::row_vector(&[0.5, -0.5]).unwrap();
        let (_, cache) = net.forward(&x).unwrap();
        let up = Matrix::filled(1, 1, 1.0);
        assert!(matches!(other.backward(&cache, &up), Err(Error::StaleCache)));
        net.param_slices_mut().next().unwrap()[0] += 1.0;
        assert!(matches!(net.backward(&cache, &up), Err(Error::StaleCache)));
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = DenseNet::new(3, &[4], 2, Activation::Relu, &mut rng).unwrap();
        assert!(net.forward(&Matrix::zeros(2, 4)).is_err());
    }

    #[test]
    fn output_layer_must_be_linear() {
        let l = Layer::new(Matrix::identity(2), vec![0.0; 2], Activation::Relu).unwrap();
        assert!(DenseNet::from_layers(vec![l]).is_err());
    }

    #[test]
    fn he_init_rejects_zero_fan_in_and_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(he_init(0, 2, 2, &mut rng).is_err());
        let a = he_init(4, 3, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = he_init(4, 3, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn he_init_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000usize;
        let m = he_init(2, 1000, 1000, &mut rng).unwrap();
        let mean = m.as_slice().iter().sum::<f64>() / n as f64;
        let var = m.as_slice().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var.sqrt() - 1.0).abs() < 0.01, "std {}", var.sqrt());

        let m = he_init(8, 1000, 1000, &mut rng).unwrap();
        let sigma = 0.5;
        let mean = m.as_slice().iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 * sigma / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn forward_is_pure() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let net = DenseNet::new(5, &[16, 8], 3, Activation::Relu, &mut rng).unwrap();
        let x = he_init(1, 7, 5, &mut rng).unwrap();
        let a = net.predict(&x).unwrap();
        let b = net.forward(&x).unwrap().0;
        assert_eq!(a.as_slice(), b.as_slice());
    }
}
