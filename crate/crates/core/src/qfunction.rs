//! Q-functions over parameterised actions.
//!
//! Three architectures share one evaluation interface:
//!
//! * [`QVariant::Joint`]: one network fed `s ⊕ x` with the whole joint
//!   parameter vector, producing all `K` values in a single pass.
//! * [`QVariant::MultiPass`]: the same network evaluated on `K` rows
//!   `s ⊕ x·e_k`, each keeping only action `k`'s parameter slot; row `k`
//!   contributes output column `k`.
//! * [`QVariant::Separate`]: one single-output network per action, fed
//!   `s ⊕ x_k`.
//!
//! The joint parameter vector lays out the per-action blocks in action order,
//! so block `k` starts at [`ActionSpace::offset`]`(k)`.

use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::nn::{Activation, DenseNet, ForwardCache, Matrix, NetGrads};

/// Discrete actions, their parameter dimensions and the (scaled) bounds of
/// every joint parameter slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    state_dim: usize,
    param_dims: Vec<usize>,
    bounds: Vec<(f64, f64)>,
}

impl ActionSpace {
    /// Action space with every parameter scaled to `[-1, 1]`.
    pub fn new(state_dim: usize, param_dims: Vec<usize>) -> Result<Self> {
        let m: usize = param_dims.iter().sum();
        Self::with_bounds(state_dim, param_dims, vec![(-1.0, 1.0); m])
    }

    pub fn with_bounds(state_dim: usize, param_dims: Vec<usize>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if state_dim == 0 {
            return Err(Error::InvalidArgument("state_dim must be at least 1".into()));
        }
        if param_dims.is_empty() || param_dims.contains(&0) {
            return Err(Error::InvalidArgument(
                "need at least one action and every action needs a parameter".into(),
            ));
        }
        ensure_dim("ActionSpace bounds", param_dims.iter().sum(), bounds.len())?;
        if let Some((i, _)) = bounds
            .iter()
            .enumerate()
            .find(|(_, (lo, hi))| !(lo < hi && lo.is_finite() && hi.is_finite()))
        {
            return Err(Error::InvalidArgument(format!(
                "bound {i} must satisfy finite min < max"
            )));
        }
        Ok(Self {
            state_dim,
            param_dims,
            bounds,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn num_actions(&self) -> usize {
        self.param_dims.len()
    }

    pub fn param_dims(&self) -> &[usize] {
        &self.param_dims
    }

    pub fn param_dim(&self, k: usize) -> usize {
        self.param_dims[k]
    }

    /// Total width `M` of the joint parameter vector.
    pub fn joint_dim(&self) -> usize {
        self.param_dims.iter().sum()
    }

    pub fn offset(&self, k: usize) -> usize {
        self.param_dims[..k].iter().sum()
    }

    pub fn block_range(&self, k: usize) -> std::ops::Range<usize> {
        let start = self.offset(k);
        start..start + self.param_dims[k]
    }

    pub fn block<'a>(&self, x: &'a [f64], k: usize) -> &'a [f64] {
        &x[self.block_range(k)]
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.joint_dim() && x.iter().zip(&self.bounds).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        x.iter_mut()
            .zip(&self.bounds)
            .for_each(|(v, (lo, hi))| *v = v.clamp(*lo, *hi));
    }

    /// Copy of `x` with every slot outside block `k` zeroed.
    pub fn mask(&self, x: &[f64], k: usize) -> Vec<f64> {
        let range = self.block_range(k);
        x.iter()
            .enumerate()
            .map(|(i, &v)| if range.contains(&i) { v } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QVariant {
    Joint,
    MultiPass,
    Separate,
}

impl QVariant {
    pub const ALL: [QVariant; 3] = [QVariant::Joint, QVariant::MultiPass, QVariant::Separate];

    pub fn name(self) -> &'static str {
        match self {
            QVariant::Joint => "joint",
            QVariant::MultiPass => "multipass",
            QVariant::Separate => "separate",
        }
    }
}

impl std::fmt::Display for QVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(QVariant::Joint),
            "multipass" => Ok(QVariant::MultiPass),
            "separate" => Ok(QVariant::Separate),
            other => Err(Error::InvalidArgument(format!("unknown Q variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QFunction {
    variant: QVariant,
    space: ActionSpace,
    nets: Vec<DenseNet>,
}

/// Where the parameter columns of one network input row came from.
#[derive(Debug, Clone, Copy)]
enum SlotMap {
    /// All `M` joint slots, unmasked.
    Joint,
    /// All `M` joint slots but only block `k` is live; the rest were zeroed.
    Masked(usize),
    /// Only block `k`.
    Block(usize),
}

#[derive(Debug, Clone, Copy)]
struct RowOrigin {
    sample: usize,
    slots: SlotMap,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    net: usize,
    row: usize,
    column: usize,
}

/// A batched evaluation of a [`QFunction`], kept around for backpropagation.
///
/// Values form a `B × W` matrix: `W = K` for [`QFunction::forward_all`] and
/// `W = 1` (the executed action) for [`QFunction::forward_executed`].
#[derive(Debug)]
pub struct QBatch {
    batch: usize,
    width: usize,
    entries: Vec<Entry>,
    origins: Vec<Vec<RowOrigin>>,
    passes: Vec<Option<(Matrix, ForwardCache)>>,
}

impl QBatch {
    pub fn values(&self) -> Matrix {
        let mut out = Matrix::zeros(self.batch, self.width);
        for (i, e) in self.entries.iter().enumerate() {
            let (outputs, _) = self.passes[e.net].as_ref().expect("entry without pass");
            out.as_mut_slice()[i] = outputs[(e.row, e.column)];
        }
        out
    }

    /// Backpropagates `upstream` (same shape as [`values`](Self::values)).
    /// Returns parameter gradients per network and the gradient w.r.t. the
    /// joint parameter vector of every sample (`B × M`).
    pub fn backward(&self, qf: &QFunction, upstream: &Matrix) -> Result<(Vec<NetGrads>, Matrix)> {
        ensure_dim("QBatch::backward rows", self.batch, upstream.rows())?;
        ensure_dim("QBatch::backward cols", self.width, upstream.cols())?;
        let mut per_net: Vec<Option<Matrix>> = self
            .passes
            .iter()
            .zip(&qf.nets)
            .map(|(p, n)| p.as_ref().map(|(o, _)| Matrix::zeros(o.rows(), n.output_dim())))
            .collect();
        for (e, &u) in self.entries.iter().zip(upstream.as_slice()) {
            if let Some(m) = per_net[e.net].as_mut() {
                m[(e.row, e.column)] += u;
            }
        }

        let sd = qf.space.state_dim;
        let mut x_grads = Matrix::zeros(self.batch, qf.space.joint_dim());
        let mut grads = Vec::with_capacity(qf.nets.len());
        for (n, net) in qf.nets.iter().enumerate() {
            let (Some((_, cache)), Some(up)) = (&self.passes[n], &per_net[n]) else {
                grads.push(NetGrads::zeros_like(net));
                continue;
            };
            let (g, input_grads) = net.backward(cache, up)?;
            grads.push(g);
            for (row, origin) in self.origins[n].iter().enumerate() {
                let src = &input_grads.row(row)[sd..];
                let dst = x_grads.row_mut(origin.sample);
                match origin.slots {
                    SlotMap::Joint => dst.iter_mut().zip(src).for_each(|(d, s)| *d += s),
                    SlotMap::Masked(k) => {
                        for i in qf.space.block_range(k) {
                            dst[i] += src[i];
                        }
                    }
                    SlotMap::Block(k) => {
                        let off = qf.space.offset(k);
                        for (j, s) in src.iter().enumerate() {
                            dst[off + j] += s;
                        }
                    }
                }
            }
        }
        Ok((grads, x_grads))
    }
}

impl QFunction {
    /// He-initialised Q-function. For [`QVariant::Separate`] every per-action
    /// network gets the same hidden sizes.
    pub fn new<R: Rng + ?Sized>(
        space: ActionSpace,
        variant: QVariant,
        hidden: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let sd = space.state_dim();
        let nets = match variant {
            QVariant::Joint | QVariant::MultiPass => vec![DenseNet::new(
                sd + space.joint_dim(),
                hidden,
                space.num_actions(),
                activation,
                rng,
            )?],
            QVariant::Separate => space
                .param_dims()
                .iter()
                .map(|&m| DenseNet::new(sd + m, hidden, 1, activation, rng))
                .collect::<Result<_>>()?,
        };
        Ok(Self { variant, space, nets })
    }

    pub fn from_nets(space: ActionSpace, variant: QVariant, nets: Vec<DenseNet>) -> Result<Self> {
        let sd = space.state_dim();
        match variant {
            QVariant::Joint | QVariant::MultiPass => {
                ensure_dim("QFunction network count", 1, nets.len())?;
                ensure_dim("QFunction input", sd + space.joint_dim(), nets[0].input_dim())?;
                ensure_dim("QFunction output", space.num_actions(), nets[0].output_dim())?;
            }
            QVariant::Separate => {
                ensure_dim("QFunction network count", space.num_actions(), nets.len())?;
                for (net, &m) in nets.iter().zip(space.param_dims()) {
                    ensure_dim("QFunction input", sd + m, net.input_dim())?;
                    ensure_dim("QFunction output", 1, net.output_dim())?;
                }
            }
        }
        Ok(Self { variant, space, nets })
    }

    /// Same networks, evaluated as a different variant. Only joint and
    /// multi-pass can be swapped since they share a topology.
    pub fn with_variant(&self, variant: QVariant) -> Result<Self> {
        Self::from_nets(self.space.clone(), variant, self.nets.clone())
    }

    pub fn variant(&self) -> QVariant {
        self.variant
    }

    pub fn space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn nets(&self) -> &[DenseNet] {
        &self.nets
    }

    pub fn nets_mut(&mut self) -> &mut [DenseNet] {
        &mut self.nets
    }

    pub fn param_count(&self) -> usize {
        self.nets.iter().map(DenseNet::param_count).sum()
    }

    fn check_point(&self, s: &[f64], x: &[f64]) -> Result<()> {
        ensure_dim("Q state", self.space.state_dim(), s.len())?;
        ensure_dim("Q joint parameters", self.space.joint_dim(), x.len())
    }

    fn require(&self, variant: QVariant) -> Result<()> {
        if self.variant == variant {
            Ok(())
        } else {
            Err(Error::WrongVariant {
                expected: variant.name(),
                got: self.variant.name(),
            })
        }
    }

    /// All `K` Q-values at `(s, x)` using this function's variant.
    pub fn q_values(&self, s: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(s, x)?;
        let states = Matrix::row_vector(s)?;
        let xs = Matrix::row_vector(x)?;
        Ok(self.evaluate(&states, &xs)?.into_vec())
    }

    pub fn q_joint(&self, s: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.require(QVariant::Joint)?;
        self.q_values(s, x)
    }

    pub fn q_multipass(&self, s: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.require(QVariant::MultiPass)?;
        self.q_values(s, x)
    }

    pub fn q_separate(&self, s: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.require(QVariant::Separate)?;
        self.q_values(s, x)
    }

    /// The full `K × K` multi-pass output `Q_ij` (row `i` = pass with only
    /// `x_i` live). Only the diagonal is meaningful.
    pub fn multipass_matrix(&self, s: &[f64], x: &[f64]) -> Result<Matrix> {
        self.require(QVariant::MultiPass)?;
        self.check_point(s, x)?;
        let rows: Vec<Vec<f64>> = (0..self.space.num_actions())
            .map(|k| {
                let mut row = s.to_vec();
                row.extend(self.space.mask(x, k));
                row
            })
            .collect();
        self.nets[0].predict(&Matrix::from_rows(&rows)?)
    }

    /// `B × K` Q-values for a batch, without keeping a cache.
    pub fn evaluate(&self, states: &Matrix, xs: &Matrix) -> Result<Matrix> {
        self.check_batch(states, xs)?;
        let (inputs, _, entries) = self.build(states, xs, None)?;
        let outputs: Vec<Option<Matrix>> = self
            .nets
            .iter()
            .zip(&inputs)
            .map(|(n, i)| i.as_ref().map(|i| n.predict(i)).transpose())
            .collect::<Result<_>>()?;
        let mut out = Matrix::zeros(states.rows(), self.space.num_actions());
        for (i, e) in entries.iter().enumerate() {
            out.as_mut_slice()[i] = outputs[e.net].as_ref().expect("entry without pass")[(e.row, e.column)];
        }
        Ok(out)
    }

    /// Batched evaluation of all `K` values, keeping caches for backward.
    pub fn forward_all(&self, states: &Matrix, xs: &Matrix) -> Result<QBatch> {
        self.check_batch(states, xs)?;
        self.run(states, xs, None)
    }

    /// Batched evaluation of only the executed action's value per sample.
    /// For multi-pass this is a single masked row per sample.
    pub fn forward_executed(&self, states: &Matrix, actions: &[usize], xs: &Matrix) -> Result<QBatch> {
        self.check_batch(states, xs)?;
        ensure_dim("forward_executed actions", states.rows(), actions.len())?;
        if let Some(&k) = actions.iter().find(|&&k| k >= self.space.num_actions()) {
            return Err(Error::InvalidArgument(format!("action index {k} out of range")));
        }
        self.run(states, xs, Some(actions))
    }

    fn check_batch(&self, states: &Matrix, xs: &Matrix) -> Result<()> {
        ensure_dim("Q batch state width", self.space.state_dim(), states.cols())?;
        ensure_dim("Q batch parameter width", self.space.joint_dim(), xs.cols())?;
        ensure_dim("Q batch rows", states.rows(), xs.rows())
    }

    fn run(&self, states: &Matrix, xs: &Matrix, actions: Option<&[usize]>) -> Result<QBatch> {
        let (inputs, origins, entries) = self.build(states, xs, actions)?;
        let passes = self
            .nets
            .iter()
            .zip(inputs)
            .map(|(n, i)| i.map(|i| n.forward(&i)).transpose())
            .collect::<Result<_>>()?;
        Ok(QBatch {
            batch: states.rows(),
            width: if actions.is_some() { 1 } else { self.space.num_actions() },
            entries,
            origins,
            passes,
        })
    }

    /// Lays out network input rows and output entries. Entries are ordered
    /// sample-major: `b * W + j`.
    #[allow(clippy::type_complexity)]
    fn build(
        &self,
        states: &Matrix,
        xs: &Matrix,
        actions: Option<&[usize]>,
    ) -> Result<(Vec<Option<Matrix>>, Vec<Vec<RowOrigin>>, Vec<Entry>)> {
        let k_count = self.space.num_actions();
        let batch = states.rows();
        let mut rows: Vec<Vec<f64>> = vec![Vec::new(); self.nets.len()];
        let mut origins: Vec<Vec<RowOrigin>> = vec![Vec::new(); self.nets.len()];
        let mut entries = Vec::with_capacity(batch * k_count);

        let mut push_row = |net: usize, data: &mut dyn Iterator<Item = f64>, origin: RowOrigin| {
            rows[net].extend(data);
            origins[net].push(origin);
            origins[net].len() - 1
        };

        for b in 0..batch {
            let s = states.row(b);
            let x = xs.row(b);
            let wanted: Vec<usize> = match actions {
                Some(a) => vec![a[b]],
                None => (0..k_count).collect(),
            };
            match self.variant {
                QVariant::Joint => {
                    let origin = RowOrigin {
                        sample: b,
                        slots: SlotMap::Joint,
                    };
                    let row = push_row(0, &mut s.iter().chain(x).copied(), origin);
                    entries.extend(wanted.iter().map(|&k| Entry { net: 0, row, column: k }));
                }
                QVariant::MultiPass => {
                    for &k in &wanted {
                        let origin = RowOrigin {
                            sample: b,
                            slots: SlotMap::Masked(k),
                        };
                        let masked = self.space.mask(x, k);
                        let row = push_row(0, &mut s.iter().chain(&masked).copied(), origin);
                        entries.push(Entry { net: 0, row, column: k });
                    }
                }
                QVariant::Separate => {
                    for &k in &wanted {
                        let origin = RowOrigin {
                            sample: b,
                            slots: SlotMap::Block(k),
                        };
                        let block = self.space.block(x, k);
                        let row = push_row(k, &mut s.iter().chain(block).copied(), origin);
                        entries.push(Entry { net: k, row, column: 0 });
                    }
                }
            }
        }

        let inputs = rows
            .into_iter()
            .zip(&self.nets)
            .map(|(data, net)| {
                if data.is_empty() {
                    Ok(None)
                } else {
                    let cols = net.input_dim();
                    Matrix::from_vec(data.len() / cols, cols, data).map(Some)
                }
            })
            .collect::<Result<_>>()?;
        Ok((inputs, origins, entries))
    }

    /// `J[i][j] = ∂Q_i / ∂x_j` over the joint parameter vector (`K × M`).
    pub fn jacobian_x(&self, s: &[f64], x: &[f64]) -> Result<Matrix> {
        self.check_point(s, x)?;
        let batch = self.forward_all(&Matrix::row_vector(s)?, &Matrix::row_vector(x)?)?;
        let k_count = self.space.num_actions();
        let mut jac = Matrix::zeros(k_count, self.space.joint_dim());
        for i in 0..k_count {
            let mut up = Matrix::zeros(1, k_count);
            up[(0, i)] = 1.0;
            let (_, g) = batch.backward(self, &up)?;
            jac.row_mut(i).copy_from_slice(g.row(0));
        }
        Ok(jac)
    }

    /// `G[i][j] = ‖∂Q_i / ∂x_j‖₂` where `x_j` is action `j`'s parameter block.
    /// For scalar blocks this is `|∂Q_i/∂x_j|`.
    pub fn cross_gradient_matrix(&self, s: &[f64], x: &[f64]) -> Result<Matrix> {
        let jac = self.jacobian_x(s, x)?;
        Ok(block_norms(&self.space, &jac))
    }

    /// Q-values as one coordinate of action `action`'s parameter block sweeps
    /// over `grid`, with every other slot held at `x`.
    pub fn sensitivity_sweep(
        &self,
        s: &[f64],
        x: &[f64],
        action: usize,
        coordinate: usize,
        grid: &[f64],
    ) -> Result<Vec<SweepRow>> {
        self.check_point(s, x)?;
        if action >= self.space.num_actions() || coordinate >= self.space.param_dim(action) {
            return Err(Error::InvalidArgument(format!(
                "no parameter coordinate {coordinate} for action {action}"
            )));
        }
        let slot = self.space.offset(action) + coordinate;
        let (lo, hi) = self.space.bounds()[slot];
        if let Some(&v) = grid.iter().find(|&&v| !(v >= lo && v <= hi)) {
            return Err(Error::OutOfBounds {
                index: slot,
                value: v,
                min: lo,
                max: hi,
            });
        }
        if grid.is_empty() {
            return Ok(Vec::new());
        }
        let states = Matrix::from_rows(&vec![s; grid.len()])?;
        let mut xs = Matrix::from_rows(&vec![x; grid.len()])?;
        for (r, &v) in grid.iter().enumerate() {
            xs[(r, slot)] = v;
        }
        let q = self.evaluate(&states, &xs)?;
        Ok(grid
            .iter()
            .zip(q.row_iter())
            .map(|(&value, row)| SweepRow { value, q: row.to_vec() })
            .collect())
    }
}

/// Collapses a `K × M` Jacobian to `K × K` block norms.
pub fn block_norms(space: &ActionSpace, jacobian: &Matrix) -> Matrix {
    let k_count = space.num_actions();
    let mut g = Matrix::zeros(k_count, k_count);
    for i in 0..k_count {
        for j in 0..k_count {
            g[(i, j)] = space
                .block(jacobian.row(i), j)
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub q: Vec<f64>,
}

/// Writes sweep rows as CSV with header `sweep_value,q_1,...,q_K`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], num_actions: usize, mut out: W) -> std::io::Result<()> {
    let header: Vec<String> = std::iter::once("sweep_value".to_string())
        .chain((1..=num_actions).map(|k| format!("q_{k}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = std::iter::once(row.value)
            .chain(row.q.iter().copied())
            .map(|v| v.to_string())
            .collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Layer;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space() -> ActionSpace {
        ActionSpace::new(2, vec![1, 2, 1]).unwrap()
    }

    fn random_qf(variant: QVariant, seed: u64) -> QFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        QFunction::new(space(), variant, &[16], Activation::Relu, &mut rng).unwrap()
    }

    #[test]
    fn action_space_layout() {
        let sp = space();
        assert_eq!(sp.joint_dim(), 4);
        assert_eq!(sp.offset(2), 3);
        assert_eq!(sp.block(&[1.0, 2.0, 3.0, 4.0], 1), &[2.0, 3.0]);
        assert_eq!(sp.mask(&[1.0, 2.0, 3.0, 4.0], 1), vec![0.0, 2.0, 3.0, 0.0]);
        assert!(ActionSpace::new(2, vec![]).is_err());
        assert!(ActionSpace::new(2, vec![1, 0]).is_err());
        assert!(ActionSpace::with_bounds(2, vec![1], vec![(1.0, 1.0)]).is_err());
    }

    #[test]
    fn zero_weights_give_output_biases() {
        let sp = space();
        let l1 = Layer::new(Matrix::zeros(6, 3), vec![0.0; 3], Activation::Relu).unwrap();
        let l2 = Layer::new(Matrix::zeros(3, 3), vec![0.5, -1.0, 2.0], Activation::Linear).unwrap();
        let net = DenseNet::from_layers(vec![l1, l2]).unwrap();
        let qf = QFunction::from_nets(sp, QVariant::Joint, vec![net]).unwrap();
        let q = qf.q_joint(&[3.0, -2.0], &[0.1, 0.9, -0.4, 0.3]).unwrap();
        assert_eq!(q, vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn hand_computed_tiny_network() {
        // One hidden relu unit over (s, x1, x2), K = 2.
        let sp = ActionSpace::new(1, vec![1, 1]).unwrap();
        let w1 = Matrix::from_rows(&[[1.0], [2.0], [-1.0]]).unwrap();
        let l1 = Layer::new(w1, vec![0.5], Activation::Relu).unwrap();
        let w2 = Matrix::from_rows(&[[3.0, -1.0]]).unwrap();
        let l2 = Layer::new(w2, vec![0.0, 1.0], Activation::Linear).unwrap();
        let net = DenseNet::from_layers(vec![l1, l2]).unwrap();
        let qf = QFunction::from_nets(sp, QVariant::Joint, vec![net]).unwrap();
        // h = relu(0.2 + 2*0.3 - (-0.4) + 0.5) = 1.7
        let q = qf.q_joint(&[0.2], &[0.3, -0.4]).unwrap();
        assert!((q[0] - 5.1).abs() < 1e-12);
        assert!((q[1] + 0.7).abs() < 1e-12);

        // multi-pass: pass 1 sees (0.2, 0.3, 0) → h = 1.3; pass 2 sees (0.2, 0, -0.4) → h = 1.1
        let mp = qf.with_variant(QVariant::MultiPass).unwrap();
        let q = mp.q_multipass(&[0.2], &[0.3, -0.4]).unwrap();
        assert!((q[0] - 3.9).abs() < 1e-12);
        assert!((q[1] + 0.1).abs() < 1e-12);
    }

    #[test]
    fn variant_specific_entry_points_check_variant() {
        let qf = random_qf(QVariant::Joint, 1);
        let s = [0.1, 0.2];
        let x = [0.0; 4];
        assert!(qf.q_joint(&s, &x).is_ok());
        assert!(matches!(qf.q_multipass(&s, &x), Err(Error::WrongVariant { .. })));
        assert!(qf.q_separate(&s, &x).is_err());
        assert!(qf.q_joint(&s, &x[..3]).is_err());
        assert!(qf.q_joint(&s[..1], &x).is_err());
    }

    #[test]
    fn multipass_with_zero_parameters_equals_joint() {
        let joint = random_qf(QVariant::Joint, 2);
        let mp = joint.with_variant(QVariant::MultiPass).unwrap();
        let s = [0.4, -0.7];
        let x = [0.0; 4];
        assert_eq!(joint.q_values(&s, &x).unwrap(), mp.q_values(&s, &x).unwrap());
    }

    #[test]
    fn multipass_diagonal_matches_matrix() {
        let mp = random_qf(QVariant::MultiPass, 3);
        let s = [0.4, -0.7];
        let x = [0.5, -0.2, 0.9, 0.1];
        let full = mp.multipass_matrix(&s, &x).unwrap();
        let q = mp.q_values(&s, &x).unwrap();
        for k in 0..3 {
            assert_eq!(full[(k, k)], q[k]);
        }
    }

    #[test]
    fn per_action_dependence() {
        for variant in [QVariant::MultiPass, QVariant::Separate] {
            let qf = random_qf(variant, 4);
            let s = [0.3, 0.3];
            let x = [0.5, -0.2, 0.9, 0.1];
            let base = qf.q_values(&s, &x).unwrap();
            let mut y = x;
            y[1] = -0.8; // action 1's block
            let moved = qf.q_values(&s, &y).unwrap();
            assert!((base[0] - moved[0]).abs() <= 1e-12);
            assert!((base[2] - moved[2]).abs() <= 1e-12);
        }
    }

    #[test]
    fn separate_single_action_matches_joint() {
        let sp = ActionSpace::new(3, vec![2]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sep = QFunction::new(sp.clone(), QVariant::Separate, &[8], Activation::Relu, &mut rng).unwrap();
        let joint = QFunction::from_nets(sp, QVariant::Joint, sep.nets().to_vec()).unwrap();
        let s = [0.1, 0.2, 0.3];
        let x = [0.7, -0.7];
        assert_eq!(sep.q_values(&s, &x).unwrap(), joint.q_values(&s, &x).unwrap());
    }

    #[test]
    fn separate_parameter_count() {
        let sp = space();
        let hidden = [16, 8];
        let count = |input: usize, output: usize| input * 16 + 16 + 16 * 8 + 8 + 8 * output + output;
        let sep = random_qf(QVariant::Separate, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let sep2 = QFunction::new(sp.clone(), QVariant::Separate, &hidden, Activation::Relu, &mut rng).unwrap();
        let joint = QFunction::new(sp, QVariant::Joint, &hidden, Activation::Relu, &mut rng).unwrap();
        let expected_sep = count(3, 1) + count(4, 1) + count(3, 1);
        assert_eq!(sep2.param_count(), expected_sep);
        assert_eq!(joint.param_count(), count(6, 3));
        assert!(sep2.param_count() > joint.param_count());
        assert_eq!(sep.nets().len(), 3);
    }

    #[test]
    fn executed_values_match_all_values() {
        for variant in QVariant::ALL {
            let qf = random_qf(variant, 7);
            let states = Matrix::from_rows(&[[0.1, 0.2], [0.3, -0.4], [-0.9, 0.5]]).unwrap();
            let xs = Matrix::from_rows(&[[0.1, 0.2, 0.3, 0.4], [-0.5, 0.6, -0.7, 0.8], [0.9, -0.1, 0.0, 0.2]]).unwrap();
            let actions = [2, 0, 1];
            let all = qf.evaluate(&states, &xs).unwrap();
            let exec = qf.forward_executed(&states, &actions, &xs).unwrap().values();
            for (b, &k) in actions.iter().enumerate() {
                assert!((all[(b, k)] - exec[(b, 0)]).abs() < 1e-12, "{variant}");
            }
            let via_cache = qf.forward_all(&states, &xs).unwrap().values();
            assert_eq!(via_cache, all);
        }
    }

    #[test]
    fn sweep_rejects_out_of_bounds_and_degenerates() {
        let qf = random_qf(QVariant::MultiPass, 8);
        let s = [0.2, 0.2];
        let x = [0.1, 0.2, 0.3, 0.4];
        assert!(matches!(
            qf.sensitivity_sweep(&s, &x, 2, 0, &[0.0, 1.5]),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(qf.sensitivity_sweep(&s, &x, 0, 1, &[0.0]).is_err());
        let rows = qf.sensitivity_sweep(&s, &x, 2, 0, &[0.4]).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].q, qf.q_values(&s, &x).unwrap());
    }

    #[test]
    fn sweep_csv_layout() {
        let rows = vec![SweepRow {
            value: -1.0,
            q: vec![0.5, 1.0],
        }];
        let mut buf = Vec::new();
        write_sweep_csv(&rows, 2, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "sweep_value,q_1,q_2\n-1,0.5,1\n");
    }
}
