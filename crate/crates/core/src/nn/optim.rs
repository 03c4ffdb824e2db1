use serde::{Deserialize, Serialize};

use super::dense::{DenseNet, NetGrads};
use crate::error::{ensure_dim, Error, Result};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_ADAM_EPS: f64 = 1e-8;

/// Adam with bias correction over one or more networks.
///
/// Moment buffers mirror [`DenseNet::param_slices`] of every network, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(nets: &[DenseNet], learning_rate: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Adam learning rate must be positive, got {learning_rate}"
            )));
        }
        let shapes: Vec<Vec<f64>> = nets
            .iter()
            .flat_map(|n| n.param_slices().map(|s| vec![0.0; s.len()]))
            .collect();
        Ok(Self {
            learning_rate,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            epsilon: DEFAULT_ADAM_EPS,
            step: 0,
            second_moment: shapes.clone(),
            first_moment: shapes,
        })
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, nets: &mut [DenseNet], grads: &[NetGrads]) -> Result<()> {
        ensure_dim("Adam::step networks", nets.len(), grads.len())?;
        let expected: Vec<usize> = self.first_moment.iter().map(Vec::len).collect();
        let got: Vec<usize> = grads.iter().flat_map(|g| g.slices().map(<[f64]>::len)).collect();
        if expected != got {
            return Err(Error::InvalidArgument(
                "Adam::step gradient shapes do not match optimizer state".into(),
            ));
        }
        let params: Vec<usize> = nets.iter().flat_map(|n| n.param_slices().map(<[f64]>::len)).collect();
        if params != expected {
            return Err(Error::InvalidArgument(
                "Adam::step parameter shapes do not match optimizer state".into(),
            ));
        }

        self.step += 1;
        let t = self.step as i32;
        let correction1 = 1.0 - self.beta1.powi(t);
        let correction2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);

        let param_bufs = nets.iter_mut().flat_map(|n| n.param_slices_mut());
        let grad_bufs = grads.iter().flat_map(|g| g.slices());
        let moments = self.first_moment.iter_mut().zip(self.second_moment.iter_mut());
        for ((p, g), (m, v)) in param_bufs.zip(grad_bufs).zip(moments) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [NetGrads], max_norm: f64) -> Result<f64> {
    if !(max_norm > 0.0 && max_norm.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "clip_grad_norm: max_norm must be positive, got {max_norm}"
        )));
    }
    let squared: f64 = grads.iter().map(NetGrads::squared_norm).sum();
    if !squared.is_finite() {
        return Err(Error::NonFinite("clip_grad_norm"));
    }
    let norm = squared.sqrt();
    if norm > max_norm {
        let factor = max_norm / norm;
        grads.iter_mut().for_each(|g| g.scale(factor));
    }
    Ok(norm)
}

/// `target ← τ·online + (1 − τ)·target`, elementwise over every network.
pub fn polyak_update(target: &mut [DenseNet], online: &[DenseNet], tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "polyak_update: tau must lie in (0, 1], got {tau}"
        )));
    }
    ensure_dim("polyak_update networks", online.len(), target.len())?;
    if target.iter().zip(online).any(|(t, o)| !t.same_topology(o)) {
        return Err(Error::InvalidArgument(
            "polyak_update: target and online topologies differ".into(),
        ));
    }
    for (t, o) in target.iter_mut().zip(online) {
        for (tp, op) in t.param_slices_mut().zip(o.param_slices()) {
            if tau == 1.0 {
                tp.copy_from_slice(op);
            } else {
                tp.iter_mut()
                    .zip(op)
                    .for_each(|(a, &b)| *a = tau * b + (1.0 - tau) * *a);
            }
        }
    }
    Ok(())
}
