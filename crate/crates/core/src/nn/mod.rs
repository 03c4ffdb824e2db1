//! Dense feedforward networks written from scratch: forward and backward
//! passes, He initialisation, Adam, gradient-norm clipping and Polyak
//! averaging. Everything is `f64` so finite-difference checks stay sharp.

mod dense;
mod matrix;
mod optim;

pub use dense::{he_init, Activation, DenseNet, ForwardCache, Layer, LayerGrads, NetGrads};
pub use matrix::Matrix;
pub use optim::{clip_grad_norm, polyak_update, Adam, DEFAULT_ADAM_EPS, DEFAULT_BETA1, DEFAULT_BETA2};
