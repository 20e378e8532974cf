//! Minimal dense neural-network engine: matrices, activations, manual
//! backpropagation, Xavier initialization, a cyclical learning-rate schedule
//! and a seeded PRNG.

mod activation;
mod clr;
mod matrix;
mod mlp;
mod rng;

pub use activation::{activate, activate_grad, Activation};
pub use clr::ClrSchedule;
pub use matrix::DenseMatrix;
pub use mlp::{
    linear_forward, spectral_norm, xavier_init, DenseLayer, ForwardCache, LayerSpec, Mlp, MlpGrads,
};
pub use rng::Rng;
