//! Latent-space transformation autoencoders.
//!
//! A dense-network training stack built around a learned per-dimension
//! affine map of the latent space: the encoder output is normalized by a
//! batch transformation (standard or min-max) that serves as a detached
//! regression target, a two-parameter latent network learns to imitate it,
//! and exploration noise on the latent vectors teaches the decoder the
//! space between training points. The same machinery trains plain, denoising
//! and variational baselines, and a Hausdorff set-distance evaluator scores
//! generated or denoised image sets against their training set.

pub mod error;
pub mod latent;
pub mod metrics;
pub mod models;
pub mod nn;

pub use error::{Error, Result};
