//! Forward and backward passes for the model variants.
//!
//! The training objective is the reconstruction loss plus the
//! transform-matching loss with unit weights (the `transform_loss_weight`
//! knob exists for ablation only). Normalization targets are detached:
//! gradients reach alpha, beta and the encoder only through the latent
//! network output.

use serde::{Deserialize, Serialize};

use super::{ModelBundle, ReconLoss, NoiseSite};
use crate::error::{Error, Result};
use crate::latent::{
    inject_noise, latent_backward, latent_forward, normalize, transform_loss, LatentBatch,
    LatentSpace, NoiseSpec,
};
use crate::nn::{DenseMatrix, ForwardCache, MlpGrads, Rng};

/// Output clamp for the cross-entropy reconstruction loss.
const CE_CLAMP: f64 = 1e-7;

/// Losses recorded per training iteration. `latent` is the
/// transform-matching term for the transformation models and the KL term
/// for the VAE; zero for AE and DAE.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub recon: f64,
    pub latent: f64,
}

impl LossRecord {
    pub fn total(&self) -> f64 {
        self.recon + self.latent
    }
}

/// Reconstruction loss over a batch plus its gradient with respect to the
/// decoder output (post-activation).
fn recon_loss_and_grad(
    kind: ReconLoss,
    target: &DenseMatrix,
    output: &DenseMatrix,
) -> Result<(f64, DenseMatrix)> {
    if target.shape() != output.shape() {
        return Err(Error::shape(
            "recon_loss",
            format!("{}x{}", target.rows(), target.cols()),
            format!("{}x{}", output.rows(), output.cols()),
        ));
    }
    let n = target.rows() as f64;
    let mut grad = DenseMatrix::zeros(output.rows(), output.cols());
    let mut loss = 0.0;
    match kind {
        ReconLoss::CrossEntropy => {
            // Summed over pixels, averaged over the batch, outputs clamped
            // to [1e-7, 1 - 1e-7]. Clamped outputs get zero gradient.
            for i in 0..target.rows() {
                let t = target.row(i);
                let y = output.row(i);
                let g = grad.row_mut(i);
                for k in 0..t.len() {
                    let yc = y[k].clamp(CE_CLAMP, 1.0 - CE_CLAMP);
                    loss -= t[k] * yc.ln() + (1.0 - t[k]) * (1.0 - yc).ln();
                    if y[k] > CE_CLAMP && y[k] < 1.0 - CE_CLAMP {
                        g[k] = (yc - t[k]) / (yc * (1.0 - yc) * n);
                    }
                }
            }
        }
        ReconLoss::L2 => {
            // Mean over the batch of the squared Euclidean distance.
            for i in 0..target.rows() {
                let t = target.row(i);
                let y = output.row(i);
                let g = grad.row_mut(i);
                for k in 0..t.len() {
                    let d = y[k] - t[k];
                    loss += d * d;
                    g[k] = 2.0 * d / n;
                }
            }
        }
    }
    Ok((loss / n, grad))
}

/// Everything produced by one forward pass of a non-VAE model, including the
/// caches needed to backpropagate it.
#[derive(Clone, Debug)]
pub struct LtaeForward {
    pub reconstruction: DenseMatrix,
    /// The batch the latent and transformation networks consumed.
    pub z: LatentBatch,
    /// Normalization target, present for the transformation variants.
    pub z_n: Option<LatentBatch>,
    /// Latent network output (equals `z` for AE/DAE).
    pub z_l: LatentBatch,
    pub losses: LossRecord,
    encoder_cache: ForwardCache,
    decoder_cache: ForwardCache,
    recon_grad: DenseMatrix,
    transform_grad: Option<DenseMatrix>,
}

/// Forward pass where the encoder input is also the reconstruction target.
pub fn forward_ltae(
    bundle: &ModelBundle,
    x: &DenseMatrix,
    rng: &mut Rng,
    train_mode: bool,
) -> Result<LtaeForward> {
    forward_ltae_with_target(bundle, x, x, rng, train_mode)
}

/// Forward pass with a separate reconstruction target; the denoising
/// training path feeds the corrupted batch here with the clean batch as
/// target.
pub fn forward_ltae_with_target(
    bundle: &ModelBundle,
    input: &DenseMatrix,
    target: &DenseMatrix,
    rng: &mut Rng,
    train_mode: bool,
) -> Result<LtaeForward> {
    if bundle.config.variant.is_vae() {
        return Err(Error::WrongVariant {
            expected: "non-VAE",
            got: bundle.config.variant.label().to_string(),
        });
    }
    let (u, encoder_cache) = bundle.encoder.forward(input)?;
    let u = LatentBatch::new(u, LatentSpace::Encoder);

    let inject = train_mode && bundle.config.latent_sigma > 0.0;
    let noise = match &bundle.transform {
        Some(t) => NoiseSpec::for_variant(t.variant, bundle.config.latent_sigma)?,
        None => NoiseSpec::new(
            bundle.config.latent_sigma,
            crate::latent::NoiseDistribution::Gaussian,
        )?,
    };

    // Noise before the transformation/latent networks (the default), or on
    // the decoder input only.
    let pre_site = bundle.config.noise_site == NoiseSite::PreTransform;
    let z = if inject && pre_site {
        inject_noise(&u, &noise, rng)
    } else {
        u
    };

    let (z_n, z_l, transform_value, transform_grad) = match &bundle.transform {
        Some(t) => {
            let z_n = normalize(&z, t.variant)?;
            let z_l = latent_forward(&z, t)?;
            let weight = bundle.config.transform_loss_weight;
            if weight > 0.0 {
                let (value, mut grad) = transform_loss(&z_n, &z_l)?;
                if weight != 1.0 {
                    grad.scale(weight);
                }
                (Some(z_n), z_l, weight * value, Some(grad))
            } else {
                (Some(z_n), z_l, 0.0, None)
            }
        }
        None => (None, z.clone(), 0.0, None),
    };

    let decoder_input = if inject && !pre_site {
        inject_noise(&z_l, &noise, rng).into_matrix()
    } else {
        z_l.matrix().clone()
    };

    let (reconstruction, decoder_cache) = bundle.decoder.forward(&decoder_input)?;
    let (recon_value, recon_grad) =
        recon_loss_and_grad(bundle.config.recon_loss, target, &reconstruction)?;

    Ok(LtaeForward {
        reconstruction,
        z,
        z_n,
        z_l,
        losses: LossRecord {
            recon: recon_value,
            latent: transform_value,
        },
        encoder_cache,
        decoder_cache,
        recon_grad,
        transform_grad,
    })
}

/// Parameter gradients of one training step.
#[derive(Clone, Debug)]
pub struct ModelGrads {
    pub encoder: MlpGrads,
    pub decoder: MlpGrads,
    /// Gradients for alpha and beta when the model has a latent network.
    pub alpha: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
}

impl ModelGrads {
    pub fn is_finite(&self) -> bool {
        self.encoder.is_finite()
            && self.decoder.is_finite()
            && self.alpha.iter().flatten().all(|v| v.is_finite())
            && self.beta.iter().flatten().all(|v| v.is_finite())
    }
}

/// Backpropagate the full objective of a non-VAE forward pass.
pub fn backward_ltae(bundle: &ModelBundle, forward: &LtaeForward) -> Result<ModelGrads> {
    let (decoder_grads, d_decoder_input) =
        bundle.decoder.backward(&forward.decoder_cache, &forward.recon_grad)?;

    // Gradient reaching the latent network output: reconstruction path plus
    // the transform-matching term. Post-transform noise is additive, so it
    // passes the reconstruction gradient through unchanged.
    let mut d_zl = d_decoder_input;
    if let Some(tg) = &forward.transform_grad {
        d_zl.add_assign(tg)?;
    }

    let (d_z, alpha, beta) = match &bundle.transform {
        Some(t) => {
            let grads = latent_backward(&d_zl, &forward.z, t)?;
            (grads.input, Some(grads.alpha), Some(grads.beta))
        }
        None => (d_zl, None, None),
    };

    // Pre-transform noise is additive on the encoder output.
    let (encoder_grads, _) = bundle.encoder.backward(&forward.encoder_cache, &d_z)?;

    Ok(ModelGrads {
        encoder: encoder_grads,
        decoder: decoder_grads,
        alpha,
        beta,
    })
}

/// Everything produced by one VAE forward pass.
#[derive(Clone, Debug)]
pub struct VaeForward {
    pub reconstruction: DenseMatrix,
    pub mu: DenseMatrix,
    pub log_var: DenseMatrix,
    pub z: DenseMatrix,
    pub losses: LossRecord,
    encoder_cache: ForwardCache,
    decoder_cache: ForwardCache,
    recon_grad: DenseMatrix,
    train_mode: bool,
}

/// VAE forward pass. In train mode the latent is sampled with the
/// reparameterization trick; at inference it is the posterior mean.
pub fn forward_vae(
    bundle: &ModelBundle,
    x: &DenseMatrix,
    rng: &mut Rng,
    train_mode: bool,
) -> Result<VaeForward> {
    if !bundle.config.variant.is_vae() {
        return Err(Error::WrongVariant {
            expected: "VAE",
            got: bundle.config.variant.label().to_string(),
        });
    }
    let m = bundle.config.latent_dim;
    let (h, encoder_cache) = bundle.encoder.forward(x)?;
    let batch = h.rows();

    let mut mu = DenseMatrix::zeros(batch, m);
    let mut log_var = DenseMatrix::zeros(batch, m);
    for i in 0..batch {
        let row = h.row(i);
        mu.row_mut(i).copy_from_slice(&row[..m]);
        log_var.row_mut(i).copy_from_slice(&row[m..]);
    }

    let z = if train_mode {
        let mut z = DenseMatrix::zeros(batch, m);
        for i in 0..batch {
            let mu_r = mu.row(i);
            let lv_r = log_var.row(i);
            let z_r = z.row_mut(i);
            for j in 0..m {
                z_r[j] = mu_r[j] + (lv_r[j] / 2.0).exp() * rng.standard_normal();
            }
        }
        z
    } else {
        mu.clone()
    };

    let (reconstruction, decoder_cache) = bundle.decoder.forward(&z)?;
    let (recon_value, recon_grad) =
        recon_loss_and_grad(bundle.config.recon_loss, x, &reconstruction)?;

    // KL(q(z|x) || N(0, I)) = -1/2 sum(1 + log var - mu^2 - var), batch mean.
    let mut kl = 0.0;
    for i in 0..batch {
        let mu_r = mu.row(i);
        let lv_r = log_var.row(i);
        for j in 0..m {
            kl -= 0.5 * (1.0 + lv_r[j] - mu_r[j] * mu_r[j] - lv_r[j].exp());
        }
    }
    kl /= batch as f64;

    Ok(VaeForward {
        reconstruction,
        mu,
        log_var,
        z,
        losses: LossRecord {
            recon: recon_value,
            latent: kl,
        },
        encoder_cache,
        decoder_cache,
        recon_grad,
        train_mode,
    })
}

/// Backpropagate the VAE objective (reconstruction + KL).
pub fn backward_vae(bundle: &ModelBundle, forward: &VaeForward) -> Result<ModelGrads> {
    let (decoder_grads, d_z) = bundle
        .decoder
        .backward(&forward.decoder_cache, &forward.recon_grad)?;

    let m = bundle.config.latent_dim;
    let batch = d_z.rows();
    let n = batch as f64;

    // d h = [d mu | d log_var]: the reconstruction path flows through the
    // reparameterized sample, the KL term adds its analytic gradient.
    let mut d_h = DenseMatrix::zeros(batch, 2 * m);
    for i in 0..batch {
        let dz_r = d_z.row(i);
        let mu_r = forward.mu.row(i);
        let lv_r = forward.log_var.row(i);
        let z_r = forward.z.row(i);
        let dh_r = d_h.row_mut(i);
        for j in 0..m {
            dh_r[j] = dz_r[j] + mu_r[j] / n;
            let recon_path = if forward.train_mode {
                dz_r[j] * (z_r[j] - mu_r[j]) / 2.0
            } else {
                0.0
            };
            dh_r[m + j] = recon_path + (lv_r[j].exp() - 1.0) / (2.0 * n);
        }
    }

    let (encoder_grads, _) = bundle.encoder.backward(&forward.encoder_cache, &d_h)?;
    Ok(ModelGrads {
        encoder: encoder_grads,
        decoder: decoder_grads,
        alpha: None,
        beta: None,
    })
}
