//! Training loop, sampling-statistics fitting, generation and denoising.

use super::forward::{
    backward_ltae, backward_vae, forward_ltae_with_target, forward_vae, ModelGrads,
};
use super::{build_model, CorruptionSpec, ModelBundle, ModelConfig, SamplingStats};
use crate::error::{Error, Result};
use crate::latent::{latent_forward, BatchStats, LatentBatch, LatentSpace};
use crate::metrics::ImageSet;
use crate::nn::{DenseMatrix, Rng};

/// Additive Gaussian pixel corruption; targets stay clean and the corrupted
/// values are not clamped back into [0, 1].
pub fn corrupt_input(x: &DenseMatrix, spec: &CorruptionSpec, rng: &mut Rng) -> DenseMatrix {
    if spec.sigma_hat == 0.0 {
        return x.clone();
    }
    let mut out = x.clone();
    for v in out.data_mut() {
        *v += spec.sigma_hat * rng.standard_normal();
    }
    out
}

/// Train a model on the given data with an explicit generator.
///
/// Runs `config.iterations` SGD steps under the cyclical learning-rate
/// schedule, reshuffling the data each epoch. (config, seed, data) fully
/// determine the resulting bundle.
pub fn train(config: &ModelConfig, data: &ImageSet, rng: &mut Rng) -> Result<ModelBundle> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("train: data"));
    }
    if data.dim() != config.input_dim {
        return Err(Error::shape(
            "train",
            format!("input dim {}", config.input_dim),
            format!("{}", data.dim()),
        ));
    }
    let batch_size = config.batch_size.min(data.len());
    if config.variant.has_transform() && batch_size < 2 {
        return Err(Error::InvalidConfig(
            "transformation variants need an effective batch size of at least 2".into(),
        ));
    }

    let mut bundle = build_model(config, rng)?;
    let corruption = CorruptionSpec::new(config.input_corruption_sigma)?;
    let denoising = config.variant.is_denoising();

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut cursor = data.len(); // force a shuffle before the first batch
    bundle.training_history.reserve(config.iterations as usize);

    for iteration in 0..config.iterations {
        // Epoch boundary: reshuffle and drop any tail too small for a batch.
        if cursor + batch_size > data.len() {
            rng.shuffle(&mut order);
            cursor = 0;
        }
        let batch_indices = &order[cursor..cursor + batch_size];
        cursor += batch_size;

        let clean = data.select(batch_indices).into_matrix();
        let lr = config.clr.rate(iteration);

        let step = |bundle: &mut ModelBundle, rng: &mut Rng| -> Result<(ModelGrads, super::LossRecord)> {
            if config.variant.is_vae() {
                let fwd = forward_vae(bundle, &clean, rng, true)?;
                Ok((backward_vae(bundle, &fwd)?, fwd.losses))
            } else {
                let input = if denoising {
                    corrupt_input(&clean, &corruption, rng)
                } else {
                    clean.clone()
                };
                let fwd = forward_ltae_with_target(bundle, &input, &clean, rng, true)?;
                Ok((backward_ltae(bundle, &fwd)?, fwd.losses))
            }
        };
        let (grads, losses) = step(&mut bundle, rng).map_err(|e| Error::Training {
            iteration,
            lr,
            reason: e.to_string(),
        })?;

        if !losses.total().is_finite() {
            return Err(Error::Training {
                iteration,
                lr,
                reason: format!("non-finite loss {losses:?}"),
            });
        }

        apply_sgd(&mut bundle, &grads, lr).map_err(|e| Error::Training {
            iteration,
            lr,
            reason: e.to_string(),
        })?;
        bundle.training_history.push(losses);
    }

    bundle.sampling_stats = Some(fit_sampling_stats(&bundle, data)?);
    Ok(bundle)
}

/// Train with a generator seeded from `config.seed`.
pub fn train_seeded(config: &ModelConfig, data: &ImageSet) -> Result<ModelBundle> {
    let mut rng = Rng::new(config.seed);
    train(config, data, &mut rng)
}

fn apply_sgd(bundle: &mut ModelBundle, grads: &ModelGrads, lr: f64) -> Result<()> {
    bundle.encoder.sgd_step(&grads.encoder, lr)?;
    bundle.decoder.sgd_step(&grads.decoder, lr)?;
    if bundle.config.freeze_transform {
        return Ok(());
    }
    if let (Some(t), Some(da), Some(db)) = (&mut bundle.transform, &grads.alpha, &grads.beta) {
        if da.iter().chain(db).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "latent transform gradient" });
        }
        for (a, g) in t.alpha.iter_mut().zip(da) {
            *a -= lr * g;
        }
        for (b, g) in t.beta.iter_mut().zip(db) {
            *b -= lr * g;
        }
    }
    Ok(())
}

/// Map a data set to the latent vectors the decoder would consume:
/// noise-free encoding, through the latent network when present, posterior
/// means for the VAE.
pub fn decoder_side_latents(bundle: &ModelBundle, data: &ImageSet) -> Result<DenseMatrix> {
    let encoded = bundle.encoder.infer(data.matrix())?;
    if bundle.config.variant.is_vae() {
        let m = bundle.config.latent_dim;
        let mut mu = DenseMatrix::zeros(encoded.rows(), m);
        for i in 0..encoded.rows() {
            mu.row_mut(i).copy_from_slice(&encoded.row(i)[..m]);
        }
        return Ok(mu);
    }
    match &bundle.transform {
        Some(t) => Ok(
            latent_forward(&LatentBatch::new(encoded, LatentSpace::Encoder), t)?.into_matrix(),
        ),
        None => Ok(encoded),
    }
}

/// Fit per-dimension sampling statistics over the transformed latent vectors
/// of the training set. Standard-normalization variants record mean and
/// standard deviation, min-max variants record bounds, the VAE samples its
/// standard-normal prior. AE and DAE fall back to Gaussian statistics of the
/// raw latent space.
pub fn fit_sampling_stats(bundle: &ModelBundle, data: &ImageSet) -> Result<SamplingStats> {
    if data.is_empty() {
        return Err(Error::Empty("fit_sampling_stats: data"));
    }
    if bundle.config.variant.is_vae() {
        return Ok(SamplingStats::StandardNormal {
            dim: bundle.config.latent_dim,
        });
    }
    let latents = decoder_side_latents(bundle, data)?;
    let stats = BatchStats::compute(&LatentBatch::new(latents, LatentSpace::Transformed))?;
    use crate::latent::NormalizationKind;
    match bundle.config.variant.normalization() {
        Some(NormalizationKind::MinMax) => Ok(SamplingStats::Uniform {
            min: stats.min,
            max: stats.max,
        }),
        _ => Ok(SamplingStats::Gaussian {
            mean: stats.mean,
            std: stats.std,
        }),
    }
}

/// Sample latent vectors according to the fitted statistics and decode them.
pub fn generate(bundle: &ModelBundle, n: usize, rng: &mut Rng) -> Result<ImageSet> {
    let stats = bundle.sampling_stats.as_ref().ok_or(Error::UnfittedStats)?;
    let m = stats.dim();
    if n == 0 {
        return Ok(ImageSet::new(DenseMatrix::zeros(0, bundle.config.input_dim)));
    }
    let mut latents = DenseMatrix::zeros(n, m);
    for i in 0..n {
        let row = latents.row_mut(i);
        match stats {
            SamplingStats::Gaussian { mean, std } => {
                for j in 0..m {
                    row[j] = mean[j] + std[j] * rng.standard_normal();
                }
            }
            SamplingStats::Uniform { min, max } => {
                for j in 0..m {
                    row[j] = rng.uniform(min[j], max[j]);
                }
            }
            SamplingStats::StandardNormal { .. } => {
                for v in row.iter_mut() {
                    *v = rng.standard_normal();
                }
            }
        }
    }
    Ok(ImageSet::new(bundle.decoder.infer(&latents)?))
}

/// Deterministic reconstruction of (possibly corrupted) images through a
/// trained denoising model. No training-time noise anywhere.
pub fn denoise(bundle: &ModelBundle, corrupted: &ImageSet) -> Result<ImageSet> {
    if !bundle.config.variant.is_denoising() {
        return Err(Error::WrongVariant {
            expected: "DAE or DLTAE",
            got: bundle.config.variant.label().to_string(),
        });
    }
    let encoded = bundle.encoder.infer(corrupted.matrix())?;
    let decoder_input = match &bundle.transform {
        Some(t) => latent_forward(&LatentBatch::new(encoded, LatentSpace::Encoder), t)?
            .into_matrix(),
        None => encoded,
    };
    Ok(ImageSet::new(bundle.decoder.infer(&decoder_input)?))
}
