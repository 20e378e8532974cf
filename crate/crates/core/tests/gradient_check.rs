//! Numerical gradient checking: every analytic gradient in the stack is
//! compared against central finite differences on the same objective.
//!
//! Stochastic passes are pinned by reseeding the generator identically for
//! every loss evaluation, so perturbed and unperturbed losses see the same
//! noise. For the transformation models the normalization target is frozen
//! at its base-point value during differencing, because the objective treats
//! it as a detached regression target: no gradient flows through the batch
//! statistics.

use ltae_core::latent::{
    inject_noise, latent_forward, transform_loss, LatentBatch, LatentSpace, NoiseSpec,
};
use ltae_core::models::{
    backward_ltae, backward_vae, build_model, corrupt_input, forward_ltae_with_target,
    forward_vae, CorruptionSpec, ModelBundle, ModelConfig, ModelVariant, NoiseSite, ReconLoss,
};
use ltae_core::nn::{Activation, DenseMatrix, LayerSpec, Mlp, Rng};

const FD_STEP: f64 = 1e-5;
const MAX_REL_ERROR: f64 = 1e-4;

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-10 {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale
    }
}

fn random_batch(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    DenseMatrix::from_vec(rows, cols, rng.uniform_vec(0.05, 0.95, rows * cols)).unwrap()
}

fn scalar_loss(kind: ReconLoss, target: &DenseMatrix, output: &DenseMatrix) -> (f64, DenseMatrix) {
    let n = target.rows() as f64;
    let mut grad = DenseMatrix::zeros(output.rows(), output.cols());
    let mut loss = 0.0;
    for i in 0..target.rows() {
        for j in 0..target.cols() {
            let t = target.get(i, j);
            let y = output.get(i, j);
            match kind {
                ReconLoss::CrossEntropy => {
                    loss -= t * y.ln() + (1.0 - t) * (1.0 - y).ln();
                    grad.set(i, j, (y - t) / (y * (1.0 - y) * n));
                }
                ReconLoss::L2 => {
                    loss += (y - t) * (y - t);
                    grad.set(i, j, 2.0 * (y - t) / n);
                }
            }
        }
    }
    (loss / n, grad)
}

// ---------------------------------------------------------------------------
// Plain MLP gradients: cross-entropy and L2 losses over small random nets.
// ---------------------------------------------------------------------------

fn check_mlp_gradients(specs: &[LayerSpec], loss_kind: ReconLoss, seed: u64) {
    let mut rng = Rng::new(seed);
    let mut net = Mlp::new(specs, &mut rng).unwrap();
    let batch = 3;
    let x = random_batch(batch, specs[0].in_dim, &mut rng);
    let target = random_batch(batch, specs.last().unwrap().out_dim, &mut rng);

    let loss_of = |net: &Mlp, x: &DenseMatrix| {
        let (out, _) = net.forward(x).unwrap();
        scalar_loss(loss_kind, &target, &out).0
    };

    let (out, cache) = net.forward(&x).unwrap();
    let (_, upstream) = scalar_loss(loss_kind, &target, &out);
    let (grads, input_grad) = net.backward(&cache, &upstream).unwrap();

    for l in 0..specs.len() {
        let (w_rows, w_cols) = grads.weights[l].shape();
        for r in 0..w_rows {
            for c in 0..w_cols {
                let orig = net.layers()[l].weight().get(r, c);
                net.layers_mut()[l].weight_mut().set(r, c, orig + FD_STEP);
                let plus = loss_of(&net, &x);
                net.layers_mut()[l].weight_mut().set(r, c, orig - FD_STEP);
                let minus = loss_of(&net, &x);
                net.layers_mut()[l].weight_mut().set(r, c, orig);
                let numeric = (plus - minus) / (2.0 * FD_STEP);
                let analytic = grads.weights[l].get(r, c);
                assert!(
                    relative_error(analytic, numeric) <= MAX_REL_ERROR,
                    "layer {l} weight ({r},{c}): analytic {analytic}, numeric {numeric}"
                );
            }
        }
        for b in 0..grads.biases[l].len() {
            let orig = net.layers()[l].bias()[b];
            net.layers_mut()[l].bias_mut()[b] = orig + FD_STEP;
            let plus = loss_of(&net, &x);
            net.layers_mut()[l].bias_mut()[b] = orig - FD_STEP;
            let minus = loss_of(&net, &x);
            net.layers_mut()[l].bias_mut()[b] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let analytic = grads.biases[l][b];
            assert!(
                relative_error(analytic, numeric) <= MAX_REL_ERROR,
                "layer {l} bias {b}: analytic {analytic}, numeric {numeric}"
            );
        }
    }

    // Input gradient.
    let mut x_var = x.clone();
    for i in 0..batch {
        for j in 0..specs[0].in_dim {
            let orig = x_var.get(i, j);
            x_var.set(i, j, orig + FD_STEP);
            let plus = loss_of(&net, &x_var);
            x_var.set(i, j, orig - FD_STEP);
            let minus = loss_of(&net, &x_var);
            x_var.set(i, j, orig);
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            assert!(
                relative_error(input_grad.get(i, j), numeric) <= MAX_REL_ERROR,
                "input ({i},{j})"
            );
        }
    }
}

#[test]
fn mlp_gradients_match_finite_differences() {
    let spec = |i, o, a| LayerSpec::new(i, o, a).unwrap();
    let architectures: Vec<Vec<LayerSpec>> = vec![
        vec![spec(4, 3, Activation::Sigmoid)],
        vec![
            spec(5, 4, Activation::Softplus),
            spec(4, 3, Activation::Sigmoid),
        ],
        vec![
            spec(6, 5, Activation::Tanh),
            spec(5, 4, Activation::Softplus),
            spec(4, 2, Activation::Sigmoid),
        ],
        vec![
            spec(4, 6, Activation::LeakyRelu),
            spec(6, 5, Activation::Relu),
            spec(5, 3, Activation::Sigmoid),
        ],
    ];
    for (k, specs) in architectures.iter().enumerate() {
        check_mlp_gradients(specs, ReconLoss::CrossEntropy, 100 + k as u64);
        check_mlp_gradients(specs, ReconLoss::L2, 200 + k as u64);
    }
}

// ---------------------------------------------------------------------------
// Full-model gradients: the complete objective including alpha, beta, the
// corruption path and the VAE KL term.
// ---------------------------------------------------------------------------

fn tiny_config(variant: ModelVariant) -> ModelConfig {
    let mut config = ModelConfig::for_variant(variant);
    config.input_dim = 6;
    config.hidden = vec![5, 4];
    config.latent_dim = 2;
    config.batch_size = 3;
    config
}

/// Training objective of a transformation model with the normalization
/// target frozen; mirrors the implementation's forward composition.
fn frozen_target_loss(
    bundle: &ModelBundle,
    input: &DenseMatrix,
    target: &DenseMatrix,
    frozen_zn: &LatentBatch,
    noise_seed: u64,
) -> f64 {
    let mut rng = Rng::new(noise_seed);
    let t = bundle.transform.as_ref().expect("transform variant");
    let noise = NoiseSpec::for_variant(t.variant, bundle.config.latent_sigma).unwrap();
    let inject = bundle.config.latent_sigma > 0.0;
    let pre = bundle.config.noise_site == NoiseSite::PreTransform;

    let u = LatentBatch::new(bundle.encoder.infer(input).unwrap(), LatentSpace::Encoder);
    let z = if inject && pre {
        inject_noise(&u, &noise, &mut rng)
    } else {
        u
    };
    let z_l = latent_forward(&z, t).unwrap();
    let decoder_input = if inject && !pre {
        inject_noise(&z_l, &noise, &mut rng).into_matrix()
    } else {
        z_l.matrix().clone()
    };
    let recon = bundle.decoder.infer(&decoder_input).unwrap();
    let (recon_loss, _) = scalar_loss(bundle.config.recon_loss, target, &recon);
    let (tl, _) = transform_loss(frozen_zn, &z_l).unwrap();
    recon_loss + bundle.config.transform_loss_weight * tl
}

/// Objective for the variants without a transform (noise pinned by seed).
fn plain_loss(bundle: &ModelBundle, input: &DenseMatrix, target: &DenseMatrix, noise_seed: u64) -> f64 {
    let mut rng = Rng::new(noise_seed);
    if bundle.config.variant.is_vae() {
        forward_vae(bundle, target, &mut rng, true)
            .unwrap()
            .losses
            .total()
    } else {
        forward_ltae_with_target(bundle, input, target, &mut rng, true)
            .unwrap()
            .losses
            .total()
    }
}

fn check_model_gradients(variant: ModelVariant, noise_site: NoiseSite, seed: u64) {
    let mut config = tiny_config(variant);
    config.noise_site = noise_site;
    let mut rng = Rng::new(seed);
    let mut bundle = build_model(&config, &mut rng).unwrap();
    let clean = random_batch(3, 6, &mut rng);

    // The corrupted batch is pinned outside the loss; the latent noise is
    // pinned by reseeding inside it.
    let input = if config.variant.is_denoising() {
        let spec = CorruptionSpec::new(config.input_corruption_sigma).unwrap();
        corrupt_input(&clean, &spec, &mut rng)
    } else {
        clean.clone()
    };

    let noise_seed = 4242 + seed;
    let (grads, base_losses, frozen_zn) = {
        let mut step_rng = Rng::new(noise_seed);
        if config.variant.is_vae() {
            let fwd = forward_vae(&bundle, &clean, &mut step_rng, true).unwrap();
            (backward_vae(&bundle, &fwd).unwrap(), fwd.losses, None)
        } else {
            let fwd =
                forward_ltae_with_target(&bundle, &input, &clean, &mut step_rng, true).unwrap();
            let zn = fwd.z_n.clone();
            (backward_ltae(&bundle, &fwd).unwrap(), fwd.losses, zn)
        }
    };

    let loss_of = |bundle: &ModelBundle| match &frozen_zn {
        Some(zn) => frozen_target_loss(bundle, &input, &clean, zn, noise_seed),
        None => plain_loss(bundle, &input, &clean, noise_seed),
    };

    // The differencing objective must agree with the implementation at the
    // base point.
    assert!(
        (loss_of(&bundle) - base_losses.total()).abs() <= 1e-9 * base_losses.total().abs().max(1.0),
        "loss compositions disagree: {} vs {}",
        loss_of(&bundle),
        base_losses.total()
    );

    let mut checked = 0usize;
    let mut check = |analytic: f64, plus: f64, minus: f64, what: &str| {
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        assert!(
            relative_error(analytic, numeric) <= MAX_REL_ERROR,
            "{variant:?}/{noise_site:?} {what}: analytic {analytic}, numeric {numeric}"
        );
        checked += 1;
    };

    for encoder_side in [true, false] {
        let grads_net = if encoder_side { &grads.encoder } else { &grads.decoder };
        let name = if encoder_side { "encoder" } else { "decoder" };
        for l in 0..grads_net.weights.len() {
            let (rows, cols) = grads_net.weights[l].shape();
            for r in 0..rows {
                for c in 0..cols {
                    let orig = if encoder_side {
                        bundle.encoder.layers()[l].weight().get(r, c)
                    } else {
                        bundle.decoder.layers()[l].weight().get(r, c)
                    };
                    let mut set = |bundle: &mut ModelBundle, v: f64| {
                        let net = if encoder_side {
                            &mut bundle.encoder
                        } else {
                            &mut bundle.decoder
                        };
                        net.layers_mut()[l].weight_mut().set(r, c, v);
                    };
                    set(&mut bundle, orig + FD_STEP);
                    let plus = loss_of(&bundle);
                    set(&mut bundle, orig - FD_STEP);
                    let minus = loss_of(&bundle);
                    set(&mut bundle, orig);
                    check(
                        grads_net.weights[l].get(r, c),
                        plus,
                        minus,
                        &format!("{name} W{l}({r},{c})"),
                    );
                }
            }
            for b in 0..grads_net.biases[l].len() {
                let orig = if encoder_side {
                    bundle.encoder.layers()[l].bias()[b]
                } else {
                    bundle.decoder.layers()[l].bias()[b]
                };
                let mut set = |bundle: &mut ModelBundle, v: f64| {
                    let net = if encoder_side {
                        &mut bundle.encoder
                    } else {
                        &mut bundle.decoder
                    };
                    net.layers_mut()[l].bias_mut()[b] = v;
                };
                set(&mut bundle, orig + FD_STEP);
                let plus = loss_of(&bundle);
                set(&mut bundle, orig - FD_STEP);
                let minus = loss_of(&bundle);
                set(&mut bundle, orig);
                check(grads_net.biases[l][b], plus, minus, &format!("{name} b{l}[{b}]"));
            }
        }
    }

    if let (Some(da), Some(db)) = (&grads.alpha, &grads.beta) {
        for j in 0..da.len() {
            let orig = bundle.transform.as_ref().unwrap().alpha[j];
            bundle.transform.as_mut().unwrap().alpha[j] = orig + FD_STEP;
            let plus = loss_of(&bundle);
            bundle.transform.as_mut().unwrap().alpha[j] = orig - FD_STEP;
            let minus = loss_of(&bundle);
            bundle.transform.as_mut().unwrap().alpha[j] = orig;
            check(da[j], plus, minus, &format!("alpha[{j}]"));
        }
        for j in 0..db.len() {
            let orig = bundle.transform.as_ref().unwrap().beta[j];
            bundle.transform.as_mut().unwrap().beta[j] = orig + FD_STEP;
            let plus = loss_of(&bundle);
            bundle.transform.as_mut().unwrap().beta[j] = orig - FD_STEP;
            let minus = loss_of(&bundle);
            bundle.transform.as_mut().unwrap().beta[j] = orig;
            check(db[j], plus, minus, &format!("beta[{j}]"));
        }
    }

    assert!(checked > 100, "only {checked} parameters checked");
}

#[test]
fn dltae_gradients_match_finite_differences() {
    check_model_gradients(ModelVariant::DltaeS, NoiseSite::PreTransform, 1);
    check_model_gradients(ModelVariant::DltaeM, NoiseSite::PreTransform, 2);
}

#[test]
fn dltae_post_transform_noise_gradients_match() {
    check_model_gradients(ModelVariant::DltaeS, NoiseSite::PostTransform, 3);
    check_model_gradients(ModelVariant::DltaeM, NoiseSite::PostTransform, 4);
}

#[test]
fn ltae_gradients_match_finite_differences() {
    check_model_gradients(ModelVariant::LtaeS, NoiseSite::PreTransform, 5);
    check_model_gradients(ModelVariant::LtaeM, NoiseSite::PreTransform, 6);
}

#[test]
fn baseline_gradients_match_finite_differences() {
    check_model_gradients(ModelVariant::Ae, NoiseSite::PreTransform, 7);
    check_model_gradients(ModelVariant::Dae, NoiseSite::PreTransform, 8);
    check_model_gradients(ModelVariant::Vae, NoiseSite::PreTransform, 9);
}

// ---------------------------------------------------------------------------
// Gradients should stay correct after the transform moves off identity.
// ---------------------------------------------------------------------------

#[test]
fn gradients_remain_correct_after_training() {
    use ltae_core::metrics::ImageSet;
    let mut config = tiny_config(ModelVariant::DltaeM);
    config.iterations = 50;
    config.seed = 33;
    let mut data_rng = Rng::new(90);
    let data = ImageSet::new(random_batch(8, 6, &mut data_rng));
    let mut bundle = ltae_core::models::train_seeded(&config, &data).unwrap();

    let clean = random_batch(3, 6, &mut data_rng);
    let noise_seed = 777;
    let mut step_rng = Rng::new(noise_seed);
    let fwd = forward_ltae_with_target(&bundle, &clean, &clean, &mut step_rng, true).unwrap();
    let zn = fwd.z_n.clone().unwrap();
    let grads = backward_ltae(&bundle, &fwd).unwrap();
    let da = grads.alpha.unwrap();
    for j in 0..2 {
        let orig = bundle.transform.as_ref().unwrap().alpha[j];
        bundle.transform.as_mut().unwrap().alpha[j] = orig + FD_STEP;
        let plus = frozen_target_loss(&bundle, &clean, &clean, &zn, noise_seed);
        bundle.transform.as_mut().unwrap().alpha[j] = orig - FD_STEP;
        let minus = frozen_target_loss(&bundle, &clean, &clean, &zn, noise_seed);
        bundle.transform.as_mut().unwrap().alpha[j] = orig;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        assert!(
            relative_error(da[j], numeric) <= MAX_REL_ERROR,
            "alpha[{j}] after training: analytic {}, numeric {numeric}",
            da[j]
        );
    }
}
