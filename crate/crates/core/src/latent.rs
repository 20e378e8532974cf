//! Latent-space transformation: batch normalization targets, the learned
//! per-dimension affine latent map, its inverse, latent noise injection and
//! the transform-matching loss.
//!
//! The latent map `z_L = alpha (.) (z (+) beta)` is an affine bijection of
//! R^m whenever every `alpha_i` is nonzero, so the transformed space keeps
//! the topology of the encoder output space. The normalization targets are
//! detached regression targets: gradients flow through `z_L` into `alpha`,
//! `beta` and the encoder, never through the batch statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{DenseMatrix, Rng};

/// Variance/range guard: dimensions flatter than this normalize to zero.
pub const DEGENERATE_EPS: f64 = 1e-8;
/// Alphas smaller than this make the latent map non-invertible.
pub const INVERTIBLE_EPS: f64 = 1e-12;
/// Zero-distance guard for the transform loss subgradient.
const ZERO_DISTANCE_EPS: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentSpace {
    /// Encoder output space Z.
    Encoder,
    /// Normalization target space Z_N.
    Normalized,
    /// Learned transformed space Z_L.
    Transformed,
}

/// A batch of latent vectors tagged with the space it lives in.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentBatch {
    matrix: DenseMatrix,
    space: LatentSpace,
}

impl LatentBatch {
    pub fn new(matrix: DenseMatrix, space: LatentSpace) -> LatentBatch {
        LatentBatch { matrix, space }
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.matrix
    }

    pub fn space(&self) -> LatentSpace {
        self.space
    }

    pub fn batch_size(&self) -> usize {
        self.matrix.rows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationKind {
    Standard,
    MinMax,
}

/// The learned latent network: `z_L = alpha (.) (z (+) beta)` per dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentTransform {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub variant: NormalizationKind,
}

impl LatentTransform {
    /// Identity transform (alpha all ones, beta all zeros), so an untrained
    /// latent network behaves like a plain autoencoder.
    pub fn identity(dim: usize, variant: NormalizationKind) -> LatentTransform {
        LatentTransform {
            alpha: vec![1.0; dim],
            beta: vec![0.0; dim],
            variant,
        }
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDistribution {
    Gaussian,
    Uniform,
}

/// Exploration noise added to latent vectors during training.
///
/// The distribution is bound to the normalization variant: standard
/// normalization pairs with Gaussian noise, min-max with uniform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub distribution: NoiseDistribution,
}

impl NoiseSpec {
    pub fn new(sigma: f64, distribution: NoiseDistribution) -> Result<NoiseSpec> {
        if !(sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(NoiseSpec {
            sigma,
            distribution,
        })
    }

    pub fn for_variant(variant: NormalizationKind, sigma: f64) -> Result<NoiseSpec> {
        let distribution = match variant {
            NormalizationKind::Standard => NoiseDistribution::Gaussian,
            NormalizationKind::MinMax => NoiseDistribution::Uniform,
        };
        NoiseSpec::new(sigma, distribution)
    }
}

/// Per-dimension statistics of a latent batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl BatchStats {
    /// Population statistics (std divides by N).
    pub fn compute(batch: &LatentBatch) -> Result<BatchStats> {
        let m = batch.matrix();
        let (n, dim) = m.shape();
        if n == 0 {
            return Err(Error::Empty("BatchStats::compute"));
        }
        let mut mean = vec![0.0; dim];
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for i in 0..n {
            for (j, &v) in m.row(i).iter().enumerate() {
                mean[j] += v;
                if v < min[j] {
                    min[j] = v;
                }
                if v > max[j] {
                    max[j] = v;
                }
            }
        }
        for v in &mut mean {
            *v /= n as f64;
        }
        let mut var = vec![0.0; dim];
        for i in 0..n {
            for (j, &v) in m.row(i).iter().enumerate() {
                let d = v - mean[j];
                var[j] += d * d;
            }
        }
        let std = var.iter().map(|v| (v / n as f64).sqrt()).collect();
        Ok(BatchStats {
            mean,
            std,
            min,
            max,
        })
    }
}

fn require_batch(batch: &LatentBatch) -> Result<()> {
    if batch.batch_size() < 2 {
        return Err(Error::DegenerateBatch {
            got: batch.batch_size(),
        });
    }
    Ok(())
}

/// Standard normalization target: per dimension `(z - mean) / std` with the
/// population standard deviation. Dimensions with `std < 1e-8` map to zero.
pub fn standard_normalize(batch: &LatentBatch) -> Result<LatentBatch> {
    require_batch(batch)?;
    let stats = BatchStats::compute(batch)?;
    let m = batch.matrix();
    let mut out = DenseMatrix::zeros(m.rows(), m.cols());
    for i in 0..m.rows() {
        let row = m.row(i);
        let out_row = out.row_mut(i);
        for j in 0..row.len() {
            out_row[j] = if stats.std[j] < DEGENERATE_EPS {
                0.0
            } else {
                (row[j] - stats.mean[j]) / stats.std[j]
            };
        }
    }
    Ok(LatentBatch::new(out, LatentSpace::Normalized))
}

/// Min-max normalization target: per dimension `(z - min) / (max - min)`.
/// Dimensions with range below `1e-8` map to zero.
pub fn minmax_normalize(batch: &LatentBatch) -> Result<LatentBatch> {
    require_batch(batch)?;
    let stats = BatchStats::compute(batch)?;
    let m = batch.matrix();
    let mut out = DenseMatrix::zeros(m.rows(), m.cols());
    for i in 0..m.rows() {
        let row = m.row(i);
        let out_row = out.row_mut(i);
        for j in 0..row.len() {
            let range = stats.max[j] - stats.min[j];
            out_row[j] = if range < DEGENERATE_EPS {
                0.0
            } else {
                (row[j] - stats.min[j]) / range
            };
        }
    }
    Ok(LatentBatch::new(out, LatentSpace::Normalized))
}

pub fn normalize(batch: &LatentBatch, kind: NormalizationKind) -> Result<LatentBatch> {
    match kind {
        NormalizationKind::Standard => standard_normalize(batch),
        NormalizationKind::MinMax => minmax_normalize(batch),
    }
}

fn check_dims(batch: &LatentBatch, transform: &LatentTransform, context: &'static str) -> Result<()> {
    if batch.dim() != transform.dim() {
        return Err(Error::shape(
            context,
            format!("latent dim {}", transform.dim()),
            format!("{}", batch.dim()),
        ));
    }
    Ok(())
}

/// Apply the latent network rowwise: `z_L = alpha (.) (z (+) beta)`.
pub fn latent_forward(batch: &LatentBatch, transform: &LatentTransform) -> Result<LatentBatch> {
    check_dims(batch, transform, "latent_forward")?;
    let m = batch.matrix();
    let mut out = DenseMatrix::zeros(m.rows(), m.cols());
    for i in 0..m.rows() {
        let row = m.row(i);
        let out_row = out.row_mut(i);
        for j in 0..row.len() {
            out_row[j] = transform.alpha[j] * (row[j] + transform.beta[j]);
        }
    }
    Ok(LatentBatch::new(out, LatentSpace::Transformed))
}

/// Invert the latent network: `z = z_L / alpha - beta`.
///
/// Fails if any `|alpha_i|` is below `1e-12`; with all alphas nonzero the
/// map is a continuous bijection with continuous inverse.
pub fn latent_inverse(batch: &LatentBatch, transform: &LatentTransform) -> Result<LatentBatch> {
    check_dims(batch, transform, "latent_inverse")?;
    for (j, &a) in transform.alpha.iter().enumerate() {
        if a.abs() <= INVERTIBLE_EPS {
            return Err(Error::NonInvertible {
                index: j,
                value: a,
            });
        }
    }
    let m = batch.matrix();
    let mut out = DenseMatrix::zeros(m.rows(), m.cols());
    for i in 0..m.rows() {
        let row = m.row(i);
        let out_row = out.row_mut(i);
        for j in 0..row.len() {
            out_row[j] = row[j] / transform.alpha[j] - transform.beta[j];
        }
    }
    Ok(LatentBatch::new(out, LatentSpace::Encoder))
}

/// Gradients of the latent network.
#[derive(Clone, Debug)]
pub struct LatentGrads {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub input: DenseMatrix,
}

/// Backpropagate through `z_L = alpha (.) (z (+) beta)`:
/// `d/d alpha_j = sum_batch upstream_j * (z_j + beta_j)`,
/// `d/d beta_j = sum_batch upstream_j * alpha_j`,
/// `d/d z = upstream (.) alpha`.
pub fn latent_backward(
    upstream: &DenseMatrix,
    batch: &LatentBatch,
    transform: &LatentTransform,
) -> Result<LatentGrads> {
    check_dims(batch, transform, "latent_backward")?;
    if upstream.shape() != batch.matrix().shape() {
        return Err(Error::shape(
            "latent_backward",
            format!("{}x{}", batch.batch_size(), batch.dim()),
            format!("{}x{}", upstream.rows(), upstream.cols()),
        ));
    }
    let m = batch.matrix();
    let dim = m.cols();
    let mut d_alpha = vec![0.0; dim];
    let mut d_beta = vec![0.0; dim];
    let mut d_input = DenseMatrix::zeros(m.rows(), dim);
    for i in 0..m.rows() {
        let up = upstream.row(i);
        let row = m.row(i);
        let d_row = d_input.row_mut(i);
        for j in 0..dim {
            d_alpha[j] += up[j] * (row[j] + transform.beta[j]);
            d_beta[j] += up[j] * transform.alpha[j];
            d_row[j] = up[j] * transform.alpha[j];
        }
    }
    Ok(LatentGrads {
        alpha: d_alpha,
        beta: d_beta,
        input: d_input,
    })
}

/// Add iid exploration noise to every element: `N(0, sigma^2)` for the
/// Gaussian spec, `U(-sigma, sigma)` for the uniform one. `sigma = 0` is the
/// identity and draws nothing from the generator.
pub fn inject_noise(batch: &LatentBatch, spec: &NoiseSpec, rng: &mut Rng) -> LatentBatch {
    if spec.sigma == 0.0 {
        return batch.clone();
    }
    let m = batch.matrix();
    let mut out = m.clone();
    for v in out.data_mut() {
        let eps = match spec.distribution {
            NoiseDistribution::Gaussian => spec.sigma * rng.standard_normal(),
            NoiseDistribution::Uniform => rng.uniform(-spec.sigma, spec.sigma),
        };
        *v += eps;
    }
    LatentBatch::new(out, batch.space())
}

/// L2 transform-matching loss between the normalization target `z_N` and the
/// latent network output `z_L`: the mean over the batch of the per-sample
/// Euclidean norm `||z_N - z_L||_2`.
///
/// `z_N` is a detached target; the returned gradient is with respect to
/// `z_L` only, with subgradient zero at the kink.
pub fn transform_loss(target: &LatentBatch, output: &LatentBatch) -> Result<(f64, DenseMatrix)> {
    let t = target.matrix();
    let o = output.matrix();
    if t.shape() != o.shape() {
        return Err(Error::shape(
            "transform_loss",
            format!("{}x{}", t.rows(), t.cols()),
            format!("{}x{}", o.rows(), o.cols()),
        ));
    }
    let n = t.rows() as f64;
    let mut loss = 0.0;
    let mut grad = DenseMatrix::zeros(o.rows(), o.cols());
    for i in 0..t.rows() {
        let tr = t.row(i);
        let or = o.row(i);
        let dist2: f64 = tr
            .iter()
            .zip(or)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let dist = dist2.sqrt();
        loss += dist;
        if dist > ZERO_DISTANCE_EPS {
            let g = grad.row_mut(i);
            for j in 0..tr.len() {
                g[j] = -(tr[j] - or[j]) / (dist * n);
            }
        }
    }
    Ok((loss / n, grad))
}
