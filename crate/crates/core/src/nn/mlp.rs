//! Dense multi-layer perceptron with manual backpropagation.
//!
//! Each layer computes `activation(X * W^T + b)` over a row-major batch.
//! Weights are stored `out_dim x in_dim`.

use serde::{Deserialize, Serialize};

use super::activation::{activate, activate_with_grad, Activation};
use super::matrix::DenseMatrix;
use super::rng::Rng;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidConfig(format!(
                "layer dims must be >= 1, got {in_dim} -> {out_dim}"
            )));
        }
        Ok(LayerSpec {
            in_dim,
            out_dim,
            activation,
        })
    }
}

/// Xavier uniform initialization: W ~ U(-L, L) with L = sqrt(6 / (in + out)),
/// biases zero.
pub fn xavier_init(spec: LayerSpec, rng: &mut Rng) -> (DenseMatrix, Vec<f64>) {
    let limit = (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt();
    let weight = DenseMatrix::from_vec(
        spec.out_dim,
        spec.in_dim,
        rng.uniform_vec(-limit, limit, spec.out_dim * spec.in_dim),
    )
    .expect("length matches by construction");
    (weight, vec![0.0; spec.out_dim])
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    spec: LayerSpec,
    weight: DenseMatrix,
    bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(spec: LayerSpec, rng: &mut Rng) -> Self {
        let (weight, bias) = xavier_init(spec, rng);
        DenseLayer { spec, weight, bias }
    }

    pub fn from_parts(spec: LayerSpec, weight: DenseMatrix, bias: Vec<f64>) -> Result<Self> {
        if weight.shape() != (spec.out_dim, spec.in_dim) || bias.len() != spec.out_dim {
            return Err(Error::shape(
                "DenseLayer::from_parts",
                format!("weight {}x{}, bias {}", spec.out_dim, spec.in_dim, spec.out_dim),
                format!("weight {}x{}, bias {}", weight.rows(), weight.cols(), bias.len()),
            ));
        }
        Ok(DenseLayer { spec, weight, bias })
    }

    pub fn spec(&self) -> LayerSpec {
        self.spec
    }

    pub fn weight(&self) -> &DenseMatrix {
        &self.weight
    }

    pub fn weight_mut(&mut self) -> &mut DenseMatrix {
        &mut self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }
}

/// Affine part of a layer: `X * W^T + b` for a batch `X`.
pub fn linear_forward(weight: &DenseMatrix, bias: &[f64], x: &DenseMatrix) -> Result<DenseMatrix> {
    if x.cols() != weight.cols() {
        return Err(Error::shape(
            "linear_forward",
            format!("input cols {}", weight.cols()),
            format!("{}", x.cols()),
        ));
    }
    if bias.len() != weight.rows() {
        return Err(Error::shape(
            "linear_forward",
            format!("bias length {}", weight.rows()),
            format!("{}", bias.len()),
        ));
    }
    let mut out = x.matmul_transpose_rhs(weight)?;
    for i in 0..out.rows() {
        for (v, b) in out.row_mut(i).iter_mut().zip(bias) {
            *v += b;
        }
    }
    Ok(out)
}

/// Per-layer values recorded by a forward pass, sufficient for backprop.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input batch of each layer (post-activation of the previous one).
    inputs: Vec<DenseMatrix>,
    /// Pre-activation batch of each layer.
    pre_activations: Vec<DenseMatrix>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.inputs.first().map_or(0, DenseMatrix::rows)
    }
}

/// Parameter gradients, one entry per layer.
#[derive(Clone, Debug)]
pub struct MlpGrads {
    pub weights: Vec<DenseMatrix>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(DenseMatrix::is_finite)
            && self.biases.iter().flatten().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            w.scale(factor);
        }
        for b in &mut self.biases {
            for v in b {
                *v *= factor;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
}

impl Mlp {
    /// Build from layer specs with Xavier-initialized weights.
    pub fn new(specs: &[LayerSpec], rng: &mut Rng) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::Empty("Mlp::new: no layers"));
        }
        for pair in specs.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::shape(
                    "Mlp::new",
                    format!("layer in_dim {}", pair[0].out_dim),
                    format!("{}", pair[1].in_dim),
                ));
            }
        }
        Ok(Mlp {
            layers: specs.iter().map(|&s| DenseLayer::new(s, rng)).collect(),
        })
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Empty("Mlp::from_layers: no layers"));
        }
        Ok(Mlp { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].spec.in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].spec.out_dim
    }

    /// Full forward pass, returning the output batch and a cache for backprop.
    pub fn forward(&self, x: &DenseMatrix) -> Result<(DenseMatrix, ForwardCache)> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut current = x.clone();
        for layer in &self.layers {
            let pre = linear_forward(&layer.weight, &layer.bias, &current)?;
            let post = activate(&pre, layer.spec.activation);
            inputs.push(current);
            pre_activations.push(pre);
            current = post;
        }
        Ok((
            current,
            ForwardCache {
                inputs,
                pre_activations,
            },
        ))
    }

    /// Forward pass that keeps no cache; for inference and evaluation.
    pub fn infer(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut current = x.clone();
        for layer in &self.layers {
            let pre = linear_forward(&layer.weight, &layer.bias, &current)?;
            current = activate(&pre, layer.spec.activation);
        }
        Ok(current)
    }

    /// Backpropagate `d loss / d output` through the cached forward pass.
    ///
    /// Returns per-layer parameter gradients and the gradient with respect to
    /// the network input.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: &DenseMatrix,
    ) -> Result<(MlpGrads, DenseMatrix)> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::shape(
                "Mlp::backward",
                format!("cache for {} layers", self.layers.len()),
                format!("{}", cache.inputs.len()),
            ));
        }
        let batch = cache.batch_size();
        if upstream.shape() != (batch, self.output_dim()) {
            return Err(Error::shape(
                "Mlp::backward",
                format!("upstream {batch}x{}", self.output_dim()),
                format!("{}x{}", upstream.rows(), upstream.cols()),
            ));
        }

        let mut weights = vec![DenseMatrix::zeros(0, 0); self.layers.len()];
        let mut biases = vec![Vec::new(); self.layers.len()];
        let mut grad = upstream.clone();

        for (l, layer) in self.layers.iter().enumerate().rev() {
            let pre = &cache.pre_activations[l];
            if pre.shape() != grad.shape() {
                return Err(Error::shape(
                    "Mlp::backward",
                    format!("pre-activation {}x{}", grad.rows(), grad.cols()),
                    format!("{}x{}", pre.rows(), pre.cols()),
                ));
            }
            let dz = grad.hadamard(&activate_grad(pre, layer.spec.activation))?;
            weights[l] = dz.matmul_transpose_lhs(&cache.inputs[l])?;
            biases[l] = dz.column_sums();
            grad = dz.matmul(&layer.weight)?;
        }

        Ok((MlpGrads { weights, biases }, grad))
    }

    /// Plain SGD update: every parameter moves by `-lr * gradient`.
    pub fn sgd_step(&mut self, grads: &MlpGrads, lr: f64) -> Result<()> {
        if grads.weights.len() != self.layers.len() {
            return Err(Error::shape(
                "Mlp::sgd_step",
                format!("{} layers", self.layers.len()),
                format!("{}", grads.weights.len()),
            ));
        }
        if !grads.is_finite() {
            return Err(Error::NonFinite { context: "Mlp::sgd_step: gradient" });
        }
        for (layer, (gw, gb)) in self
            .layers
            .iter_mut()
            .zip(grads.weights.iter().zip(&grads.biases))
        {
            if gw.shape() != layer.weight.shape() || gb.len() != layer.bias.len() {
                return Err(Error::shape(
                    "Mlp::sgd_step",
                    format!("{}x{}", layer.weight.rows(), layer.weight.cols()),
                    format!("{}x{}", gw.rows(), gw.cols()),
                ));
            }
            for (w, g) in layer.weight.data_mut().iter_mut().zip(gw.data()) {
                *w -= lr * g;
            }
            for (b, g) in layer.bias.iter_mut().zip(gb) {
                *b -= lr * g;
            }
        }
        Ok(())
    }

    /// Upper bound on the Lipschitz constant of the network: the product of
    /// the spectral norms of the weight matrices. Valid because every
    /// supported activation is 1-Lipschitz.
    pub fn lipschitz_bound(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| spectral_norm(&l.weight))
            .product()
    }
}

/// Largest singular value by power iteration (50 steps, tolerance 1e-8).
pub fn spectral_norm(w: &DenseMatrix) -> f64 {
    let cols = w.cols();
    let mut v = DenseMatrix::from_vec(1, cols, vec![1.0 / (cols as f64).sqrt(); cols])
        .expect("length matches");
    let mut sigma = 0.0;
    for _ in 0..50 {
        // u = W v, then v = W^T u, renormalized.
        let u = v.matmul_transpose_rhs(w).expect("shapes agree");
        let norm_u = l2_norm(u.data());
        if norm_u == 0.0 {
            return 0.0;
        }
        let next = u.matmul(w).expect("shapes agree");
        let norm_next = l2_norm(next.data());
        if norm_next == 0.0 {
            return 0.0;
        }
        let new_sigma = norm_next / norm_u;
        v = next.map(|x| x / norm_next);
        if (new_sigma - sigma).abs() <= 1e-8 * new_sigma.max(1.0) {
            return new_sigma;
        }
        sigma = new_sigma;
    }
    sigma
}

fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}
