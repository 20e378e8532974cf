//! Elementwise activation functions and their derivatives.

use serde::{Deserialize, Serialize};

use super::matrix::DenseMatrix;

const LEAKY_SLOPE: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Softplus,
    Sigmoid,
    Tanh,
    Relu,
    LeakyRelu,
    Linear,
}

impl Activation {
    /// Apply the activation at one pre-activation value.
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            // max(x,0) + ln(1+e^-|x|) avoids overflow for large |x|.
            Activation::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if x > 0.0 {
                    x
                } else {
                    LEAKY_SLOPE * x
                }
            }
            Activation::Linear => x,
        }
    }

    /// Derivative evaluated at the pre-activation value.
    #[inline]
    pub fn grad(self, x: f64) -> f64 {
        match self {
            Activation::Softplus => sigmoid(x),
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if x > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Elementwise activation over a matrix of pre-activations.
pub fn activate(a: &DenseMatrix, kind: Activation) -> DenseMatrix {
    a.map(|x| kind.apply(x))
}

/// Elementwise activation derivative over a matrix of pre-activations.
pub fn activate_grad(a: &DenseMatrix, kind: Activation) -> DenseMatrix {
    a.map(|x| kind.grad(x))
}

/// Activation and derivative in one pass, sharing the exponential where the
/// two formulas overlap. Bit-identical to `activate` / `activate_grad`.
pub fn activate_with_grad(a: &DenseMatrix, kind: Activation) -> (DenseMatrix, DenseMatrix) {
    let mut value = a.clone();
    let mut grad = a.clone();
    for (v, g) in value.data_mut().iter_mut().zip(grad.data_mut()) {
        let x = *v;
        match kind {
            Activation::Softplus => {
                let e = (-x.abs()).exp();
                *v = x.max(0.0) + e.ln_1p();
                *g = if x >= 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
            }
            Activation::Sigmoid => {
                let s = kind.apply(x);
                *v = s;
                *g = s * (1.0 - s);
            }
            Activation::Tanh => {
                let t = x.tanh();
                *v = t;
                *g = 1.0 - t * t;
            }
            _ => {
                *v = kind.apply(x);
                *g = kind.grad(x);
            }
        }
    }
    (value, grad)
}
