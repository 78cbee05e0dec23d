//! Minimal dense layers shared by the frontends and the QEP.

use rand::Rng;
use serde::{Deserialize, Serialize};

pub const LN_EPS: f64 = 1e-5;

/// Affine map `y = W x + b`, `W` stored row-major as `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Linear {
    /// Uniform init in `±1/sqrt(inputs)`.
    pub fn seeded<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let a = 1.0 / (inputs.max(1) as f64).sqrt();
        Self {
            inputs,
            outputs,
            weight: (0..inputs * outputs).map(|_| rng.random_range(-a..=a)).collect(),
            bias: (0..outputs).map(|_| rng.random_range(-a..=a)).collect(),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weight: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn from_parts(inputs: usize, outputs: usize, weight: Vec<f64>, bias: Vec<f64>) -> Option<Self> {
        (weight.len() == inputs * outputs && bias.len() == outputs).then_some(Self {
            inputs,
            outputs,
            weight,
            bias,
        })
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.inputs, "linear layer input width");
        self.weight
            .chunks_exact(self.inputs.max(1))
            .take(self.outputs)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }
}

/// Layer normalization without affine parameters.
pub fn layer_norm(x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let inv = 1.0 / (var + LN_EPS).sqrt();
    x.iter().map(|v| (v - mean) * inv).collect()
}

pub fn relu(x: &mut [f64]) {
    for v in x {
        *v = v.max(0.0);
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `Linear → LayerNorm → ReLU → Linear`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub first: Linear,
    pub second: Linear,
}

impl Mlp {
    pub fn seeded<R: Rng + ?Sized>(inputs: usize, hidden: usize, outputs: usize, rng: &mut R) -> Self {
        Self {
            first: Linear::seeded(inputs, hidden, rng),
            second: Linear::seeded(hidden, outputs, rng),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.second.forward(&stem(&self.first, x))
    }
}

/// `ReLU(LayerNorm(W x + b))`.
pub fn stem(layer: &Linear, x: &[f64]) -> Vec<f64> {
    let mut h = layer_norm(&layer.forward(x));
    relu(&mut h);
    h
}
