use serde::{Deserialize, Serialize};

use super::PipelineError;

/// Affine `d → 2` map followed by softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    pub d: usize,
    /// Row-major `2 × d`.
    pub weight: Vec<f64>,
    pub bias: [f64; 2],
}

impl Readout {
    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            weight: vec![0.0; 2 * d],
            bias: [0.0; 2],
        }
    }

    pub fn logits(&self, x: &[f64]) -> [f64; 2] {
        let mut out = self.bias;
        for (c, o) in out.iter_mut().enumerate() {
            *o += self.weight[c * self.d..(c + 1) * self.d]
                .iter()
                .zip(x)
                .map(|(w, v)| w * v)
                .sum::<f64>();
        }
        out
    }

    pub fn probabilities(&self, x: &[f64]) -> [f64; 2] {
        softmax(self.logits(x))
    }

    /// Probability of class 1 per row.
    pub fn scores(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        xs.iter().map(|x| self.probabilities(x)[1]).collect()
    }

    pub fn parameter_count(&self) -> usize {
        2 * self.d + 2
    }

    /// Flattened `[weight; bias]`.
    pub fn flat(&self) -> Vec<f64> {
        self.weight.iter().chain(&self.bias).cloned().collect()
    }

    pub fn from_flat(d: usize, v: &[f64]) -> Self {
        Self {
            d,
            weight: v[..2 * d].to_vec(),
            bias: [v[2 * d], v[2 * d + 1]],
        }
    }
}

pub fn softmax(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e = [(z[0] - m).exp(), (z[1] - m).exp()];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

/// Class weights `N / (2·N_c)`.
pub fn balanced_class_weights(labels: &[u8]) -> [f64; 2] {
    let n1 = labels.iter().filter(|&&l| l == 1).count() as f64;
    let n0 = labels.len() as f64 - n1;
    let n = labels.len() as f64;
    [n / (2.0 * n0.max(1.0)), n / (2.0 * n1.max(1.0))]
}

/// Weighted cross-entropy `Σ c_{y_i}·(−log p_{y_i}) / Σ c_{y_i}` and its
/// gradient in [`Readout::flat`] layout.
pub fn loss_and_grad(r: &Readout, xs: &[Vec<f64>], labels: &[u8], class_weights: [f64; 2]) -> (f64, Vec<f64>) {
    let d = r.d;
    let mut grad = vec![0.0; r.parameter_count()];
    let mut loss = 0.0;
    let mut total = 0.0;
    for (x, &y) in xs.iter().zip(labels) {
        let c = class_weights[y as usize];
        let logits = r.logits(x);
        let p = softmax(logits);
        let m = logits[0].max(logits[1]);
        let lse = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
        loss += c * (lse - logits[y as usize]);
        total += c;
        for k in 0..2 {
            let g = c * (p[k] - if k == y as usize { 1.0 } else { 0.0 });
            for (gw, v) in grad[k * d..(k + 1) * d].iter_mut().zip(x) {
                *gw += g * v;
            }
            grad[2 * d + k] += g;
        }
    }
    let inv = if total > 0.0 { 1.0 / total } else { 0.0 };
    grad.iter_mut().for_each(|g| *g *= inv);
    (loss * inv, grad)
}

/// Full-batch gradient descent from zero weights.
pub fn train_readout(
    xs: &[Vec<f64>],
    labels: &[u8],
    class_weights: [f64; 2],
    steps: usize,
    lr: f64,
) -> Result<Readout, PipelineError> {
    if xs.len() < 2 || xs.len() != labels.len() {
        return Err(PipelineError::Data(format!(
            "readout needs at least two labeled rows, got {} rows and {} labels",
            xs.len(),
            labels.len()
        )));
    }
    if !(labels.contains(&0) && labels.contains(&1)) {
        return Err(PipelineError::SingleClass("readout training"));
    }
    let d = xs[0].len();
    if xs.iter().any(|x| x.len() != d) {
        return Err(PipelineError::Data("ragged feature rows".into()));
    }
    let mut r = Readout::zeros(d);
    let mut flat = r.flat();
    for _ in 0..steps {
        let (_, g) = loss_and_grad(&r, xs, labels, class_weights);
        for (p, gi) in flat.iter_mut().zip(&g) {
            *p -= lr * gi;
        }
        r = Readout::from_flat(d, &flat);
    }
    Ok(r)
}
