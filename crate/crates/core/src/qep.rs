//! Quantum-enhanced processor applied to the aggregated latent.
//!
//! Forward pass:
//!
//! ```text
//! e      = Enc(x)                         (d → 2N_q)
//! θ      = π·s·(e + δ)                    per layer, (θ_y, θ_z) per qubit
//! q_raw  = ⟨O_j⟩ over the observable set  (d_q values in [−1, 1])
//! q      = (1−β)·Dec(q_raw) + β·BP(e)
//! z      = Fusion([x; q])
//! α      = sigmoid(w·LN(x) + b)
//! f_out  = α·z + (1−α)·x
//! ```

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{layer_norm, sigmoid, Linear, Mlp};
use crate::params::{Bundle, BundleError};
use crate::pipeline::{run_demo, stratified_split, DemoConfig, LabeledBatch, PipelineError, ProcessorMode};
use crate::qsim::{run_circuit, run_noisy, Angles, NoiseSpec, Pauli, PauliTerm, QsimError};
use crate::seed;

pub const QEP_KIND: &str = "qep";

#[derive(Debug, Error)]
pub enum QepError {
    #[error("non-finite values after the {0} stage")]
    NonFinite(&'static str),
    #[error("invalid QEP configuration: {0}")]
    Config(String),
    #[error("input has width {found}, expected {expected}")]
    Width { expected: usize, found: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Pipeline(#[from] Box<PipelineError>),
}

/// Smallest `N_q` with `N_q² ≥ d`.
pub fn suggest_qubits(d: usize) -> usize {
    let mut n = (d as f64).sqrt().floor() as usize;
    while n * n < d {
        n += 1;
    }
    n.max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservableMode {
    /// `X_q`, `Z_q`, and `Z_q Z_{q+1}`.
    #[default]
    NearestNeighbor,
    /// `X_q`, `Z_q`, and `Z_a Z_b` for all `a < b`.
    AllPairs,
}

impl std::str::FromStr for ObservableMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nearest-neighbor" | "nn" => Ok(ObservableMode::NearestNeighbor),
            "all-pairs" => Ok(ObservableMode::AllPairs),
            other => Err(format!("unknown observable mode '{other}'")),
        }
    }
}

/// All `X_q` ascending, all `Z_q` ascending, then `ZZ` pairs in
/// lexicographic order.
pub fn observable_set(n_q: usize, mode: ObservableMode) -> Result<Vec<PauliTerm>, QepError> {
    if n_q < 2 {
        return Err(QepError::Config(format!("observable set needs N_q >= 2, got {n_q}")));
    }
    let mut terms: Vec<PauliTerm> = (0..n_q).map(|q| PauliTerm::single(q, Pauli::X)).collect();
    terms.extend((0..n_q).map(|q| PauliTerm::single(q, Pauli::Z)));
    match mode {
        ObservableMode::NearestNeighbor => terms.extend((0..n_q - 1).map(|q| PauliTerm::zz(q, q + 1))),
        ObservableMode::AllPairs => {
            for a in 0..n_q {
                for b in a + 1..n_q {
                    terms.push(PauliTerm::zz(a, b));
                }
            }
        }
    }
    Ok(terms)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QepConfig {
    pub d: usize,
    pub n_q: usize,
    pub layers: usize,
    pub scale: f64,
    pub mode: ObservableMode,
    pub seed: u64,
}

impl Default for QepConfig {
    fn default() -> Self {
        Self {
            d: 64,
            n_q: 8,
            layers: 2,
            scale: 0.5,
            mode: ObservableMode::NearestNeighbor,
            seed: 0,
        }
    }
}

impl QepConfig {
    pub fn d_q(&self) -> usize {
        let n = self.n_q;
        match self.mode {
            ObservableMode::NearestNeighbor => 2 * n + n.saturating_sub(1),
            ObservableMode::AllPairs => 2 * n + n * n.saturating_sub(1) / 2,
        }
    }

    pub fn validate(&self) -> Result<(), QepError> {
        if self.d == 0 || self.n_q < 2 || self.layers == 0 {
            return Err(QepError::Config(format!(
                "need d >= 1, N_q >= 2, L >= 1 (got d={}, N_q={}, L={})",
                self.d, self.n_q, self.layers
            )));
        }
        if self.n_q > crate::qsim::MAX_QUBITS {
            return Err(QepError::Config(format!(
                "N_q={} exceeds {}",
                self.n_q,
                crate::qsim::MAX_QUBITS
            )));
        }
        if !(self.scale >= 0.0) || !self.scale.is_finite() {
            return Err(QepError::Config(format!("angle scale {} must be finite and >= 0", self.scale)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QepParams {
    pub config: QepConfig,
    /// Offsets `δ`, shape `L × N_q × 2`.
    pub delta: Angles,
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub bypass: Linear,
    pub fusion: Linear,
    pub alpha_gate: Linear,
    /// Unconstrained storage for `β = sigmoid(beta_logit)`; `±∞` is allowed.
    pub beta_logit: f64,
    pub observables: Vec<PauliTerm>,
}

impl QepParams {
    pub fn seeded(cfg: &QepConfig) -> Result<Self, QepError> {
        cfg.validate()?;
        let mut rng = seed::rng(seed::derive_named(cfg.seed, "qep"));
        let (d, nq2, dq) = (cfg.d, 2 * cfg.n_q, cfg.d_q());
        let mut delta = Angles::zeros(cfg.layers, cfg.n_q);
        for v in &mut delta.data {
            *v = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        }
        Ok(Self {
            config: *cfg,
            delta,
            encoder: Mlp::seeded(d, nq2, nq2, &mut rng),
            decoder: Mlp::seeded(dq, d, d, &mut rng),
            bypass: Linear::seeded(nq2, d, &mut rng),
            fusion: Linear::seeded(2 * d, d, &mut rng),
            alpha_gate: Linear::seeded(d, 1, &mut rng),
            beta_logit: 0.0,
            observables: observable_set(cfg.n_q, cfg.mode)?,
        })
    }

    pub fn d_q(&self) -> usize {
        self.observables.len()
    }

    pub fn beta(&self) -> f64 {
        sigmoid(self.beta_logit)
    }

    /// Stores `β ∈ [0, 1]` as its logit (`±∞` at the endpoints).
    pub fn set_beta(&mut self, beta: f64) {
        self.beta_logit = (beta / (1.0 - beta)).ln();
    }

    /// Pins `α` to 0 by zeroing the gate weights and sending the bias to `−∞`.
    pub fn force_alpha_zero(&mut self) {
        self.alpha_gate.weight.iter_mut().for_each(|w| *w = 0.0);
        self.alpha_gate.bias[0] = f64::NEG_INFINITY;
    }

    pub fn to_bundle(&self) -> Bundle {
        let c = &self.config;
        let mut b = Bundle::new(QEP_KIND, c.seed);
        b.config = Some(serde_json::to_value(c).expect("config serializes"));
        let flat: Vec<f64> = self.delta.data.iter().flat_map(|&(y, z)| [y, z]).collect();
        b.push_real("delta", vec![c.layers, c.n_q, 2], &flat);
        b.push_mlp("encoder", &self.encoder);
        b.push_mlp("decoder", &self.decoder);
        b.push_linear("bypass", &self.bypass);
        b.push_linear("fusion", &self.fusion);
        b.push_linear("alpha_gate", &self.alpha_gate);
        b.push_real("beta_logit", vec![1], &[self.beta_logit]);
        b
    }

    pub fn from_bundle(b: &Bundle) -> Result<Self, QepError> {
        b.expect_kind(QEP_KIND)?;
        let cfg: QepConfig = match &b.config {
            Some(v) => serde_json::from_value(v.clone()).map_err(BundleError::from)?,
            None => return Err(QepError::Config("bundle header lacks a QEP config".into())),
        };
        cfg.validate()?;
        let (d, nq2, dq) = (cfg.d, 2 * cfg.n_q, cfg.d_q());
        let flat = b.real("delta", &[cfg.layers, cfg.n_q, 2])?;
        let delta = Angles {
            layers: cfg.layers,
            n_qubits: cfg.n_q,
            data: flat.chunks_exact(2).map(|p| (p[0], p[1])).collect(),
        };
        // β may sit at ±∞, which the finite-value check in `real` rejects
        let beta = b.get("beta_logit")?;
        if beta.shape != [1] || beta.data[0].im != 0.0 || beta.data[0].re.is_nan() {
            return Err(QepError::Config("beta_logit must be one real, non-NaN scalar".into()));
        }
        Ok(Self {
            config: cfg,
            delta,
            encoder: b.mlp("encoder", d, nq2, nq2)?,
            decoder: b.mlp("decoder", dq, d, d)?,
            bypass: b.linear("bypass", nq2, d)?,
            fusion: b.linear("fusion", 2 * d, d)?,
            alpha_gate: b.linear("alpha_gate", d, 1)?,
            beta_logit: beta.data[0].re,
            observables: observable_set(cfg.n_q, cfg.mode)?,
        })
    }
}

fn finite(stage: &'static str, v: &[f64]) -> Result<(), QepError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(QepError::NonFinite(stage))
    }
}

/// `e = Enc(x)` and `θ^(l,q) = π·s·(e_{2q} + δ_y, e_{2q+1} + δ_z)`
/// (zero-based `e`).
pub fn encode_angles(x: &[f64], p: &QepParams) -> Result<(Vec<f64>, Angles), QepError> {
    if x.len() != p.config.d {
        return Err(QepError::Width {
            expected: p.config.d,
            found: x.len(),
        });
    }
    finite("input", x)?;
    let e = p.encoder.forward(x);
    finite("encoder", &e)?;
    Ok((e.clone(), angles_from(&e, p)))
}

pub(crate) fn angles_from(e: &[f64], p: &QepParams) -> Angles {
    let c = &p.config;
    let mut a = Angles::zeros(c.layers, c.n_q);
    for l in 0..c.layers {
        for q in 0..c.n_q {
            let (dy, dz) = p.delta.get(l, q);
            a.set(
                l,
                q,
                (PI * c.scale * (e[2 * q] + dy), PI * c.scale * (e[2 * q + 1] + dz)),
            );
        }
    }
    a
}

/// Observable readout; noisy specs run the density-matrix evaluator.
pub fn quantum_readout(angles: &Angles, p: &QepParams, noise: &NoiseSpec) -> Result<Vec<f64>, QepError> {
    let c = &p.config;
    if noise.is_noiseless() {
        let s = run_circuit(angles, c.layers, c.n_q)?;
        p.observables.iter().map(|t| s.expectation(t).map_err(Into::into)).collect()
    } else {
        let rho = run_noisy(angles, c.layers, c.n_q, noise)?;
        p.observables.iter().map(|t| rho.expectation(t).map_err(Into::into)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QepOutput {
    pub f_out: Vec<f64>,
    pub q_raw: Vec<f64>,
    pub q: Vec<f64>,
    pub z: Vec<f64>,
    pub alpha: f64,
}

/// `q = (1−β)·q_dec + β·q_bp`.
pub fn mix_branches(q_dec: &[f64], q_bp: &[f64], beta: f64) -> Vec<f64> {
    q_dec.iter().zip(q_bp).map(|(a, b)| (1.0 - beta) * a + beta * b).collect()
}

/// `f_out = α·z + (1−α)·x`.
pub fn interpolate(z: &[f64], x: &[f64], alpha: f64) -> Vec<f64> {
    z.iter().zip(x).map(|(zi, xi)| alpha * zi + (1.0 - alpha) * xi).collect()
}

pub fn qep_forward(x: &[f64], p: &QepParams, noise: &NoiseSpec) -> Result<QepOutput, QepError> {
    let (e, angles) = encode_angles(x, p)?;
    let q_raw = quantum_readout(&angles, p, noise)?;
    finite("circuit", &q_raw)?;
    let q_dec = p.decoder.forward(&q_raw);
    finite("decoder", &q_dec)?;
    let q_bp = p.bypass.forward(&e);
    finite("bypass", &q_bp)?;
    let q = mix_branches(&q_dec, &q_bp, p.beta());
    finite("mixing", &q)?;
    let joined: Vec<f64> = x.iter().chain(&q).cloned().collect();
    let z = p.fusion.forward(&joined);
    finite("fusion", &z)?;
    let alpha = sigmoid(p.alpha_gate.forward(&layer_norm(x))[0]);
    if alpha.is_nan() {
        return Err(QepError::NonFinite("alpha gate"));
    }
    let f_out = interpolate(&z, x, alpha);
    finite("interpolation", &f_out)?;
    Ok(QepOutput {
        f_out,
        q_raw,
        q,
        z,
        alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QepDiagnostics {
    pub alpha_mean: f64,
    /// Population standard deviation over every (sample, coordinate) of `q`.
    pub q_std: f64,
}

impl QepDiagnostics {
    pub fn from_outputs(outs: &[QepOutput]) -> Self {
        let n = outs.len().max(1) as f64;
        let alpha_mean = outs.iter().map(|o| o.alpha).sum::<f64>() / n;
        let all: Vec<f64> = outs.iter().flat_map(|o| o.q.iter().cloned()).collect();
        let m = all.len().max(1) as f64;
        let mean = all.iter().sum::<f64>() / m;
        let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
        Self {
            alpha_mean,
            q_std: var.sqrt(),
        }
    }
}

/// Parallel forward over a batch.
pub fn qep_batch(xs: &[Vec<f64>], p: &QepParams, noise: &NoiseSpec) -> Result<(Vec<QepOutput>, QepDiagnostics), QepError> {
    if xs.is_empty() {
        return Err(QepError::EmptyBatch);
    }
    let outs: Vec<QepOutput> = xs.par_iter().map(|x| qep_forward(x, p, noise)).collect::<Result<_, _>>()?;
    let diag = QepDiagnostics::from_outputs(&outs);
    Ok((outs, diag))
}

/// One row of the diagnostics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub batch_id: usize,
    pub n_q: usize,
    pub d_q: usize,
    pub alpha_mean: f64,
    pub q_std: f64,
    pub noise_kind: String,
    pub seed: u64,
}

pub fn write_diagnostics_csv<W: Write>(rows: &[DiagnosticsRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(["batch_id", "n_q", "d_q", "alpha_mean", "q_std", "noise_kind", "seed"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitSweepRecord {
    pub n_q: usize,
    pub d_q: usize,
    pub seed: u64,
    pub runtime_ms: f64,
    pub alpha_mean: f64,
    pub q_std: f64,
    pub accuracy: f64,
    pub f1_positive: f64,
    /// `N_q` equals the square-root heuristic for this latent width.
    pub suggested: bool,
}

/// Runs the demo pipeline once per `N_q` on a stratified 80/20 split of
/// `batch`.
pub fn qubit_sweep(batch: &LabeledBatch, n_qs: &[usize], base: &DemoConfig) -> Result<Vec<QubitSweepRecord>, QepError> {
    if batch.is_empty() {
        return Err(QepError::EmptyBatch);
    }
    let (train_idx, test_idx) = stratified_split(&batch.labels, 0.2);
    let train = batch.select(&train_idx);
    let test = batch.select(&test_idx);
    n_qs.iter()
        .map(|&n_q| {
            let mut cfg = base.clone();
            cfg.processor = ProcessorMode::Quantum;
            cfg.qep.n_q = n_q;
            let start = Instant::now();
            let report = run_demo(&cfg, &train, &test).map_err(Box::new)?;
            let diag = report.diagnostics.unwrap_or(QepDiagnostics {
                alpha_mean: 0.0,
                q_std: 0.0,
            });
            Ok(QubitSweepRecord {
                n_q,
                d_q: cfg.qep.d_q(),
                seed: cfg.seed,
                runtime_ms: start.elapsed().as_secs_f64() * 1e3,
                alpha_mean: diag.alpha_mean,
                q_std: diag.q_std,
                accuracy: report.eval.accuracy,
                f1_positive: report.eval.f1[1],
                suggested: n_q == suggest_qubits(cfg.qep.d),
            })
        })
        .collect()
}
