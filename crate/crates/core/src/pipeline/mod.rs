//! End-to-end orchestration: client encoding, weighted aggregation (plain or
//! secret-shared), QEP refinement, readout training, threshold selection and
//! evaluation.
//!
//! In the demo every sample lives at exactly one client. Its aggregate is
//! formed from all `n` client slots, where the owner submits `(f, w_owner)`
//! and the other clients submit `(0, 0)`. Client weights are local sample
//! fractions. The aggregation gate after decoding is the identity.

mod data;
mod metrics;
mod readout;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use data::{
    idx_bytes, load_idx, partition_stratified, stratified_split, synth_data, write_idx, ClassGeometry, LabeledBatch,
    IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use metrics::{
    candidate_thresholds, evaluate, select_threshold, select_threshold_with, Confusion, EvalReport, ThresholdRule,
};
pub use readout::{balanced_class_weights, loss_and_grad, softmax, train_readout, Readout};

use crate::bench::{secure_normalized_aggregate, BenchConfig, BenchError, DivisionStrategy, STABILIZER};
use crate::mpc::{CostReport, SecurityMode};
use crate::qep::{qep_batch, QepConfig, QepDiagnostics, QepError, QepParams};
use crate::qsim::NoiseSpec;
use crate::seed;
use crate::tn::{FrontendConfig, FrontendKind, FrontendParams, TnError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("data error: {0}")]
    Data(String),
    #[error("IDX parse error: {0}")]
    Idx(String),
    #[error("{0} needs both classes present")]
    SingleClass(&'static str),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Tn(#[from] TnError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Qep(#[from] Box<QepError>),
}

impl From<QepError> for PipelineError {
    fn from(e: QepError) -> Self {
        PipelineError::Qep(Box::new(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregationConfig {
    pub eps: f64,
    pub k: u32,
    pub frac_bits: u32,
    pub theta: u32,
    pub strategy: DivisionStrategy,
}

impl Default for AggregationConfig {
    fn default() -> Self {
        Self {
            eps: STABILIZER,
            k: 64,
            frac_bits: 20,
            theta: 5,
            strategy: DivisionStrategy::ReciprocalOnce,
        }
    }
}

fn check_inputs(features: &[Vec<f64>], weights: &[f64], eps: f64) -> Result<usize, PipelineError> {
    if features.is_empty() || features.len() != weights.len() {
        return Err(PipelineError::Data(format!(
            "{} feature rows and {} weights",
            features.len(),
            weights.len()
        )));
    }
    let d = features[0].len();
    if features.iter().any(|f| f.len() != d) {
        return Err(PipelineError::Data("ragged client features".into()));
    }
    if !(eps > 0.0) {
        return Err(PipelineError::Domain(format!("stabilizer ε={eps} must be positive")));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(PipelineError::Domain("client weights must be non-negative".into()));
    }
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(PipelineError::Domain("client weights are all zero".into()));
    }
    Ok(d)
}

/// `x = Σ w_i f_i / (Σ w_i + ε)`.
pub fn aggregate_plain(features: &[Vec<f64>], weights: &[f64], eps: f64) -> Result<Vec<f64>, PipelineError> {
    let d = check_inputs(features, weights, eps)?;
    let total: f64 = weights.iter().sum();
    let mut x = vec![0.0; d];
    for (f, w) in features.iter().zip(weights) {
        for (xi, fi) in x.iter_mut().zip(f) {
            *xi += w * fi;
        }
    }
    x.iter_mut().for_each(|v| *v /= total + eps);
    Ok(x)
}

/// Secret-shared aggregation with normalization; the cost equals the
/// passive normalization scenario for the same `(n, d, k, θ)`.
pub fn aggregate_secure(
    features: &[Vec<f64>],
    weights: &[f64],
    cfg: &AggregationConfig,
    seed: u64,
) -> Result<(Vec<f64>, CostReport), PipelineError> {
    let d = check_inputs(features, weights, cfg.eps)?;
    if cfg.eps != STABILIZER {
        return Err(PipelineError::Config(format!(
            "the secure path uses the public stabilizer {STABILIZER}"
        )));
    }
    let bench = BenchConfig {
        n: features.len(),
        d,
        k: cfg.k,
        theta: cfg.theta,
        frac_bits: cfg.frac_bits,
        strategy: cfg.strategy,
    };
    Ok(secure_normalized_aggregate(features, weights, &bench, seed)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMode {
    #[default]
    Plain,
    Secure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessorMode {
    /// The aggregated latent goes straight to the readout.
    Classical,
    #[default]
    Quantum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoConfig {
    pub seed: u64,
    pub frontend: FrontendConfig,
    pub n_clients: usize,
    pub aggregation: AggregationMode,
    pub agg: AggregationConfig,
    pub processor: ProcessorMode,
    pub qep: QepConfig,
    pub noise: NoiseSpec,
    pub readout_steps: usize,
    pub lr: f64,
    pub threshold_rule: ThresholdRule,
    /// Share of the training split held out for threshold selection.
    pub val_fraction: f64,
    pub force_alpha_zero: bool,
}

impl DemoConfig {
    /// Defaults with frontend and QEP seeds derived from `seed`.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            frontend: FrontendConfig {
                seed: seed::derive_named(seed, "frontend"),
                ..FrontendConfig::with_kind(FrontendKind::Ttn, 0)
            },
            n_clients: 16,
            aggregation: AggregationMode::Plain,
            agg: AggregationConfig::default(),
            processor: ProcessorMode::Quantum,
            qep: QepConfig {
                seed: seed::derive_named(seed, "qep"),
                ..QepConfig::default()
            },
            noise: NoiseSpec::Noiseless,
            readout_steps: 500,
            lr: 0.5,
            threshold_rule: ThresholdRule::Youden,
            val_fraction: 0.2,
            force_alpha_zero: false,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.frontend.validate()?;
        if self.n_clients == 0 {
            return Err(PipelineError::Config("at least one client is required".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(PipelineError::Config("validation fraction must lie in (0, 1)".into()));
        }
        if self.processor == ProcessorMode::Quantum {
            if self.qep.d != self.frontend.d {
                return Err(PipelineError::Config(format!(
                    "QEP width {} differs from latent width {}",
                    self.qep.d, self.frontend.d
                )));
            }
            self.qep.validate()?;
            self.noise.validate().map_err(QepError::from)?;
            if !self.noise.is_noiseless() && self.qep.n_q > crate::qsim::MAX_DENSITY_QUBITS {
                return Err(PipelineError::Config(format!(
                    "noisy simulation supports at most {} qubits, got {}",
                    crate::qsim::MAX_DENSITY_QUBITS,
                    self.qep.n_q
                )));
            }
        }
        Ok(())
    }
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self::with_seed(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub config: DemoConfig,
    pub eval: EvalReport,
    pub diagnostics: Option<QepDiagnostics>,
    /// Total metered traffic of the secure path.
    pub cost: Option<CostReport>,
    pub n_fit: usize,
    pub n_val: usize,
    pub n_test: usize,
}

/// Per-sample one-hot aggregation of `latents`.
fn aggregate_all(
    cfg: &DemoConfig,
    latents: &[Vec<f64>],
    owners: &[usize],
    client_weights: &[f64],
) -> Result<(Vec<Vec<f64>>, Option<CostReport>), PipelineError> {
    let d = cfg.frontend.d;
    let slots = |i: usize| -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut feats = vec![vec![0.0; d]; cfg.n_clients];
        let mut w = vec![0.0; cfg.n_clients];
        feats[owners[i]] = latents[i].clone();
        w[owners[i]] = client_weights[owners[i]];
        (feats, w)
    };
    match cfg.aggregation {
        AggregationMode::Plain => {
            let out = (0..latents.len())
                .map(|i| {
                    let (f, w) = slots(i);
                    aggregate_plain(&f, &w, cfg.agg.eps)
                })
                .collect::<Result<_, _>>()?;
            Ok((out, None))
        }
        AggregationMode::Secure => {
            let mpc_seed = seed::derive_named(cfg.seed, "mpc");
            let results: Vec<(Vec<f64>, CostReport)> = (0..latents.len())
                .into_par_iter()
                .map(|i| {
                    let (f, w) = slots(i);
                    aggregate_secure(&f, &w, &cfg.agg, seed::derive(mpc_seed, i as u64))
                })
                .collect::<Result<_, _>>()?;
            let mut total = CostReport::zero(cfg.agg.k, SecurityMode::Passive);
            let mut out = Vec::with_capacity(results.len());
            for (x, c) in results {
                total.accumulate(&c);
                out.push(x);
            }
            Ok((out, Some(total)))
        }
    }
}

fn standardize(fit: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = fit[0].len();
    let n = fit.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| fit.iter().map(|x| x[j]).sum::<f64>() / n).collect();
    let std: Vec<f64> = (0..d)
        .map(|j| {
            let v = fit.iter().map(|x| (x[j] - mean[j]).powi(2)).sum::<f64>() / n;
            if v > 1e-24 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

/// Runs the whole pipeline on a training and a test batch.
pub fn run_demo(cfg: &DemoConfig, train: &LabeledBatch, test: &LabeledBatch) -> Result<DemoReport, PipelineError> {
    cfg.validate()?;
    train.validate()?;
    test.validate()?;
    if test.is_empty() {
        return Err(PipelineError::Data("empty test batch".into()));
    }
    let counts = train.class_counts();
    if counts[0] < 2 || counts[1] < 2 {
        return Err(PipelineError::SingleClass("demo training (two per class)"));
    }

    let frontend = FrontendParams::seeded(&cfg.frontend)?;
    let images: Vec<Vec<f64>> = train.images.iter().chain(&test.images).cloned().collect();
    let labels: Vec<u8> = train.labels.iter().chain(&test.labels).cloned().collect();
    let latents = frontend.encode_batch(&images)?;

    let owners = partition_stratified(&labels, cfg.n_clients);
    let mut per_client = vec![0usize; cfg.n_clients];
    owners.iter().for_each(|&o| per_client[o] += 1);
    let client_weights: Vec<f64> = per_client.iter().map(|&c| c as f64 / labels.len() as f64).collect();
    let (aggregated, cost) = aggregate_all(cfg, &latents, &owners, &client_weights)?;

    let (features, diagnostics) = match cfg.processor {
        ProcessorMode::Classical => (aggregated, None),
        ProcessorMode::Quantum => {
            let mut params = QepParams::seeded(&cfg.qep)?;
            if cfg.force_alpha_zero {
                params.force_alpha_zero();
            }
            let (outs, diag) = qep_batch(&aggregated, &params, &cfg.noise)?;
            (outs.into_iter().map(|o| o.f_out).collect(), Some(diag))
        }
    };
    let (train_feats, test_feats) = features.split_at(train.len());

    let (fit_idx, val_idx) = stratified_split(&train.labels, cfg.val_fraction);
    let pick = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<u8>) {
        (
            idx.iter().map(|&i| train_feats[i].clone()).collect(),
            idx.iter().map(|&i| train.labels[i]).collect(),
        )
    };
    let (fit_x, fit_y) = pick(&fit_idx);
    let (val_x, val_y) = pick(&val_idx);
    let (mean, std) = standardize(&fit_x);
    let scale = |xs: &[Vec<f64>]| -> Vec<Vec<f64>> {
        xs.iter()
            .map(|x| x.iter().zip(&mean).zip(&std).map(|((v, m), s)| (v - m) / s).collect())
            .collect()
    };
    let (fit_x, val_x, test_x) = (scale(&fit_x), scale(&val_x), scale(test_feats));

    let readout = train_readout(&fit_x, &fit_y, balanced_class_weights(&fit_y), cfg.readout_steps, cfg.lr)?;
    let tau = select_threshold_with(&readout.scores(&val_x), &val_y, cfg.threshold_rule)?;
    let eval = evaluate(&readout.scores(&test_x), &test.labels, tau);
    Ok(DemoReport {
        config: cfg.clone(),
        eval,
        diagnostics,
        cost,
        n_fit: fit_y.len(),
        n_val: val_y.len(),
        n_test: test.len(),
    })
}
