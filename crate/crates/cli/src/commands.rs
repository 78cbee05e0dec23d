use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;

use tnmpcqep_core::bench::{run_scenario, sweep, write_csv, BenchConfig, Scenario, SweepRanges};
use tnmpcqep_core::params::Bundle;
use tnmpcqep_core::pipeline::{
    load_idx, run_demo, stratified_split, synth_data, AggregationMode, ClassGeometry, DemoConfig, DemoReport,
    LabeledBatch, ProcessorMode,
};
use tnmpcqep_core::qep::{qep_batch, suggest_qubits, write_diagnostics_csv, DiagnosticsRow, QepConfig, QepParams};
use tnmpcqep_core::qsim::{NoiseSpec, MAX_DENSITY_QUBITS, MAX_QUBITS};
use tnmpcqep_core::seed;
use tnmpcqep_core::tn::{FrontendConfig, FrontendKind, FrontendParams};

use crate::{
    usage, AggregationArg, BenchArgs, CliError, DemoArgs, EncodeArgs, FrontendArg, NoiseArg, NoiseArgs,
    NoiseSweepArgs, ProcessorArg, QepRunArgs, QubitSweepArgs, SourceArgs,
};

type CliResult = Result<(), CliError>;

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn check_qubits(n_q: usize, noisy: bool) -> Result<(), CliError> {
    if !(2..=MAX_QUBITS).contains(&n_q) {
        return usage(format!("--nq {n_q} outside 2..={MAX_QUBITS}"));
    }
    if noisy && n_q > MAX_DENSITY_QUBITS {
        return usage(format!(
            "noisy simulation supports at most {MAX_DENSITY_QUBITS} qubits, got --nq {n_q}"
        ));
    }
    Ok(())
}

fn noise_spec(kind: NoiseArg, params: &NoiseArgs) -> Result<NoiseSpec, CliError> {
    let spec = NoiseSpec::from_name(kind.name(), params.p, params.gamma).or_else(|e| usage(e.to_string()))?;
    spec.validate().or_else(|e| usage(e.to_string()))?;
    Ok(spec)
}

fn load_source(src: &SourceArgs, master: u64) -> Result<LabeledBatch, CliError> {
    match (&src.images, &src.labels) {
        (Some(images), Some(labels)) => Ok(load_idx(images, labels)?),
        _ => {
            if src.samples < 4 {
                return usage("--samples must be at least 4");
            }
            Ok(synth_data(
                src.samples,
                seed::derive_named(master, "data"),
                &ClassGeometry::default(),
            ))
        }
    }
}

fn frontend_config(kind: FrontendArg, master: u64) -> FrontendConfig {
    FrontendConfig::with_kind(FrontendKind::from(kind), seed::derive_named(master, "frontend"))
}

pub fn bench_mpc(a: &BenchArgs) -> CliResult {
    if a.n_min == 0 || a.n_min > a.n_max {
        return usage(format!("client range {}..={} must be non-empty and start at 1 or more", a.n_min, a.n_max));
    }
    if a.dims.is_empty() || a.dims.contains(&0) {
        return usage("--dims needs at least one positive dimension");
    }
    if a.theta == 0 {
        return usage("--theta must be at least 1");
    }
    let ranges = SweepRanges {
        n_min: a.n_min,
        n_max: a.n_max,
        dims: a.dims.clone(),
        k: a.k,
        theta: a.theta,
        frac_bits: a.frac_bits,
        strategy: a.strategy.into(),
    };
    let probe = BenchConfig {
        n: a.n_min,
        d: a.dims[0],
        k: a.k,
        theta: a.theta,
        frac_bits: a.frac_bits,
        strategy: a.strategy.into(),
    };
    probe.validate().or_else(|e| usage(e.to_string()))?;

    let rows = sweep(&ranges)?;
    let mut out = output(a.out.as_deref())?;
    write_csv(&rows, &mut out)?;
    out.flush()?;
    drop(out);

    let mut table = String::from("scenario  d      passive_bits        active_bits         ratio\n");
    for &d in &a.dims {
        let cfg = BenchConfig {
            n: a.n_max,
            d,
            ..probe
        };
        for id in 1..=3 {
            let p = run_scenario(&cfg, Scenario::new(id)?)?.total_bits;
            let q = run_scenario(&cfg, Scenario::new(id + 3)?)?.total_bits;
            table += &format!(
                "S{id}/S{}     {d:<6} {p:<19} {q:<19} {:.2}\n",
                id + 3,
                q as f64 / p as f64
            );
        }
    }
    if a.out.is_some() {
        print!("{table}");
    } else {
        eprint!("{table}");
    }
    Ok(())
}

pub fn encode(a: &EncodeArgs, master: u64) -> CliResult {
    let batch = load_source(&a.source, master)?;
    let frontend = match &a.params {
        Some(path) => FrontendParams::from_bundle(&Bundle::load(path)?)?,
        None => {
            let cfg = FrontendConfig {
                d: a.d,
                ..frontend_config(a.frontend, master)
            };
            cfg.validate().or_else(|e| usage(e.to_string()))?;
            FrontendParams::seeded(&cfg)?
        }
    };
    if let Some(path) = &a.params_out {
        frontend.to_bundle().save(path)?;
    }
    let latents = frontend.encode_batch(&batch.images)?;
    let d = frontend.config().d;
    let mut w = csv::Writer::from_writer(output(a.out.as_deref())?);
    let mut header = vec!["index".to_string(), "label".to_string()];
    header.extend((0..d).map(|j| format!("f{j}")));
    w.write_record(&header)?;
    for (i, (z, y)) in latents.iter().zip(&batch.labels).enumerate() {
        let mut rec = vec![i.to_string(), y.to_string()];
        rec.extend(z.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn qep_run(a: &QepRunArgs, master: u64) -> CliResult {
    let noise = noise_spec(a.noise, &a.noise_params)?;
    check_qubits(a.nq, !noise.is_noiseless())?;
    if a.batch_size == 0 {
        return usage("--batch-size must be positive");
    }
    let fcfg = frontend_config(a.frontend, master);
    let qcfg = QepConfig {
        d: fcfg.d,
        n_q: a.nq,
        layers: a.layers,
        scale: a.scale,
        mode: a.observables.into(),
        seed: seed::derive_named(master, "qep"),
    };
    qcfg.validate().or_else(|e| usage(e.to_string()))?;
    let batch = load_source(&a.source, master)?;

    let latents = FrontendParams::seeded(&fcfg)?.encode_batch(&batch.images)?;
    let params = QepParams::seeded(&qcfg)?;
    let mut rows = Vec::new();
    for (i, chunk) in latents.chunks(a.batch_size).enumerate() {
        let (_, diag) = qep_batch(chunk, &params, &noise)?;
        rows.push(DiagnosticsRow {
            batch_id: i,
            n_q: a.nq,
            d_q: params.d_q(),
            alpha_mean: diag.alpha_mean,
            q_std: diag.q_std,
            noise_kind: noise.name().to_string(),
            seed: master,
        });
    }
    let mut out = output(a.out.as_deref())?;
    write_diagnostics_csv(&rows, &mut out)?;
    out.flush()?;
    Ok(())
}

/// Shared schema of the qubit and noise sweeps.
#[derive(Debug, Serialize)]
struct SweepRecord {
    mode: &'static str,
    frontend: String,
    n_q: usize,
    d_q: usize,
    seed: u64,
    noise: &'static str,
    p: f64,
    gamma: f64,
    accuracy: f64,
    f1_positive: f64,
    recall_positive: f64,
    alpha_mean: Option<f64>,
    q_std: Option<f64>,
    suggested: bool,
}

fn record(mode: &'static str, cfg: &DemoConfig, noise: (&'static str, f64, f64), r: &DemoReport) -> SweepRecord {
    let quantum = cfg.processor == ProcessorMode::Quantum;
    SweepRecord {
        mode,
        frontend: cfg.frontend.kind.to_string(),
        n_q: if quantum { cfg.qep.n_q } else { 0 },
        d_q: if quantum { cfg.qep.d_q() } else { 0 },
        seed: cfg.seed,
        noise: noise.0,
        p: noise.1,
        gamma: noise.2,
        accuracy: r.eval.accuracy,
        f1_positive: r.eval.f1[1],
        recall_positive: r.eval.recall[1],
        alpha_mean: r.diagnostics.map(|d| d.alpha_mean),
        q_std: r.diagnostics.map(|d| d.q_std),
        suggested: quantum && cfg.qep.n_q == suggest_qubits(cfg.qep.d),
    }
}

fn write_records(records: &[SweepRecord], path: Option<&Path>) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(output(path)?);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn split(batch: &LabeledBatch) -> (LabeledBatch, LabeledBatch) {
    let (train, test) = stratified_split(&batch.labels, 0.2);
    (batch.select(&train), batch.select(&test))
}

pub fn qubit_sweep(a: &QubitSweepArgs, master: u64) -> CliResult {
    if a.nq.is_empty() {
        return usage("--nq needs at least one qubit count");
    }
    for &n_q in &a.nq {
        check_qubits(n_q, false)?;
    }
    if a.seeds == 0 {
        return usage("--seeds must be positive");
    }
    let batch = load_source(&a.source, master)?;
    let (train, test) = split(&batch);
    let mut records = Vec::new();
    for s in 0..a.seeds {
        for &n_q in &a.nq {
            let mut cfg = DemoConfig::with_seed(seed::derive(master, s));
            cfg.frontend.kind = a.frontend.into();
            cfg.qep.n_q = n_q;
            let start = Instant::now();
            let report = run_demo(&cfg, &train, &test)?;
            eprintln!("seed {s}, N_q {n_q}: {:.1?}", start.elapsed());
            records.push(record("quantum", &cfg, ("noiseless", 0.0, 0.0), &report));
        }
    }
    let mut baseline = DemoConfig::with_seed(seed::derive(master, 0));
    baseline.frontend.kind = a.frontend.into();
    baseline.processor = ProcessorMode::Classical;
    let report = run_demo(&baseline, &train, &test)?;
    records.push(record("classical", &baseline, ("noiseless", 0.0, 0.0), &report));
    write_records(&records, a.out.as_deref())?;
    Ok(())
}

pub fn noise_sweep(a: &NoiseSweepArgs, master: u64) -> CliResult {
    if a.noise.is_empty() {
        return usage("--noise needs at least one kind");
    }
    let specs: Vec<(NoiseArg, NoiseSpec)> = a
        .noise
        .iter()
        .map(|&k| noise_spec(k, &a.noise_params).map(|s| (k, s)))
        .collect::<Result<_, _>>()?;
    check_qubits(a.nq, specs.iter().any(|(_, s)| !s.is_noiseless()))?;
    if a.seeds == 0 {
        return usage("--seeds must be positive");
    }
    let batch = load_source(&a.source, master)?;
    let (train, test) = split(&batch);
    let mut records = Vec::new();
    for s in 0..a.seeds {
        for (kind, spec) in &specs {
            let mut cfg = DemoConfig::with_seed(seed::derive(master, s));
            cfg.frontend.kind = a.frontend.into();
            cfg.qep.n_q = a.nq;
            cfg.noise = *spec;
            let report = run_demo(&cfg, &train, &test)?;
            let (p, gamma) = match kind {
                NoiseArg::Noiseless => (0.0, 0.0),
                NoiseArg::Depolarizing => (a.noise_params.p, 0.0),
                NoiseArg::Thermal => (0.0, a.noise_params.gamma),
                NoiseArg::Mixed => (a.noise_params.p, a.noise_params.gamma),
            };
            records.push(record("quantum", &cfg, (kind.name(), p, gamma), &report));
        }
    }
    write_records(&records, a.out.as_deref())?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct DemoSummary {
    seed: u64,
    frontend: String,
    processor: &'static str,
    aggregation: &'static str,
    n_q: usize,
    noise: &'static str,
    accuracy: f64,
    precision_positive: f64,
    recall_positive: f64,
    f1_positive: f64,
    threshold: f64,
    alpha_mean: Option<f64>,
    q_std: Option<f64>,
    total_bits: Option<u64>,
}

pub fn pipeline_demo(a: &DemoArgs, master: u64) -> CliResult {
    let noise = noise_spec(a.noise, &a.noise_params)?;
    let quantum = a.processor == ProcessorArg::Quantum;
    if quantum {
        check_qubits(a.nq, !noise.is_noiseless())?;
    }
    let mut cfg = DemoConfig::with_seed(master);
    cfg.frontend.kind = a.frontend.into();
    cfg.processor = if quantum {
        ProcessorMode::Quantum
    } else {
        ProcessorMode::Classical
    };
    cfg.aggregation = match a.aggregation {
        AggregationArg::Plain => AggregationMode::Plain,
        AggregationArg::Secure => AggregationMode::Secure,
    };
    cfg.qep.n_q = a.nq;
    cfg.noise = noise;
    cfg.n_clients = a.clients;
    cfg.threshold_rule = a.threshold_rule.into();
    cfg.readout_steps = a.steps;
    cfg.lr = a.lr;
    cfg.force_alpha_zero = a.force_alpha_zero;
    cfg.validate().or_else(|e| usage(e.to_string()))?;
    if !(a.lr > 0.0 && a.lr.is_finite()) {
        return usage("--lr must be positive");
    }

    let (train, test) = match (&a.train_images, &a.train_labels, &a.test_images, &a.test_labels) {
        (Some(ti), Some(tl), Some(vi), Some(vl)) => (load_idx(ti, tl)?, load_idx(vi, vl)?),
        _ => {
            if a.train_samples < 10 || a.test_samples < 1 {
                return usage("need at least 10 training and 1 test sample");
            }
            let g = ClassGeometry::default();
            (
                synth_data(a.train_samples, seed::derive_named(master, "train"), &g),
                synth_data(a.test_samples, seed::derive_named(master, "test"), &g),
            )
        }
    };
    let report = run_demo(&cfg, &train, &test)?;

    let mut out = output(a.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    out.flush()?;
    if let Some(path) = &a.csv {
        let mut w = csv::Writer::from_writer(output(Some(path))?);
        w.serialize(DemoSummary {
            seed: master,
            frontend: cfg.frontend.kind.to_string(),
            processor: if quantum { "quantum" } else { "classical" },
            aggregation: match a.aggregation {
                AggregationArg::Plain => "plain",
                AggregationArg::Secure => "secure",
            },
            n_q: if quantum { a.nq } else { 0 },
            noise: noise.name(),
            accuracy: report.eval.accuracy,
            precision_positive: report.eval.precision[1],
            recall_positive: report.eval.recall[1],
            f1_positive: report.eval.f1[1],
            threshold: report.eval.threshold,
            alpha_mean: report.diagnostics.map(|d| d.alpha_mean),
            q_std: report.diagnostics.map(|d| d.q_std),
            total_bits: report.cost.as_ref().map(|c| c.total_bits),
        })?;
        w.flush()?;
    }
    Ok(())
}
