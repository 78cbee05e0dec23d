//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p tnmpcqep-core --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use tnmpcqep_core::bench::{
    run_scenario, sweep, verify_against_meter, BenchConfig, DivisionStrategy, Scenario, SweepRanges,
};
use tnmpcqep_core::mpc::{run_protocol, ProtocolConfig, SecurityMode, Session};
use tnmpcqep_core::pipeline::{
    balanced_class_weights, loss_and_grad, run_demo, synth_data, train_readout, AggregationMode, ClassGeometry,
    DemoConfig, ProcessorMode, Readout,
};
use tnmpcqep_core::qep::{encode_angles, qep_forward, qubit_sweep, suggest_qubits, QepConfig, QepParams};
use tnmpcqep_core::qsim::{run_circuit, DensityMatrix, Gate, NoiseSpec, Pauli, PauliTerm};
use tnmpcqep_core::ring::FixedPointCodec;
use tnmpcqep_core::seed;
use tnmpcqep_core::tn::{
    isometry_error, FrontendConfig, FrontendKind, FrontendParams, MeraParams, MpsParams, TreeParams,
    IMAGE_LEN, ISOMETRY_TOL,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:.0?}"))
}

// 1 ----------------------------------------------------------------------------

fn primitive_costs() -> Outcome {
    let start = Instant::now();
    let codec = FixedPointCodec::new(64, 20).map_err(|e| e.to_string())?;
    let mut s = Session::new(codec, SecurityMode::Passive, 1);
    let x = s.input(3.0).map_err(|e| e.to_string())?;
    let y = s.input(1.5).map_err(|e| e.to_string())?;
    let delta = |s: &mut Session, op: &dyn Fn(&mut Session)| {
        let before = s.meter().total_bits();
        op(s);
        s.meter().total_bits() - before
    };
    let mul = delta(&mut s, &|s| {
        s.mul(&x, &y).unwrap();
    });
    let trunc = delta(&mut s, &|s| {
        s.truncate(&x).unwrap();
    });
    let fmul = delta(&mut s, &|s| {
        s.fixed_mul(&x, &y).unwrap();
    });
    let div = delta(&mut s, &|s| {
        s.div(&x, &y, 5).unwrap();
    });
    let k = 64u64;
    let want = [3 * k, 6 * k, 9 * k, 3 * k * (k + 4 * 5 + 2)];
    ensure([mul, trunc, fmul, div] == want, || {
        format!("measured {:?}, expected {want:?}", [mul, trunc, fmul, div])
    })?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("mul {mul}, trunc {trunc}, fixed_mul {fmul}, div {div} bits"))
}

// 2 ----------------------------------------------------------------------------

/// Independent restatement of the communication model.
fn model_total(n: u64, d: u64, k: u64, theta: u64, id: u8, strategy: DivisionStrategy) -> u64 {
    if id == 0 {
        return n * (d + 1) * k;
    }
    let base = id - if id > 3 { 3 } else { 0 };
    let mut node = n * d * 9 * k;
    let div = 3 * k * (k + 4 * theta + 2);
    if base >= 2 {
        node += match strategy {
            DivisionStrategy::ReciprocalOnce => div + d * 9 * k,
            DivisionStrategy::PerElement => d * div,
        };
    }
    if base == 3 {
        node += d * d * 9 * k;
    }
    let open = if base == 1 { (d + 1) * 3 * k } else { d * 3 * k };
    let total = n * (d + 1) * 6 * k + node + open;
    if id > 3 {
        2 * total
    } else {
        total
    }
}

fn scenario_grid() -> Outcome {
    let start = Instant::now();
    let mut metered = 0;
    for strategy in [DivisionStrategy::ReciprocalOnce, DivisionStrategy::PerElement] {
        for n in [1, 2, 4] {
            for d in [1, 4, 16] {
                for id in [1, 2, 4, 5] {
                    let cfg = BenchConfig {
                        n,
                        d,
                        strategy,
                        ..BenchConfig::default()
                    };
                    let s = Scenario::new(id).unwrap();
                    let ok = verify_against_meter(&cfg, s).map_err(|e| e.to_string())?;
                    ensure(ok, || format!("meter mismatch at S{id}, n={n}, d={d}, {strategy}"))?;
                    metered += 1;
                }
            }
        }
    }
    let rows = sweep(&SweepRanges::default()).map_err(|e| e.to_string())?;
    for r in &rows {
        let want = model_total(r.n as u64, r.d as u64, 64, 5, r.scenario, r.strategy);
        ensure(r.total_bits == want, || {
            format!("S{} n={} d={}: {} vs model {want}", r.scenario, r.n, r.d, r.total_bits)
        })?;
        if r.scenario >= 4 {
            let cfg = BenchConfig {
                n: r.n,
                d: r.d,
                ..BenchConfig::default()
            };
            let passive = run_scenario(&cfg, Scenario::new(r.scenario - 3).unwrap()).unwrap();
            ensure(
                r.client_to_node_bits == 2 * passive.client_to_node_bits
                    && r.node_to_node_bits == 2 * passive.node_to_node_bits
                    && r.reconstruction_bits == 2 * passive.reconstruction_bits,
                || format!("S{} n={} d={} is not twice its passive counterpart", r.scenario, r.n, r.d),
            )?;
        }
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("{metered} metered runs, {} grid rows", rows.len()))
}

// 3 ----------------------------------------------------------------------------

fn dimension_dominance() -> Outcome {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for n in 4..=30 {
        let total = |d| {
            run_scenario(
                &BenchConfig {
                    n,
                    d,
                    ..BenchConfig::default()
                },
                Scenario::new(1).unwrap(),
            )
            .unwrap()
            .total_bits as f64
        };
        let r = total(784) / total(64);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    ensure(lo >= 11.0 && hi <= 13.0, || format!("ratio range [{lo:.4}, {hi:.4}] leaves [11, 13]"))?;
    Ok(format!("ratio range [{lo:.4}, {hi:.4}]"))
}

// 4 ----------------------------------------------------------------------------

fn mpc_oracle() -> Outcome {
    let start = Instant::now();
    let codec = FixedPointCodec::new(64, 20).map_err(|e| e.to_string())?;
    let mut rng = seed::rng(4);
    let mut outputs = 0;
    for trial in 0..1000 {
        let (program, tracked) = common::random_program(&mut rng, 20, 10);
        let cfg = ProtocolConfig {
            codec,
            mode: SecurityMode::Passive,
            seed: rng.random(),
        };
        let out = run_protocol(&program, &cfg).map_err(|e| e.to_string())?;
        for (got, t) in out.outputs.iter().zip(&tracked) {
            ensure((got - t.value).abs() <= t.bound + 1e-12 * t.value.abs(), || {
                format!("program {trial}: {got} vs {} (bound {:e})", t.value, t.bound)
            })?;
            outputs += 1;
        }
    }
    let mut worst = 0.0f64;
    let mut s = Session::new(codec, SecurityMode::Passive, 9);
    for i in 0..=240 {
        let den = 2f64.powf(-6.0 + 12.0 * i as f64 / 240.0);
        let num = rng.random_range(1.0..10.0) * if i % 2 == 0 { 1.0 } else { -1.0 };
        let (a, b) = (s.input(num).unwrap(), s.input(den).unwrap());
        let q = s.div(&a, &b, 5).map_err(|e| e.to_string())?;
        let got = s.open(&q).map_err(|e| e.to_string())?;
        worst = worst.max(((got - num / den) / (num / den)).abs());
    }
    ensure(worst <= 2f64.powi(-10), || format!("division relative error {worst:e}"))?;
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("{outputs} outputs within bound, division rel err {worst:.2e}"))
}

// 5 ----------------------------------------------------------------------------

fn simulator_oracle() -> Outcome {
    let mut rng = seed::rng(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=4);
        let layers = rng.random_range(1..=3);
        let a = common::random_angles(&mut rng, layers, n);
        let s = run_circuit(&a, layers, n).map_err(|e| e.to_string())?;
        let mut zero = vec![Complex64::new(0.0, 0.0); 1 << n];
        zero[0] = Complex64::new(1.0, 0.0);
        let want = common::apply(&common::circuit_unitary(&a), &zero);
        for (x, y) in s.amplitudes().iter().zip(&want) {
            worst = worst.max((x - y).norm());
        }
    }
    ensure(worst <= 1e-10, || format!("amplitude error {worst:e}"))?;

    let a = common::random_angles(&mut rng, 2, 16);
    let start = Instant::now();
    let big = run_circuit(&a, 2, 16).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure((big.norm() - 1.0).abs() <= 1e-12, || format!("16-qubit norm {}", big.norm()))?;
    within(elapsed, Duration::from_millis(50))?;

    let mut dep = 0.0f64;
    let z = PauliTerm::single(0, Pauli::Z);
    for i in 0..50 {
        let theta = -3.0 + 6.0 * i as f64 / 49.0;
        let p = (i % 10) as f64 / 10.0;
        let mut rho = DensityMatrix::zero(1).unwrap();
        rho.apply(&Gate::Ry(theta, 0)).unwrap();
        rho.depolarize(0, p);
        dep = dep.max((rho.expectation(&z).unwrap() - (1.0 - p) * theta.cos()).abs());
    }
    ensure(dep <= 1e-10, || format!("depolarizing deviation {dep:e}"))?;
    Ok(format!("amp err {worst:.1e}, 16q run {elapsed:.1?}, depolarizing err {dep:.1e}"))
}

// 6 ----------------------------------------------------------------------------

/// Dense-contraction oracle: sums the full product over every site index,
/// normalizing once at the end.
fn mps_nested_sum(p: &MpsParams, sites: &[Vec<Complex64>]) -> Vec<Complex64> {
    let (r, dp) = (p.config.bond, p.config.d_phys);
    let l = sites.len();
    let mut out = vec![Complex64::new(0.0, 0.0); r];
    let total = dp.pow(l as u32);
    for combo in 0..total {
        let idx: Vec<usize> = (0..l).map(|k| (combo / dp.pow(k as u32)) % dp).collect();
        let mut amp = vec![Complex64::new(0.0, 0.0); r];
        amp[0] = Complex64::new(1.0, 0.0);
        for (k, &s) in idx.iter().enumerate() {
            let mut next = vec![Complex64::new(0.0, 0.0); r];
            for (beta, nb) in next.iter_mut().enumerate() {
                for (alpha, va) in amp.iter().enumerate() {
                    *nb += va * p.cores[k][(alpha * dp + s, beta)];
                }
            }
            let zs = sites[k][s];
            amp = next.into_iter().map(|v| v * zs).collect();
        }
        for (o, a) in out.iter_mut().zip(amp) {
            *o += a;
        }
    }
    let n: f64 = out.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    out.into_iter().map(|v| v / n).collect()
}

fn tensor_networks() -> Outcome {
    let start = Instant::now();
    let mut worst_iso = 0.0f64;
    for kind in [FrontendKind::Mps, FrontendKind::Ttn, FrontendKind::Mera] {
        let p = FrontendParams::seeded(&FrontendConfig::with_kind(kind, 6)).map_err(|e| e.to_string())?;
        for (name, err) in p.isometry_report() {
            ensure(err <= ISOMETRY_TOL, || format!("{kind} {name}: {err:e}"))?;
            worst_iso = worst_iso.max(err);
        }
    }

    let tiny = FrontendConfig {
        kind: FrontendKind::Mps,
        d: 4,
        h: 6,
        l_sites: 3,
        d_phys: 2,
        bond: 2,
        ..FrontendConfig::default()
    };
    let mps = MpsParams::seeded_with_input(&tiny, 10).map_err(|e| e.to_string())?;
    let mut rng = seed::rng(6);
    let mut worst_mps = 0.0f64;
    for _ in 0..20 {
        let x: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..1.0)).collect();
        let sites = mps.site_vectors(&x);
        let fast = mps.contract(&sites);
        let slow = mps_nested_sum(&mps, &sites);
        for (a, b) in fast.iter().zip(&slow) {
            worst_mps = worst_mps.max((a - b).norm());
        }
    }
    ensure(worst_mps <= 1e-10, || format!("MPS oracle error {worst_mps:e}"))?;
    ensure(mps.cores.iter().all(|c| isometry_error(c) <= ISOMETRY_TOL), || "tiny MPS core not isometric".into())?;

    let tree = TreeParams::seeded(&FrontendConfig::with_kind(FrontendKind::Ttn, 7)).map_err(|e| e.to_string())?;
    let mera = MeraParams::identity(tree.clone());
    let mut worst_mera = 0.0f64;
    for _ in 0..100 {
        let x: Vec<f64> = (0..IMAGE_LEN).map(|_| rng.random_range(0.0..1.0)).collect();
        let a = tree.encode(&x).map_err(|e| e.to_string())?;
        let b = mera.encode(&x).map_err(|e| e.to_string())?;
        for (u, v) in a.iter().zip(&b) {
            worst_mera = worst_mera.max((u - v).abs());
        }
    }
    ensure(worst_mera <= 1e-12, || format!("MERA/TTN deviation {worst_mera:e}"))?;
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "isometry {worst_iso:.1e}, MPS oracle {worst_mps:.1e}, MERA≡TTN {worst_mera:.1e}"
    ))
}

// 7 ----------------------------------------------------------------------------

fn qep_algebra() -> Outcome {
    ensure(suggest_qubits(64) == 8, || format!("suggest_qubits(64) = {}", suggest_qubits(64)))?;
    let cfg = QepConfig {
        n_q: suggest_qubits(64),
        seed: 7,
        ..QepConfig::default()
    };
    let base = QepParams::seeded(&cfg).map_err(|e| e.to_string())?;
    let mut gated = base.clone();
    gated.force_alpha_zero();
    let mut bypassed = base.clone();
    bypassed.set_beta(1.0);

    let mut rng = seed::rng(7);
    let normal = Normal::new(0.0, 2.0).unwrap();
    let (mut e_alpha, mut e_beta, mut q_lo, mut q_hi) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let noises = [
        NoiseSpec::Noiseless,
        NoiseSpec::Depolarizing { p: 0.3 },
        NoiseSpec::Mixed {
            p: 0.2,
            gamma_amp: 0.3,
            gamma_phase: 0.4,
        },
    ];
    for i in 0..30 {
        let x: Vec<f64> = (0..64).map(|_| normal.sample(&mut rng)).collect();
        let noise = &noises[i % noises.len()];
        let small = QepParams::seeded(&QepConfig { n_q: 4, ..cfg }).unwrap();
        for p in [&base, &small] {
            let out = qep_forward(&x, p, noise).map_err(|e| e.to_string())?;
            for &v in &out.q_raw {
                q_lo = q_lo.min(v);
                q_hi = q_hi.max(v);
            }
        }
        let out = qep_forward(&x, &gated, &NoiseSpec::Noiseless).map_err(|e| e.to_string())?;
        ensure(out.alpha == 0.0, || format!("forced gate gave α = {}", out.alpha))?;
        for (a, b) in out.f_out.iter().zip(&x) {
            e_alpha = e_alpha.max((a - b).abs());
        }
        let out = qep_forward(&x, &bypassed, noise).map_err(|e| e.to_string())?;
        let (e, _) = encode_angles(&x, &bypassed).map_err(|e| e.to_string())?;
        for (a, b) in out.q.iter().zip(bypassed.bypass.forward(&e)) {
            e_beta = e_beta.max((a - b).abs());
        }
    }
    ensure(e_alpha <= 1e-9, || format!("α=0 endpoint deviation {e_alpha:e}"))?;
    ensure(e_beta <= 1e-9, || format!("β=1 endpoint deviation {e_beta:e}"))?;
    ensure(q_lo >= -1.0 && q_hi <= 1.0, || format!("q_raw range [{q_lo}, {q_hi}]"))?;
    Ok(format!(
        "α=0 err {e_alpha:.1e}, β=1 err {e_beta:.1e}, q_raw ∈ [{q_lo:.3}, {q_hi:.3}], N_q(64) = 8"
    ))
}

// 8 ----------------------------------------------------------------------------

fn readout_training() -> Outcome {
    let mut rng = seed::rng(8);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let d = 6;
    let xs: Vec<Vec<f64>> = (0..40).map(|_| (0..d).map(|_| normal.sample(&mut rng)).collect()).collect();
    let labels: Vec<u8> = (0..40).map(|i| (i % 3 == 0) as u8).collect();
    let cw = balanced_class_weights(&labels);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let theta: Vec<f64> = (0..2 * (d + 1)).map(|_| normal.sample(&mut rng)).collect();
        let r = Readout::from_flat(d, &theta);
        let (_, g) = loss_and_grad(&r, &xs, &labels, cw);
        let h = 1e-5;
        for i in 0..theta.len() {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (loss_and_grad(&Readout::from_flat(d, &up), &xs, &labels, cw).0
                - loss_and_grad(&Readout::from_flat(d, &dn), &xs, &labels, cw).0)
                / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-8));
        }
    }
    ensure(worst <= 1e-4, || format!("gradient relative error {worst:e}"))?;

    let start = Instant::now();
    let dir: Vec<f64> = (0..d).map(|_| normal.sample(&mut rng)).collect();
    let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut sx = Vec::new();
    let mut sl = Vec::new();
    for i in 0..400 {
        let y = (i % 2) as u8;
        let shift = if y == 1 { 3.0 } else { -3.0 };
        sx.push((0..d).map(|j| shift * dir[j] / dn + 0.5 * normal.sample(&mut rng)).collect::<Vec<_>>());
        sl.push(y);
    }
    let r = train_readout(&sx, &sl, balanced_class_weights(&sl), 500, 0.5).map_err(|e| e.to_string())?;
    let correct = sx
        .iter()
        .zip(&sl)
        .filter(|(x, &y)| {
            let p = r.probabilities(x);
            (p[1] >= 0.5) as u8 == y
        })
        .count();
    let acc = correct as f64 / sl.len() as f64;
    ensure(acc >= 0.99, || format!("separable training accuracy {acc}"))?;
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("grad rel err {worst:.1e}, separable accuracy {acc:.4}"))
}

// 9 ----------------------------------------------------------------------------

fn end_to_end() -> Outcome {
    let geometry = ClassGeometry::default();
    let train = synth_data(400, 901, &geometry);
    let test = synth_data(100, 902, &geometry);
    let mut cfg = DemoConfig::with_seed(9);
    cfg.frontend.kind = FrontendKind::Ttn;
    cfg.processor = ProcessorMode::Quantum;
    cfg.qep.n_q = 8;
    cfg.noise = NoiseSpec::Noiseless;
    let start = Instant::now();
    let plain = run_demo(&cfg, &train, &test).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let mut secure_cfg = cfg.clone();
    secure_cfg.aggregation = AggregationMode::Secure;
    let secure = run_demo(&secure_cfg, &train, &test).map_err(|e| e.to_string())?;
    let (a, b) = (plain.eval.accuracy, secure.eval.accuracy);
    let summary = format!("plain accuracy {a:.3} in {elapsed:.1?}, secure accuracy {b:.3}");
    ensure(a >= 0.90, || format!("{summary}: below 0.90"))?;
    ensure((a - b).abs() <= 0.01, || format!("{summary}: gap above 0.01"))?;
    within(elapsed, Duration::from_secs(60))?;
    Ok(summary)
}

// 10 ---------------------------------------------------------------------------

fn sweep_harness() -> Outcome {
    let batch = synth_data(160, 1001, &ClassGeometry::default());
    let mut records = Vec::new();
    for s in 0..2 {
        let base = DemoConfig::with_seed(seed::derive(10, s));
        records.extend(qubit_sweep(&batch, &[4, 8], &base).map_err(|e| e.to_string())?);
    }
    ensure(records.len() == 4, || format!("{} qubit-sweep rows", records.len()))?;
    ensure(records.iter().all(|r| r.d_q == 2 * r.n_q + r.n_q - 1), || {
        "d_q column disagrees with the observable set".into()
    })?;

    let train = synth_data(120, 1002, &ClassGeometry::default());
    let test = synth_data(60, 1003, &ClassGeometry::default());
    let kinds = ["noiseless", "depolarizing", "thermal", "mixed"];
    let mut acc = vec![Vec::new(); kinds.len()];
    for s in 0..3 {
        for (i, kind) in kinds.iter().enumerate() {
            let mut cfg = DemoConfig::with_seed(seed::derive(11, s));
            cfg.qep.n_q = 6;
            cfg.noise = NoiseSpec::from_name(kind, 0.05, 0.05).map_err(|e| e.to_string())?;
            acc[i].push(run_demo(&cfg, &train, &test).map_err(|e| e.to_string())?.eval.accuracy);
        }
    }
    let median = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let clean = median(&acc[0]);
    let holds = (1..kinds.len()).all(|i| clean >= median(&acc[i]));
    let medians: Vec<String> = kinds.iter().zip(&acc).map(|(k, a)| format!("{k} {:.3}", median(a))).collect();
    Ok(format!(
        "schema ok; medians: {}; noiseless ≥ noisy medians: {holds} (observation)",
        medians.join(", ")
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("primitive costs", primitive_costs),
        ("scenario closed forms", scenario_grid),
        ("dimension dominance", dimension_dominance),
        ("mpc vs plaintext oracle", mpc_oracle),
        ("simulator oracle", simulator_oracle),
        ("tensor-network invariants", tensor_networks),
        ("qep algebra", qep_algebra),
        ("readout training", readout_training),
        ("end-to-end demo", end_to_end),
        ("sweep harness", sweep_harness),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let t = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name} [{t:.2?}]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name} [{t:.2?}]: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
