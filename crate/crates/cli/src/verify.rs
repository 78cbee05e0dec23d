//! Invariant suite behind `tnmpcqep verify`.

use std::path::Path;

use num_complex::Complex64;
use rand::Rng;

use tnmpcqep_core::bench::{run_scenario, verify_against_meter, BenchConfig, Scenario, SweepRanges};
use tnmpcqep_core::mpc::{reconstruct, share, SecurityMode, Session};
use tnmpcqep_core::params::Bundle;
use tnmpcqep_core::pipeline::{
    aggregate_plain, aggregate_secure, balanced_class_weights, candidate_thresholds, loss_and_grad, select_threshold,
    AggregationConfig, Confusion, Readout,
};
use tnmpcqep_core::qep::{qep_forward, suggest_qubits, QepConfig, QepParams};
use tnmpcqep_core::qsim::{run_circuit, Angles, DensityMatrix, Gate, NoiseSpec, Pauli, PauliTerm, StateVector};
use tnmpcqep_core::ring::{FixedPointCodec, Ring};
use tnmpcqep_core::seed;
use tnmpcqep_core::tn::{FrontendConfig, FrontendKind, FrontendParams, MeraParams, TreeParams, IMAGE_LEN};

use crate::{CliError, Group, VerifyArgs};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn ring(master: u64) -> Check {
    let mut rng = seed::rng(seed::derive_named(master, "verify-ring"));
    for _ in 0..10_000 {
        let bits = rng.random_range(1..=64u32);
        let r = Ring::new(bits).map_err(err)?;
        let (a, b) = (r.reduce(rng.random()), r.reduce(rng.random()));
        let m = if bits == 64 { u128::from(u64::MAX) + 1 } else { 1u128 << bits };
        let (wa, wb) = (a as u128, b as u128);
        ensure(r.add(a, b) as u128 == (wa + wb) % m, || format!("add mismatch at k={bits}"))?;
        ensure(r.mul(a, b) as u128 == (wa * wb) % m, || format!("mul mismatch at k={bits}"))?;
        ensure(r.sub(a, b) as u128 == (wa + m - wb) % m, || format!("sub mismatch at k={bits}"))?;
    }
    let codec = FixedPointCodec::new(64, 20).map_err(err)?;
    for _ in 0..1000 {
        let v: f64 = rng.random_range(-1e6..1e6);
        let back = codec.decode(codec.encode(v).map_err(err)?);
        ensure((back - v).abs() <= codec.ulp() / 2.0, || format!("round trip of {v} gave {back}"))?;
    }
    Ok("ring arithmetic and fixed-point round trip".into())
}

fn mpc(master: u64) -> Check {
    let mut rng = seed::rng(seed::derive_named(master, "verify-mpc"));
    let codec = FixedPointCodec::new(64, 20).map_err(err)?;
    for _ in 0..1000 {
        let v = codec.ring().value(rng.random());
        ensure(reconstruct(&share(v, &mut rng), codec.ring()).map_err(err)? == v, || {
            "share/reconstruct mismatch".into()
        })?;
    }
    let mut s = Session::new(codec, SecurityMode::Passive, rng.random());
    let tol = 2.0 * codec.ulp() + 1e-4 * codec.ulp();
    for _ in 0..200 {
        let (a, b): (f64, f64) = (rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0));
        let (x, y) = (s.input(a).map_err(err)?, s.input(b).map_err(err)?);
        let got = s.fixed_mul(&x, &y).and_then(|z| s.open(&z)).map_err(err)?;
        let (qa, qb) = (codec.decode(codec.encode(a).unwrap()), codec.decode(codec.encode(b).unwrap()));
        let bound = tol + (qa.abs() + qb.abs()) * codec.ulp() / 2.0;
        ensure((got - qa * qb).abs() <= bound, || format!("{a}·{b} opened as {got}"))?;
    }
    let mut worst = 0.0f64;
    for i in 0..=48 {
        let den = 2f64.powf(-6.0 + i as f64 / 4.0);
        let (x, y) = (s.input(1.0).map_err(err)?, s.input(den).map_err(err)?);
        let got = s.div(&x, &y, 5).and_then(|z| s.open(&z)).map_err(err)?;
        worst = worst.max((got * den - 1.0).abs());
    }
    ensure(worst <= 2f64.powi(-10), || format!("division relative error {worst:e}"))?;
    Ok(format!("sharing, fixed-point products, division rel err {worst:.1e}"))
}

fn bench(_: u64) -> Check {
    let k = 64u64;
    let mut cfg = BenchConfig {
        n: 1,
        d: 1,
        ..BenchConfig::default()
    };
    let mut s = Session::new(FixedPointCodec::new(64, 20).map_err(err)?, SecurityMode::Passive, 1);
    let (x, y) = (s.input(2.0).map_err(err)?, s.input(3.0).map_err(err)?);
    let before = s.meter().total_bits();
    s.div(&x, &y, 5).map_err(err)?;
    ensure(s.meter().total_bits() - before == 3 * k * (k + 22), || "division cost differs from 3k(k+4θ+2)".into())?;
    for n in [1, 2, 4] {
        for d in [1, 4, 16] {
            for id in [1, 2, 4, 5] {
                cfg.n = n;
                cfg.d = d;
                let ok = verify_against_meter(&cfg, Scenario::new(id).map_err(err)?).map_err(err)?;
                ensure(ok, || format!("metered S{id} differs from closed form at n={n}, d={d}"))?;
            }
        }
    }
    let ranges = SweepRanges::default();
    for &d in &ranges.dims {
        for n in ranges.n_min..=ranges.n_max {
            let c = BenchConfig { n, d, ..cfg };
            for id in 1..=3 {
                let p = run_scenario(&c, Scenario::new(id).map_err(err)?).map_err(err)?;
                let a = run_scenario(&c, Scenario::new(id + 3).map_err(err)?).map_err(err)?;
                ensure(a.total_bits == 2 * p.total_bits, || format!("S{} is not 2×S{id}", id + 3))?;
            }
        }
    }
    Ok("primitive costs, metered grid, active = 2× passive".into())
}

fn tn(master: u64, params: Option<&Path>) -> Check {
    let mut detail = Vec::new();
    for kind in [FrontendKind::Mps, FrontendKind::Ttn, FrontendKind::Mera] {
        let p = FrontendParams::seeded(&FrontendConfig::with_kind(kind, seed::derive_named(master, "verify-tn")))
            .map_err(err)?;
        p.check_isometries().map_err(|e| format!("{kind}: {e}"))?;
        let worst = p.isometry_report().iter().map(|r| r.1).fold(0.0, f64::max);
        detail.push(format!("{kind} {worst:.1e}"));
    }
    let tree = TreeParams::seeded(&FrontendConfig::with_kind(FrontendKind::Ttn, master)).map_err(err)?;
    let mera = MeraParams::identity(tree.clone());
    let mut rng = seed::rng(master);
    for _ in 0..20 {
        let x: Vec<f64> = (0..IMAGE_LEN).map(|_| rng.random_range(0.0..1.0)).collect();
        let (a, b) = (tree.encode(&x).map_err(err)?, mera.encode(&x).map_err(err)?);
        let dev = a.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
        ensure(dev <= 1e-12, || format!("identity-disentangler MERA deviates from TTN by {dev:e}"))?;
    }
    if let Some(path) = params {
        let bundle = Bundle::load(path).map_err(|e| format!("{}: {e}", path.display()))?;
        FrontendParams::from_bundle(&bundle).map_err(|e| format!("{}: {e}", path.display()))?;
        detail.push(format!("{} ok", path.display()));
    }
    Ok(format!("isometries {}; MERA≡TTN", detail.join(", ")))
}

fn qsim(master: u64) -> Check {
    let mut rng = seed::rng(seed::derive_named(master, "verify-qsim"));
    let mut a = Angles::zeros(2, 16);
    for v in &mut a.data {
        *v = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    }
    let s = run_circuit(&a, 2, 16).map_err(err)?;
    ensure((s.norm() - 1.0).abs() <= 1e-12, || format!("16-qubit norm {}", s.norm()))?;

    let mut t = StateVector::zero(3).map_err(err)?;
    t.apply(&Gate::Ry(0.7, 0)).map_err(err)?;
    let before = t.amplitudes().to_vec();
    t.apply(&Gate::Cnot(0, 1)).map_err(err)?;
    t.apply(&Gate::Cnot(0, 1)).map_err(err)?;
    ensure(
        t.amplitudes().iter().zip(&before).all(|(x, y)| (x - y).norm() <= 1e-15),
        || "CNOT is not an involution".into(),
    )?;

    let z = PauliTerm::single(0, Pauli::Z);
    for i in 0..20 {
        let (theta, p) = (-3.0 + 0.3 * i as f64, i as f64 / 20.0);
        let mut rho = DensityMatrix::zero(1).map_err(err)?;
        rho.apply(&Gate::Ry(theta, 0)).map_err(err)?;
        rho.depolarize(0, p);
        let dev = (rho.expectation(&z).map_err(err)? - (1.0 - p) * theta.cos()).abs();
        ensure(dev <= 1e-10, || format!("depolarizing ⟨Z⟩ off by {dev:e}"))?;
    }
    let mut rho = DensityMatrix::zero(3).map_err(err)?;
    let noise = NoiseSpec::Mixed {
        p: 0.1,
        gamma_amp: 0.2,
        gamma_phase: 0.3,
    };
    for g in a.gates().iter().filter(|g| g.support().iter().all(|&q| q < 3)) {
        rho.apply(g).map_err(err)?;
        for q in g.support() {
            rho.apply_noise(q, &noise);
        }
    }
    ensure((rho.trace() - Complex64::new(1.0, 0.0)).norm() <= 1e-12, || "trace drifted".into())?;
    ensure(rho.hermiticity_error() <= 1e-12, || "density matrix lost hermiticity".into())?;
    ensure(rho.min_eigenvalue() >= -1e-10, || "density matrix lost positivity".into())?;
    Ok("norm, CNOT², depolarizing closed form, trace/hermiticity/positivity".into())
}

fn qep(master: u64) -> Check {
    ensure(suggest_qubits(64) == 8, || "suggest_qubits(64) ≠ 8".into())?;
    let cfg = QepConfig {
        seed: seed::derive_named(master, "verify-qep"),
        ..QepConfig::default()
    };
    let mut gated = QepParams::seeded(&cfg).map_err(err)?;
    gated.force_alpha_zero();
    let mut rng = seed::rng(cfg.seed);
    for _ in 0..10 {
        let x: Vec<f64> = (0..cfg.d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let out = qep_forward(&x, &gated, &NoiseSpec::Noiseless).map_err(err)?;
        let dev = out.f_out.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(dev <= 1e-9, || format!("α=0 endpoint off by {dev:e}"))?;
        ensure(out.q_raw.iter().all(|v| (-1.0..=1.0).contains(v)), || "q_raw left [−1, 1]".into())?;
    }
    Ok("α=0 endpoint, q_raw range, N_q(64) = 8".into())
}

fn pipeline(master: u64) -> Check {
    let mut rng = seed::rng(seed::derive_named(master, "verify-pipeline"));
    let (d, n) = (4, 30);
    let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let labels: Vec<u8> = (0..n).map(|i| (i % 3 == 0) as u8).collect();
    let cw = balanced_class_weights(&labels);
    let theta: Vec<f64> = (0..2 * (d + 1)).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (_, g) = loss_and_grad(&Readout::from_flat(d, &theta), &xs, &labels, cw);
    for i in 0..theta.len() {
        let h = 1e-5;
        let (mut up, mut dn) = (theta.clone(), theta.clone());
        up[i] += h;
        dn[i] -= h;
        let fd = (loss_and_grad(&Readout::from_flat(d, &up), &xs, &labels, cw).0
            - loss_and_grad(&Readout::from_flat(d, &dn), &xs, &labels, cw).0)
            / (2.0 * h);
        let rel = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-8);
        ensure(rel <= 1e-4, || format!("gradient component {i} rel err {rel:e}"))?;
    }

    let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let tau = select_threshold(&scores, &labels).map_err(err)?;
    let best = candidate_thresholds(&scores)
        .into_iter()
        .map(|t| Confusion::at(&scores, &labels, t).youden())
        .fold(f64::NEG_INFINITY, f64::max);
    ensure(Confusion::at(&scores, &labels, tau).youden() == best, || "threshold is not the J maximizer".into())?;

    let agg = AggregationConfig::default();
    let feats: Vec<Vec<f64>> = (0..4).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let w = [0.25, 0.25, 0.3, 0.2];
    let plain = aggregate_plain(&feats, &w, agg.eps).map_err(err)?;
    let (secure, _) = aggregate_secure(&feats, &w, &agg, rng.random()).map_err(err)?;
    let dev = plain.iter().zip(&secure).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ensure(dev <= 1e-3, || format!("secure aggregate deviates by {dev:e}"))?;
    Ok(format!("readout gradient, threshold argmax, secure≈plain ({dev:.1e})"))
}

pub fn run(args: &VerifyArgs, master: u64) -> Result<(), CliError> {
    let all = [
        Group::Ring,
        Group::Mpc,
        Group::Bench,
        Group::Tn,
        Group::Qsim,
        Group::Qep,
        Group::Pipeline,
    ];
    let selected: Vec<Group> = if args.group.is_empty() {
        all.to_vec()
    } else {
        all.into_iter().filter(|g| args.group.contains(g)).collect()
    };
    let mut failed = Vec::new();
    for g in selected {
        let (name, outcome) = match g {
            Group::Ring => ("ring", ring(master)),
            Group::Mpc => ("mpc", mpc(master)),
            Group::Bench => ("bench", bench(master)),
            Group::Tn => ("tn", tn(master, args.params.as_deref())),
            Group::Qsim => ("qsim", qsim(master)),
            Group::Qep => ("qep", qep(master)),
            Group::Pipeline => ("pipeline", pipeline(master)),
        };
        match outcome {
            Ok(detail) => println!("{name:<9} PASS  {detail}"),
            Err(detail) => {
                println!("{name:<9} FAIL  {detail}");
                failed.push(name);
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(anyhow::anyhow!("failed groups: {}", failed.join(", "))))
    }
}
