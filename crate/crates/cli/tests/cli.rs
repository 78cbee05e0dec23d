use std::path::Path;
use std::process::{Command, Output};

use tnmpcqep_core::params::Bundle;
use tnmpcqep_core::pipeline::{synth_data, write_idx, ClassGeometry};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tnmpcqep"))
        .args(args)
        .env_remove("TNMPCQEP_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

#[test]
fn bench_default_grid_has_420_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench.csv");
    let o = run(&["bench-mpc", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(rows(&out).len(), 420);
    assert!(stdout(&o).contains("S1/S4"));
}

#[test]
fn bench_single_point_has_seven_rows() {
    let o = run(&["bench-mpc", "--dims", "64", "--n-max", "1"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 8);
    assert!(text.starts_with("scenario,n,d,k,theta,strategy,"));
}

#[test]
fn flag_errors_exit_with_two() {
    for args in [
        &["bench-mpc", "--theta", "0"][..],
        &["bench-mpc", "--n-min", "5", "--n-max", "2"],
        &["bench-mpc", "--strategy", "sideways"],
        &["qubit-sweep", "--nq", "17"],
        &["noise-sweep", "--nq", "12", "--noise", "depolarizing"],
        &["noise-sweep", "--p", "1.5"],
        &["verify", "--group", "nonsense"],
        &["no-such-command"],
    ] {
        let o = run(args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn runtime_errors_exit_with_one() {
    let o = run(&["encode", "--images", "/nonexistent/a", "--labels", "/nonexistent/b"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn qubit_sweep_adds_one_baseline_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q.csv");
    let o = run(&["qubit-sweep", "--nq", "8", "--seeds", "2", "--samples", "40", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let modes = column(&out, "mode");
    assert_eq!(modes.iter().filter(|m| *m == "quantum").count(), 2);
    assert_eq!(modes.iter().filter(|m| *m == "classical").count(), 1);
    // nearest-neighbour set: X and Z per qubit plus N_q − 1 ZZ pairs
    let nq = column(&out, "n_q");
    let dq = column(&out, "d_q");
    for (n, d) in nq.iter().zip(&dq).take(2) {
        let n: usize = n.parse().unwrap();
        assert_eq!(d.parse::<usize>().unwrap(), 3 * n - 1);
    }
}

#[test]
fn noise_sweep_rows_and_identity_channels() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("n.csv");
    let o = run(&[
        "noise-sweep", "--nq", "4", "--seeds", "3", "--samples", "40", "--p", "0", "--gamma", "0", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let recs = rows(&out);
    assert_eq!(recs.len(), 12);
    let acc = column(&out, "accuracy");
    let qstd = column(&out, "q_std");
    for seed in 0..3 {
        let base: f64 = qstd[4 * seed].parse().unwrap();
        for k in 1..4 {
            assert_eq!(acc[4 * seed + k], acc[4 * seed]);
            let v: f64 = qstd[4 * seed + k].parse().unwrap();
            assert!((v - base).abs() <= 1e-9);
        }
    }
}

#[test]
fn noise_sweep_defaults_to_eight_qubits() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("n8.csv");
    let o = run(&["noise-sweep", "--noise", "noiseless", "--seeds", "1", "--samples", "20", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(column(&out, "n_q"), vec!["8"]);
}

#[test]
fn outputs_are_reproducible_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..3).map(|i| dir.path().join(format!("q{i}.csv"))).collect();
    let args = |p: &Path| {
        vec![
            "qubit-sweep".to_string(),
            "--nq".into(),
            "4".into(),
            "--seeds".into(),
            "1".into(),
            "--samples".into(),
            "20".into(),
            "--out".into(),
            p.to_str().unwrap().into(),
        ]
    };
    for p in &paths[..2] {
        let a = args(p);
        assert_eq!(code(&run(&a.iter().map(String::as_str).collect::<Vec<_>>())), 0);
    }
    assert_eq!(std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());

    let a = args(&paths[2]);
    let o = Command::new(env!("CARGO_BIN_EXE_tnmpcqep"))
        .args(&a)
        .env("TNMPCQEP_SEED", "99")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_ne!(column(&paths[0], "seed"), column(&paths[2], "seed"));
}

#[test]
fn verify_passes_and_filters_groups() {
    let o = run(&["verify"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.contains("PASS")).count(), 7);

    let o = run(&["verify", "--group", "mpc"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("mpc"));
}

#[test]
fn corrupted_parameter_file_fails_tn_group() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("ttn.bin");
    let o = run(&["encode", "--samples", "4", "--params-out", params.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let o = run(&["verify", "--group", "tn", "--params", params.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));

    let mut b = Bundle::load(&params).unwrap();
    let t = b.tensors.iter_mut().find(|t| t.name == "isometry.2").unwrap();
    t.data.iter_mut().for_each(|v| *v *= 1.5);
    b.save(&params).unwrap();
    let o = run(&["verify", "--group", "tn", "--params", params.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let text = stdout(&o);
    assert!(text.contains("tn") && text.contains("FAIL") && text.contains("isometry.2"), "{text}");
}

#[test]
fn encode_round_trips_through_saved_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("mps.bin");
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let o = run(&[
        "encode", "--frontend", "mps", "--samples", "6", "--params-out", params.to_str().unwrap(), "--out",
        a.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let o = run(&["encode", "--params", params.to_str().unwrap(), "--samples", "6", "--out", b.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(rows(&a)[0].len(), 2 + 64);
}

#[test]
fn demo_reads_idx_and_gated_quantum_matches_classical() {
    let dir = tempfile::tempdir().unwrap();
    let g = ClassGeometry::default();
    let p = |n: &str| dir.path().join(n);
    write_idx(&synth_data(60, 1, &g), p("tr-img"), p("tr-lbl")).unwrap();
    write_idx(&synth_data(20, 2, &g), p("te-img"), p("te-lbl")).unwrap();
    let idx = [
        "--train-images",
        p("tr-img").to_str().unwrap(),
        "--train-labels",
        p("tr-lbl").to_str().unwrap(),
        "--test-images",
        p("te-img").to_str().unwrap(),
        "--test-labels",
        p("te-lbl").to_str().unwrap(),
    ]
    .map(str::to_string);
    let demo = |extra: &[&str]| -> serde_json::Value {
        let mut args = vec!["pipeline-demo"];
        args.extend(idx.iter().map(String::as_str));
        args.extend(extra);
        let o = run(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        serde_json::from_slice(&o.stdout).unwrap()
    };
    let classical = demo(&["--processor", "classical"]);
    let gated = demo(&["--processor", "quantum", "--force-alpha-zero"]);
    assert_eq!(classical["eval"], gated["eval"]);
    assert_eq!(gated["n_test"], 20);

    let csv_path = p("summary.csv");
    let _ = demo(&["--aggregation", "secure", "--csv", csv_path.to_str().unwrap()]);
    let total: u64 = column(&csv_path, "total_bits")[0].parse().unwrap();
    assert!(total > 0);
}

#[test]
fn qep_run_writes_one_row_per_batch() {
    let o = run(&["qep-run", "--samples", "40", "--batch-size", "16", "--nq", "4"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1 + 3);
    assert!(text.starts_with("batch_id,n_q,d_q,alpha_mean,q_std,noise_kind,seed"));
}
