mod common;

use num_complex::Complex64;
use rand::Rng;
use tnmpcqep_core::qsim::{run_circuit, run_noisy, DensityMatrix, Gate, NoiseSpec, Pauli, PauliTerm, StateVector};
use tnmpcqep_core::seed;

fn random_state<R: Rng>(rng: &mut R, n: usize) -> StateVector {
    let a = common::random_angles(rng, 2, n);
    run_circuit(&a, 2, n).unwrap()
}

#[test]
fn random_circuits_match_dense_kronecker_oracle() {
    let mut rng = seed::rng(10);
    for trial in 0..100 {
        let n = rng.random_range(1..=4);
        let layers = rng.random_range(1..=3);
        let a = common::random_angles(&mut rng, layers, n);
        let s = run_circuit(&a, layers, n).unwrap();
        let mut zero = vec![Complex64::new(0.0, 0.0); 1 << n];
        zero[0] = Complex64::new(1.0, 0.0);
        let want = common::apply(&common::circuit_unitary(&a), &zero);
        let err = s
            .amplitudes()
            .iter()
            .zip(&want)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "trial {trial}: {err:e}");
        if n >= 2 {
            let t = PauliTerm::new(vec![(0, Pauli::Y), (n - 1, Pauli::X)]).unwrap();
            let o = common::pauli_dense(&t, n);
            let ow = common::apply(&o, &want);
            let exp: Complex64 = want.iter().zip(&ow).map(|(a, b)| a.conj() * b).sum();
            assert!((s.expectation(&t).unwrap() - exp.re).abs() <= 1e-10);
        }
    }
}

#[test]
fn gates_preserve_norm_and_obey_algebra() {
    let mut rng = seed::rng(11);
    for _ in 0..20 {
        let n = 4;
        let s = random_state(&mut rng, n);
        let mut twice = s.clone();
        twice.apply(&Gate::Cnot(1, 2)).unwrap();
        assert!((twice.norm() - 1.0).abs() <= 1e-12);
        twice.apply(&Gate::Cnot(1, 2)).unwrap();
        assert!(twice
            .amplitudes()
            .iter()
            .zip(s.amplitudes())
            .all(|(a, b)| (a - b).norm() <= 1e-15));

        let (x, y) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let mut split = s.clone();
        split.apply(&Gate::Ry(x, 2)).unwrap();
        split.apply(&Gate::Ry(y, 2)).unwrap();
        let mut joint = s.clone();
        joint.apply(&Gate::Ry(x + y, 2)).unwrap();
        for q in 0..n {
            for p in [Pauli::X, Pauli::Y, Pauli::Z] {
                let t = PauliTerm::single(q, p);
                assert!((split.expectation(&t).unwrap() - joint.expectation(&t).unwrap()).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn sixteen_qubit_depth_two_is_normalized() {
    let mut rng = seed::rng(12);
    let a = common::random_angles(&mut rng, 2, 16);
    let s = run_circuit(&a, 2, 16).unwrap();
    assert!((s.norm() - 1.0).abs() <= 1e-12);
}

#[test]
fn depolarizing_shrinks_single_qubit_expectations() {
    let mut rng = seed::rng(13);
    for _ in 0..50 {
        let layers = rng.random_range(1..=3);
        let a = common::random_angles(&mut rng, layers, 1);
        let p = rng.random_range(0.0..1.0);
        let clean = run_circuit(&a, a.layers, 1).unwrap();
        let noisy = run_noisy(&a, a.layers, 1, &NoiseSpec::Depolarizing { p }).unwrap();
        let z = PauliTerm::single(0, Pauli::Z);
        assert!(noisy.expectation(&z).unwrap().abs() <= clean.expectation(&z).unwrap().abs() + 1e-10);
    }
}

#[test]
fn noisy_states_stay_physical() {
    let mut rng = seed::rng(14);
    for _ in 0..10 {
        let n = rng.random_range(1..=3);
        let a = common::random_angles(&mut rng, 2, n);
        let noise = NoiseSpec::Mixed {
            p: rng.random_range(0.0..1.0),
            gamma_amp: rng.random_range(0.0..1.0),
            gamma_phase: rng.random_range(0.0..1.0),
        };
        let rho = run_noisy(&a, 2, n, &noise).unwrap();
        assert!((rho.trace() - Complex64::new(1.0, 0.0)).norm() <= 1e-12);
        assert!(rho.hermiticity_error() <= 1e-12);
        assert!(rho.min_eigenvalue() >= -1e-10);
    }
    let pure = DensityMatrix::from_state(&StateVector::zero(2).unwrap()).unwrap();
    assert_eq!(pure.entry(0, 0), Complex64::new(1.0, 0.0));
}
