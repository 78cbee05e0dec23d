use std::io::Write;

use num_complex::Complex64;

use super::{Angles, Gate, PauliTerm, QsimError};

pub const MAX_QUBITS: usize = 16;

pub(crate) type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub(crate) fn ry(theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

pub(crate) fn rz(theta: f64) -> Mat2 {
    [
        [Complex64::from_polar(1.0, -theta / 2.0), ZERO],
        [ZERO, Complex64::from_polar(1.0, theta / 2.0)],
    ]
}

pub(crate) fn conj(m: &Mat2) -> Mat2 {
    [[m[0][0].conj(), m[0][1].conj()], [m[1][0].conj(), m[1][1].conj()]]
}

/// Applies `m` to qubit `q` of an `n`-qubit register (qubit 0 = MSB).
pub(crate) fn apply_1q(amps: &mut [Complex64], n: usize, q: usize, m: &Mat2) {
    let stride = 1usize << (n - 1 - q);
    for base in (0..amps.len()).step_by(2 * stride) {
        for i in base..base + stride {
            let (a, b) = (amps[i], amps[i + stride]);
            amps[i] = m[0][0] * a + m[0][1] * b;
            amps[i + stride] = m[1][0] * a + m[1][1] * b;
        }
    }
}

pub(crate) fn apply_cnot(amps: &mut [Complex64], n: usize, control: usize, target: usize) {
    let cb = 1usize << (n - 1 - control);
    let tb = 1usize << (n - 1 - target);
    for k in 0..amps.len() {
        if k & cb != 0 && k & tb == 0 {
            amps.swap(k, k | tb);
        }
    }
}

pub(crate) fn check_gate(gate: &Gate, n_qubits: usize) -> Result<(), QsimError> {
    let support = gate.support();
    if let Some(&index) = support.iter().find(|&&q| q >= n_qubits) {
        return Err(QsimError::QubitIndex { index, n_qubits });
    }
    if support.len() == 2 && support[0] == support[1] {
        return Err(QsimError::QubitIndex {
            index: support[0],
            n_qubits,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self, QsimError> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(QsimError::TooManyQubits {
                n_qubits,
                limit: MAX_QUBITS,
                mode: "statevector",
            });
        }
        let mut amps = vec![ZERO; 1 << n_qubits];
        amps[0] = ONE;
        Ok(Self { n_qubits, amps })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, QsimError> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(QsimError::Shape(format!("{len} amplitudes is not 2^n with n >= 1")));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(QsimError::TooManyQubits {
                n_qubits,
                limit: MAX_QUBITS,
                mode: "statevector",
            });
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<(), QsimError> {
        check_gate(gate, self.n_qubits)?;
        let n = self.n_qubits;
        match *gate {
            Gate::Ry(t, q) => apply_1q(&mut self.amps, n, q, &ry(t)),
            Gate::Rz(t, q) => apply_1q(&mut self.amps, n, q, &rz(t)),
            Gate::Cnot(c, t) => apply_cnot(&mut self.amps, n, c, t),
        }
        Ok(())
    }

    /// `⟨ψ|O|ψ⟩`, clamped to `[−1, 1]`.
    pub fn expectation(&self, term: &PauliTerm) -> Result<f64, QsimError> {
        term.check(self.n_qubits)?;
        let (mask, phase) = term.action(self.n_qubits);
        let v: Complex64 = self
            .amps
            .iter()
            .enumerate()
            .map(|(k, a)| self.amps[k ^ mask].conj() * phase(k) * a)
            .sum();
        debug_assert!(v.im.abs() <= 1e-9, "Hermitian expectation has imaginary part {}", v.im);
        Ok(v.re.clamp(-1.0, 1.0))
    }

    /// Debug dump with header `index,re,im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,re,im")?;
        for (i, a) in self.amps.iter().enumerate() {
            writeln!(out, "{i},{},{}", a.re, a.im)?;
        }
        Ok(())
    }
}

/// Layered circuit applied to `|0…0⟩`.
pub fn run_circuit(angles: &Angles, layers: usize, n_qubits: usize) -> Result<StateVector, QsimError> {
    angles.validate(layers, n_qubits)?;
    let mut s = StateVector::zero(n_qubits)?;
    for g in angles.gates() {
        s.apply(&g)?;
    }
    Ok(s)
}
