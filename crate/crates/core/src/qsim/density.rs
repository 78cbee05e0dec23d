use nalgebra::DMatrix;
use num_complex::Complex64;

use super::state::{apply_1q, apply_cnot, check_gate, conj, ry, rz};
use super::{Angles, Gate, NoiseSpec, PauliTerm, QsimError, StateVector};

pub const MAX_DENSITY_QUBITS: usize = 10;

/// `ρ` stored row-major as a `2n`-qubit vector: index `(row << n) | col`.
///
/// Left multiplication acts on row qubit `q`, right multiplication by `U†`
/// acts as `conj(U)` on column qubit `n + q`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn zero(n_qubits: usize) -> Result<Self, QsimError> {
        Self::check_size(n_qubits)?;
        let mut data = vec![Complex64::new(0.0, 0.0); 1 << (2 * n_qubits)];
        data[0] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, data })
    }

    pub fn from_state(s: &StateVector) -> Result<Self, QsimError> {
        Self::check_size(s.n_qubits())?;
        let a = s.amplitudes();
        let data = a.iter().flat_map(|r| a.iter().map(move |c| r * c.conj())).collect();
        Ok(Self {
            n_qubits: s.n_qubits(),
            data,
        })
    }

    fn check_size(n_qubits: usize) -> Result<(), QsimError> {
        if n_qubits == 0 || n_qubits > MAX_DENSITY_QUBITS {
            return Err(QsimError::TooManyQubits {
                n_qubits,
                limit: MAX_DENSITY_QUBITS,
                mode: "density-matrix simulation",
            });
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.data[(row << self.n_qubits) | col]
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<(), QsimError> {
        check_gate(gate, self.n_qubits)?;
        let (n, w) = (self.n_qubits, 2 * self.n_qubits);
        match *gate {
            Gate::Ry(t, q) | Gate::Rz(t, q) => {
                let m = if matches!(gate, Gate::Ry(..)) { ry(t) } else { rz(t) };
                apply_1q(&mut self.data, w, q, &m);
                apply_1q(&mut self.data, w, n + q, &conj(&m));
            }
            Gate::Cnot(c, t) => {
                apply_cnot(&mut self.data, w, c, t);
                apply_cnot(&mut self.data, w, n + c, n + t);
            }
        }
        Ok(())
    }

    /// Visits every `2×2` block `(ρ00, ρ01, ρ10, ρ11)` of qubit `q`.
    fn for_blocks(&mut self, q: usize, f: impl Fn(&mut [Complex64; 4])) {
        let n = self.n_qubits;
        let rb = 1usize << (2 * n - 1 - q);
        let cb = 1usize << (n - 1 - q);
        for k in 0..self.data.len() {
            if k & (rb | cb) != 0 {
                continue;
            }
            let idx = [k, k | cb, k | rb, k | rb | cb];
            let mut block = idx.map(|i| self.data[i]);
            f(&mut block);
            for (i, v) in idx.iter().zip(block) {
                self.data[*i] = v;
            }
        }
    }

    /// `ρ → (1−p)ρ + p·(I/2) ⊗ Tr_q ρ`.
    pub fn depolarize(&mut self, q: usize, p: f64) {
        self.for_blocks(q, |b| {
            let mix = (b[0] + b[3]) * (p / 2.0);
            b[0] = b[0] * (1.0 - p) + mix;
            b[3] = b[3] * (1.0 - p) + mix;
            b[1] *= 1.0 - p;
            b[2] *= 1.0 - p;
        });
    }

    /// Kraus `K0 = diag(1, √(1−γ))`, `K1 = √γ |0⟩⟨1|`.
    pub fn amplitude_damp(&mut self, q: usize, gamma: f64) {
        let s = (1.0 - gamma).sqrt();
        self.for_blocks(q, |b| {
            b[0] += b[3] * gamma;
            b[3] *= 1.0 - gamma;
            b[1] *= s;
            b[2] *= s;
        });
    }

    /// Kraus `K0 = diag(1, √(1−λ))`, `K1 = diag(0, √λ)`.
    pub fn phase_damp(&mut self, q: usize, lambda: f64) {
        let s = (1.0 - lambda).sqrt();
        self.for_blocks(q, |b| {
            b[1] *= s;
            b[2] *= s;
        });
    }

    /// One noise channel application on qubit `q`.
    pub fn apply_noise(&mut self, q: usize, noise: &NoiseSpec) {
        match *noise {
            NoiseSpec::Noiseless => {}
            NoiseSpec::Depolarizing { p } => self.depolarize(q, p),
            NoiseSpec::Thermal { gamma_amp, gamma_phase } => {
                self.amplitude_damp(q, gamma_amp);
                self.phase_damp(q, gamma_phase);
            }
            NoiseSpec::Mixed {
                p,
                gamma_amp,
                gamma_phase,
            } => {
                self.depolarize(q, p);
                self.amplitude_damp(q, gamma_amp);
                self.phase_damp(q, gamma_phase);
            }
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.entry(i, i)).sum()
    }

    /// `max |ρ − ρ†|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in r..d {
                worst = worst.max((self.entry(r, c) - self.entry(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let d = self.dim();
        let m = DMatrix::from_fn(d, d, |r, c| self.entry(r, c));
        m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `Tr(Oρ)`, clamped to `[−1, 1]`.
    pub fn expectation(&self, term: &PauliTerm) -> Result<f64, QsimError> {
        term.check(self.n_qubits)?;
        let (mask, phase) = term.action(self.n_qubits);
        let v: Complex64 = (0..self.dim()).map(|k| phase(k) * self.entry(k, k ^ mask)).sum();
        Ok(v.re.clamp(-1.0, 1.0))
    }
}

/// Density-matrix evolution of the layered circuit with `noise` applied to
/// every qubit in a gate's support right after the gate.
pub fn run_noisy(angles: &Angles, layers: usize, n_qubits: usize, noise: &NoiseSpec) -> Result<DensityMatrix, QsimError> {
    noise.validate()?;
    angles.validate(layers, n_qubits)?;
    let mut rho = DensityMatrix::zero(n_qubits)?;
    for g in angles.gates() {
        rho.apply(&g)?;
        for q in g.support() {
            rho.apply_noise(q, noise);
        }
    }
    Ok(rho)
}
