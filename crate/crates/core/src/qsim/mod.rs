//! Exact statevector and density-matrix simulation of the layered
//! rotation + nearest-neighbor CNOT circuit family.
//!
//! Conventions: qubit `0` is the most significant bit of a basis index,
//! `Ry(θ) = exp(−iθY/2)` and `Rz(θ) = exp(−iθZ/2)`.

mod density;
mod state;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use density::{run_noisy, DensityMatrix, MAX_DENSITY_QUBITS};
pub use state::{run_circuit, StateVector, MAX_QUBITS};

#[derive(Debug, Error)]
pub enum QsimError {
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitIndex { index: usize, n_qubits: usize },
    #[error("angle array shape mismatch: {0}")]
    Shape(String),
    #[error("{n_qubits} qubits exceed the {limit}-qubit limit for {mode}")]
    TooManyQubits {
        n_qubits: usize,
        limit: usize,
        mode: &'static str,
    },
    #[error("invalid noise parameter: {0}")]
    Noise(String),
    #[error("invalid Pauli term: {0}")]
    Pauli(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    Ry(f64, usize),
    Rz(f64, usize),
    /// `Cnot(control, target)`.
    Cnot(usize, usize),
}

impl Gate {
    pub fn support(&self) -> Vec<usize> {
        match *self {
            Gate::Ry(_, q) | Gate::Rz(_, q) => vec![q],
            Gate::Cnot(c, t) => vec![c, t],
        }
    }
}

/// Rotation angles indexed `[layer][qubit] = (θ_y, θ_z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Angles {
    pub layers: usize,
    pub n_qubits: usize,
    pub data: Vec<(f64, f64)>,
}

impl Angles {
    pub fn zeros(layers: usize, n_qubits: usize) -> Self {
        Self {
            layers,
            n_qubits,
            data: vec![(0.0, 0.0); layers * n_qubits],
        }
    }

    pub fn get(&self, layer: usize, qubit: usize) -> (f64, f64) {
        self.data[layer * self.n_qubits + qubit]
    }

    pub fn set(&mut self, layer: usize, qubit: usize, value: (f64, f64)) {
        self.data[layer * self.n_qubits + qubit] = value;
    }

    pub fn validate(&self, layers: usize, n_qubits: usize) -> Result<(), QsimError> {
        if self.layers != layers || self.n_qubits != n_qubits || self.data.len() != layers * n_qubits {
            return Err(QsimError::Shape(format!(
                "got {}x{}x2 ({} pairs), expected {layers}x{n_qubits}x2",
                self.layers,
                self.n_qubits,
                self.data.len()
            )));
        }
        Ok(())
    }

    /// Per layer: `Ry` then `Rz` on every qubit, then `CNOT(q, q+1)` down the
    /// chain.
    pub fn gates(&self) -> Vec<Gate> {
        let mut g = Vec::with_capacity(self.layers * (3 * self.n_qubits));
        for l in 0..self.layers {
            for q in 0..self.n_qubits {
                let (ty, tz) = self.get(l, q);
                g.push(Gate::Ry(ty, q));
                g.push(Gate::Rz(tz, q));
            }
            for q in 0..self.n_qubits.saturating_sub(1) {
                g.push(Gate::Cnot(q, q + 1));
            }
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// Product of single-qubit Paulis on distinct qubits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliTerm {
    pub factors: Vec<(usize, Pauli)>,
}

impl PauliTerm {
    pub fn new(mut factors: Vec<(usize, Pauli)>) -> Result<Self, QsimError> {
        factors.sort_by_key(|f| f.0);
        if factors.is_empty() || factors.len() > 2 {
            return Err(QsimError::Pauli(format!("support size {} not in 1..=2", factors.len())));
        }
        if factors.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(QsimError::Pauli("repeated qubit".into()));
        }
        Ok(Self { factors })
    }

    pub fn single(q: usize, p: Pauli) -> Self {
        Self { factors: vec![(q, p)] }
    }

    pub fn zz(a: usize, b: usize) -> Self {
        Self::new(vec![(a, Pauli::Z), (b, Pauli::Z)]).expect("distinct qubits")
    }

    pub fn label(&self) -> String {
        self.factors.iter().map(|(q, p)| format!("{p:?}{q}")).collect()
    }

    pub(crate) fn check(&self, n_qubits: usize) -> Result<(), QsimError> {
        match self.factors.iter().find(|(q, _)| *q >= n_qubits) {
            Some(&(index, _)) => Err(QsimError::QubitIndex { index, n_qubits }),
            None => Ok(()),
        }
    }

    /// `(flip mask, per-basis-index phase)`: `O|k⟩ = phase(k)|k ⊕ mask⟩`.
    pub(crate) fn action(&self, n_qubits: usize) -> (usize, impl Fn(usize) -> num_complex::Complex64 + '_) {
        let bit = move |q: usize| 1usize << (n_qubits - 1 - q);
        let mask = self
            .factors
            .iter()
            .filter(|(_, p)| *p != Pauli::Z)
            .fold(0, |m, (q, _)| m | bit(*q));
        let phase = move |k: usize| {
            let mut ph = num_complex::Complex64::new(1.0, 0.0);
            for &(q, p) in &self.factors {
                let set = k & bit(q) != 0;
                ph *= match (p, set) {
                    (Pauli::X, _) => num_complex::Complex64::new(1.0, 0.0),
                    (Pauli::Y, false) => num_complex::Complex64::new(0.0, 1.0),
                    (Pauli::Y, true) => num_complex::Complex64::new(0.0, -1.0),
                    (Pauli::Z, false) => num_complex::Complex64::new(1.0, 0.0),
                    (Pauli::Z, true) => num_complex::Complex64::new(-1.0, 0.0),
                };
            }
            ph
        };
        (mask, phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Noiseless,
    Depolarizing { p: f64 },
    Thermal { gamma_amp: f64, gamma_phase: f64 },
    Mixed { p: f64, gamma_amp: f64, gamma_phase: f64 },
}

pub const DEFAULT_P: f64 = 0.01;
pub const DEFAULT_GAMMA: f64 = 0.01;

impl NoiseSpec {
    pub fn name(&self) -> &'static str {
        match self {
            NoiseSpec::Noiseless => "noiseless",
            NoiseSpec::Depolarizing { .. } => "depolarizing",
            NoiseSpec::Thermal { .. } => "thermal",
            NoiseSpec::Mixed { .. } => "mixed",
        }
    }

    /// Builds a spec by name using `p` and one `γ` for both damping rates.
    pub fn from_name(name: &str, p: f64, gamma: f64) -> Result<Self, QsimError> {
        let spec = match name {
            "noiseless" => NoiseSpec::Noiseless,
            "depolarizing" => NoiseSpec::Depolarizing { p },
            "thermal" => NoiseSpec::Thermal {
                gamma_amp: gamma,
                gamma_phase: gamma,
            },
            "mixed" => NoiseSpec::Mixed {
                p,
                gamma_amp: gamma,
                gamma_phase: gamma,
            },
            other => return Err(QsimError::Noise(format!("unknown noise kind '{other}'"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn is_noiseless(&self) -> bool {
        matches!(self, NoiseSpec::Noiseless)
    }

    pub fn validate(&self) -> Result<(), QsimError> {
        let probs: &[(&str, f64)] = match self {
            NoiseSpec::Noiseless => &[],
            NoiseSpec::Depolarizing { p } => &[("p", *p)],
            NoiseSpec::Thermal { gamma_amp, gamma_phase } => &[("gamma_amp", *gamma_amp), ("gamma_phase", *gamma_phase)],
            NoiseSpec::Mixed {
                p,
                gamma_amp,
                gamma_phase,
            } => &[("p", *p), ("gamma_amp", *gamma_amp), ("gamma_phase", *gamma_phase)],
        };
        match probs.iter().find(|(_, v)| !(0.0..=1.0).contains(v)) {
            Some((name, v)) => Err(QsimError::Noise(format!("{name}={v} outside [0, 1]"))),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_layout() {
        let mut a = Angles::zeros(2, 3);
        a.set(1, 2, (0.5, -0.5));
        let g = a.gates();
        assert_eq!(g.len(), 2 * 2 * 3 + 2 * 2);
        assert_eq!(g[0], Gate::Ry(0.0, 0));
        assert_eq!(g[6], Gate::Cnot(0, 1));
        assert_eq!(g[12], Gate::Ry(0.5, 2));
        assert_eq!(g[13], Gate::Rz(-0.5, 2));
        assert!(a.validate(2, 4).is_err());
    }

    #[test]
    fn pauli_terms() {
        assert!(PauliTerm::new(vec![]).is_err());
        assert!(PauliTerm::new(vec![(1, Pauli::Z), (1, Pauli::X)]).is_err());
        assert_eq!(PauliTerm::zz(3, 1).factors, vec![(1, Pauli::Z), (3, Pauli::Z)]);
        assert_eq!(PauliTerm::zz(0, 1).label(), "Z0Z1");
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseSpec::Depolarizing { p: 1.5 }.validate().is_err());
        assert!(NoiseSpec::from_name("thermal", 0.0, 0.2).is_ok());
        assert!(NoiseSpec::from_name("bogus", 0.0, 0.0).is_err());
        assert_eq!(NoiseSpec::from_name("mixed", 0.1, 0.2).unwrap().name(), "mixed");
    }
}
