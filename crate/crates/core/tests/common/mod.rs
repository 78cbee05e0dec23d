//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use tnmpcqep_core::mpc::{Instr, Program, ProgramBuilder, Reg};
use tnmpcqep_core::qsim::{Angles, Pauli, PauliTerm};

/// Plaintext value of a register and a bound on the decoded MPC error.
#[derive(Debug, Clone, Copy)]
pub struct Tracked {
    pub value: f64,
    pub bound: f64,
}

/// Random straight-line program over inputs in `[−100, 100]` with the
/// plaintext value and propagated error bound of every register. Each
/// truncation contributes `2·2^−F`; inputs and public constants contribute
/// their encoding error `2^−F−1`.
pub fn random_program<R: Rng>(rng: &mut R, frac_bits: u32, max_instrs: usize) -> (Program, Vec<Tracked>) {
    let ulp = 2f64.powi(-(frac_bits as i32));
    let trunc = 2.0 * ulp;
    let enc = ulp / 2.0;
    let mut b = ProgramBuilder::new();
    let mut regs: Vec<Tracked> = Vec::new();
    for _ in 0..rng.random_range(2..=5) {
        let raw: f64 = rng.random_range(-100.0..100.0);
        let v = (raw / ulp).round() * ulp;
        b.input(raw);
        regs.push(Tracked {
            value: v,
            bound: (raw - v).abs().max(enc),
        });
    }
    let n_instr = rng.random_range(1..=max_instrs);
    for _ in 0..n_instr {
        let n = regs.len();
        let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
        let (a, c) = (regs[i], regs[j]);
        let big = |t: Tracked| t.value.abs() + t.bound;
        let (instr, t) = match rng.random_range(0..6) {
            0 => (
                Instr::Add(Reg(i), Reg(j)),
                Tracked {
                    value: a.value + c.value,
                    bound: a.bound + c.bound,
                },
            ),
            1 => (
                Instr::Sub(Reg(i), Reg(j)),
                Tracked {
                    value: a.value - c.value,
                    bound: a.bound + c.bound,
                },
            ),
            2 => {
                let k: f64 = rng.random_range(-10.0..10.0);
                let kq = (k / ulp).round() * ulp;
                (
                    Instr::AddConst(Reg(i), k),
                    Tracked {
                        value: a.value + kq,
                        bound: a.bound,
                    },
                )
            }
            3 => {
                let k = rng.random_range(-3i64..=3);
                (
                    Instr::ScaleInt(Reg(i), k),
                    Tracked {
                        value: a.value * k as f64,
                        bound: a.bound * k.unsigned_abs() as f64,
                    },
                )
            }
            4 if big(a) * big(c) < 1e6 => (
                Instr::Mul(Reg(i), Reg(j)),
                Tracked {
                    value: a.value * c.value,
                    bound: a.value.abs() * c.bound + c.value.abs() * a.bound + a.bound * c.bound + trunc,
                },
            ),
            _ if big(a) < 1e5 => {
                let k: f64 = rng.random_range(-2.0..2.0);
                let kq = (k / ulp).round() * ulp;
                (
                    Instr::MulConst(Reg(i), k),
                    Tracked {
                        value: a.value * kq,
                        bound: kq.abs() * a.bound + trunc,
                    },
                )
            }
            _ => (
                Instr::Add(Reg(i), Reg(i)),
                Tracked {
                    value: 2.0 * a.value,
                    bound: 2.0 * a.bound,
                },
            ),
        };
        let r = b.push(instr);
        b.output(r);
        regs.push(t);
    }
    let p = b.build();
    let tracked = p.outputs.iter().map(|r| regs[r.0]).collect();
    (p, tracked)
}

// ---- dense quantum oracle -------------------------------------------------

pub type Dense = Vec<Vec<Complex64>>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> Dense {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }).collect())
        .collect()
}

pub fn kron(a: &Dense, b: &Dense) -> Dense {
    let (n, m) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); n * m]; n * m];
    for i in 0..n {
        for j in 0..n {
            for k in 0..m {
                for l in 0..m {
                    out[i * m + k][j * m + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

pub fn apply(m: &Dense, v: &[Complex64]) -> Vec<Complex64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

pub fn ry(t: f64) -> Dense {
    let (s, co) = (t / 2.0).sin_cos();
    vec![vec![c(co, 0.0), c(-s, 0.0)], vec![c(s, 0.0), c(co, 0.0)]]
}

pub fn rz(t: f64) -> Dense {
    vec![
        vec![c((t / 2.0).cos(), -(t / 2.0).sin()), c(0.0, 0.0)],
        vec![c(0.0, 0.0), c((t / 2.0).cos(), (t / 2.0).sin())],
    ]
}

/// `I ⊗ … ⊗ g ⊗ … ⊗ I` with qubit 0 leftmost.
pub fn embed(g: &Dense, q: usize, n: usize) -> Dense {
    let id = identity(2);
    let mut out = vec![vec![c(1.0, 0.0)]];
    for k in 0..n {
        out = kron(&out, if k == q { g } else { &id });
    }
    out
}

/// `|0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ X` on adjacent qubits `(q, q+1)`.
pub fn cnot_adjacent(q: usize, n: usize) -> Dense {
    let p0 = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]];
    let p1 = vec![vec![c(0.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
    let x = vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]];
    let mut a = vec![vec![c(1.0, 0.0)]];
    let mut b = vec![vec![c(1.0, 0.0)]];
    let mut k = 0;
    while k < n {
        if k == q {
            a = kron(&a, &kron(&p0, &identity(2)));
            b = kron(&b, &kron(&p1, &x));
            k += 2;
        } else {
            a = kron(&a, &identity(2));
            b = kron(&b, &identity(2));
            k += 1;
        }
    }
    a.iter()
        .zip(&b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(u, v)| u + v).collect())
        .collect()
}

/// Full circuit unitary composed from Kronecker products.
pub fn circuit_unitary(angles: &Angles) -> Dense {
    let n = angles.n_qubits;
    let mut u = identity(1 << n);
    for l in 0..angles.layers {
        for q in 0..n {
            let (ty, tz) = angles.get(l, q);
            u = matmul(&embed(&ry(ty), q, n), &u);
            u = matmul(&embed(&rz(tz), q, n), &u);
        }
        for q in 0..n - 1 {
            u = matmul(&cnot_adjacent(q, n), &u);
        }
    }
    u
}

pub fn pauli_dense(term: &PauliTerm, n: usize) -> Dense {
    let mut out = vec![vec![c(1.0, 0.0)]];
    for q in 0..n {
        let g = match term.factors.iter().find(|f| f.0 == q).map(|f| f.1) {
            None => identity(2),
            Some(Pauli::X) => vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]],
            Some(Pauli::Y) => vec![vec![c(0.0, 0.0), c(0.0, -1.0)], vec![c(0.0, 1.0), c(0.0, 0.0)]],
            Some(Pauli::Z) => vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(-1.0, 0.0)]],
        };
        out = kron(&out, &g);
    }
    out
}

pub fn random_angles<R: Rng>(rng: &mut R, layers: usize, n: usize) -> Angles {
    let mut a = Angles::zeros(layers, n);
    for v in &mut a.data {
        *v = (rng.random_range(-3.2..3.2), rng.random_range(-3.2..3.2));
    }
    a
}
