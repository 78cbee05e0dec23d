//! Parameter bundle container.
//!
//! Layout: 8-byte magic `TNQPARAM`, `u32` little-endian header length, a
//! UTF-8 JSON header (version, kind, seed, tensor names and shapes), then
//! every tensor entry in header order as a little-endian `(re, im)` pair of
//! `f64`s. Real tensors are stored with zero imaginary parts.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{Linear, Mlp};

pub const MAGIC: &[u8; 8] = b"TNQPARAM";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("bad magic at offset 0")]
    BadMagic,
    #[error("truncated bundle: need {needed} bytes at offset {offset}, have {available}")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("{0} trailing bytes after tensor data")]
    TrailingBytes(usize),
    #[error("unsupported bundle version {0}")]
    Version(u32),
    #[error("malformed header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("bundle kind is '{found}', expected '{expected}'")]
    Kind { expected: String, found: String },
    #[error("tensor '{0}' missing from bundle")]
    Missing(String),
    #[error("tensor '{name}' has shape {found:?}, expected {expected:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("tensor '{0}' has nonzero imaginary entries")]
    NotReal(String),
    #[error("tensor '{0}' contains non-finite entries")]
    NonFinite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    version: u32,
    kind: String,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<serde_json::Value>,
    tensors: Vec<TensorMeta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub kind: String,
    pub seed: u64,
    /// Free-form hyperparameter echo stored in the header.
    pub config: Option<serde_json::Value>,
    pub tensors: Vec<Tensor>,
}

impl Bundle {
    pub fn new(kind: impl Into<String>, seed: u64) -> Self {
        Self {
            kind: kind.into(),
            seed,
            config: None,
            tensors: Vec::new(),
        }
    }

    pub fn push_complex(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<Complex64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.tensors.push(Tensor {
            name: name.into(),
            shape,
            data,
        });
    }

    pub fn push_real(&mut self, name: impl Into<String>, shape: Vec<usize>, data: &[f64]) {
        self.push_complex(name, shape, data.iter().map(|&v| Complex64::new(v, 0.0)).collect());
    }

    pub fn push_linear(&mut self, name: &str, l: &Linear) {
        self.push_real(format!("{name}.weight"), vec![l.outputs, l.inputs], &l.weight);
        self.push_real(format!("{name}.bias"), vec![l.outputs], &l.bias);
    }

    pub fn push_mlp(&mut self, name: &str, m: &Mlp) {
        self.push_linear(&format!("{name}.0"), &m.first);
        self.push_linear(&format!("{name}.1"), &m.second);
    }

    pub fn expect_kind(&self, expected: &str) -> Result<(), BundleError> {
        if self.kind == expected {
            Ok(())
        } else {
            Err(BundleError::Kind {
                expected: expected.into(),
                found: self.kind.clone(),
            })
        }
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, BundleError> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| BundleError::Missing(name.into()))
    }

    pub fn complex(&self, name: &str, shape: &[usize]) -> Result<Vec<Complex64>, BundleError> {
        let t = self.get(name)?;
        if t.shape != shape {
            return Err(BundleError::Shape {
                name: name.into(),
                expected: shape.to_vec(),
                found: t.shape.clone(),
            });
        }
        if t.data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(BundleError::NonFinite(name.into()));
        }
        Ok(t.data.clone())
    }

    pub fn real(&self, name: &str, shape: &[usize]) -> Result<Vec<f64>, BundleError> {
        let data = self.complex(name, shape)?;
        if data.iter().any(|c| c.im != 0.0) {
            return Err(BundleError::NotReal(name.into()));
        }
        Ok(data.into_iter().map(|c| c.re).collect())
    }

    pub fn linear(&self, name: &str, inputs: usize, outputs: usize) -> Result<Linear, BundleError> {
        let weight = self.real(&format!("{name}.weight"), &[outputs, inputs])?;
        let bias = self.real(&format!("{name}.bias"), &[outputs])?;
        Ok(Linear {
            inputs,
            outputs,
            weight,
            bias,
        })
    }

    pub fn mlp(&self, name: &str, inputs: usize, hidden: usize, outputs: usize) -> Result<Mlp, BundleError> {
        Ok(Mlp {
            first: self.linear(&format!("{name}.0"), inputs, hidden)?,
            second: self.linear(&format!("{name}.1"), hidden, outputs)?,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            version: VERSION,
            kind: self.kind.clone(),
            seed: self.seed,
            config: self.config.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| TensorMeta {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        let entries: usize = self.tensors.iter().map(|t| t.data.len()).sum();
        let mut out = Vec::with_capacity(12 + json.len() + 16 * entries);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for t in &self.tensors {
            for c in &t.data {
                out.extend_from_slice(&c.re.to_le_bytes());
                out.extend_from_slice(&c.im.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BundleError> {
        let take = |offset: usize, needed: usize| -> Result<&[u8], BundleError> {
            bytes.get(offset..offset + needed).ok_or(BundleError::Truncated {
                offset,
                needed,
                available: bytes.len().saturating_sub(offset),
            })
        };
        if take(0, 8)? != MAGIC {
            return Err(BundleError::BadMagic);
        }
        let len = u32::from_le_bytes(take(8, 4)?.try_into().unwrap()) as usize;
        let header: Header = serde_json::from_slice(take(12, len)?)?;
        if header.version != VERSION {
            return Err(BundleError::Version(header.version));
        }
        let mut offset = 12 + len;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for meta in header.tensors {
            let count: usize = meta.shape.iter().product();
            let raw = take(offset, count * 16)?;
            let data = raw
                .chunks_exact(16)
                .map(|c| {
                    Complex64::new(
                        f64::from_le_bytes(c[..8].try_into().unwrap()),
                        f64::from_le_bytes(c[8..].try_into().unwrap()),
                    )
                })
                .collect();
            offset += count * 16;
            tensors.push(Tensor {
                name: meta.name,
                shape: meta.shape,
                data,
            });
        }
        if offset != bytes.len() {
            return Err(BundleError::TrailingBytes(bytes.len() - offset));
        }
        Ok(Self {
            kind: header.kind,
            seed: header.seed,
            config: header.config,
            tensors,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), BundleError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BundleError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Bundle {
        let mut b = Bundle::new("test", 9);
        b.push_real("a", vec![2, 2], &[1.0, -2.0, 3.5, 0.0]);
        b.push_complex("z", vec![1], vec![Complex64::new(0.25, -1.0)]);
        b
    }

    #[test]
    fn round_trip_bytes() {
        let b = sample();
        let bytes = b.to_bytes();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(Bundle::from_bytes(&bytes).unwrap(), b);
        // trailing data section: 5 entries of 16 bytes
        let z = &bytes[bytes.len() - 16..];
        assert_eq!(f64::from_le_bytes(z[..8].try_into().unwrap()), 0.25);
        assert_eq!(f64::from_le_bytes(z[8..].try_into().unwrap()), -1.0);
    }

    #[test]
    fn malformed_inputs() {
        let bytes = sample().to_bytes();
        let mut bad = bytes.clone();
        bad[0] ^= 1;
        assert!(matches!(Bundle::from_bytes(&bad), Err(BundleError::BadMagic)));
        assert!(matches!(
            Bundle::from_bytes(&bytes[..bytes.len() - 3]),
            Err(BundleError::Truncated { .. })
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(Bundle::from_bytes(&long), Err(BundleError::TrailingBytes(1))));
    }

    #[test]
    fn typed_access() {
        let b = sample();
        assert_eq!(b.real("a", &[2, 2]).unwrap()[2], 3.5);
        assert!(matches!(b.real("z", &[1]), Err(BundleError::NotReal(_))));
        assert!(matches!(b.real("a", &[4]), Err(BundleError::Shape { .. })));
        assert!(matches!(b.real("q", &[1]), Err(BundleError::Missing(_))));
    }
}
