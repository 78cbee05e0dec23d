//! Arithmetic in `Z_{2^k}` and the fixed-point codec used by every MPC
//! primitive.
//!
//! Ring elements are stored in the low `k` bits of a `u64`; all arithmetic
//! wraps modulo `2^k`. Values with the top bit set are read as negative
//! (two's complement) when decoded.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default ring width: shares fit into 64-bit machine words.
pub const DEFAULT_BITS: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RingError {
    #[error("ring width must be in 1..=64, got {0}")]
    InvalidWidth(u32),
    #[error("operands live in different rings (k={left} vs k={right})")]
    WidthMismatch { left: u32, right: u32 },
    #[error("fraction bits F={frac_bits} must satisfy 0 < F < k={bits}")]
    InvalidFraction { bits: u32, frac_bits: u32 },
    #[error("{value} is outside the representable range |v| < {bound}")]
    OutOfRange { value: f64, bound: f64 },
}

/// The ring `Z_{2^k}` as a lightweight context over raw `u64` words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ring {
    bits: u32,
}

impl Ring {
    pub fn new(bits: u32) -> Result<Self, RingError> {
        if bits == 0 || bits > 64 {
            return Err(RingError::InvalidWidth(bits));
        }
        Ok(Self { bits })
    }

    #[inline]
    pub fn bits(self) -> u32 {
        self.bits
    }

    #[inline]
    pub fn mask(self) -> u64 {
        if self.bits == 64 {
            u64::MAX
        } else {
            (1u64 << self.bits) - 1
        }
    }

    #[inline]
    pub fn reduce(self, x: u64) -> u64 {
        x & self.mask()
    }

    #[inline]
    pub fn add(self, a: u64, b: u64) -> u64 {
        self.reduce(a.wrapping_add(b))
    }

    #[inline]
    pub fn sub(self, a: u64, b: u64) -> u64 {
        self.reduce(a.wrapping_sub(b))
    }

    #[inline]
    pub fn neg(self, a: u64) -> u64 {
        self.reduce(a.wrapping_neg())
    }

    #[inline]
    pub fn mul(self, a: u64, b: u64) -> u64 {
        self.reduce(a.wrapping_mul(b))
    }

    /// Embeds a signed integer (two's complement).
    #[inline]
    pub fn from_signed(self, v: i64) -> u64 {
        self.reduce(v as u64)
    }

    /// Two's-complement reading of a reduced element.
    #[inline]
    pub fn to_signed(self, x: u64) -> i64 {
        let x = self.reduce(x) as i128;
        if x >= 1i128 << (self.bits - 1) {
            (x - (1i128 << self.bits)) as i64
        } else {
            x as i64
        }
    }

    pub fn value(self, raw: u64) -> RingValue {
        RingValue {
            raw: self.reduce(raw),
            bits: self.bits,
        }
    }

    /// Bytes needed for one element on the wire.
    #[inline]
    pub fn byte_width(self) -> usize {
        self.bits.div_ceil(8) as usize
    }
}

impl Default for Ring {
    fn default() -> Self {
        Self { bits: DEFAULT_BITS }
    }
}

/// An element of `Z_{2^k}` that remembers its ring width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RingValue {
    raw: u64,
    bits: u32,
}

impl RingValue {
    pub fn new(raw: u64, bits: u32) -> Result<Self, RingError> {
        Ok(Ring::new(bits)?.value(raw))
    }

    /// Shorthand for a 64-bit ring element.
    pub fn u64(raw: u64) -> Self {
        Self { raw, bits: 64 }
    }

    #[inline]
    pub fn raw(self) -> u64 {
        self.raw
    }

    #[inline]
    pub fn bits(self) -> u32 {
        self.bits
    }

    pub fn ring(self) -> Ring {
        Ring { bits: self.bits }
    }

    fn same_ring(self, other: Self) -> Result<Ring, RingError> {
        if self.bits != other.bits {
            return Err(RingError::WidthMismatch {
                left: self.bits,
                right: other.bits,
            });
        }
        Ok(self.ring())
    }
}

impl fmt::Display for RingValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (mod 2^{})", self.raw, self.bits)
    }
}

pub fn ring_add(a: RingValue, b: RingValue) -> Result<RingValue, RingError> {
    let ring = a.same_ring(b)?;
    Ok(ring.value(ring.add(a.raw, b.raw)))
}

pub fn ring_sub(a: RingValue, b: RingValue) -> Result<RingValue, RingError> {
    let ring = a.same_ring(b)?;
    Ok(ring.value(ring.sub(a.raw, b.raw)))
}

pub fn ring_mul(a: RingValue, b: RingValue) -> Result<RingValue, RingError> {
    let ring = a.same_ring(b)?;
    Ok(ring.value(ring.mul(a.raw, b.raw)))
}

/// Real ↔ fixed-point conversion with `F` fraction bits in a `k`-bit ring.
///
/// Encoding rounds half away from zero: `encode(0.5·2^-F) = 1` and
/// `encode(-0.5·2^-F) = -1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedPointCodec {
    ring: Ring,
    frac_bits: u32,
}

impl FixedPointCodec {
    pub fn new(bits: u32, frac_bits: u32) -> Result<Self, RingError> {
        let ring = Ring::new(bits)?;
        if frac_bits == 0 || frac_bits >= bits {
            return Err(RingError::InvalidFraction { bits, frac_bits });
        }
        Ok(Self { ring, frac_bits })
    }

    #[inline]
    pub fn ring(&self) -> Ring {
        self.ring
    }

    #[inline]
    pub fn bits(&self) -> u32 {
        self.ring.bits
    }

    #[inline]
    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    #[inline]
    pub fn scale(&self) -> f64 {
        (self.frac_bits as f64).exp2()
    }

    /// One unit in the last place, `2^-F`.
    #[inline]
    pub fn ulp(&self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }

    /// Exclusive magnitude bound `2^(k-1-F)`.
    pub fn bound(&self) -> f64 {
        ((self.bits() - 1 - self.frac_bits) as f64).exp2()
    }

    /// Encodes `v` as `round(v · 2^F)` in two's complement.
    pub fn encode_raw(&self, v: f64) -> Result<u64, RingError> {
        let bound = self.bound();
        if !v.is_finite() || v.abs() >= bound {
            return Err(RingError::OutOfRange { value: v, bound });
        }
        let scaled = (v * self.scale()).round();
        let limit = ((self.bits() - 1) as f64).exp2();
        // Rounding can push a value just under the bound onto it.
        if scaled >= limit || scaled < -limit {
            return Err(RingError::OutOfRange { value: v, bound });
        }
        Ok(self.ring.from_signed(scaled as i64))
    }

    pub fn encode(&self, v: f64) -> Result<RingValue, RingError> {
        Ok(self.ring.value(self.encode_raw(v)?))
    }

    pub fn decode_raw(&self, raw: u64) -> f64 {
        self.ring.to_signed(raw) as f64 * self.ulp()
    }

    pub fn decode(&self, r: RingValue) -> f64 {
        self.decode_raw(r.raw)
    }
}

pub fn encode_fixed(v: f64, codec: &FixedPointCodec) -> Result<RingValue, RingError> {
    codec.encode(v)
}

pub fn decode_fixed(r: RingValue, codec: &FixedPointCodec) -> f64 {
    codec.decode(r)
}
