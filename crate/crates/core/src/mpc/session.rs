//! Lockstep execution of the three computation nodes.
//!
//! Every protocol step runs in rounds: each node computes locally, each node
//! sends its outgoing frames, then each node receives, always in node order
//! 0, 1, 2. Given the session seed the produced shares, the opened values
//! and the meter are fully reproducible.
//!
//! Costs are charged to the [`CostMeter`] per primitive following the
//! communication model (multiplication `3k`, truncation `6k`, fixed-point
//! multiplication `9k`, division `3k(k + 4θ + 2)`, input sharing `6k`,
//! opening `3k`). Where a primitive's realization moves fewer bits than the
//! model (truncation, division), the meter still follows the model; the
//! transport's [`WireStats`] record what actually crossed the channels.

use rand::{Rng, RngCore};
use rand_chacha::ChaCha20Rng;

use super::meter::{CostMeter, CostReport, Link, SecurityMode};
use super::share::{self, ReplicatedShare};
use super::transport::{Endpoint, Frame, LocalTransport, Opcode, Transport, WireStats};
use super::{MpcError, PARTIES};
use crate::ring::{FixedPointCodec, Ring, RingValue};
use crate::seed;

/// Goldschmidt seed `1/x ≈ C - 2x` on `[0.5, 1)`; worst relative error ≈ 0.086.
const RECIPROCAL_SEED: f64 = 2.914_213_562_373_095;

/// A secret held as replicated shares; `pairs[i]` is node `i`'s view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shared {
    pairs: [(u64, u64); PARTIES],
}

impl Shared {
    pub fn from_shares(shares: [ReplicatedShare; PARTIES]) -> Self {
        Self {
            pairs: shares.map(|s| s.pair),
        }
    }

    pub fn shares(&self) -> [ReplicatedShare; PARTIES] {
        std::array::from_fn(|i| ReplicatedShare {
            party: i,
            pair: self.pairs[i],
        })
    }

    pub fn view(&self, party: usize) -> (u64, u64) {
        self.pairs[party]
    }

    fn map_local(&self, f: impl Fn(usize, (u64, u64)) -> (u64, u64)) -> Self {
        Self {
            pairs: std::array::from_fn(|i| f(i, self.pairs[i])),
        }
    }
}

/// Per-node state: the two pseudo-random generators for the components
/// this node holds. Component `j` is generated identically by nodes `j` and
/// `j - 1`, so correlated randomness costs no communication.
struct Node {
    own: ChaCha20Rng,
    next: ChaCha20Rng,
}

impl Node {
    fn draw(&mut self, ring: Ring, bits: u32) -> (u64, u64) {
        let mask = if bits >= 64 { u64::MAX } else { (1u64 << bits) - 1 };
        (
            ring.reduce(self.own.next_u64() & mask),
            ring.reduce(self.next.next_u64() & mask),
        )
    }
}

pub struct Session<T: Transport = LocalTransport> {
    codec: FixedPointCodec,
    mode: SecurityMode,
    transport: T,
    meter: CostMeter,
    nodes: [Node; PARTIES],
    client: ChaCha20Rng,
}

impl Session<LocalTransport> {
    pub fn new(codec: FixedPointCodec, mode: SecurityMode, seed: u64) -> Self {
        let transport = LocalTransport::new(codec.ring());
        Self::with_transport(codec, mode, seed, transport)
    }
}

impl<T: Transport> Session<T> {
    pub fn with_transport(codec: FixedPointCodec, mode: SecurityMode, seed: u64, transport: T) -> Self {
        let key = |j: usize| seed::derive(seed::derive_named(seed, "prss"), j as u64);
        let nodes = std::array::from_fn(|i| Node {
            own: seed::rng(key(i)),
            next: seed::rng(key((i + 1) % PARTIES)),
        });
        Self {
            codec,
            mode,
            transport,
            meter: CostMeter::new(),
            nodes,
            client: seed::rng(seed::derive_named(seed, "client")),
        }
    }

    pub fn codec(&self) -> &FixedPointCodec {
        &self.codec
    }

    pub fn ring(&self) -> Ring {
        self.codec.ring()
    }

    pub fn mode(&self) -> SecurityMode {
        self.mode
    }

    pub fn meter(&self) -> &CostMeter {
        &self.meter
    }

    pub fn report(&self) -> CostReport {
        self.meter.report(self.ring().bits(), self.mode)
    }

    pub fn wire_stats(&self) -> WireStats {
        self.transport.stats()
    }

    fn k(&self) -> u64 {
        self.ring().bits() as u64
    }

    fn charge(&mut self, link: Link, bits: u64) {
        self.meter.charge(link, bits * self.mode.factor());
    }

    fn recv_checked(&mut self, from: Endpoint, to: Endpoint, opcode: Opcode, len: usize) -> Result<Vec<u64>, MpcError> {
        let frame = self.transport.recv(from, to)?;
        if frame.opcode != opcode || frame.elements.len() != len {
            return Err(MpcError::Integrity(format!(
                "{from:?}->{to:?}: expected {opcode:?} with {len} elements, got {:?} with {}",
                frame.opcode,
                frame.elements.len()
            )));
        }
        Ok(frame.elements)
    }

    // ---- input ----------------------------------------------------------

    /// A client secret-shares a ring element to the three nodes (`6k` bits).
    pub fn input_raw(&mut self, v: RingValue) -> Result<Shared, MpcError> {
        Ok(self.input_raw_many(&[v.raw()])?.remove(0))
    }

    pub fn input(&mut self, v: f64) -> Result<Shared, MpcError> {
        Ok(self.input_many(&[v])?.remove(0))
    }

    /// Shares a vector in one frame per node.
    pub fn input_many(&mut self, values: &[f64]) -> Result<Vec<Shared>, MpcError> {
        let raw = values
            .iter()
            .map(|&v| self.codec.encode_raw(v))
            .collect::<Result<Vec<_>, _>>()?;
        self.input_raw_many(&raw)
    }

    pub fn input_raw_many(&mut self, values: &[u64]) -> Result<Vec<Shared>, MpcError> {
        let ring = self.ring();
        let shared: Vec<Shared> = values
            .iter()
            .map(|&v| Shared::from_shares(share::share(ring.value(v), &mut self.client)))
            .collect();
        for node in 0..PARTIES {
            let elements = shared
                .iter()
                .flat_map(|s| [s.pairs[node].0, s.pairs[node].1])
                .collect();
            self.transport.send(Frame {
                opcode: Opcode::Share,
                from: Endpoint::Client,
                to: Endpoint::Node(node as u8),
                elements,
            })?;
        }
        let mut received = [(); PARTIES].map(|_| Vec::new());
        for (node, slot) in received.iter_mut().enumerate() {
            *slot = self.recv_checked(
                Endpoint::Client,
                Endpoint::Node(node as u8),
                Opcode::Share,
                2 * values.len(),
            )?;
        }
        self.charge(Link::ClientToNode, 6 * self.k() * values.len() as u64);
        Ok((0..values.len())
            .map(|j| Shared {
                pairs: std::array::from_fn(|i| (received[i][2 * j], received[i][2 * j + 1])),
            })
            .collect())
    }

    /// Shares dealt during setup (e.g. protected model weights); no
    /// per-run traffic is charged.
    pub fn deal(&mut self, v: f64) -> Result<Shared, MpcError> {
        let raw = self.codec.encode(v)?;
        Ok(Shared::from_shares(share::share(raw, &mut self.client)))
    }

    /// Trivial sharing of a public constant: `(c, 0, 0)`.
    pub fn constant(&self, v: f64) -> Result<Shared, MpcError> {
        Ok(self.constant_raw(self.codec.encode_raw(v)?))
    }

    fn constant_raw(&self, c: u64) -> Shared {
        Shared::from_shares(share::from_components([c, 0, 0]))
    }

    // ---- local operations ----------------------------------------------

    pub fn add(&self, x: &Shared, y: &Shared) -> Shared {
        let ring = self.ring();
        x.map_local(|i, (a, b)| (ring.add(a, y.pairs[i].0), ring.add(b, y.pairs[i].1)))
    }

    pub fn sub(&self, x: &Shared, y: &Shared) -> Shared {
        let ring = self.ring();
        x.map_local(|i, (a, b)| (ring.sub(a, y.pairs[i].0), ring.sub(b, y.pairs[i].1)))
    }

    pub fn neg(&self, x: &Shared) -> Shared {
        let ring = self.ring();
        x.map_local(|_, (a, b)| (ring.neg(a), ring.neg(b)))
    }

    /// Adds a public raw constant to component 0 (held by nodes 0 and 2).
    fn add_public_raw(&self, x: &Shared, c: u64) -> Shared {
        let ring = self.ring();
        x.map_local(|i, (a, b)| match i {
            0 => (ring.add(a, c), b),
            2 => (a, ring.add(b, c)),
            _ => (a, b),
        })
    }

    pub fn add_const(&self, x: &Shared, c: f64) -> Result<Shared, MpcError> {
        Ok(self.add_public_raw(x, self.codec.encode_raw(c)?))
    }

    /// Multiplies by a public integer; the scale is unchanged.
    pub fn scale_int(&self, x: &Shared, c: i64) -> Shared {
        let ring = self.ring();
        let c = ring.from_signed(c);
        x.map_local(|_, (a, b)| (ring.mul(a, c), ring.mul(b, c)))
    }

    // ---- multiplication ------------------------------------------------

    fn mul_round(&mut self, xs: &[Shared], ys: &[Shared]) -> Result<Vec<Shared>, MpcError> {
        let ring = self.ring();
        let m = xs.len();
        let mut z = [(); PARTIES].map(|_| Vec::with_capacity(m));
        for (i, zi) in z.iter_mut().enumerate() {
            for (x, y) in xs.iter().zip(ys) {
                let (x0, x1) = x.pairs[i];
                let (y0, y1) = y.pairs[i];
                // zero-sharing alpha_i = r_i - r_{i+1} re-randomizes the product
                let (ra, rb) = self.nodes[i].draw(ring, 64);
                let prod = ring.add(
                    ring.add(ring.mul(x0, y0), ring.mul(x1, y0)),
                    ring.mul(x0, y1),
                );
                zi.push(ring.add(prod, ring.sub(ra, rb)));
            }
        }
        for (i, zi) in z.iter().enumerate() {
            self.transport.send(Frame {
                opcode: Opcode::Mul,
                from: Endpoint::Node(i as u8),
                to: Endpoint::Node(((i + PARTIES - 1) % PARTIES) as u8),
                elements: zi.clone(),
            })?;
        }
        let mut incoming = [(); PARTIES].map(|_| Vec::new());
        for (i, slot) in incoming.iter_mut().enumerate() {
            *slot = self.recv_checked(
                Endpoint::Node(((i + 1) % PARTIES) as u8),
                Endpoint::Node(i as u8),
                Opcode::Mul,
                m,
            )?;
        }
        Ok((0..m)
            .map(|j| Shared {
                pairs: std::array::from_fn(|i| (z[i][j], incoming[i][j])),
            })
            .collect())
    }

    /// Ring product `x·y mod 2^k` (`3k` bits). For fixed-point operands the
    /// result is at scale `2^(2F)`.
    pub fn mul(&mut self, x: &Shared, y: &Shared) -> Result<Shared, MpcError> {
        Ok(self.mul_many(std::slice::from_ref(x), std::slice::from_ref(y))?.remove(0))
    }

    pub fn mul_many(&mut self, xs: &[Shared], ys: &[Shared]) -> Result<Vec<Shared>, MpcError> {
        check_lengths(xs, ys)?;
        let out = self.mul_round(xs, ys)?;
        self.charge(Link::NodeToNode, 3 * self.k() * xs.len() as u64);
        Ok(out)
    }

    // ---- truncation ----------------------------------------------------

    /// Opens values to all nodes: node `p` sends its second component to
    /// node `p - 1`, which completes its view.
    fn open_round(&mut self, xs: &[Shared], opcode: Opcode) -> Result<Vec<u64>, MpcError> {
        let ring = self.ring();
        let m = xs.len();
        for i in 0..PARTIES {
            self.transport.send(Frame {
                opcode,
                from: Endpoint::Node(i as u8),
                to: Endpoint::Node(((i + PARTIES - 1) % PARTIES) as u8),
                elements: xs.iter().map(|x| x.pairs[i].1).collect(),
            })?;
        }
        let mut views = [(); PARTIES].map(|_| Vec::with_capacity(m));
        for (i, view) in views.iter_mut().enumerate() {
            let missing = self.recv_checked(
                Endpoint::Node(((i + 1) % PARTIES) as u8),
                Endpoint::Node(i as u8),
                opcode,
                m,
            )?;
            for (x, c) in xs.iter().zip(missing) {
                let (a, b) = x.pairs[i];
                view.push(ring.add(ring.add(a, b), c));
            }
        }
        if views[0] != views[1] || views[1] != views[2] {
            return Err(MpcError::Integrity("nodes opened different values".into()));
        }
        Ok(views[0].clone())
    }

    /// Divides by `2^shift` using a locally generated mask pair.
    ///
    /// Each component `r_j` of the mask is drawn from `[0, 2^(k-4))` by the
    /// two nodes holding it, so `r >> shift` is shared for free as
    /// `Σ (r_j >> shift)`. The nodes open `c = x + 2^(k-3) + r`, which
    /// cannot wrap while `|x| < 2^(k-3)`, and set
    /// `x' = (c >> shift) - 2^(k-3-shift) - 1 - Σ (r_j >> shift)`.
    /// The result differs from `x / 2^shift` by at most 2 units.
    fn trunc_round(&mut self, xs: &[Shared], shift: u32) -> Result<Vec<Shared>, MpcError> {
        let ring = self.ring();
        let k = ring.bits();
        let offset_bits = k - 3;
        if shift == 0 || shift >= offset_bits {
            return Err(MpcError::InvalidArgument(format!(
                "truncation by {shift} bits in a {k}-bit ring"
            )));
        }
        let offset = 1u64 << offset_bits;
        let mut masks = Vec::with_capacity(xs.len());
        let mut masked = Vec::with_capacity(xs.len());
        for x in xs {
            let r: [(u64, u64); PARTIES] =
                std::array::from_fn(|i| self.nodes[i].draw(ring, k - 4));
            let shifted = Shared {
                pairs: std::array::from_fn(|i| {
                    (ring.add(x.pairs[i].0, r[i].0), ring.add(x.pairs[i].1, r[i].1))
                }),
            };
            masked.push(self.add_public_raw(&shifted, offset));
            masks.push(r);
        }
        let opened = self.open_round(&masked, Opcode::Trunc)?;
        let mut out = Vec::with_capacity(xs.len());
        for (c, r) in opened.into_iter().zip(masks) {
            if c >> (k - 1) != 0 {
                return Err(MpcError::Overflow(format!(
                    "truncation input exceeds 2^{offset_bits} in magnitude"
                )));
            }
            let public = (c >> shift)
                .wrapping_sub(1u64 << (offset_bits - shift))
                .wrapping_sub(1);
            let hi = Shared {
                pairs: std::array::from_fn(|i| (ring.neg(r[i].0 >> shift), ring.neg(r[i].1 >> shift))),
            };
            out.push(self.add_public_raw(&hi, ring.reduce(public)));
        }
        Ok(out)
    }

    /// Rescales a product from `2^(2F)` to `2^F` (`6k` bits modeled).
    pub fn truncate(&mut self, x: &Shared) -> Result<Shared, MpcError> {
        Ok(self.truncate_many(std::slice::from_ref(x))?.remove(0))
    }

    pub fn truncate_many(&mut self, xs: &[Shared]) -> Result<Vec<Shared>, MpcError> {
        let out = self.trunc_round(xs, self.codec.frac_bits())?;
        self.charge(Link::NodeToNode, 6 * self.k() * xs.len() as u64);
        Ok(out)
    }

    fn fixed_mul_round(&mut self, xs: &[Shared], ys: &[Shared]) -> Result<Vec<Shared>, MpcError> {
        let prod = self.mul_round(xs, ys)?;
        self.trunc_round(&prod, self.codec.frac_bits())
    }

    /// Fixed-point product: multiplication then truncation (`9k` bits).
    pub fn fixed_mul(&mut self, x: &Shared, y: &Shared) -> Result<Shared, MpcError> {
        Ok(self.fixed_mul_many(std::slice::from_ref(x), std::slice::from_ref(y))?.remove(0))
    }

    pub fn fixed_mul_many(&mut self, xs: &[Shared], ys: &[Shared]) -> Result<Vec<Shared>, MpcError> {
        check_lengths(xs, ys)?;
        let out = self.fixed_mul_round(xs, ys)?;
        self.charge(Link::NodeToNode, 9 * self.k() * xs.len() as u64);
        Ok(out)
    }

    /// Multiplies by a public real: local scaling then truncation (`6k` bits).
    pub fn mul_const(&mut self, x: &Shared, c: f64) -> Result<Shared, MpcError> {
        let c_raw = self.codec.encode_raw(c)?;
        let ring = self.ring();
        let scaled = x.map_local(|_, (a, b)| (ring.mul(a, c_raw), ring.mul(b, c_raw)));
        self.truncate(&scaled)
    }

    // ---- division ------------------------------------------------------

    /// Closed-form division cost `3k(k + 4θ + 2)`.
    pub fn div_cost_bits(k: u64, iterations: u32) -> u64 {
        3 * k * (k + 4 * iterations as u64 + 2)
    }

    /// Bit-width discovery of a positive shared value, as an ideal
    /// functionality: returns `e` with `den · 2^-e ∈ [0.5, 1)`.
    ///
    /// Its communication (about `k` multiplications) is part of the
    /// division's closed-form charge.
    fn effective_width(&self, den: &Shared) -> Result<i32, MpcError> {
        let ring = self.ring();
        let raw = share::reconstruct(&den.shares(), ring)?;
        let signed = ring.to_signed(raw.raw());
        if signed <= 0 {
            return Err(MpcError::Domain(format!(
                "division by non-positive value {}",
                self.codec.decode(raw)
            )));
        }
        let width = 64 - (signed as u64).leading_zeros() as i32;
        let f = self.codec.frac_bits() as i32;
        let k = ring.bits() as i32;
        // representable reciprocal range
        if width - f > k - 1 - f || width - f <= -(k - 2 - f) {
            return Err(MpcError::Domain(format!(
                "denominator {} outside the divisible range",
                self.codec.decode(raw)
            )));
        }
        Ok(width - f)
    }

    fn scale_pow2(&mut self, x: &Shared, exponent: i32) -> Result<Shared, MpcError> {
        match exponent {
            0 => Ok(x.clone()),
            e if e > 0 => Ok(self.trunc_round(std::slice::from_ref(x), e as u32)?.remove(0)),
            e => Ok(self.scale_int(x, 1i64 << (-e))),
        }
    }

    /// Goldschmidt division `num / den` with `iterations` refinement steps.
    ///
    /// The denominator is normalized by its public effective bit width into
    /// `[0.5, 1)`, seeded with `1/d ≈ 2.9142 - 2d`, and refined by
    /// `f = 2 - d; n ← n·f; d ← d·f`.
    pub fn div(&mut self, num: &Shared, den: &Shared, iterations: u32) -> Result<Shared, MpcError> {
        Ok(self
            .div_many(std::slice::from_ref(num), den, iterations)?
            .remove(0))
    }

    /// Divides several numerators by one denominator, charging one full
    /// division per numerator.
    pub fn div_many(&mut self, nums: &[Shared], den: &Shared, iterations: u32) -> Result<Vec<Shared>, MpcError> {
        if iterations == 0 {
            return Err(MpcError::InvalidArgument("division needs at least one iteration".into()));
        }
        let e = self.effective_width(den)?;
        let d_norm = self.scale_pow2(den, e)?;
        let two_d = self.scale_int(&d_norm, 2);
        let seed_c = self.constant(RECIPROCAL_SEED)?;
        let w = self.sub(&seed_c, &two_d);

        let mut ns = Vec::with_capacity(nums.len());
        for num in nums {
            ns.push(self.scale_pow2(num, e)?);
        }
        let mut lhs = ns.clone();
        lhs.push(d_norm);
        let ws = vec![w; lhs.len()];
        let mut cur = self.fixed_mul_round(&lhs, &ws)?;
        for step in 0..iterations {
            let d = cur.last().unwrap().clone();
            let two = self.constant(2.0)?;
            let f = self.sub(&two, &d);
            // the last update of d is never used
            if step + 1 == iterations {
                cur.pop();
            }
            let fs = vec![f; cur.len()];
            cur = self.fixed_mul_round(&cur, &fs)?;
        }
        cur.truncate(nums.len());
        let per = Self::div_cost_bits(self.k(), iterations);
        self.charge(Link::NodeToNode, per * nums.len() as u64);
        Ok(cur)
    }

    pub fn reciprocal(&mut self, den: &Shared, iterations: u32) -> Result<Shared, MpcError> {
        let one = self.constant(1.0)?;
        self.div(&one, den, iterations)
    }

    // ---- output --------------------------------------------------------

    /// Opens to all nodes (`3k` bits on the reconstruction counter).
    pub fn open_raw(&mut self, x: &Shared) -> Result<RingValue, MpcError> {
        let v = self.open_raw_many(std::slice::from_ref(x))?;
        Ok(self.ring().value(v[0]))
    }

    pub fn open_raw_many(&mut self, xs: &[Shared]) -> Result<Vec<u64>, MpcError> {
        let out = self.open_round(xs, Opcode::Open)?;
        self.charge(Link::Reconstruction, 3 * self.k() * xs.len() as u64);
        Ok(out)
    }

    pub fn open(&mut self, x: &Shared) -> Result<f64, MpcError> {
        let raw = self.open_raw(x)?;
        Ok(self.codec.decode(raw))
    }

    pub fn open_many(&mut self, xs: &[Shared]) -> Result<Vec<f64>, MpcError> {
        Ok(self
            .open_raw_many(xs)?
            .into_iter()
            .map(|v| self.codec.decode_raw(v))
            .collect())
    }

    /// Uniform ring element from the client generator; test helper for
    /// building sharings with known randomness.
    pub fn client_random(&mut self) -> u64 {
        self.ring().reduce(self.client.random())
    }
}

fn check_lengths(xs: &[Shared], ys: &[Shared]) -> Result<(), MpcError> {
    if xs.len() != ys.len() {
        return Err(MpcError::InvalidArgument(format!(
            "operand batches differ in length: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    Ok(())
}
