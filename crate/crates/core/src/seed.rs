//! Deterministic seed derivation.
//!
//! Every stochastic component takes an explicit `u64` seed. Sub-components
//! and sweep grid points derive their seeds from a master seed by index so
//! that results are independent of evaluation order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

/// Seeds a ChaCha20 generator.
pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Derives the `index`-th child seed of `master`.
pub fn derive(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(index.wrapping_add(1));
    rng.next_u64()
}

/// Derives a child seed from a label, for named sub-components.
pub fn derive_named(master: u64, label: &str) -> u64 {
    // FNV-1a over the label keeps this independent of std's hasher.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    derive(master, h)
}
