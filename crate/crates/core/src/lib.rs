//! Desk-scale laboratory for a privacy-aware hybrid federated pipeline.
//!
//! Clients compress 28×28 images into 64-dimensional latents with a
//! tensor-network frontend ([`tn`]). The latents are aggregated by three
//! non-colluding computation nodes running replicated secret sharing over
//! `Z_{2^k}` ([`mpc`]), whose traffic is metered bit-exactly and summarized
//! per scenario by [`bench`]. The aggregate is refined by a small-register
//! quantum feature map evaluated by exact simulation ([`qsim`], [`qep`]) and
//! classified by a trained readout ([`pipeline`]).

pub mod bench;
pub mod mpc;
pub mod nn;
pub mod params;
pub mod pipeline;
pub mod qep;
pub mod qsim;
pub mod ring;
pub mod seed;
pub mod tn;

mod error;

pub use error::{Error, Result};
