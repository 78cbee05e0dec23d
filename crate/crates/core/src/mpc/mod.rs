//! Three-party replicated secret sharing over `Z_{2^k}` with a byte-exact
//! communication meter.
//!
//! A secret `v` is split into `v_0 + v_1 + v_2`; node `i` holds
//! `(v_i, v_{i+1 mod 3})`. Additions and public scalings are local;
//! multiplication, truncation, division and opening go through a
//! [`Transport`] in lockstep rounds scheduled by [`Session`].
//!
//! The implementation follows a communication model rather than
//! production-grade security: the extra correction terms needed against
//! malicious nodes are omitted, and active security is a cost model that
//! doubles every counter.

mod meter;
mod program;
mod session;
mod share;
mod transport;

use thiserror::Error;

pub use meter::{CostMeter, CostReport, Link, SecurityMode, ACTIVE_MODE_NOTE};
pub use program::{run_protocol, Instr, Program, ProgramBuilder, ProtocolConfig, ProtocolOutput, Reg};
pub use session::{Session, Shared};
pub use share::{components, from_components, reconstruct, share, share_with, ReplicatedShare};
pub use transport::{
    Endpoint, Frame, LocalTransport, Opcode, TcpTransport, Transport, TransportError, WireStats,
    HEADER_LEN,
};

use crate::ring::RingError;

pub const PARTIES: usize = 3;

#[derive(Debug, Error)]
pub enum MpcError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("protocol aborted: {0}")]
    Transport(#[from] TransportError),
    #[error("integrity check failed: {0}")]
    Integrity(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("fixed-point overflow: {0}")]
    Overflow(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid program: {0}")]
    InvalidProgram(String),
}
