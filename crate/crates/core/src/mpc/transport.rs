//! Channels between clients and the three computation nodes.
//!
//! Frames between a fixed ordered pair of endpoints are delivered in send
//! order. Transports keep their own wire statistics; the session's
//! [`CostMeter`](super::CostMeter) holds the modeled costs.
//!
//! Wire format of one frame:
//!
//! ```text
//! [u32 BE payload length][u8 opcode][u8 from][u8 to][payload]
//! ```
//!
//! The payload is the concatenation of ring elements, each written
//! little-endian in `ceil(k/8)` bytes. Clients use endpoint id `0xFF`.

use std::collections::{HashMap, VecDeque};
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};

use thiserror::Error;

use super::meter::Link;
use crate::ring::Ring;

pub const HEADER_LEN: usize = 7;
const CLIENT_ID: u8 = 0xFF;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("no frame queued from {from:?} to {to:?}")]
    Empty { from: Endpoint, to: Endpoint },
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("transport i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Endpoint {
    Client,
    Node(u8),
}

impl Endpoint {
    pub fn wire_id(self) -> u8 {
        match self {
            Endpoint::Client => CLIENT_ID,
            Endpoint::Node(i) => i,
        }
    }

    pub fn from_wire(id: u8) -> Result<Self, TransportError> {
        match id {
            CLIENT_ID => Ok(Endpoint::Client),
            0..=2 => Ok(Endpoint::Node(id)),
            other => Err(TransportError::Malformed(format!("unknown endpoint id {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Opcode {
    /// Client distributing input components.
    Share = 1,
    /// Resharing of a multiplication result.
    Mul = 2,
    /// Opening of a masked value inside truncation.
    Trunc = 3,
    /// Traffic of the division subprotocol.
    Div = 4,
    /// Opening of an output.
    Open = 5,
}

impl Opcode {
    pub fn from_u8(b: u8) -> Result<Self, TransportError> {
        Ok(match b {
            1 => Opcode::Share,
            2 => Opcode::Mul,
            3 => Opcode::Trunc,
            4 => Opcode::Div,
            5 => Opcode::Open,
            other => return Err(TransportError::Malformed(format!("unknown opcode {other}"))),
        })
    }

    pub fn link(self) -> Link {
        match self {
            Opcode::Share => Link::ClientToNode,
            Opcode::Open => Link::Reconstruction,
            Opcode::Mul | Opcode::Trunc | Opcode::Div => Link::NodeToNode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub opcode: Opcode,
    pub from: Endpoint,
    pub to: Endpoint,
    pub elements: Vec<u64>,
}

impl Frame {
    pub fn payload_bits(&self, ring: Ring) -> u64 {
        self.elements.len() as u64 * ring.bits() as u64
    }

    pub fn encode(&self, ring: Ring) -> Vec<u8> {
        let width = ring.byte_width();
        let payload_len = self.elements.len() * width;
        let mut out = Vec::with_capacity(HEADER_LEN + payload_len);
        out.extend_from_slice(&(payload_len as u32).to_be_bytes());
        out.push(self.opcode as u8);
        out.push(self.from.wire_id());
        out.push(self.to.wire_id());
        for &e in &self.elements {
            out.extend_from_slice(&ring.reduce(e).to_le_bytes()[..width]);
        }
        out
    }

    /// Parses exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8], ring: Ring) -> Result<Self, TransportError> {
        if bytes.len() < HEADER_LEN {
            return Err(TransportError::Malformed(format!(
                "{} bytes is shorter than the {HEADER_LEN}-byte header",
                bytes.len()
            )));
        }
        let len = u32::from_be_bytes(bytes[..4].try_into().unwrap()) as usize;
        if bytes.len() != HEADER_LEN + len {
            return Err(TransportError::Malformed(format!(
                "header announces {len} payload bytes, found {}",
                bytes.len() - HEADER_LEN
            )));
        }
        let mut header = [0u8; HEADER_LEN - 4];
        header.copy_from_slice(&bytes[4..HEADER_LEN]);
        Self::from_parts(header, &bytes[HEADER_LEN..], ring)
    }

    fn from_parts(header: [u8; 3], payload: &[u8], ring: Ring) -> Result<Self, TransportError> {
        let width = ring.byte_width();
        if payload.len() % width != 0 {
            return Err(TransportError::Malformed(format!(
                "payload of {} bytes is not a multiple of the {width}-byte element width",
                payload.len()
            )));
        }
        let elements = payload
            .chunks_exact(width)
            .map(|c| {
                let mut buf = [0u8; 8];
                buf[..width].copy_from_slice(c);
                ring.reduce(u64::from_le_bytes(buf))
            })
            .collect();
        Ok(Frame {
            opcode: Opcode::from_u8(header[0])?,
            from: Endpoint::from_wire(header[1])?,
            to: Endpoint::from_wire(header[2])?,
            elements,
        })
    }
}

/// Payload traffic actually carried, per link class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WireStats {
    pub frames: u64,
    pub client_to_node_bits: u64,
    pub node_to_node_bits: u64,
    pub reconstruction_bits: u64,
}

impl WireStats {
    fn record(&mut self, frame: &Frame, ring: Ring) {
        self.frames += 1;
        let bits = frame.payload_bits(ring);
        match frame.opcode.link() {
            Link::ClientToNode => self.client_to_node_bits += bits,
            Link::NodeToNode => self.node_to_node_bits += bits,
            Link::Reconstruction => self.reconstruction_bits += bits,
        }
    }

    pub fn total_bits(&self) -> u64 {
        self.client_to_node_bits + self.node_to_node_bits + self.reconstruction_bits
    }
}

pub trait Transport {
    fn send(&mut self, frame: Frame) -> Result<(), TransportError>;
    fn recv(&mut self, from: Endpoint, to: Endpoint) -> Result<Frame, TransportError>;
    fn stats(&self) -> WireStats;
}

/// In-process FIFO queues, one per ordered endpoint pair.
#[derive(Debug)]
pub struct LocalTransport {
    ring: Ring,
    queues: HashMap<(Endpoint, Endpoint), VecDeque<Frame>>,
    stats: WireStats,
}

impl LocalTransport {
    pub fn new(ring: Ring) -> Self {
        Self {
            ring,
            queues: HashMap::new(),
            stats: WireStats::default(),
        }
    }

    pub fn pending(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }
}

impl Transport for LocalTransport {
    fn send(&mut self, frame: Frame) -> Result<(), TransportError> {
        self.stats.record(&frame, self.ring);
        self.queues
            .entry((frame.from, frame.to))
            .or_default()
            .push_back(frame);
        Ok(())
    }

    fn recv(&mut self, from: Endpoint, to: Endpoint) -> Result<Frame, TransportError> {
        self.queues
            .get_mut(&(from, to))
            .and_then(VecDeque::pop_front)
            .ok_or(TransportError::Empty { from, to })
    }

    fn stats(&self) -> WireStats {
        self.stats
    }
}

/// Loopback TCP, one connection per ordered endpoint pair, opened lazily.
///
/// The scheduler always sends before it receives, so the kernel socket
/// buffers hold every in-flight frame.
#[derive(Debug)]
pub struct TcpTransport {
    ring: Ring,
    links: HashMap<(Endpoint, Endpoint), (TcpStream, TcpStream)>,
    stats: WireStats,
}

impl TcpTransport {
    pub fn new(ring: Ring) -> Self {
        Self {
            ring,
            links: HashMap::new(),
            stats: WireStats::default(),
        }
    }

    fn link(&mut self, from: Endpoint, to: Endpoint) -> Result<&mut (TcpStream, TcpStream), TransportError> {
        if !self.links.contains_key(&(from, to)) {
            let listener = TcpListener::bind("127.0.0.1:0")?;
            let writer = TcpStream::connect(listener.local_addr()?)?;
            let (reader, _) = listener.accept()?;
            writer.set_nodelay(true)?;
            self.links.insert((from, to), (writer, reader));
        }
        Ok(self.links.get_mut(&(from, to)).unwrap())
    }
}

impl Transport for TcpTransport {
    fn send(&mut self, frame: Frame) -> Result<(), TransportError> {
        let bytes = frame.encode(self.ring);
        let (writer, _) = self.link(frame.from, frame.to)?;
        writer.write_all(&bytes)?;
        self.stats.record(&frame, self.ring);
        Ok(())
    }

    fn recv(&mut self, from: Endpoint, to: Endpoint) -> Result<Frame, TransportError> {
        let ring = self.ring;
        let (_, reader) = self.link(from, to)?;
        let mut head = [0u8; HEADER_LEN];
        reader.read_exact(&mut head)?;
        let len = u32::from_be_bytes(head[..4].try_into().unwrap()) as usize;
        let mut payload = vec![0u8; len];
        reader.read_exact(&mut payload)?;
        let frame = Frame::from_parts([head[4], head[5], head[6]], &payload, ring)?;
        if frame.from != from || frame.to != to {
            return Err(TransportError::Malformed(format!(
                "frame addressed {:?}->{:?} arrived on the {from:?}->{to:?} channel",
                frame.from, frame.to
            )));
        }
        Ok(frame)
    }

    fn stats(&self) -> WireStats {
        self.stats
    }
}
