use serde::{Deserialize, Serialize};

/// Where metered traffic flows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    ClientToNode,
    NodeToNode,
    Reconstruction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SecurityMode {
    #[default]
    Passive,
    /// Cost model only: every metered bit is counted twice.
    Active,
}

impl SecurityMode {
    pub fn factor(self) -> u64 {
        match self {
            SecurityMode::Passive => 1,
            SecurityMode::Active => 2,
        }
    }
}

/// Modeled communication, in bits, per link class.
///
/// Counters only grow within a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CostMeter {
    client_to_node_bits: u64,
    node_to_node_bits: u64,
    reconstruction_bits: u64,
}

impl CostMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, link: Link, bits: u64) {
        let counter = match link {
            Link::ClientToNode => &mut self.client_to_node_bits,
            Link::NodeToNode => &mut self.node_to_node_bits,
            Link::Reconstruction => &mut self.reconstruction_bits,
        };
        *counter = counter
            .checked_add(bits)
            .expect("communication meter overflowed u64");
    }

    pub fn client_to_node_bits(&self) -> u64 {
        self.client_to_node_bits
    }

    pub fn node_to_node_bits(&self) -> u64 {
        self.node_to_node_bits
    }

    pub fn reconstruction_bits(&self) -> u64 {
        self.reconstruction_bits
    }

    pub fn total_bits(&self) -> u64 {
        self.client_to_node_bits + self.node_to_node_bits + self.reconstruction_bits
    }

    pub fn report(&self, bits: u32, mode: SecurityMode) -> CostReport {
        CostReport::new(
            bits,
            mode,
            self.client_to_node_bits,
            self.node_to_node_bits,
            self.reconstruction_bits,
        )
    }
}

pub const ACTIVE_MODE_NOTE: &str =
    "active security modeled as 2x every counter, including client-to-node sharing";

/// Snapshot of a meter, as emitted by benchmarks and the protocol runner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub k: u32,
    pub mode: SecurityMode,
    pub client_to_node_bits: u64,
    pub node_to_node_bits: u64,
    pub reconstruction_bits: u64,
    pub total_bits: u64,
    pub note: String,
}

impl CostReport {
    pub fn new(
        k: u32,
        mode: SecurityMode,
        client_to_node_bits: u64,
        node_to_node_bits: u64,
        reconstruction_bits: u64,
    ) -> Self {
        let note = match mode {
            SecurityMode::Passive => String::new(),
            SecurityMode::Active => ACTIVE_MODE_NOTE.to_string(),
        };
        Self {
            k,
            mode,
            client_to_node_bits,
            node_to_node_bits,
            reconstruction_bits,
            total_bits: client_to_node_bits + node_to_node_bits + reconstruction_bits,
            note,
        }
    }

    pub fn zero(k: u32, mode: SecurityMode) -> Self {
        Self::new(k, mode, 0, 0, 0)
    }

    /// Same traffic under a different security mode.
    pub fn scaled(&self, factor: u64) -> (u64, u64, u64) {
        (
            self.client_to_node_bits * factor,
            self.node_to_node_bits * factor,
            self.reconstruction_bits * factor,
        )
    }

    /// Adds another run's counters to this one.
    pub fn accumulate(&mut self, other: &CostReport) {
        self.client_to_node_bits += other.client_to_node_bits;
        self.node_to_node_bits += other.node_to_node_bits;
        self.reconstruction_bits += other.reconstruction_bits;
        self.total_bits += other.total_bits;
    }

    pub fn same_counters(&self, other: &CostReport) -> bool {
        self.client_to_node_bits == other.client_to_node_bits
            && self.node_to_node_bits == other.node_to_node_bits
            && self.reconstruction_bits == other.reconstruction_bits
    }
}
