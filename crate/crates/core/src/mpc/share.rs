use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MpcError, PARTIES};
use crate::ring::{Ring, RingValue};

/// Party `i`'s view of a replicated sharing: components `(v_i, v_{i+1 mod 3})`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicatedShare {
    pub party: usize,
    pub pair: (u64, u64),
}

/// Builds the three views from additive components `v_0 + v_1 + v_2`.
pub fn from_components(components: [u64; PARTIES]) -> [ReplicatedShare; PARTIES] {
    std::array::from_fn(|i| ReplicatedShare {
        party: i,
        pair: (components[i], components[(i + 1) % PARTIES]),
    })
}

/// Shares `v` with caller-chosen `v_0, v_1`; `v_2 = v - v_0 - v_1`.
pub fn share_with(v: RingValue, v0: u64, v1: u64) -> [ReplicatedShare; PARTIES] {
    let ring = v.ring();
    let v0 = ring.reduce(v0);
    let v1 = ring.reduce(v1);
    let v2 = ring.sub(ring.sub(v.raw(), v0), v1);
    from_components([v0, v1, v2])
}

/// Shares `v` with `v_0, v_1` drawn uniformly from `Z_{2^k}`.
pub fn share<R: Rng + ?Sized>(v: RingValue, rng: &mut R) -> [ReplicatedShare; PARTIES] {
    let ring = v.ring();
    let v0 = ring.reduce(rng.random());
    let v1 = ring.reduce(rng.random());
    share_with(v, v0, v1)
}

/// Recovers the additive components, checking that every overlapping
/// component agrees between the two parties holding it.
pub fn components(shares: &[ReplicatedShare; PARTIES]) -> Result<[u64; PARTIES], MpcError> {
    for (i, s) in shares.iter().enumerate() {
        if s.party != i {
            return Err(MpcError::Integrity(format!(
                "share at position {i} claims party {}",
                s.party
            )));
        }
    }
    for i in 0..PARTIES {
        let next = (i + 1) % PARTIES;
        if shares[i].pair.1 != shares[next].pair.0 {
            return Err(MpcError::Integrity(format!(
                "component v_{next} differs between party {i} and party {next}"
            )));
        }
    }
    Ok(std::array::from_fn(|i| shares[i].pair.0))
}

/// `v = v_0 + v_1 + v_2 mod 2^k`, after the overlap check.
pub fn reconstruct(shares: &[ReplicatedShare; PARTIES], ring: Ring) -> Result<RingValue, MpcError> {
    let c = components(shares)?;
    Ok(ring.value(c.iter().fold(0u64, |acc, &x| ring.add(acc, x))))
}
