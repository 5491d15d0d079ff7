//! Threshold share coding.
//!
//! A message is split into `n` shares of which any `k` suffice to
//! reconstruct; the adversary likewise decodes a message iff it holds at
//! least `k` distinct share indices. Shares carry no payload here — the
//! simulated metrics depend only on which indices reach whom, so the
//! coding layer is pure threshold bookkeeping over opaque fragments.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::topology::NodeId;

/// Message identifier, unique within one simulation run.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct MessageId(pub u64);

impl fmt::Display for MessageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DropReason {
    /// Non-repetitive policy ran out of untraversed neighbors.
    DeadEnd,
    /// Current node has no neighbors at all.
    Isolated,
    /// No min-hop route to the destination exists.
    Disconnected,
    /// Still in flight when the simulation ended.
    Timeout,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DropReason::DeadEnd => "dead-end",
            DropReason::Isolated => "isolated",
            DropReason::Disconnected => "disconnected",
            DropReason::Timeout => "timeout",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ShareStatus {
    InFlight,
    Delivered,
    Dropped(DropReason),
    Intercepted,
}

/// One coded fragment of a message in transit.
#[derive(Clone, Debug)]
pub struct Share {
    pub message: MessageId,
    /// Share index in `[0, n)`, distinct within a message.
    pub index: usize,
    pub source: NodeId,
    pub destination: NodeId,
    /// Remaining random-propagation hops; never increases.
    pub counter: u32,
    /// Nodes visited in order, starting with the source.
    pub trace: Vec<NodeId>,
    pub status: ShareStatus,
}

impl Share {
    /// Node currently holding the share.
    pub fn current(&self) -> NodeId {
        *self.trace.last().expect("trace starts with the source")
    }

    pub fn in_flight(&self) -> bool {
        self.status == ShareStatus::InFlight
    }
}

/// Share coding parameters: `n` shares per message, threshold `k`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct CodingParams {
    pub n: usize,
    pub k: usize,
}

impl CodingParams {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        let params = CodingParams { n, k };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 || self.k < 1 || self.k > self.n {
            return Err(Error::config(format!(
                "share coding requires 1 <= k <= n, got n={} k={}",
                self.n, self.k
            )));
        }
        Ok(())
    }
}

impl fmt::Display for CodingParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.n, self.k)
    }
}

impl FromStr for CodingParams {
    type Err = Error;

    /// Parses `n:k`, e.g. `4:3`.
    fn from_str(s: &str) -> Result<Self> {
        let err = || Error::config(format!("invalid share coding {s:?}, expected n:k"));
        let (n, k) = s.split_once(':').ok_or_else(err)?;
        let n = n.trim().parse().map_err(|_| err())?;
        let k = k.trim().parse().map_err(|_| err())?;
        CodingParams::new(n, k)
    }
}

/// Splits a message into `n` in-flight shares with distinct indices, all
/// starting at the source with a full hop counter.
pub fn lbc_split(
    message: MessageId,
    source: NodeId,
    destination: NodeId,
    params: CodingParams,
    counter: u32,
) -> Result<Vec<Share>> {
    params.validate()?;
    Ok((0..params.n)
        .map(|index| Share {
            message,
            index,
            source,
            destination,
            counter,
            trace: vec![source],
            status: ShareStatus::InFlight,
        })
        .collect())
}

/// True iff the delivered index set reaches the reconstruction threshold.
pub fn reconstructable(delivered_indices: &HashSet<usize>, params: CodingParams) -> bool {
    debug_assert!(delivered_indices.iter().all(|&i| i < params.n));
    delivered_indices.len() >= params.k
}

/// True iff the adversary's index set reaches the decoding threshold.
pub fn compromised(intercepted_indices: &HashSet<usize>, params: CodingParams) -> bool {
    debug_assert!(intercepted_indices.iter().all(|&i| i < params.n));
    intercepted_indices.len() >= params.k
}
