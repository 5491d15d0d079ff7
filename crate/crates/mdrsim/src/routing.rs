//! Per-share forwarding policies and the min-hop fallback.
//!
//! All four policies share the same branch order: a share is delivered
//! the moment its destination is adjacent, the multi-domain policies then
//! try the special-node relay, and only then does the random (or
//! non-repetitive) pick happen. The step functions are pure given the
//! topology, the election table and the share's own rng stream, so shares
//! advance independently and in any order.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::coding::{DropReason, Share};
use crate::election::SpecialNodeTable;
use crate::error::Error;
use crate::rng::SimRng;
use crate::topology::{DomainId, NodeId, Topology};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum RoutingPolicy {
    /// Purely random propagation: uniform one-hop neighbor.
    Prp,
    /// Non-repetitive random propagation: uniform over untraversed neighbors.
    Nrrp,
    /// Multi-domain routing with overlap of nodes (revisits permitted).
    Mdron,
    /// Multi-domain routing without overlap of nodes (revisits forbidden).
    Mdrwon,
}

impl RoutingPolicy {
    pub const ALL: [RoutingPolicy; 4] = [
        RoutingPolicy::Prp,
        RoutingPolicy::Nrrp,
        RoutingPolicy::Mdron,
        RoutingPolicy::Mdrwon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RoutingPolicy::Prp => "PRP",
            RoutingPolicy::Nrrp => "NRRP",
            RoutingPolicy::Mdron => "MDRON",
            RoutingPolicy::Mdrwon => "MDRWON",
        }
    }

    /// Stable id used for seed derivation.
    pub fn id(self) -> u64 {
        match self {
            RoutingPolicy::Prp => 0,
            RoutingPolicy::Nrrp => 1,
            RoutingPolicy::Mdron => 2,
            RoutingPolicy::Mdrwon => 3,
        }
    }

    /// Whether the policy forbids revisiting traced nodes.
    pub fn non_repetitive(self) -> bool {
        matches!(self, RoutingPolicy::Nrrp | RoutingPolicy::Mdrwon)
    }

    /// Whether the policy relays between domains via special nodes.
    pub fn uses_special_nodes(self) -> bool {
        matches!(self, RoutingPolicy::Mdron | RoutingPolicy::Mdrwon)
    }
}

impl fmt::Display for RoutingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RoutingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_uppercase().as_str() {
            "PRP" => Ok(RoutingPolicy::Prp),
            "NRRP" => Ok(RoutingPolicy::Nrrp),
            "MDRON" => Ok(RoutingPolicy::Mdron),
            "MDRWON" => Ok(RoutingPolicy::Mdrwon),
            other => Err(Error::Config(format!(
                "unknown policy {other:?} (expected PRP, NRRP, MDRON or MDRWON)"
            ))),
        }
    }
}

/// Outcome of one policy step.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum StepDecision {
    /// Destination is adjacent: hand the share over.
    Deliver,
    /// Forward one hop. The target is a neighbor of the current node or,
    /// for a share sitting on a special node, the special node of the
    /// next domain toward the destination.
    Forward(NodeId),
    Drop(DropReason),
}

/// One step of purely random propagation.
pub fn prp_step(
    share: &Share,
    current: NodeId,
    topology: &Topology,
    rng: &mut SimRng,
) -> StepDecision {
    let neighbors = topology.neighbors(current);
    if neighbors.is_empty() {
        return StepDecision::Drop(DropReason::Isolated);
    }
    if topology.are_neighbors(current, share.destination) {
        return StepDecision::Deliver;
    }
    StepDecision::Forward(neighbors[rng.random_range(0..neighbors.len())])
}

/// One step of non-repetitive random propagation: like PRP but the pick
/// excludes every node already in the trace; an empty candidate set is a
/// dead end.
pub fn nrrp_step(
    share: &Share,
    current: NodeId,
    topology: &Topology,
    rng: &mut SimRng,
) -> StepDecision {
    let neighbors = topology.neighbors(current);
    if neighbors.is_empty() {
        return StepDecision::Drop(DropReason::Isolated);
    }
    if topology.are_neighbors(current, share.destination) {
        return StepDecision::Deliver;
    }
    let candidates: Vec<NodeId> = neighbors
        .iter()
        .copied()
        .filter(|v| !share.trace.contains(v))
        .collect();
    if candidates.is_empty() {
        return StepDecision::Drop(DropReason::DeadEnd);
    }
    StepDecision::Forward(candidates[rng.random_range(0..candidates.len())])
}

/// One MDRON step. Branch order: deliver if the destination is adjacent;
/// otherwise, while the share is outside the destination's domain, relay
/// via special nodes (cross-domain handoff when sitting on one, hop onto
/// an adjacent one otherwise); otherwise pick a uniformly random neighbor
/// — revisits permitted.
pub fn mdron_step(
    share: &Share,
    current: NodeId,
    topology: &Topology,
    specials: &SpecialNodeTable,
    strict_links: bool,
    rng: &mut SimRng,
) -> StepDecision {
    let neighbors = topology.neighbors(current);
    if neighbors.is_empty() {
        return StepDecision::Drop(DropReason::Isolated);
    }
    if topology.are_neighbors(current, share.destination) {
        return StepDecision::Deliver;
    }
    let dst_domain = topology.domain_of(share.destination);
    if topology.domain_of(current) != dst_domain {
        if specials.is_current_special(current) {
            if let Some(next) = cross_domain_target(current, dst_domain, topology, specials, strict_links)
            {
                return StepDecision::Forward(next);
            }
        } else if let Some(sp) = special_neighbor(neighbors, dst_domain, topology, specials, None) {
            return StepDecision::Forward(sp);
        }
    }
    StepDecision::Forward(neighbors[rng.random_range(0..neighbors.len())])
}

/// One MDRWON step. Same branch order as MDRON, but every hop must land
/// on an untraversed node, and when no special node is adjacent the pick
/// is the untraversed neighbor nearest (Euclidean) to the current
/// domain's special node, ties by lowest id. No untraversed candidate is
/// a dead end.
pub fn mdrwon_step(
    share: &Share,
    current: NodeId,
    topology: &Topology,
    specials: &SpecialNodeTable,
    strict_links: bool,
    rng: &mut SimRng,
) -> StepDecision {
    let neighbors = topology.neighbors(current);
    if neighbors.is_empty() {
        return StepDecision::Drop(DropReason::Isolated);
    }
    if topology.are_neighbors(current, share.destination) {
        return StepDecision::Deliver;
    }
    let current_domain = topology.domain_of(current);
    let dst_domain = topology.domain_of(share.destination);
    if current_domain != dst_domain {
        if specials.is_current_special(current) {
            if let Some(next) = cross_domain_target(current, dst_domain, topology, specials, strict_links)
            {
                if !share.trace.contains(&next) {
                    return StepDecision::Forward(next);
                }
            }
        } else if let Some(sp) =
            special_neighbor(neighbors, dst_domain, topology, specials, Some(&share.trace))
        {
            return StepDecision::Forward(sp);
        }
    }
    let candidates: Vec<NodeId> = neighbors
        .iter()
        .copied()
        .filter(|v| !share.trace.contains(v))
        .collect();
    if candidates.is_empty() {
        return StepDecision::Drop(DropReason::DeadEnd);
    }
    let special_adjacent = neighbors.iter().any(|&v| specials.is_current_special(v));
    if special_adjacent {
        return StepDecision::Forward(candidates[rng.random_range(0..candidates.len())]);
    }
    match specials.current(current_domain) {
        Some(sp) => {
            let goal = topology.position_of(sp);
            let nearest = candidates
                .iter()
                .copied()
                .min_by(|&a, &b| {
                    let da = dist_sq(topology.position_of(a), goal);
                    let db = dist_sq(topology.position_of(b), goal);
                    da.partial_cmp(&db).unwrap().then(a.cmp(&b))
                })
                .expect("candidates checked non-empty");
            StepDecision::Forward(nearest)
        }
        // before the first election there is no homing target
        None => StepDecision::Forward(candidates[rng.random_range(0..candidates.len())]),
    }
}

/// Cross-domain handoff from a special node: one logical hop to the
/// current special of the neighboring domain that is nearest (in domain
/// grid steps) to the destination's domain.
pub fn cross_domain(
    share: &Share,
    sp_from: NodeId,
    topology: &Topology,
    specials: &SpecialNodeTable,
) -> StepDecision {
    let dst_domain = topology.domain_of(share.destination);
    match cross_domain_target(sp_from, dst_domain, topology, specials, false) {
        Some(next) => StepDecision::Forward(next),
        None => StepDecision::Drop(DropReason::Disconnected),
    }
}

/// Next special node on the grid path toward `dst_domain`. The rectangular
/// grid makes the BFS distance equal to the Manhattan distance, so the
/// next domain is the 4-neighbor cell minimizing Manhattan distance to
/// the target cell, ties by lowest domain id. Under strict links the
/// handoff additionally requires physical adjacency.
pub fn cross_domain_target(
    sp_from: NodeId,
    dst_domain: DomainId,
    topology: &Topology,
    specials: &SpecialNodeTable,
    strict_links: bool,
) -> Option<NodeId> {
    let from_domain = topology.domain_of(sp_from);
    debug_assert_ne!(from_domain, dst_domain, "handoff within a domain");
    let (gx, gy) = topology.grid();
    let (fx, fy) = topology.domain_cell(from_domain);
    let (tx, ty) = topology.domain_cell(dst_domain);
    let mut best: Option<(u32, DomainId)> = None;
    let mut consider = |cx: u32, cy: u32| {
        let d = topology.domain_at_cell(cx, cy);
        let dist = cx.abs_diff(tx) + cy.abs_diff(ty);
        match best {
            Some((bd, bid)) if (bd, bid.0) <= (dist, d.0) => {}
            _ => best = Some((dist, d)),
        }
    };
    if fx > 0 {
        consider(fx - 1, fy);
    }
    if fx + 1 < gx {
        consider(fx + 1, fy);
    }
    if fy > 0 {
        consider(fx, fy - 1);
    }
    if fy + 1 < gy {
        consider(fx, fy + 1);
    }
    let (_, next_domain) = best?;
    let next = specials.current(next_domain)?;
    if strict_links && !topology.are_neighbors(sp_from, next) {
        return None;
    }
    Some(next)
}

/// Adjacent current special node to relay through, preferring the one
/// whose domain is nearest the destination's domain (grid steps), ties by
/// lowest id. `exclude_trace` filters traversed nodes for MDRWON.
fn special_neighbor(
    neighbors: &[NodeId],
    dst_domain: DomainId,
    topology: &Topology,
    specials: &SpecialNodeTable,
    exclude_trace: Option<&[NodeId]>,
) -> Option<NodeId> {
    let (tx, ty) = topology.domain_cell(dst_domain);
    neighbors
        .iter()
        .copied()
        .filter(|&v| specials.is_current_special(v))
        .filter(|v| exclude_trace.is_none_or(|trace| !trace.contains(v)))
        .min_by_key(|&v| {
            let (cx, cy) = topology.domain_cell(topology.domain_of(v));
            (cx.abs_diff(tx) + cy.abs_diff(ty), v)
        })
}

fn dist_sq(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

/// Shortest path (hop count) from `from` to `to`, inclusive of endpoints;
/// among equal-length paths the lexicographically smallest id sequence.
/// `None` when the pair is disconnected.
pub fn min_hop_route(from: NodeId, to: NodeId, topology: &Topology) -> Option<Vec<NodeId>> {
    if from == to {
        return Some(vec![from]);
    }
    let n = topology.num_nodes();
    let mut dist = vec![u32::MAX; n];
    dist[to.index()] = 0;
    let mut queue = VecDeque::from([to]);
    while let Some(v) = queue.pop_front() {
        let d = dist[v.index()];
        if v == from {
            break;
        }
        for &u in topology.neighbors(v) {
            if dist[u.index()] == u32::MAX {
                dist[u.index()] = d + 1;
                queue.push_back(u);
            }
        }
    }
    if dist[from.index()] == u32::MAX {
        return None;
    }
    // walk downhill choosing the smallest id at each level: neighbor
    // lists are sorted, so the first match is the lexicographic choice
    let mut path = vec![from];
    let mut current = from;
    while current != to {
        let d = dist[current.index()];
        let next = topology
            .neighbors(current)
            .iter()
            .copied()
            .find(|&u| dist[u.index()] == d - 1)
            .expect("distance field is consistent");
        path.push(next);
        current = next;
    }
    Some(path)
}

/// Applies one step of the given policy.
pub fn policy_step(
    policy: RoutingPolicy,
    share: &Share,
    current: NodeId,
    topology: &Topology,
    specials: &SpecialNodeTable,
    strict_links: bool,
    rng: &mut SimRng,
) -> StepDecision {
    match policy {
        RoutingPolicy::Prp => prp_step(share, current, topology, rng),
        RoutingPolicy::Nrrp => nrrp_step(share, current, topology, rng),
        RoutingPolicy::Mdron => mdron_step(share, current, topology, specials, strict_links, rng),
        RoutingPolicy::Mdrwon => {
            mdrwon_step(share, current, topology, specials, strict_links, rng)
        }
    }
}
