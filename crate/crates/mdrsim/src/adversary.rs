//! Compromised-node selection and interception bookkeeping.
//!
//! A compromised node intercepts and drops every share forwarded to it:
//! the share counts toward packet drop and its index joins the
//! adversary's reconstruction set for that message. Current special
//! nodes are never eligible for compromise, and elections in turn never
//! pick compromised nodes, so the special relay stays clean.

use std::collections::{HashMap, HashSet};

use crate::coding::{self, CodingParams, MessageId, Share, ShareStatus};
use crate::election::SpecialNodeTable;
use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::topology::{NodeId, Topology};

#[derive(Clone, Debug, Default)]
pub struct AdversaryState {
    compromised: HashSet<NodeId>,
    intercepted: HashMap<MessageId, HashSet<usize>>,
}

impl AdversaryState {
    pub fn empty() -> Self {
        AdversaryState::default()
    }

    pub fn is_compromised(&self, v: NodeId) -> bool {
        self.compromised.contains(&v)
    }

    pub fn compromised_count(&self) -> usize {
        self.compromised.len()
    }

    pub fn compromised_nodes(&self) -> &HashSet<NodeId> {
        &self.compromised
    }

    pub fn intercepted_indices(&self, msg: MessageId) -> Option<&HashSet<usize>> {
        self.intercepted.get(&msg)
    }

    pub fn interception_count(&self) -> usize {
        self.intercepted.values().map(|s| s.len()).sum()
    }

    /// True iff the adversary holds at least `k` distinct share indices
    /// of the message.
    pub fn message_compromised(&self, msg: MessageId, params: CodingParams) -> bool {
        self.intercepted
            .get(&msg)
            .is_some_and(|indices| coding::compromised(indices, params))
    }
}

/// Chooses `floor(fraction * N)` compromised nodes uniformly among the
/// eligible nodes (everyone except current special nodes), marks their
/// flags on the topology and returns the fresh adversary state.
pub fn compromise_nodes(
    topology: &mut Topology,
    fraction: f64,
    specials: &SpecialNodeTable,
    rng: &mut SimRng,
) -> Result<AdversaryState> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::config(format!(
            "compromise fraction must be in [0, 1], got {fraction}"
        )));
    }
    let n = topology.num_nodes();
    let count = (fraction * n as f64).floor() as usize;
    let headroom = n.saturating_sub(topology.num_domains() + 2);
    if count > headroom {
        return Err(Error::config(format!(
            "cannot compromise {count} of {n} nodes: need room for {} special nodes \
             plus a source and a destination",
            topology.num_domains()
        )));
    }
    for node in &mut topology.nodes {
        node.compromised = false;
    }
    let eligible: Vec<NodeId> = topology
        .nodes
        .iter()
        .map(|n| n.id)
        .filter(|&v| !specials.is_current_special(v))
        .collect();
    let mut compromised = HashSet::with_capacity(count);
    for idx in rand::seq::index::sample(rng, eligible.len(), count) {
        let v = eligible[idx];
        topology.node_mut(v).compromised = true;
        compromised.insert(v);
    }
    Ok(AdversaryState {
        compromised,
        intercepted: HashMap::new(),
    })
}

/// Interception check on one forwarded hop: if the target is compromised
/// the share is intercepted and its index recorded (set semantics, so
/// within-round processing order cannot matter).
pub fn on_forward(share: &mut Share, next: NodeId, adversary: &mut AdversaryState) {
    if adversary.is_compromised(next) {
        share.status = ShareStatus::Intercepted;
        adversary
            .intercepted
            .entry(share.message)
            .or_default()
            .insert(share.index);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::lbc_split;
    use crate::config::ScenarioConfig;
    use crate::election::elect_all;
    use crate::rng::rng_from_seed;
    use crate::topology::deploy_nodes;

    fn deployed(seed: u64) -> (Topology, SpecialNodeTable) {
        let mut topology =
            deploy_nodes(&ScenarioConfig::default(), &mut rng_from_seed(seed)).unwrap();
        let mut specials = SpecialNodeTable::new(topology.num_domains());
        elect_all(&topology, &mut specials).unwrap();
        (topology, specials)
    }

    #[test]
    fn fraction_zero_compromises_nobody() {
        let (mut topology, specials) = deployed(1);
        let adv = compromise_nodes(&mut topology, 0.0, &specials, &mut rng_from_seed(2)).unwrap();
        assert_eq!(adv.compromised_count(), 0);
        assert!(topology.nodes.iter().all(|n| !n.compromised));
    }

    #[test]
    fn fraction_picks_floor_count_and_spares_specials() {
        let (mut topology, specials) = deployed(3);
        let adv = compromise_nodes(&mut topology, 0.2, &specials, &mut rng_from_seed(4)).unwrap();
        assert_eq!(adv.compromised_count(), 50);
        for sp in specials.current_specials() {
            assert!(!adv.is_compromised(sp));
            assert!(!topology.node(sp).compromised);
        }
        let flagged = topology.nodes.iter().filter(|n| n.compromised).count();
        assert_eq!(flagged, 50);
    }

    #[test]
    fn infeasible_fraction_rejected() {
        let (mut topology, specials) = deployed(5);
        assert!(compromise_nodes(&mut topology, 1.0, &specials, &mut rng_from_seed(6)).is_err());
    }

    #[test]
    fn selection_is_roughly_uniform_over_eligible_nodes() {
        let (mut topology, specials) = deployed(7);
        let n = topology.num_nodes();
        let mut hits = vec![0u32; n];
        let seeds = 1000;
        for seed in 0..seeds {
            let adv =
                compromise_nodes(&mut topology, 0.2, &specials, &mut rng_from_seed(seed)).unwrap();
            for &v in adv.compromised_nodes() {
                hits[v.index()] += 1;
            }
        }
        // each eligible node is hit ~ seeds * 50 / 246 ~ 203 times
        let eligible = n - 4;
        let expected = seeds as f64 * 50.0 / eligible as f64;
        for (i, &h) in hits.iter().enumerate() {
            let v = NodeId(i as u32);
            if specials.is_current_special(v) {
                assert_eq!(h, 0, "special node {v} was compromised");
            } else {
                // generous 4-sigma-ish band around the binomial mean
                let sigma = (expected * (1.0 - 50.0 / eligible as f64)).sqrt();
                assert!(
                    (h as f64 - expected).abs() < 5.0 * sigma,
                    "node {v} hit {h} times, expected ~{expected:.0}"
                );
            }
        }
    }

    #[test]
    fn on_forward_intercepts_and_records_once() {
        let (mut topology, specials) = deployed(9);
        let mut adv =
            compromise_nodes(&mut topology, 0.2, &specials, &mut rng_from_seed(10)).unwrap();
        let bad = *adv.compromised_nodes().iter().min().unwrap();
        let good = topology
            .nodes
            .iter()
            .find(|n| !n.compromised)
            .map(|n| n.id)
            .unwrap();

        let mut shares = lbc_split(
            MessageId(0),
            good,
            NodeId(0),
            CodingParams { n: 2, k: 2 },
            5,
        )
        .unwrap();

        on_forward(&mut shares[0], good, &mut adv);
        assert_eq!(shares[0].status, ShareStatus::InFlight);
        assert!(adv.intercepted_indices(MessageId(0)).is_none());

        on_forward(&mut shares[0], bad, &mut adv);
        on_forward(&mut shares[1], bad, &mut adv);
        assert_eq!(shares[0].status, ShareStatus::Intercepted);
        assert_eq!(
            adv.intercepted_indices(MessageId(0)).unwrap().len(),
            2,
            "both indices recorded exactly once"
        );
        assert!(adv.message_compromised(MessageId(0), CodingParams { n: 2, k: 2 }));
    }
}
