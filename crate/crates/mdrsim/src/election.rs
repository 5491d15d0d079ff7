//! Special-node election.
//!
//! Each domain elects the maximum-battery member as its special node.
//! A per-domain history table blocks re-election of recent winners; once
//! every candidate has served, the history resets and the cycle repeats.
//! Compromised nodes are never candidates, which keeps special nodes
//! outside the adversary's reach at every election epoch.

use crate::error::{Error, Result};
use crate::topology::{DomainId, NodeId, NodeState, Topology};

/// Per-domain election state: the current special node and the history
/// of past winners (unique until a reset).
#[derive(Clone, Debug)]
pub struct SpecialNodeTable {
    current: Vec<Option<NodeId>>,
    history: Vec<Vec<NodeId>>,
}

impl SpecialNodeTable {
    pub fn new(num_domains: usize) -> Self {
        SpecialNodeTable {
            current: vec![None; num_domains],
            history: vec![Vec::new(); num_domains],
        }
    }

    pub fn current(&self, d: DomainId) -> Option<NodeId> {
        self.current[d.index()]
    }

    pub fn history(&self, d: DomainId) -> &[NodeId] {
        &self.history[d.index()]
    }

    pub fn current_specials(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.current.iter().filter_map(|c| *c)
    }

    pub fn is_current_special(&self, v: NodeId) -> bool {
        self.current.iter().any(|c| *c == Some(v))
    }
}

/// Elects the maximum-battery member not yet in `history`; ties go to the
/// lowest id. An exhausted history (every member already served) is
/// treated as empty for this call.
pub fn elect_special_node<'a, I>(members: I, history: &[NodeId]) -> Result<NodeId>
where
    I: IntoIterator<Item = &'a NodeState>,
{
    let all: Vec<(u32, NodeId)> = members.into_iter().map(|m| (m.battery, m.id)).collect();
    if all.is_empty() {
        return Err(Error::election("empty domain"));
    }
    let fresh: Vec<(u32, NodeId)> = all
        .iter()
        .copied()
        .filter(|(_, id)| !history.contains(id))
        .collect();
    let pool = if fresh.is_empty() { &all } else { &fresh };
    let winner = pool
        .iter()
        .copied()
        .max_by_key(|&(battery, id)| (battery, std::cmp::Reverse(id)))
        .expect("pool is non-empty");
    Ok(winner.1)
}

/// Runs the election in every domain and updates the table. Compromised
/// members are excluded from candidacy. Returns the winners in domain
/// order for trace output.
pub fn elect_all(
    topology: &Topology,
    table: &mut SpecialNodeTable,
) -> Result<Vec<(DomainId, NodeId)>> {
    let mut winners = Vec::with_capacity(topology.num_domains());
    for domain in &topology.domains {
        let members: Vec<&NodeState> = domain
            .members
            .iter()
            .map(|&m| topology.node(m))
            .filter(|n| !n.compromised)
            .collect();
        if members.is_empty() {
            return Err(Error::election(format!(
                "domain {} has no eligible candidate",
                domain.id
            )));
        }
        let d = domain.id.index();
        if members.iter().all(|m| table.history[d].contains(&m.id)) {
            table.history[d].clear();
        }
        let winner = elect_special_node(members.iter().copied(), &table.history[d])?;
        table.current[d] = Some(winner);
        table.history[d].push(winner);
        winners.push((domain.id, winner));
    }
    Ok(winners)
}

/// Election trace rows `(iteration, domain, special_node)` as CSV.
pub fn election_trace_csv(rows: &[(u32, DomainId, NodeId)]) -> String {
    let mut out = String::from("iteration,domain,special_node\n");
    for (iteration, domain, special) in rows {
        out.push_str(&format!("{iteration},{domain},{special}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;
    use crate::rng::rng_from_seed;
    use crate::topology::deploy_nodes;
    use rand::Rng;

    fn member(id: u32, battery: u32) -> NodeState {
        NodeState {
            id: NodeId(id),
            position: (0.0, 0.0),
            battery,
            domain: DomainId(0),
            compromised: false,
            neighbors: Vec::new(),
        }
    }

    #[test]
    fn picks_highest_battery() {
        let members = [member(1, 5), member(2, 9), member(3, 3)];
        assert_eq!(elect_special_node(members.iter(), &[]).unwrap(), NodeId(2));
    }

    #[test]
    fn tie_breaks_by_lowest_id() {
        let members = [member(1, 9), member(2, 9)];
        assert_eq!(elect_special_node(members.iter(), &[]).unwrap(), NodeId(1));
    }

    #[test]
    fn single_member_wins_despite_history() {
        let members = [member(4, 1)];
        let history = [NodeId(4)];
        assert_eq!(
            elect_special_node(members.iter(), &history).unwrap(),
            NodeId(4)
        );
    }

    #[test]
    fn empty_domain_is_an_error() {
        assert!(matches!(
            elect_special_node([].iter(), &[]),
            Err(Error::Election(_))
        ));
    }

    #[test]
    fn history_excludes_previous_winner() {
        let members = [member(1, 9), member(2, 8), member(3, 7)];
        let winner = elect_special_node(members.iter(), &[NodeId(1)]).unwrap();
        assert_eq!(winner, NodeId(2));
        let winner = elect_special_node(members.iter(), &[NodeId(1), NodeId(2)]).unwrap();
        assert_eq!(winner, NodeId(3));
        // exhausted history resets for this call
        let winner =
            elect_special_node(members.iter(), &[NodeId(1), NodeId(2), NodeId(3)]).unwrap();
        assert_eq!(winner, NodeId(1));
    }

    #[test]
    fn matches_linear_scan_oracle_on_random_instances() {
        let mut rng = rng_from_seed(17);
        for _ in 0..1000 {
            let m = rng.random_range(1..=12usize);
            let members: Vec<NodeState> = (0..m)
                .map(|i| member(i as u32, rng.random_range(0..20)))
                .collect();
            let mut history = Vec::new();
            for i in 0..m {
                if rng.random::<f64>() < 0.4 {
                    history.push(NodeId(i as u32));
                }
            }
            // oracle: argmax battery excluding history, min-id tie-break,
            // history ignored when it covers all members
            let covered = members.iter().all(|n| history.contains(&n.id));
            let mut best: Option<(u32, NodeId)> = None;
            for n in &members {
                if !covered && history.contains(&n.id) {
                    continue;
                }
                best = Some(match best {
                    None => (n.battery, n.id),
                    Some((b, id)) => {
                        if n.battery > b || (n.battery == b && n.id < id) {
                            (n.battery, n.id)
                        } else {
                            (b, id)
                        }
                    }
                });
            }
            assert_eq!(
                elect_special_node(members.iter(), &history).unwrap(),
                best.unwrap().1
            );
        }
    }

    #[test]
    fn elect_all_returns_one_special_per_domain() {
        let config = ScenarioConfig::default();
        let topology = deploy_nodes(&config, &mut rng_from_seed(5)).unwrap();
        let mut table = SpecialNodeTable::new(topology.num_domains());
        let winners = elect_all(&topology, &mut table).unwrap();
        assert_eq!(winners.len(), 4);
        for (d, w) in winners {
            assert_eq!(topology.domain_of(w), d);
            assert_eq!(table.current(d), Some(w));
            assert!(table.is_current_special(w));
        }
    }

    #[test]
    fn consecutive_elections_rotate_winners() {
        let config = ScenarioConfig {
            num_nodes: 40,
            ..ScenarioConfig::default()
        };
        let topology = deploy_nodes(&config, &mut rng_from_seed(21)).unwrap();
        let mut table = SpecialNodeTable::new(topology.num_domains());
        let first = elect_all(&topology, &mut table).unwrap();
        let second = elect_all(&topology, &mut table).unwrap();
        for ((d, a), (_, b)) in first.iter().zip(&second) {
            // batteries drawn from [100,1000] over 40 nodes: ties are
            // possible but the ids then still differ via history
            assert_ne!(a, b, "domain {d} re-elected {a} immediately");
        }
    }

    #[test]
    fn no_node_serves_twice_within_a_domain_cycle() {
        let config = ScenarioConfig {
            num_nodes: 24,
            num_domains: 2,
            ..ScenarioConfig::default()
        };
        let topology = deploy_nodes(&config, &mut rng_from_seed(9)).unwrap();
        let mut table = SpecialNodeTable::new(topology.num_domains());
        let elections = 36;
        let mut per_domain: Vec<Vec<NodeId>> = vec![Vec::new(); 2];
        for _ in 0..elections {
            for (d, w) in elect_all(&topology, &mut table).unwrap() {
                per_domain[d.index()].push(w);
            }
        }
        for (d, seq) in per_domain.iter().enumerate() {
            let m = topology.domains[d].members.len();
            let window = m.min(seq.len());
            for w in seq.windows(window) {
                let mut sorted: Vec<_> = w.to_vec();
                sorted.sort();
                sorted.dedup();
                assert_eq!(sorted.len(), w.len(), "repeat within window in domain {d}");
            }
        }
    }

    #[test]
    fn compromised_members_cannot_win() {
        let config = ScenarioConfig {
            num_nodes: 30,
            ..ScenarioConfig::default()
        };
        let mut topology = deploy_nodes(&config, &mut rng_from_seed(31)).unwrap();
        // compromise the top-battery node of each domain
        for d in 0..topology.num_domains() {
            let top = *topology.domains[d]
                .members
                .iter()
                .max_by_key(|&&m| (topology.node(m).battery, std::cmp::Reverse(m)))
                .unwrap();
            topology.node_mut(top).compromised = true;
        }
        let mut table = SpecialNodeTable::new(topology.num_domains());
        for (_, w) in elect_all(&topology, &mut table).unwrap() {
            assert!(!topology.node(w).compromised);
        }
    }

    #[test]
    fn trace_csv_shape() {
        let rows = vec![
            (1, DomainId(0), NodeId(29)),
            (1, DomainId(1), NodeId(69)),
            (2, DomainId(0), NodeId(10)),
        ];
        let csv = election_trace_csv(&rows);
        assert_eq!(
            csv,
            "iteration,domain,special_node\n1,0,29\n1,1,69\n2,0,10\n"
        );
    }
}
