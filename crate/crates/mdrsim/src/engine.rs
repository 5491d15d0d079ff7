//! Round-based simulation loop and metric aggregation.
//!
//! One run deploys a topology, elects special nodes, fixes the
//! compromised set, then advances rounds. Each round injects the
//! messages scheduled for it, moves every in-flight share one hop,
//! re-elects on the election period and reshuffles positions on the
//! reshuffle period. Time is discrete: one hop per share per round, so
//! delay is measured in rounds.
//!
//! Shares advance independently: each owns a derived rng stream and the
//! only shared mutable state (the adversary's interception record) grows
//! by set union, so within-round processing order cannot change any
//! metric.

use std::collections::HashSet;
use std::fmt;

use rand::RngCore;

use crate::adversary::{self, AdversaryState};
use crate::coding::{self, lbc_split, DropReason, MessageId, Share, ShareStatus};
use crate::config::ScenarioConfig;
use crate::election::{elect_all, SpecialNodeTable};
use crate::error::{Error, Result};
use crate::rng::{self, SimRng};
use crate::routing::{self, RoutingPolicy, StepDecision};
use crate::topology::{deploy_nodes, DomainId, NodeId, Topology};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Phase {
    Random,
    MinHop,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Random => "random",
            Phase::MinHop => "minhop",
        })
    }
}

/// One forwarded hop, for the optional trace log.
#[derive(Clone, Copy, Debug)]
pub struct HopRecord {
    pub message: MessageId,
    pub share_index: usize,
    pub from: NodeId,
    pub to: NodeId,
    /// Remaining random-phase hops after this hop.
    pub counter: u32,
    pub phase: Phase,
}

/// Per-run debug log: hop lines and the election trace.
#[derive(Clone, Debug, Default)]
pub struct RunLog {
    pub hops: Vec<HopRecord>,
    /// `(iteration, domain, special_node)` rows, iteration starting at 1.
    pub elections: Vec<(u32, DomainId, NodeId)>,
}

impl RunLog {
    /// One line per hop: `message,share,from,to,counter,phase`.
    pub fn hops_text(&self) -> String {
        let mut out = String::new();
        for h in &self.hops {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                h.message, h.share_index, h.from, h.to, h.counter, h.phase
            ));
        }
        out
    }

    pub fn elections_csv(&self) -> String {
        crate::election::election_trace_csv(&self.elections)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DropCounts {
    pub dead_end: u64,
    pub isolated: u64,
    pub disconnected: u64,
    pub timeout: u64,
}

impl DropCounts {
    fn record(&mut self, reason: DropReason) {
        match reason {
            DropReason::DeadEnd => self.dead_end += 1,
            DropReason::Isolated => self.isolated += 1,
            DropReason::Disconnected => self.disconnected += 1,
            DropReason::Timeout => self.timeout += 1,
        }
    }

    pub fn total(self) -> u64 {
        self.dead_end + self.isolated + self.disconnected + self.timeout
    }
}

/// Raw counters from one run.
#[derive(Clone, Debug, Default)]
pub struct RunMetrics {
    pub sim_rounds: u32,
    pub messages_sent: u64,
    /// Messages whose delivered index set reached the threshold.
    pub messages_delivered: u64,
    /// Messages whose intercepted index set reached the threshold.
    pub messages_compromised: u64,
    pub shares_total: u64,
    pub shares_delivered: u64,
    pub shares_intercepted: u64,
    pub drops: DropCounts,
    /// Sum over delivered messages of (k-th share arrival round - injection round).
    pub delay_sum: u64,
    /// Shares whose trace visited some node twice.
    pub revisit_traces: u64,
}

impl RunMetrics {
    /// Packet delivery ratio: reconstructable messages / sent. `None`
    /// when nothing was sent.
    pub fn pdr(&self) -> Option<f64> {
        (self.messages_sent > 0)
            .then(|| self.messages_delivered as f64 / self.messages_sent as f64)
    }

    /// Lost shares (dropped + intercepted) / total shares.
    pub fn drop_rate(&self) -> Option<f64> {
        (self.shares_total > 0)
            .then(|| (self.drops.total() + self.shares_intercepted) as f64 / self.shares_total as f64)
    }

    /// Delivered messages per simulation round (one payload unit per message).
    pub fn throughput(&self) -> f64 {
        self.messages_delivered as f64 / self.sim_rounds as f64
    }

    /// Mean delivery delay in rounds, over delivered messages only.
    pub fn avg_delay(&self) -> Option<f64> {
        (self.messages_delivered > 0)
            .then(|| self.delay_sum as f64 / self.messages_delivered as f64)
    }
}

/// Aggregated metrics for one (policy, compromise fraction) cell: counter
/// totals plus means of the per-run ratios.
#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub policy: RoutingPolicy,
    pub compromise_fraction: f64,
    pub runs: u32,
    pub messages_sent: u64,
    pub messages_delivered: u64,
    pub messages_compromised: u64,
    pub shares_dropped: u64,
    pub shares_intercepted: u64,
    pub drops: DropCounts,
    pub revisit_traces: u64,
    /// Mean per-run packet delivery ratio; `None` when no messages flow.
    pub pdr: Option<f64>,
    pub drop_rate: Option<f64>,
    pub throughput: f64,
    /// Mean per-run delay, over runs that delivered at least one message.
    pub avg_delay: Option<f64>,
}

impl MetricsReport {
    /// Mean compromised-message count per run.
    pub fn messages_compromised_per_run(&self) -> f64 {
        self.messages_compromised as f64 / self.runs as f64
    }
}

/// Folds per-run counters into the cell report. Runs are combined in
/// index order, so the result is independent of execution interleaving.
pub fn aggregate(
    policy: RoutingPolicy,
    compromise_fraction: f64,
    per_run: &[RunMetrics],
) -> MetricsReport {
    assert!(!per_run.is_empty(), "at least one run per cell");
    let mut report = MetricsReport {
        policy,
        compromise_fraction,
        runs: per_run.len() as u32,
        messages_sent: 0,
        messages_delivered: 0,
        messages_compromised: 0,
        shares_dropped: 0,
        shares_intercepted: 0,
        drops: DropCounts::default(),
        revisit_traces: 0,
        pdr: None,
        drop_rate: None,
        throughput: 0.0,
        avg_delay: None,
    };
    let mut pdr = MeanAcc::default();
    let mut drop_rate = MeanAcc::default();
    let mut throughput = MeanAcc::default();
    let mut delay = MeanAcc::default();
    for m in per_run {
        report.messages_sent += m.messages_sent;
        report.messages_delivered += m.messages_delivered;
        report.messages_compromised += m.messages_compromised;
        report.shares_dropped += m.drops.total();
        report.shares_intercepted += m.shares_intercepted;
        report.drops.dead_end += m.drops.dead_end;
        report.drops.isolated += m.drops.isolated;
        report.drops.disconnected += m.drops.disconnected;
        report.drops.timeout += m.drops.timeout;
        report.revisit_traces += m.revisit_traces;
        pdr.push_opt(m.pdr());
        drop_rate.push_opt(m.drop_rate());
        throughput.push(m.throughput());
        delay.push_opt(m.avg_delay());
    }
    report.pdr = pdr.mean();
    report.drop_rate = drop_rate.mean();
    report.throughput = throughput.mean().unwrap_or(0.0);
    report.avg_delay = delay.mean();
    report
}

#[derive(Default)]
struct MeanAcc {
    sum: f64,
    count: u64,
}

impl MeanAcc {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.count += 1;
    }

    fn push_opt(&mut self, v: Option<f64>) {
        if let Some(v) = v {
            self.push(v);
        }
    }

    fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

/// Committed min-hop route; `path[pos]` is the node holding the share.
#[derive(Clone, Debug)]
struct MinHopRoute {
    path: Vec<NodeId>,
    pos: usize,
}

struct ActiveShare {
    share: Share,
    rng: SimRng,
    route: Option<MinHopRoute>,
}

struct MessageRecord {
    injection_round: u32,
    delivered: HashSet<usize>,
    /// Round when the k-th distinct index arrived.
    reconstructed_round: Option<u32>,
}

#[derive(Clone, Copy, Debug)]
struct ScheduledMessage {
    round: u32,
    source: NodeId,
    destination: NodeId,
}

/// One seeded simulation run.
pub struct SimulationRun {
    config: ScenarioConfig,
    topology: Topology,
    specials: SpecialNodeTable,
    adversary: AdversaryState,
    rng: SimRng,
    round: u32,
    election_iteration: u32,
    in_flight: Vec<ActiveShare>,
    messages: Vec<MessageRecord>,
    schedule: Vec<ScheduledMessage>,
    next_scheduled: usize,
    metrics: RunMetrics,
    log: Option<RunLog>,
    /// Test hook: process shares in reverse order within a round.
    pub(crate) reverse_processing: bool,
}

impl SimulationRun {
    pub fn new(config: &ScenarioConfig, run_seed: u64, collect_log: bool) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::rng_from_seed(run_seed);
        let topology = deploy_nodes(config, &mut rng)?;
        Self::with_topology(config, topology, rng, collect_log)
    }

    /// Builds a run on a prebuilt topology (fixtures). The rng must be
    /// the stream to continue from; elections, compromise and the
    /// message schedule still happen here.
    pub fn with_topology(
        config: &ScenarioConfig,
        mut topology: Topology,
        mut rng: SimRng,
        collect_log: bool,
    ) -> Result<Self> {
        let mut specials = SpecialNodeTable::new(topology.num_domains());
        let winners = elect_all(&topology, &mut specials)?;
        let adversary = adversary::compromise_nodes(
            &mut topology,
            config.compromise_fraction,
            &specials,
            &mut rng,
        )?;
        let mut log = collect_log.then(RunLog::default);
        if let Some(log) = log.as_mut() {
            log.elections
                .extend(winners.into_iter().map(|(d, w)| (1, d, w)));
        }
        let schedule = build_schedule(config, &topology, &mut rng)?;
        Ok(SimulationRun {
            config: config.clone(),
            topology,
            specials,
            adversary,
            rng,
            round: 0,
            election_iteration: 1,
            in_flight: Vec::new(),
            messages: Vec::new(),
            schedule,
            next_scheduled: 0,
            metrics: RunMetrics {
                sim_rounds: config.sim_rounds,
                ..RunMetrics::default()
            },
            log,
            reverse_processing: false,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn specials(&self) -> &SpecialNodeTable {
        &self.specials
    }

    pub fn adversary(&self) -> &AdversaryState {
        &self.adversary
    }

    /// Splits a message into shares and enqueues them at the current
    /// round. Source and destination must be distinct, non-compromised
    /// nodes.
    pub fn inject_message(&mut self, source: NodeId, destination: NodeId) -> Result<MessageId> {
        if source == destination {
            return Err(Error::config("source and destination must differ"));
        }
        if self.adversary.is_compromised(source) || self.adversary.is_compromised(destination) {
            return Err(Error::config(
                "source and destination must not be compromised",
            ));
        }
        let id = MessageId(self.messages.len() as u64);
        let shares = lbc_split(id, source, destination, self.config.coding, self.config.counter)?;
        self.metrics.messages_sent += 1;
        self.metrics.shares_total += shares.len() as u64;
        self.messages.push(MessageRecord {
            injection_round: self.round,
            delivered: HashSet::new(),
            reconstructed_round: None,
        });
        for share in shares {
            let share_seed = self.rng.next_u64();
            self.in_flight.push(ActiveShare {
                share,
                rng: rng::rng_from_seed(share_seed),
                route: None,
            });
        }
        Ok(id)
    }

    /// Runs every remaining round, flushes stragglers as timeouts and
    /// finalizes message-level counters.
    pub fn run_to_completion(&mut self) -> Result<RunMetrics> {
        while self.round < self.config.sim_rounds {
            self.step_round()?;
        }
        // final flush: anything still in flight timed out
        let mut leftovers = std::mem::take(&mut self.in_flight);
        for active in &mut leftovers {
            active.share.status = ShareStatus::Dropped(DropReason::Timeout);
            self.finalize_share(active);
        }
        for record in &self.messages {
            if coding::reconstructable(&record.delivered, self.config.coding) {
                self.metrics.messages_delivered += 1;
                let arrived = record
                    .reconstructed_round
                    .expect("threshold reached implies recorded round");
                self.metrics.delay_sum += u64::from(arrived - record.injection_round);
            }
        }
        for id in 0..self.messages.len() {
            if self
                .adversary
                .message_compromised(MessageId(id as u64), self.config.coding)
            {
                self.metrics.messages_compromised += 1;
            }
        }
        Ok(self.metrics.clone())
    }

    /// One round: inject scheduled messages, advance all in-flight shares
    /// one hop, then run the election / reshuffle schedules.
    pub fn step_round(&mut self) -> Result<()> {
        let round = self.round;
        while self
            .schedule
            .get(self.next_scheduled)
            .is_some_and(|s| s.round == round)
        {
            let s = self.schedule[self.next_scheduled];
            self.inject_message(s.source, s.destination)?;
            self.next_scheduled += 1;
        }
        self.advance_all();
        if round > 0 && round % self.config.election_period == 0 {
            self.election_iteration += 1;
            let winners = elect_all(&self.topology, &mut self.specials)?;
            if let Some(log) = self.log.as_mut() {
                let it = self.election_iteration;
                log.elections.extend(winners.into_iter().map(|(d, w)| (it, d, w)));
            }
        }
        if self.config.reshuffle_period > 0
            && round > 0
            && round % self.config.reshuffle_period == 0
        {
            self.topology.reshuffle_positions(&mut self.rng);
        }
        self.round += 1;
        Ok(())
    }

    fn advance_all(&mut self) {
        let mut shares = std::mem::take(&mut self.in_flight);
        if self.reverse_processing {
            shares.reverse();
        }
        for mut active in shares {
            self.advance_share(&mut active);
            if active.share.in_flight() {
                self.in_flight.push(active);
            } else {
                self.finalize_share(&mut active);
            }
        }
        if self.reverse_processing {
            self.in_flight.reverse();
        }
    }

    /// Moves one share one hop (or to a terminal status).
    fn advance_share(&mut self, active: &mut ActiveShare) {
        debug_assert!(active.share.in_flight());
        let current = active.share.current();
        // counter exhausted: commit permanently to the min-hop route
        if active.route.is_none() && active.share.counter == 0 {
            match routing::min_hop_route(current, active.share.destination, &self.topology) {
                Some(path) => active.route = Some(MinHopRoute { path, pos: 0 }),
                None => {
                    active.share.status = ShareStatus::Dropped(DropReason::Disconnected);
                    return;
                }
            }
        }
        if let Some(route) = active.route.as_mut() {
            route.pos += 1;
            let next = route.path[route.pos];
            self.log_hop(&active.share, current, next, Phase::MinHop);
            adversary::on_forward(&mut active.share, next, &mut self.adversary);
            active.share.trace.push(next);
            if !active.share.in_flight() {
                return;
            }
            if next == active.share.destination {
                self.deliver(active);
            }
            return;
        }
        let decision = routing::policy_step(
            self.config.policy,
            &active.share,
            current,
            &self.topology,
            &self.specials,
            self.config.strict_special_links,
            &mut active.rng,
        );
        match decision {
            StepDecision::Deliver => {
                let destination = active.share.destination;
                self.log_hop(&active.share, current, destination, Phase::Random);
                adversary::on_forward(&mut active.share, destination, &mut self.adversary);
                active.share.trace.push(destination);
                if active.share.in_flight() {
                    self.deliver(active);
                }
            }
            StepDecision::Forward(next) => {
                debug_assert!(active.share.counter > 0, "random phase needs hop budget");
                debug_assert_ne!(next, active.share.destination, "deliver branch has priority");
                active.share.counter -= 1;
                self.log_hop(&active.share, current, next, Phase::Random);
                adversary::on_forward(&mut active.share, next, &mut self.adversary);
                active.share.trace.push(next);
                if !active.share.in_flight() {
                    return;
                }
                if active.share.counter == 0 {
                    match routing::min_hop_route(next, active.share.destination, &self.topology) {
                        Some(path) => active.route = Some(MinHopRoute { path, pos: 0 }),
                        None => {
                            active.share.status =
                                ShareStatus::Dropped(DropReason::Disconnected);
                        }
                    }
                }
            }
            StepDecision::Drop(reason) => {
                active.share.status = ShareStatus::Dropped(reason);
            }
        }
    }

    fn deliver(&mut self, active: &mut ActiveShare) {
        active.share.status = ShareStatus::Delivered;
        // hop budget sanity: random hops are capped by the counter and the
        // min-hop phase follows the committed path
        debug_assert!(
            active.share.trace.len() - 1
                <= self.config.counter as usize
                    + active.route.as_ref().map_or(0, |r| r.path.len() - 1)
        );
        let record = &mut self.messages[active.share.message.0 as usize];
        record.delivered.insert(active.share.index);
        if record.reconstructed_round.is_none()
            && record.delivered.len() >= self.config.coding.k
        {
            record.reconstructed_round = Some(self.round);
        }
    }

    fn finalize_share(&mut self, active: &mut ActiveShare) {
        match active.share.status {
            ShareStatus::Delivered => self.metrics.shares_delivered += 1,
            ShareStatus::Intercepted => self.metrics.shares_intercepted += 1,
            ShareStatus::Dropped(reason) => self.metrics.drops.record(reason),
            ShareStatus::InFlight => unreachable!("finalize requires a terminal status"),
        }
        let trace = &active.share.trace;
        let mut seen: Vec<NodeId> = trace.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != trace.len() {
            self.metrics.revisit_traces += 1;
        }
    }

    fn log_hop(&mut self, share: &Share, from: NodeId, to: NodeId, phase: Phase) {
        if let Some(log) = self.log.as_mut() {
            log.hops.push(HopRecord {
                message: share.message,
                share_index: share.index,
                from,
                to,
                counter: share.counter,
                phase,
            });
        }
    }

    pub fn into_results(self) -> (RunMetrics, Option<RunLog>) {
        (self.metrics, self.log)
    }
}

/// Draws the per-run message schedule: injection rounds uniform over the
/// first half of the simulation, source/destination pairs uniform over
/// ordered cross-domain pairs of non-compromised nodes (falling back to
/// any distinct pair when every eligible node shares a domain).
fn build_schedule(
    config: &ScenarioConfig,
    topology: &Topology,
    rng: &mut SimRng,
) -> Result<Vec<ScheduledMessage>> {
    use rand::Rng;
    if config.messages_per_run == 0 {
        return Ok(Vec::new());
    }
    let eligible: Vec<NodeId> = topology
        .nodes
        .iter()
        .filter(|n| !n.compromised)
        .map(|n| n.id)
        .collect();
    if eligible.len() < 2 {
        return Err(Error::config("no eligible source/destination pair"));
    }
    let first_domain = topology.domain_of(eligible[0]);
    let cross_domain_possible = eligible
        .iter()
        .any(|&v| topology.domain_of(v) != first_domain);
    let horizon = config.sim_rounds / 2;
    let mut schedule = Vec::with_capacity(config.messages_per_run as usize);
    for _ in 0..config.messages_per_run {
        let round = rng.random_range(0..=horizon);
        let (source, destination) = loop {
            let a = eligible[rng.random_range(0..eligible.len())];
            let b = eligible[rng.random_range(0..eligible.len())];
            if a == b {
                continue;
            }
            if cross_domain_possible && topology.domain_of(a) == topology.domain_of(b) {
                continue;
            }
            break (a, b);
        };
        schedule.push(ScheduledMessage {
            round,
            source,
            destination,
        });
    }
    schedule.sort_by_key(|s| s.round);
    Ok(schedule)
}

/// Executes run `run_index` of the scenario with its derived seed.
pub fn simulate_run(
    config: &ScenarioConfig,
    run_index: u32,
    collect_log: bool,
) -> Result<(RunMetrics, Option<RunLog>)> {
    let seed = rng::derive_seed(config.seed, u64::from(run_index));
    let mut run = SimulationRun::new(config, seed, collect_log)?;
    run.run_to_completion()?;
    Ok(run.into_results())
}

/// Runs all configured runs sequentially and aggregates the report.
/// Sweeps parallelize at the (cell, run) level instead; both paths give
/// identical results because every run's seed is derived from its index.
pub fn run_simulation(config: &ScenarioConfig) -> Result<MetricsReport> {
    let per_run: Result<Vec<RunMetrics>> = (0..config.runs)
        .map(|i| simulate_run(config, i, false).map(|(m, _)| m))
        .collect();
    Ok(aggregate(
        config.policy,
        config.compromise_fraction,
        &per_run?,
    ))
}
