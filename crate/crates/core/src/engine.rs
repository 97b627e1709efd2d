//! Slotted rendezvous engine.
//!
//! Time advances in 1 s timeslots split into two 0.5 s half-slots. In each
//! half-slot every participating node tunes to the channel its strategy
//! picks and senses it at the half-slot start; nodes on busy channels sit
//! the half-slot out. Idle nodes sharing a channel form clusters (connected
//! components of the topology restricted to those nodes), and each cluster
//! hosts at most one handshake. A node alone on its channel that still has
//! discovering to do broadcasts an unanswered D-REQ.
//!
//! A node completes once it knows all other N-1 nodes and holds no
//! unconfirmed direct link. Completed nodes keep hopping and answering but
//! stop initiating (see [`CompletionPolicy`]).

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::activity::{make_profile, ActivityClass, ActivityRates, ChannelProcess, ChannelState};
use crate::error::{Error, Result};
use crate::handshake::{run_handshake, HandshakeKind, MessageKind, NeighborTables, NodeId};
use crate::protocols::{Half, ProtocolKind, Strategy};
use crate::seed::{self, SimRng};
use crate::spectrum::{assign_channels, ChannelId, ChannelMode, SpectrumMap};
use crate::topology::{generate_topology, Topology, TopologyParams, DEFAULT_ATTEMPT_BUDGET};

pub const SLOT_SECONDS: f64 = 1.0;
pub const HALF_SLOT_SECONDS: f64 = SLOT_SECONDS / 2.0;
pub const DEFAULT_MAX_SLOTS: u64 = 100_000;

/// What a node does after completing discovery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompletionPolicy {
    /// Keeps initiating like an incomplete node whenever it holds an
    /// unconfirmed link.
    Active,
    /// Keeps hopping and answering, never initiates.
    ResponderOnly,
    /// Stops hopping altogether.
    Silent,
}

impl fmt::Display for CompletionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompletionPolicy::Active => "active",
            CompletionPolicy::ResponderOnly => "responder-only",
            CompletionPolicy::Silent => "silent",
        })
    }
}

impl FromStr for CompletionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "active" => Ok(CompletionPolicy::Active),
            "responder-only" | "responder" => Ok(CompletionPolicy::ResponderOnly),
            "silent" => Ok(CompletionPolicy::Silent),
            _ => Err(Error::invalid(format!("unknown completion policy '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub nodes: usize,
    pub width: f64,
    pub height: f64,
    pub range: f64,
    /// Channels available to each node (the whole pool when symmetric).
    pub channels: usize,
    pub mode: ChannelMode,
    /// Global channel pool for asymmetric assignments; defaults to
    /// `2 * channels` so nodes keep `channels` channels each while sharing
    /// only `m` of them.
    #[serde(default)]
    pub pool: Option<usize>,
    pub activity: ActivityClass,
    /// Replaces the table-derived per-channel rates when set.
    pub rates: Option<Vec<ActivityRates>>,
    pub protocol: ProtocolKind,
    pub handshake: HandshakeKind,
    pub max_slots: u64,
    pub completion: CompletionPolicy,
    /// Slots a completed M-EMCA node keeps answering before going silent.
    pub termination_window: Option<u64>,
    pub overhearing: bool,
    pub gate_unconfirmed: bool,
    pub topology_attempts: u32,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            nodes: 3,
            width: 1000.0,
            height: 1000.0,
            range: 100.0,
            channels: 10,
            mode: ChannelMode::Symmetric,
            pool: None,
            activity: ActivityClass::Zero,
            rates: None,
            protocol: ProtocolKind::Mdmca,
            handshake: HandshakeKind::ThreeWay,
            max_slots: DEFAULT_MAX_SLOTS,
            completion: CompletionPolicy::ResponderOnly,
            termination_window: None,
            overhearing: false,
            gate_unconfirmed: false,
            topology_attempts: DEFAULT_ATTEMPT_BUDGET,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 {
            return Err(Error::invalid("scenario needs at least one node"));
        }
        if self.channels == 0 {
            return Err(Error::invalid("scenario needs at least one channel"));
        }
        if self.max_slots == 0 {
            return Err(Error::invalid("max_slots must be at least 1"));
        }
        match (self.mode, self.pool) {
            (ChannelMode::Symmetric, Some(p)) if p != self.channels => {
                return Err(Error::invalid(format!(
                    "symmetric scenario with {} channels cannot use a pool of {p}",
                    self.channels
                )));
            }
            (ChannelMode::Asymmetric { m, k }, _) => {
                let k = k.unwrap_or(self.channels);
                if m == 0 || m > k || k > self.channels {
                    return Err(Error::invalid(format!(
                        "asymmetric mode needs 1 <= m <= k <= C, got m={m} k={k} C={}",
                        self.channels
                    )));
                }
                if self.pool_size() < self.channels {
                    return Err(Error::invalid("channel pool smaller than the per-node set"));
                }
            }
            _ => {}
        }
        if let Some(rates) = &self.rates {
            if rates.len() != self.pool_size() {
                return Err(Error::invalid(format!(
                    "{} rate pairs given for a pool of {} channels",
                    rates.len(),
                    self.pool_size()
                )));
            }
            for r in rates {
                r.validate()?;
            }
        }
        Ok(())
    }

    pub fn channel_rates(&self) -> Vec<ActivityRates> {
        match &self.rates {
            Some(r) => r.clone(),
            None => make_profile(self.activity, self.pool_size()),
        }
    }

    /// Number of distinct channel IDs in play.
    pub fn pool_size(&self) -> usize {
        match self.mode {
            ChannelMode::Symmetric => self.channels,
            ChannelMode::Asymmetric { .. } => self.pool.unwrap_or(2 * self.channels),
        }
    }

    /// Channel mode with the per-node set size filled in: `channels`, or
    /// `m` for a lone node (whose set is the common core by definition).
    pub fn resolved_mode(&self) -> ChannelMode {
        match self.mode {
            ChannelMode::Asymmetric { m, k } => ChannelMode::Asymmetric {
                m,
                k: Some(k.unwrap_or(if self.nodes == 1 { m } else { self.channels })),
            },
            sym => sym,
        }
    }

    pub fn topology_params(&self) -> TopologyParams {
        TopologyParams {
            nodes: self.nodes,
            width: self.width,
            height: self.height,
            range: self.range,
            attempts: self.topology_attempts,
        }
    }
}

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    /// Per-node time to rendezvous in half-slots; censored nodes carry
    /// `2 * max_slots`.
    pub ttr_half_slots: Vec<u64>,
    pub censored: Vec<bool>,
    /// Total transmissions, lone broadcasts included.
    pub packets: u64,
    /// Completed handshakes.
    pub successes: u64,
    /// Unanswered D-REQ broadcasts (already counted in `packets`).
    pub lone_requests: u64,
    pub half_slots: u64,
}

impl RunRecord {
    pub fn node_count(&self) -> usize {
        self.ttr_half_slots.len()
    }

    /// Mean over nodes, in slots.
    pub fn mean_ttr_slots(&self) -> f64 {
        if self.ttr_half_slots.is_empty() {
            return 0.0;
        }
        let sum: u64 = self.ttr_half_slots.iter().sum();
        sum as f64 / self.ttr_half_slots.len() as f64 / 2.0
    }

    pub fn ppr(&self) -> Option<f64> {
        (self.successes > 0).then(|| self.packets as f64 / self.successes as f64)
    }

    pub fn censored_count(&self) -> usize {
        self.censored.iter().filter(|&&c| c).count()
    }
}

/// Source of the engine's uniform choices (initiator election and responder
/// tie-breaks).
pub trait Chooser {
    /// Uniform index in `0..n`, `n >= 1`.
    fn choose(&mut self, n: usize) -> usize;
}

impl<R: Rng> Chooser for R {
    fn choose(&mut self, n: usize) -> usize {
        self.random_range(0..n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceKind {
    Tune,
    Message(MessageKind),
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceKind::Tune => f.write_str("TUNE"),
            TraceKind::Message(k) => k.fmt(f),
        }
    }
}

/// One line of the per-half-slot trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub slot: u64,
    pub half: Half,
    pub channel: ChannelId,
    pub kind: TraceKind,
    pub sender: NodeId,
    pub receiver: Option<NodeId>,
    pub tuned_channel: ChannelId,
    pub pr_state: ChannelState,
}

pub const TRACE_HEADER: &str = "slot,half,channel,kind,sender,receiver,tuned_channel,pr_state";

impl TraceRow {
    pub fn to_csv_line(&self) -> String {
        let receiver = self.receiver.map(|r| r.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.slot,
            self.half,
            self.channel,
            self.kind,
            self.sender,
            receiver,
            self.tuned_channel,
            self.pr_state
        )
    }
}

pub fn write_trace<W: Write>(rows: &[TraceRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv_line())?;
    }
    Ok(())
}

/// What happened in one half-slot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HalfSlotEvents {
    pub handshakes: u64,
    pub packets: u64,
    pub lone_requests: u64,
    pub busy_nodes: Vec<NodeId>,
    pub completed: Vec<NodeId>,
}

#[derive(Debug, Clone)]
struct NodeState {
    tables: NeighborTables,
    strategy: Strategy,
    rng: SimRng,
    completed_at: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    scenario: Scenario,
    seed: u64,
    topology: Topology,
    spectrum: SpectrumMap,
    processes: Vec<ChannelProcess>,
    nodes: Vec<NodeState>,
    election: Option<SimRng>,
    slot: u64,
    half: Half,
    packets: u64,
    successes: u64,
    lone_requests: u64,
    trace: Option<Vec<TraceRow>>,
}

impl Simulation {
    /// Builds a run: topology, channel sets, PR processes and strategies all
    /// come from labeled substreams of `run_seed`.
    pub fn new(scenario: Scenario, run_seed: u64) -> Result<Self> {
        scenario.validate()?;
        let topology = generate_topology(
            &scenario.topology_params(),
            &mut seed::stream(run_seed, "topology", 0),
        )?;
        let spectrum = assign_channels(
            scenario.nodes,
            scenario.pool_size(),
            scenario.resolved_mode(),
            &mut seed::stream(run_seed, "channels", 0),
        )?;
        Self::with_parts(scenario, topology, spectrum, run_seed)
    }

    /// Builds a run over a given topology and channel assignment.
    pub fn with_parts(
        scenario: Scenario,
        topology: Topology,
        spectrum: SpectrumMap,
        run_seed: u64,
    ) -> Result<Self> {
        scenario.validate()?;
        let n = topology.node_count();
        if n != scenario.nodes || spectrum.nodes.len() != n {
            return Err(Error::invalid(format!(
                "scenario has {} nodes, topology {}, spectrum {}",
                scenario.nodes,
                n,
                spectrum.nodes.len()
            )));
        }
        if spectrum.pool_size != scenario.pool_size() {
            return Err(Error::invalid("spectrum pool size differs from scenario"));
        }
        let processes = scenario
            .channel_rates()
            .into_iter()
            .enumerate()
            .map(|(i, rates)| ChannelProcess::for_run(run_seed, i as ChannelId + 1, rates))
            .collect::<Result<Vec<_>>>()?;
        let nodes = (0..n)
            .map(|id| {
                let mut rng = seed::stream(run_seed, "strategy", id as u64);
                let strategy = Strategy::new(scenario.protocol, spectrum.node(id), &mut rng)?;
                Ok(NodeState {
                    tables: NeighborTables::new(id),
                    strategy,
                    rng,
                    completed_at: (n == 1).then_some(0),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Simulation {
            scenario,
            seed: run_seed,
            topology,
            spectrum,
            processes,
            nodes,
            election: Some(seed::stream(run_seed, "election", 0)),
            slot: 1,
            half: Half::First,
            packets: 0,
            successes: 0,
            lone_requests: 0,
            trace: None,
        })
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> Option<&[TraceRow]> {
        self.trace.as_deref()
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn spectrum(&self) -> &SpectrumMap {
        &self.spectrum
    }

    pub fn tables(&self, node: NodeId) -> &NeighborTables {
        &self.nodes[node].tables
    }

    pub fn completed_at(&self, node: NodeId) -> Option<u64> {
        self.nodes[node].completed_at
    }

    pub fn packets(&self) -> u64 {
        self.packets
    }

    pub fn successes(&self) -> u64 {
        self.successes
    }

    /// Slot and half of the next half-slot to execute.
    pub fn clock(&self) -> (u64, Half) {
        (self.slot, self.half)
    }

    /// Half-slots executed so far.
    pub fn elapsed_half_slots(&self) -> u64 {
        2 * (self.slot - 1) + u64::from(self.half == Half::Second)
    }

    pub fn all_complete(&self) -> bool {
        self.nodes.iter().all(|n| n.completed_at.is_some())
    }

    pub fn finished(&self) -> bool {
        self.all_complete() || self.slot > self.scenario.max_slots
    }

    fn is_complete_now(&self, node: &NodeState) -> bool {
        node.tables.knowledge_len() + 1 == self.nodes.len() && !node.tables.has_unconfirmed()
    }

    /// Whether a node takes part in the current half-slot at all.
    fn participates(&self, node: &NodeState, now: u64) -> bool {
        let Some(done) = node.completed_at else {
            return true;
        };
        match self.scenario.completion {
            CompletionPolicy::Silent => false,
            CompletionPolicy::Active => true,
            CompletionPolicy::ResponderOnly => {
                match (self.scenario.protocol, self.scenario.termination_window) {
                    (ProtocolKind::Memca, Some(window)) => now <= done + 2 * window,
                    _ => true,
                }
            }
        }
    }

    fn may_initiate(&self, node: &NodeState) -> bool {
        match node.completed_at {
            None => true,
            Some(_) => {
                self.scenario.completion == CompletionPolicy::Active
                    && node.tables.has_unconfirmed()
            }
        }
    }

    pub fn step(&mut self) -> Result<HalfSlotEvents> {
        let mut chooser = self.election.take().expect("election stream present");
        let out = self.step_with(&mut chooser);
        self.election = Some(chooser);
        out
    }

    /// Executes one half-slot, drawing election outcomes from `chooser`.
    pub fn step_with<C: Chooser + ?Sized>(&mut self, chooser: &mut C) -> Result<HalfSlotEvents> {
        let mut events = HalfSlotEvents::default();
        if self.finished() {
            return Ok(events);
        }
        let slot = self.slot;
        let half = self.half;
        let now = 2 * slot - u64::from(half == Half::First);
        let t = (slot - 1) as f64 * SLOT_SECONDS
            + if half == Half::Second {
                HALF_SLOT_SECONDS
            } else {
                0.0
            };

        // tune and sense
        let mut by_channel: BTreeMap<ChannelId, Vec<NodeId>> = BTreeMap::new();
        let mut pr_cache: BTreeMap<ChannelId, ChannelState> = BTreeMap::new();
        for id in 0..self.nodes.len() {
            if !self.participates(&self.nodes[id], now) {
                continue;
            }
            let node = &mut self.nodes[id];
            let ch = node
                .strategy
                .select(self.spectrum.node(id), half, &mut node.rng)?;
            let process = &mut self.processes[ch as usize - 1];
            let state = *pr_cache.entry(ch).or_insert_with(|| process.state_at(t));
            if let Some(trace) = &mut self.trace {
                trace.push(TraceRow {
                    slot,
                    half,
                    channel: ch,
                    kind: TraceKind::Tune,
                    sender: id,
                    receiver: None,
                    tuned_channel: ch,
                    pr_state: state,
                });
            }
            match state {
                ChannelState::On => events.busy_nodes.push(id),
                ChannelState::Off => by_channel.entry(ch).or_default().push(id),
            }
        }

        for (&ch, tuned) in &by_channel {
            for cluster in self.clusters(tuned) {
                self.resolve_cluster(ch, &cluster, slot, half, chooser, &mut events);
            }
        }

        for id in 0..self.nodes.len() {
            if self.nodes[id].completed_at.is_none() && self.is_complete_now(&self.nodes[id]) {
                self.nodes[id].completed_at = Some(now);
                events.completed.push(id);
            }
        }

        self.packets += events.packets;
        self.successes += events.handshakes;
        self.lone_requests += events.lone_requests;
        match half {
            Half::First => self.half = Half::Second,
            Half::Second => {
                self.half = Half::First;
                self.slot += 1;
            }
        }
        Ok(events)
    }

    /// Connected components of the topology restricted to `tuned`, each
    /// listed in ascending node order, ordered by smallest member.
    fn clusters(&self, tuned: &[NodeId]) -> Vec<Vec<NodeId>> {
        let mut assigned = vec![false; tuned.len()];
        let mut out = Vec::new();
        for start in 0..tuned.len() {
            if assigned[start] {
                continue;
            }
            assigned[start] = true;
            let mut members = vec![start];
            let mut head = 0;
            while head < members.len() {
                let u = tuned[members[head]];
                head += 1;
                for (k, &v) in tuned.iter().enumerate() {
                    if !assigned[k] && self.topology.adjacent(u, v) {
                        assigned[k] = true;
                        members.push(k);
                    }
                }
            }
            let mut ids: Vec<NodeId> = members.into_iter().map(|k| tuned[k]).collect();
            ids.sort_unstable();
            out.push(ids);
        }
        out
    }

    fn resolve_cluster<C: Chooser + ?Sized>(
        &mut self,
        ch: ChannelId,
        cluster: &[NodeId],
        slot: u64,
        half: Half,
        chooser: &mut C,
        events: &mut HalfSlotEvents,
    ) {
        if let [only] = cluster {
            if self.nodes[*only].completed_at.is_none() {
                events.packets += 1;
                events.lone_requests += 1;
                self.record(slot, half, ch, MessageKind::DReq, *only, None);
            }
            return;
        }
        let eligible: Vec<NodeId> = cluster
            .iter()
            .copied()
            .filter(|&id| self.may_initiate(&self.nodes[id]))
            .collect();
        if eligible.is_empty() {
            return;
        }
        let initiator = eligible[pick(chooser, eligible.len())];
        let in_range: Vec<NodeId> = cluster
            .iter()
            .copied()
            .filter(|&v| v != initiator && self.topology.adjacent(initiator, v))
            .collect();
        let tables = &self.nodes[initiator].tables;
        let tier = |peer: NodeId| {
            if !tables.direct().contains(&peer) {
                0
            } else if !tables.is_confirmed(peer) {
                1
            } else {
                2
            }
        };
        let best = in_range
            .iter()
            .map(|&v| tier(v))
            .min()
            .expect("cluster is connected");
        let preferred: Vec<NodeId> = in_range.into_iter().filter(|&v| tier(v) == best).collect();
        let responder = preferred[pick(chooser, preferred.len())];

        let request = self.scenario.overhearing.then(|| {
            self.nodes[initiator]
                .tables
                .snapshot(MessageKind::DReq, self.scenario.gate_unconfirmed)
        });
        let (a, b) = pair_mut(&mut self.nodes, initiator, responder);
        let transcript = run_handshake(
            self.scenario.handshake,
            &mut a.tables,
            &mut b.tables,
            self.scenario.gate_unconfirmed,
        );
        if let Some(req) = request {
            for &v in cluster {
                if v != initiator && v != responder && self.topology.adjacent(initiator, v) {
                    self.nodes[v].tables.overhear(&req);
                }
            }
        }
        events.handshakes += transcript.successful;
        events.packets += transcript.packets();
        for m in &transcript.messages {
            self.record(slot, half, ch, m.kind, m.sender, m.receiver);
        }
    }

    fn record(
        &mut self,
        slot: u64,
        half: Half,
        channel: ChannelId,
        kind: MessageKind,
        sender: NodeId,
        receiver: Option<NodeId>,
    ) {
        if let Some(trace) = &mut self.trace {
            trace.push(TraceRow {
                slot,
                half,
                channel,
                kind: TraceKind::Message(kind),
                sender,
                receiver,
                tuned_channel: channel,
                pr_state: ChannelState::Off,
            });
        }
    }

    /// Steps until every node completes or the slot budget runs out.
    pub fn run_to_end(&mut self) -> Result<RunRecord> {
        while !self.finished() {
            self.step()?;
        }
        Ok(self.record_outcome())
    }

    /// Like [`run_to_end`](Self::run_to_end) with an external chooser.
    pub fn run_to_end_with<C: Chooser + ?Sized>(&mut self, chooser: &mut C) -> Result<RunRecord> {
        while !self.finished() {
            self.step_with(chooser)?;
        }
        Ok(self.record_outcome())
    }

    pub fn record_outcome(&self) -> RunRecord {
        let cap = 2 * self.scenario.max_slots;
        RunRecord {
            seed: self.seed,
            ttr_half_slots: self
                .nodes
                .iter()
                .map(|n| n.completed_at.unwrap_or(cap))
                .collect(),
            censored: self
                .nodes
                .iter()
                .map(|n| n.completed_at.is_none())
                .collect(),
            packets: self.packets,
            successes: self.successes,
            lone_requests: self.lone_requests,
            half_slots: self.elapsed_half_slots(),
        }
    }
}

fn pick<C: Chooser + ?Sized>(chooser: &mut C, n: usize) -> usize {
    if n == 1 {
        0
    } else {
        chooser.choose(n)
    }
}

fn pair_mut<T>(v: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    assert_ne!(a, b);
    if a < b {
        let (lo, hi) = v.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = v.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}

/// Runs `scenario` once under `run_seed`.
pub fn run(scenario: &Scenario, run_seed: u64) -> Result<RunRecord> {
    Simulation::new(scenario.clone(), run_seed)?.run_to_end()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::NodeChannels;
    use crate::topology::Position;

    fn line(n: usize, gap: f64) -> Topology {
        let pos = (0..n)
            .map(|i| Position {
                x: i as f64 * gap,
                y: 0.0,
            })
            .collect();
        Topology::from_positions(pos, 100.0).unwrap()
    }

    fn fixed_spectrum(n: usize, pool: usize, set: &[ChannelId]) -> SpectrumMap {
        SpectrumMap {
            pool_size: pool,
            nodes: vec![NodeChannels::new(set.iter().copied()); n],
        }
    }

    fn scenario(n: usize, pool: usize, hs: HandshakeKind) -> Scenario {
        Scenario {
            nodes: n,
            channels: pool,
            handshake: hs,
            ..Scenario::default()
        }
    }

    #[test]
    fn two_nodes_single_channel_three_way() {
        let sc = scenario(2, 10, HandshakeKind::ThreeWay);
        let mut sim =
            Simulation::with_parts(sc, line(2, 50.0), fixed_spectrum(2, 10, &[4]), 1).unwrap();
        let rec = sim.run_to_end().unwrap();
        assert_eq!(rec.ttr_half_slots, vec![1, 1]);
        assert_eq!((rec.packets, rec.successes), (3, 1));
        assert_eq!(rec.ppr(), Some(3.0));
        assert_eq!(rec.mean_ttr_slots(), 0.5);
    }

    #[test]
    fn two_nodes_single_channel_two_way() {
        let sc = scenario(2, 10, HandshakeKind::TwoWay);
        let mut sim =
            Simulation::with_parts(sc, line(2, 50.0), fixed_spectrum(2, 10, &[4]), 1).unwrap();
        let rec = sim.run_to_end().unwrap();
        // the responder completes only after closing its link from its side
        let mut ttr = rec.ttr_half_slots.clone();
        ttr.sort_unstable();
        assert_eq!(ttr, vec![1, 2]);
        assert_eq!((rec.packets, rec.successes), (4, 2));
        assert_eq!(rec.ppr(), Some(2.0));
    }

    #[test]
    fn single_node_finishes_immediately() {
        let rec = run(&scenario(1, 10, HandshakeKind::ThreeWay), 3).unwrap();
        assert_eq!(rec.ttr_half_slots, vec![0]);
        assert_eq!(rec.packets, 0);
        assert_eq!(rec.half_slots, 0);
    }

    #[test]
    fn one_handshake_per_cluster() {
        let sc = scenario(3, 1, HandshakeKind::ThreeWay);
        let tri = Topology::from_positions(
            vec![
                Position { x: 0.0, y: 0.0 },
                Position { x: 10.0, y: 0.0 },
                Position { x: 0.0, y: 10.0 },
            ],
            100.0,
        )
        .unwrap();
        let mut sim = Simulation::with_parts(sc, tri, fixed_spectrum(3, 1, &[1]), 5).unwrap();
        let ev = sim.step().unwrap();
        assert_eq!(ev.handshakes, 1);
        assert_eq!(ev.packets, 3);
    }

    #[test]
    fn busy_channel_silences_nodes() {
        let mut sc = scenario(2, 1, HandshakeKind::ThreeWay);
        // OFF mean 1e-6 s, ON mean 1e6 s: busy right after t = 0
        sc.rates = Some(vec![ActivityRates::new(1e-6, 1e6).unwrap()]);
        let mut sim =
            Simulation::with_parts(sc, line(2, 500.0), fixed_spectrum(2, 1, &[1]), 2).unwrap();
        let first = sim.step().unwrap();
        assert_eq!(first.lone_requests, 2);
        let second = sim.step().unwrap();
        assert_eq!(second.packets, 0);
        assert_eq!(second.busy_nodes, vec![0, 1]);
    }

    #[test]
    fn no_packets_on_busy_channels() {
        let mut sc = scenario(4, 10, HandshakeKind::TwoWay);
        sc.activity = ActivityClass::Mix;
        sc.width = 150.0;
        sc.height = 150.0;
        sc.max_slots = 300;
        let mut sim = Simulation::new(sc, 77).unwrap();
        sim.enable_trace();
        sim.run_to_end().unwrap();
        let trace = sim.trace().unwrap();
        let mut busy: std::collections::HashSet<(u64, Half, ChannelId)> = Default::default();
        for r in trace {
            if r.kind == TraceKind::Tune && r.pr_state == ChannelState::On {
                busy.insert((r.slot, r.half, r.channel));
            }
        }
        assert!(!busy.is_empty());
        for r in trace {
            if let TraceKind::Message(_) = r.kind {
                assert!(!busy.contains(&(r.slot, r.half, r.channel)));
            }
        }
    }

    #[test]
    fn lone_request_counted() {
        // out of range of each other: both broadcast alone every half-slot
        let sc = Scenario {
            max_slots: 3,
            ..scenario(2, 1, HandshakeKind::ThreeWay)
        };
        let far = line(2, 500.0);
        let mut sim = Simulation::with_parts(sc, far, fixed_spectrum(2, 1, &[1]), 0).unwrap();
        let rec = sim.run_to_end().unwrap();
        assert_eq!(rec.successes, 0);
        assert_eq!(rec.packets, 12);
        assert_eq!(rec.lone_requests, 12);
        assert_eq!(rec.censored, vec![true, true]);
        assert_eq!(rec.ttr_half_slots, vec![6, 6]);
        assert_eq!(rec.ppr(), None);
    }

    #[test]
    fn completed_nodes_never_initiate() {
        let sc = Scenario {
            max_slots: 200,
            ..scenario(3, 1, HandshakeKind::ThreeWay)
        };
        let mut sim =
            Simulation::with_parts(sc, line(3, 80.0), fixed_spectrum(3, 1, &[1]), 9).unwrap();
        sim.enable_trace();
        sim.run_to_end().unwrap();
        let done: Vec<u64> = (0..3).map(|i| sim.completed_at(i).unwrap()).collect();
        for r in sim.trace().unwrap() {
            if r.kind == TraceKind::Message(MessageKind::DReq) {
                let at = 2 * r.slot - u64::from(r.half == Half::First);
                assert!(
                    at <= done[r.sender],
                    "node {} initiated after completing",
                    r.sender
                );
            }
        }
    }

    #[test]
    fn silent_policy_can_strand_the_chain() {
        // middle node completes first in many runs, then nobody answers the ends
        let mut stranded = 0;
        for seed in 0..40 {
            let sc = Scenario {
                max_slots: 50,
                completion: CompletionPolicy::Silent,
                ..scenario(3, 1, HandshakeKind::ThreeWay)
            };
            let mut sim =
                Simulation::with_parts(sc, line(3, 80.0), fixed_spectrum(3, 1, &[1]), seed)
                    .unwrap();
            let rec = sim.run_to_end().unwrap();
            stranded += usize::from(rec.censored_count() > 0);
        }
        assert!(stranded > 0);
    }

    #[test]
    fn memca_window_silences_after_expiry() {
        let sc = Scenario {
            max_slots: 400,
            protocol: ProtocolKind::Memca,
            termination_window: Some(0),
            ..scenario(3, 1, HandshakeKind::ThreeWay)
        };
        let base = Scenario {
            termination_window: None,
            ..sc.clone()
        };
        let mut censored_with_window = 0;
        let mut censored_without = 0;
        for seed in 0..40 {
            let mut a =
                Simulation::with_parts(sc.clone(), line(3, 80.0), fixed_spectrum(3, 1, &[1]), seed)
                    .unwrap();
            let mut b = Simulation::with_parts(
                base.clone(),
                line(3, 80.0),
                fixed_spectrum(3, 1, &[1]),
                seed,
            )
            .unwrap();
            censored_with_window += a.run_to_end().unwrap().censored_count();
            censored_without += b.run_to_end().unwrap().censored_count();
        }
        assert_eq!(censored_without, 0);
        assert!(censored_with_window > 0);
    }

    #[test]
    fn deterministic_records() {
        let sc = Scenario {
            nodes: 5,
            width: 200.0,
            height: 200.0,
            activity: ActivityClass::High,
            handshake: HandshakeKind::TwoWay,
            ..Scenario::default()
        };
        assert_eq!(run(&sc, 42).unwrap(), run(&sc, 42).unwrap());
    }

    #[test]
    fn asymmetric_layout_keeps_per_node_size() {
        for m in [9, 5, 2] {
            let sc = Scenario {
                nodes: 4,
                width: 150.0,
                height: 150.0,
                mode: ChannelMode::Asymmetric { m, k: None },
                ..Scenario::default()
            };
            assert_eq!(sc.pool_size(), 20);
            for seed in 0..100 {
                let sim = Simulation::new(sc.clone(), seed).unwrap();
                assert_eq!(sim.spectrum().pool_size, 20);
                assert_eq!(sim.spectrum().common().len(), m);
                assert!(sim.spectrum().nodes.iter().all(|n| n.len() == 10));
            }
        }
    }

    #[test]
    fn asymmetric_single_node_keeps_core_only() {
        let sc = Scenario {
            nodes: 1,
            mode: ChannelMode::Asymmetric { m: 3, k: None },
            ..Scenario::default()
        };
        let sim = Simulation::new(sc, 7).unwrap();
        assert_eq!(sim.spectrum().node(0).len(), 3);
    }

    #[test]
    fn scenario_validation() {
        let bad = [
            Scenario {
                mode: ChannelMode::Asymmetric { m: 11, k: None },
                ..Scenario::default()
            },
            Scenario {
                mode: ChannelMode::Asymmetric { m: 2, k: Some(12) },
                ..Scenario::default()
            },
            Scenario {
                pool: Some(12),
                ..Scenario::default()
            },
            Scenario {
                mode: ChannelMode::Asymmetric { m: 2, k: None },
                pool: Some(8),
                ..Scenario::default()
            },
            Scenario {
                rates: Some(vec![ActivityRates::new(1.0, 0.0).unwrap(); 10]),
                mode: ChannelMode::Asymmetric { m: 2, k: None },
                ..Scenario::default()
            },
        ];
        for sc in bad {
            assert!(sc.validate().is_err(), "{sc:?}");
        }
        let sc = Scenario {
            mode: ChannelMode::Asymmetric { m: 2, k: Some(6) },
            pool: Some(10),
            ..Scenario::default()
        };
        sc.validate().unwrap();
        assert_eq!(sc.pool_size(), 10);
    }

    #[test]
    fn trace_csv_format() {
        let sc = scenario(2, 10, HandshakeKind::ThreeWay);
        let mut sim =
            Simulation::with_parts(sc, line(2, 50.0), fixed_spectrum(2, 10, &[4]), 1).unwrap();
        sim.enable_trace();
        sim.run_to_end().unwrap();
        let mut buf = Vec::new();
        write_trace(sim.trace().unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER);
        assert_eq!(lines[1], "1,1,4,TUNE,0,,4,OFF");
        assert!(lines.iter().any(|l| l.starts_with("1,1,4,D-RESP,")));
        assert_eq!(lines.len(), 1 + 2 + 3);
    }
}
