//! Rumor spreading over public graph families, using the coin's adaptive
//! inquiry-response schedule with rumor sets in place of registers.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coin::CoinParams;
use crate::error::SimError;
use crate::exchange::{ceil_log2, Carry, Exchange, Neighbors, Packed, Wire};
use crate::graph::sample_gnp_with;
use crate::message::{Delivery, MessageIntent, Payload, ProcessId, ProcessSnapshot, Status};
use crate::rng::{split_rng, Tag, PUBLIC_OWNER};
use crate::sim::{run_simulation, Adversary, EngineConfig, Protocol};
use crate::transcript::Transcript;

/// A pair of counters: processes preferring 1 and processes preferring 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tally {
    pub ones: u32,
    pub zeros: u32,
}

impl Tally {
    pub fn of_bit(b: u8) -> Self {
        if b == 1 {
            Tally { ones: 1, zeros: 0 }
        } else {
            Tally { ones: 0, zeros: 1 }
        }
    }

    pub fn total(self) -> u32 {
        self.ones + self.zeros
    }

    pub fn max(self, other: Tally) -> Tally {
        Tally {
            ones: self.ones.max(other.ones),
            zeros: self.zeros.max(other.zeros),
        }
    }

    pub fn add(self, other: Tally) -> Tally {
        Tally {
            ones: self.ones + other.ones,
            zeros: self.zeros + other.zeros,
        }
    }
}

/// At most one rumor per group key, kept sorted by key.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RumorSet {
    entries: Vec<(u32, Tally)>,
}

impl RumorSet {
    pub fn new() -> Self {
        RumorSet::default()
    }

    pub fn single(key: u32, value: Tally) -> Self {
        RumorSet {
            entries: vec![(key, value)],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: u32) -> Option<Tally> {
        self.entries
            .binary_search_by_key(&key, |e| e.0)
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, Tally)> + '_ {
        self.entries.iter().copied()
    }

    /// Inserts or raises the rumor for `key`; returns whether anything changed.
    pub fn insert(&mut self, key: u32, value: Tally) -> bool {
        match self.entries.binary_search_by_key(&key, |e| e.0) {
            Ok(i) => {
                let merged = self.entries[i].1.max(value);
                let changed = merged != self.entries[i].1;
                self.entries[i].1 = merged;
                changed
            }
            Err(i) => {
                self.entries.insert(i, (key, value));
                true
            }
        }
    }

    /// Merges `other` into `self`; returns whether anything changed.
    pub fn absorb(&mut self, other: &RumorSet) -> bool {
        let mut changed = false;
        for &(k, v) in &other.entries {
            changed |= self.insert(k, v);
        }
        changed
    }

    /// Sum of all known rumors.
    pub fn sum(&self) -> Tally {
        self.entries.iter().fold(Tally::default(), |acc, e| acc.add(e.1))
    }

    pub fn encoded_bits(&self, wire: &Wire) -> u32 {
        self.entries.len() as u32 * (wire.key_bits + wire.value_bits)
    }

    /// FNV-1a over the entries; feeds the transcript digest.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u32| {
            for b in x.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        eat(self.entries.len() as u32);
        for &(k, v) in &self.entries {
            eat(k);
            eat(v.ones);
            eat(v.zeros);
        }
        h
    }
}

/// Group-keyed union keeping the componentwise maximum on shared keys.
pub fn merge_rumors(known: &RumorSet, incoming: &RumorSet) -> RumorSet {
    let mut out = known.clone();
    out.absorb(incoming);
    out
}

/// An immutable rumor set attached to responses, shared between all copies.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SharedRumors {
    set: Arc<RumorSet>,
    #[serde(skip)]
    fingerprint: u64,
}

impl SharedRumors {
    pub fn new(set: RumorSet) -> Self {
        let fingerprint = set.fingerprint();
        SharedRumors {
            set: Arc::new(set),
            fingerprint,
        }
    }

    pub fn set(&self) -> &RumorSet {
        &self.set
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }
}

/// Rumor state of one process, with the last packed copy cached until the
/// set changes.
#[derive(Clone, Debug)]
pub struct RumorCarry {
    set: RumorSet,
    packed: Option<SharedRumors>,
}

impl RumorCarry {
    pub fn new(set: RumorSet) -> Self {
        RumorCarry { set, packed: None }
    }

    pub fn set(&self) -> &RumorSet {
        &self.set
    }

    pub fn into_set(self) -> RumorSet {
        self.set
    }
}

impl Carry for RumorCarry {
    fn pack(&mut self, wire: &Wire) -> Packed {
        let shared = self
            .packed
            .get_or_insert_with(|| SharedRumors::new(self.set.clone()))
            .clone();
        Packed {
            classical_bits: self.set.encoded_bits(wire),
            rumors: Some(shared),
            hidden: None,
            qubits: 0,
        }
    }

    fn absorb(&mut self, delivery: &Delivery) {
        if let Payload::Response { rumors: Some(r), .. } = &delivery.payload {
            if self.set.absorb(r.set()) {
                self.packed = None;
            }
        }
    }
}

/// Public per-level graphs over an ordered member list.
#[derive(Clone, Debug)]
pub struct GossipFamily {
    members: Vec<ProcessId>,
    params: CoinParams,
    wire: Wire,
    /// `levels[i][j]`: neighbors (global ids) of member `j` at level `i`.
    levels: Vec<Vec<Vec<ProcessId>>>,
}

impl GossipFamily {
    /// Samples G(m, min(d * alpha^i / m, 1)) for every level `i` from a
    /// public seed. `groups` is the number of distinct rumor keys.
    pub fn sample(members: Vec<ProcessId>, d: u64, alpha: u64, groups: usize, graph_seed: u64) -> Result<Self, SimError> {
        let m = members.len();
        let params = CoinParams::relaxed(m, d, alpha)?;
        let levels = params
            .level_probabilities()
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let mut rng = split_rng(graph_seed, PUBLIC_OWNER, i as u64, Tag::GOSSIP_GRAPH);
                let g = sample_gnp_with(m, p, &mut rng);
                (0..m)
                    .map(|j| g.neighbors(j).iter().map(|&u| members[u as usize]).collect())
                    .collect()
            })
            .collect();
        let mut wire = params.wire();
        wire.register_qubits = 0;
        wire.key_bits = ceil_log2(groups as u64);
        wire.value_bits = 2 * ceil_log2(m as u64 + 1);
        Ok(GossipFamily {
            members,
            params,
            wire,
            levels,
        })
    }

    pub fn members(&self) -> &[ProcessId] {
        &self.members
    }

    pub fn params(&self) -> &CoinParams {
        &self.params
    }

    pub fn wire(&self) -> &Wire {
        &self.wire
    }

    pub fn rounds(&self) -> u64 {
        self.params.rounds()
    }

    pub fn neighbors(&self, level: usize, local: usize) -> &[ProcessId] {
        &self.levels[level][local]
    }

    /// Index of `p` in the member list.
    pub fn local(&self, p: ProcessId) -> Option<usize> {
        self.members.binary_search(&p).ok()
    }

    pub fn machine(self: &Arc<Self>, p: ProcessId, initial: RumorSet) -> Exchange<RumorCarry> {
        let local = self.local(p).expect("process belongs to the family");
        Exchange::new(
            p,
            self.params,
            self.wire,
            Neighbors::Shared {
                family: Arc::clone(self),
                local,
            },
            RumorCarry::new(initial),
        )
    }
}

/// Standalone gossip among all n processes.
pub struct GossipProtocol {
    family: Arc<GossipFamily>,
    machines: Vec<Exchange<RumorCarry>>,
    round: u64,
}

impl GossipProtocol {
    pub fn new(initial: Vec<RumorSet>, d: u64, alpha: u64, graph_seed: u64) -> Result<Self, SimError> {
        let n = initial.len();
        let groups = initial
            .iter()
            .flat_map(|s| s.iter().map(|(k, _)| k as usize + 1))
            .max()
            .unwrap_or(1);
        let members = (0..n).map(ProcessId::from_index).collect();
        let family = Arc::new(GossipFamily::sample(members, d, alpha, groups, graph_seed)?);
        let machines = initial
            .into_iter()
            .enumerate()
            .map(|(i, s)| family.machine(ProcessId::from_index(i), s))
            .collect();
        Ok(GossipProtocol {
            family,
            machines,
            round: 0,
        })
    }

    pub fn family(&self) -> &Arc<GossipFamily> {
        &self.family
    }
}

impl Protocol for GossipProtocol {
    type Output = RumorSet;

    fn n(&self) -> usize {
        self.machines.len()
    }

    fn expected_rounds(&self) -> u64 {
        self.family.rounds()
    }

    fn begin_round(&mut self, round: u64, _status: &[Status]) {
        self.round = round;
    }

    fn send(&mut self, p: ProcessId, round: u64, out: &mut Vec<MessageIntent>) {
        self.machines[p.index()].send(round - 1, out);
    }

    fn receive(&mut self, p: ProcessId, round: u64, inbox: &[Delivery]) {
        self.machines[p.index()].receive(round - 1, inbox);
    }

    fn is_halted(&self, _p: ProcessId) -> bool {
        self.round >= self.family.rounds()
    }

    fn snapshot(&self, p: ProcessId) -> ProcessSnapshot {
        let m = &self.machines[p.index()];
        ProcessSnapshot {
            degree: Some(m.degree()),
            adaptive: Some(m.adaptive()),
            tally: Some(m.carried().set().sum()),
            ..ProcessSnapshot::default()
        }
    }

    fn output(&self, p: ProcessId) -> Option<RumorSet> {
        Some(self.machines[p.index()].carried().set().clone())
    }
}

pub fn run_gossip(
    initial: Vec<RumorSet>,
    d: u64,
    alpha: u64,
    graph_seed: u64,
    adversary: &mut dyn Adversary,
    cfg: &EngineConfig,
) -> Result<Transcript<RumorSet>, SimError> {
    let mut protocol = GossipProtocol::new(initial, d, alpha, graph_seed)?;
    run_simulation(&mut protocol, adversary, cfg)
}
