//! Lockstep round engine with adversary-controlled non-clean crashes.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::coin::HiddenRegister;
use crate::error::SimError;
use crate::ledger::CostLedger;
use crate::message::{Delivery, MessageIntent, ProcessId, ProcessSnapshot, Status, VisibleIntent};
use crate::rng::{split_rng, SimRng, Tag, PUBLIC_OWNER};
use crate::transcript::{Canon, IntentRecord, RecordMode, RoundCost, RoundRecord, Transcript};

/// Per-process hooks driven by [`run_simulation`].
///
/// Each round the engine calls `send` for every running process, consults
/// the adversary, delivers, then calls `receive` for every process still
/// running. A process leaves the run once `is_halted` returns true after
/// its `receive` (or before round 1).
pub trait Protocol {
    type Output: Clone + Serialize;

    fn n(&self) -> usize;

    /// Round count of a crash-free run; the default round cap is a multiple of it.
    fn expected_rounds(&self) -> u64;

    fn begin_round(&mut self, _round: u64, _status: &[Status]) {}

    fn send(&mut self, p: ProcessId, round: u64, out: &mut Vec<MessageIntent>);

    fn receive(&mut self, p: ProcessId, round: u64, inbox: &[Delivery]);

    fn end_round(&mut self, _round: u64, _status: &[Status]) {}

    fn is_halted(&self, p: ProcessId) -> bool;

    fn snapshot(&self, p: ProcessId) -> ProcessSnapshot;

    fn output(&self, p: ProcessId) -> Option<Self::Output>;
}

/// Everything the adversary sees before a round is delivered.
#[derive(Debug)]
pub struct AdversaryView<'a> {
    pub round: u64,
    pub n: usize,
    pub status: &'a [Status],
    /// Empty unless the strategy asked for snapshots.
    pub snapshots: &'a [ProcessSnapshot],
    pub intents: &'a [VisibleIntent],
    pub crashes_used: usize,
    /// Maximum total number of crashes over the run (t - 1).
    pub crash_budget: usize,
}

impl AdversaryView<'_> {
    pub fn remaining_budget(&self) -> usize {
        self.crash_budget - self.crashes_used
    }

    pub fn running(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.status
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_running())
            .map(|(i, _)| ProcessId::from_index(i))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CrashDecision {
    pub newly_crashed: BTreeSet<ProcessId>,
    /// For a crashing sender, the recipients that still get its messages
    /// this round. Senders not listed deliver nothing.
    pub partial_delivery: BTreeMap<ProcessId, BTreeSet<ProcessId>>,
}

impl CrashDecision {
    pub fn none() -> Self {
        CrashDecision::default()
    }

    pub fn is_empty(&self) -> bool {
        self.newly_crashed.is_empty()
    }
}

pub trait Adversary {
    fn name(&self) -> String;

    fn needs_snapshots(&self) -> bool {
        false
    }

    fn decide(&mut self, view: &AdversaryView<'_>, rng: &mut SimRng) -> CrashDecision;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct EngineConfig {
    pub n: usize,
    pub t: usize,
    pub seed: u64,
    /// Hard cap on rounds; `None` means `cap_factor * expected_rounds`.
    pub round_cap: Option<u64>,
    pub cap_factor: u64,
    pub record: RecordMode,
}

impl EngineConfig {
    pub fn new(n: usize, t: usize, seed: u64) -> Self {
        EngineConfig {
            n,
            t,
            seed,
            round_cap: None,
            cap_factor: 10,
            record: RecordMode::Digest,
        }
    }

    pub fn record(mut self, mode: RecordMode) -> Self {
        self.record = mode;
        self
    }

    pub fn round_cap(mut self, cap: u64) -> Self {
        self.round_cap = Some(cap);
        self
    }

    pub fn crash_budget(&self) -> usize {
        self.t.saturating_sub(1)
    }
}

/// Checks a decision against the current status and the crash budget.
pub fn validate_decision(
    decision: &CrashDecision,
    status: &[Status],
    crashes_used: usize,
    budget: usize,
    round: u64,
) -> Result<(), SimError> {
    let fault = |reason: String| Err(SimError::AdversaryFault { round, reason });
    let n = status.len();
    let known = |p: ProcessId| p.index() < n;
    for &p in &decision.newly_crashed {
        if !known(p) {
            return fault(format!("unknown process {p}"));
        }
        if !status[p.index()].is_running() {
            return fault(format!("{p} is not running"));
        }
    }
    if crashes_used + decision.newly_crashed.len() > budget {
        return fault(format!(
            "{} new crashes exceed the remaining budget {}",
            decision.newly_crashed.len(),
            budget - crashes_used.min(budget)
        ));
    }
    for (s, recipients) in &decision.partial_delivery {
        if !decision.newly_crashed.contains(s) {
            return fault(format!("partial delivery for {s}, which is not crashing"));
        }
        if let Some(r) = recipients.iter().find(|r| !known(**r)) {
            return fault(format!("partial delivery to unknown process {r}"));
        }
    }
    Ok(())
}

/// Whether a message from `sender` to `recipient` leaves the sender.
fn transmitted(decision: &CrashDecision, sender: ProcessId, recipient: ProcessId) -> bool {
    !decision.newly_crashed.contains(&sender)
        || decision
            .partial_delivery
            .get(&sender)
            .is_some_and(|set| set.contains(&recipient))
}

/// Delivers one round of intents under a validated decision. Messages to
/// processes that are not running or are crashing this round are dropped.
pub fn deliver_round(
    intents: Vec<(VisibleIntent, Option<HiddenRegister>)>,
    decision: &CrashDecision,
    status: &[Status],
) -> BTreeMap<ProcessId, Vec<Delivery>> {
    let mut out: BTreeMap<ProcessId, Vec<Delivery>> = BTreeMap::new();
    for (v, hidden) in intents {
        let r = v.recipient;
        if transmitted(decision, v.sender, r)
            && status[r.index()].is_running()
            && !decision.newly_crashed.contains(&r)
        {
            out.entry(r).or_default().push(Delivery {
                sender: v.sender,
                payload: v.payload,
                hidden,
            });
        }
    }
    out
}

pub fn run_simulation<P: Protocol + ?Sized>(
    protocol: &mut P,
    adversary: &mut dyn Adversary,
    cfg: &EngineConfig,
) -> Result<Transcript<P::Output>, SimError> {
    let n = cfg.n;
    if n == 0 {
        return Err(SimError::InvalidConfig("n must be at least 1".into()));
    }
    if cfg.t > n {
        return Err(SimError::InvalidConfig(format!("t = {} exceeds n = {n}", cfg.t)));
    }
    if protocol.n() != n {
        return Err(SimError::InvalidConfig(format!(
            "protocol built for n = {}, engine configured for n = {n}",
            protocol.n()
        )));
    }
    let budget = cfg.crash_budget();
    let cap = cfg
        .round_cap
        .unwrap_or_else(|| cfg.cap_factor.max(1) * protocol.expected_rounds().max(1));

    let mut status = vec![Status::Running; n];
    for (i, s) in status.iter_mut().enumerate() {
        if protocol.is_halted(ProcessId::from_index(i)) {
            *s = Status::Halted { round: 0 };
        }
    }

    let mut canon = (cfg.record != RecordMode::Off).then(Canon::new);
    if let Some(c) = canon.as_mut() {
        c.bytes(b"qsim.transcript.v1");
        c.u64(n as u64);
        c.u64(cfg.t as u64);
        c.u64(cfg.seed);
    }
    let want_snapshots = adversary.needs_snapshots() || cfg.record != RecordMode::Off;

    let mut ledger = CostLedger::new(n);
    let mut round_costs = Vec::new();
    let mut records = Vec::new();
    let mut raw: Vec<MessageIntent> = Vec::new();
    let mut visible: Vec<VisibleIntent> = Vec::new();
    let mut hidden: Vec<Option<HiddenRegister>> = Vec::new();
    let mut inboxes: Vec<Vec<Delivery>> = vec![Vec::new(); n];
    let mut crashing = vec![false; n];
    let mut crashes_used = 0usize;
    let mut round = 0u64;

    while status.iter().any(|s| s.is_running()) {
        round += 1;
        if round > cap {
            return Err(SimError::RoundCap {
                cap,
                running: status.iter().filter(|s| s.is_running()).count(),
            });
        }
        protocol.begin_round(round, &status);

        raw.clear();
        for i in 0..n {
            if !status[i].is_running() {
                continue;
            }
            let p = ProcessId::from_index(i);
            let start = raw.len();
            protocol.send(p, round, &mut raw);
            for m in &raw[start..] {
                if m.sender != p || m.recipient.index() >= n || m.recipient == p {
                    return Err(SimError::ProtocolFault {
                        round,
                        reason: format!("{p} produced intent {} -> {}", m.sender, m.recipient),
                    });
                }
            }
        }
        visible.clear();
        hidden.clear();
        for m in raw.drain(..) {
            let (v, h) = m.split();
            visible.push(v);
            hidden.push(h);
        }

        let snapshots: Vec<ProcessSnapshot> = if want_snapshots {
            (0..n).map(|i| protocol.snapshot(ProcessId::from_index(i))).collect()
        } else {
            Vec::new()
        };

        let decision = {
            let view = AdversaryView {
                round,
                n,
                status: &status,
                snapshots: &snapshots,
                intents: &visible,
                crashes_used,
                crash_budget: budget,
            };
            let mut adv_rng = split_rng(cfg.seed, PUBLIC_OWNER, round, Tag::ADVERSARY);
            adversary.decide(&view, &mut adv_rng)
        };
        validate_decision(&decision, &status, crashes_used, budget, round)?;
        for &p in &decision.newly_crashed {
            crashing[p.index()] = true;
        }

        if let Some(c) = canon.as_mut() {
            c.u8(b'R');
            c.u64(round);
            c.u64(visible.len() as u64);
            for (v, h) in visible.iter().zip(&hidden) {
                c.u32(v.sender.get());
                c.u32(v.recipient.get());
                c.u32(v.classical_bits);
                c.u32(v.qubits);
                c.payload(&v.payload);
                c.hidden(h);
            }
            c.u64(decision.newly_crashed.len() as u64);
            for p in &decision.newly_crashed {
                c.u32(p.get());
                let set = decision.partial_delivery.get(p);
                c.u64(set.map_or(0, |s| s.len() as u64));
                for r in set.into_iter().flatten() {
                    c.u32(r.get());
                }
            }
            for s in &snapshots {
                c.snapshot(s);
            }
        }

        let mut cost = RoundCost {
            intents: visible.len() as u64,
            crashed: decision.newly_crashed.len() as u32,
            ..RoundCost::default()
        };
        let mut record_intents = Vec::new();
        for inbox in inboxes.iter_mut() {
            inbox.clear();
        }
        for (v, h) in visible.drain(..).zip(hidden.drain(..)) {
            let s = v.sender;
            let r = v.recipient;
            let sent = !crashing[s.index()] || transmitted(&decision, s, r);
            let arrives = sent && status[r.index()].is_running() && !crashing[r.index()];
            if sent {
                ledger.charge(s, v.classical_bits, v.qubits);
                cost.classical_bits += u64::from(v.classical_bits);
                cost.qubits += u64::from(v.qubits);
            }
            if cfg.record == RecordMode::Full {
                record_intents.push(IntentRecord {
                    visible: v.clone(),
                    hidden: h,
                    transmitted: sent,
                    delivered: arrives,
                });
            }
            if arrives {
                cost.delivered += 1;
                inboxes[r.index()].push(Delivery {
                    sender: s,
                    payload: v.payload,
                    hidden: h,
                });
            }
        }

        for i in 0..n {
            if status[i].is_running() {
                ledger.mark_active(ProcessId::from_index(i));
            }
            if crashing[i] {
                status[i] = Status::Crashed { round };
                crashing[i] = false;
            }
        }
        crashes_used += decision.newly_crashed.len();

        for i in 0..n {
            if status[i].is_running() {
                protocol.receive(ProcessId::from_index(i), round, &inboxes[i]);
            }
        }
        for i in 0..n {
            if status[i].is_running() && protocol.is_halted(ProcessId::from_index(i)) {
                status[i] = Status::Halted { round };
            }
        }
        protocol.end_round(round, &status);

        round_costs.push(cost);
        if cfg.record == RecordMode::Full {
            records.push(RoundRecord {
                round,
                intents: record_intents,
                crashed: decision.newly_crashed.iter().copied().collect(),
                partial_delivery: decision.partial_delivery.clone(),
                snapshots,
            });
        }
    }

    let outputs: Vec<Option<P::Output>> = (0..n)
        .map(|i| {
            if status[i].is_crashed() {
                None
            } else {
                protocol.output(ProcessId::from_index(i))
            }
        })
        .collect();

    let digest = canon.map(|mut c| {
        c.u8(b'E');
        c.u64(round);
        for s in &status {
            c.status(*s);
        }
        let out = serde_json::to_vec(&outputs).expect("outputs serialize");
        c.bytes(&out);
        c.finish()
    });

    Ok(Transcript {
        n,
        t: cfg.t,
        seed: cfg.seed,
        adversary: adversary.name(),
        rounds: round,
        status,
        outputs,
        ledger,
        round_costs,
        digest,
        records,
    })
}
