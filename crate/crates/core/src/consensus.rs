//! The phase loop: count preferences, apply the thresholds, and flip the
//! shared coin when the counts are close.
//!
//! Every phase has the same fixed layout for all processes:
//!
//! 1. counting of the current preferences (one counting-plan run),
//! 2. a fallback window of `R + 1` rounds (`R = ceil(sqrt(n / log2 n)) + 1`),
//!    silent unless some process counted fewer than `sqrt(n / log2 n)`,
//! 3. one coin run, in which processes that did not choose to flip act as
//!    relays.
//!
//! Fallback window: a process whose count is below the threshold sends its
//! preference to everyone in the first window round and becomes a
//! participant. Any other process that hears a window message becomes a
//! participant holding the minimum value it heard. Participants broadcast
//! their current minimum every later window round and decide it when the
//! window closes. A round with no crash makes every running process a
//! participant with one common value, and with fewer live processes than
//! window rounds such a round must occur.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coin::{coin_machine, CoinParams, HiddenRegister};
use crate::counting::{CountingParams, CountingPlan, CountingRun};
use crate::error::SimError;
use crate::exchange::{ceil_log2, Exchange};
use crate::gossip::Tally;
use crate::ledger::CostTotals;
use crate::message::{Delivery, MessageIntent, Payload, ProcessId, ProcessSnapshot, Status};
use crate::sim::{run_simulation, Adversary, EngineConfig, Protocol};
use crate::transcript::Transcript;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseAction {
    Decide1,
    Lean1,
    Lean0,
    Decide0,
    FlipCoin,
}

/// Threshold rules in integer form; `10 O > 7N - 1` is `O > (7N - 1) / 10`.
pub fn phase_decision(o: u32, n: u32) -> PhaseAction {
    let o10 = 10 * i64::from(o);
    let n = i64::from(n);
    if o10 > 7 * n - 1 {
        PhaseAction::Decide1
    } else if o10 > 6 * n - 1 {
        PhaseAction::Lean1
    } else if o10 < 4 * n - 1 {
        PhaseAction::Decide0
    } else if o10 < 5 * n - 1 {
        PhaseAction::Lean0
    } else {
        PhaseAction::FlipCoin
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Stop,
    Continue,
}

/// `history[i]` is the count of phase `i + 1`; the last entry is the
/// current phase `r`. Stops iff `N^{r-3} - N^r <= N^{r-2} / 10`; `None`
/// while `N^{r-3}` does not exist yet.
pub fn termination_check(history: &[u32]) -> Option<Termination> {
    let r = history.len();
    if r < 4 {
        return None;
    }
    let now = i64::from(history[r - 1]);
    let back2 = i64::from(history[r - 3]);
    let back3 = i64::from(history[r - 4]);
    Some(if 10 * (back3 - now) <= back2 {
        Termination::Stop
    } else {
        Termination::Continue
    })
}

/// `sqrt(n / log2 n)`, the count below which the fallback takes over.
pub fn fallback_threshold(n: usize) -> f64 {
    if n <= 1 {
        return 1.0;
    }
    let n = n as f64;
    (n / n.log2()).sqrt()
}

/// Flooding rounds after the first window round.
pub fn fallback_rounds(n: usize) -> u64 {
    fallback_threshold(n).ceil() as u64 + 1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    /// `x = alpha = round(n^epsilon)`, `d = ceil(log2 n)`.
    Constant { epsilon: f64 },
    /// `x = 2`, `d = alpha = ceil(log2 n)`.
    Polylog,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsensusParams {
    pub x: usize,
    pub d: u64,
    pub alpha: u64,
    /// Seed of the public counting graphs.
    #[serde(default)]
    pub graph_seed: u64,
    /// Skip the `d, alpha >= log2 n` requirement.
    #[serde(default)]
    pub relaxed: bool,
}

impl ConsensusParams {
    pub fn preset(n: usize, preset: Preset) -> Self {
        let log = u64::from(ceil_log2(n as u64)).max(2);
        match preset {
            Preset::Constant { epsilon } => {
                let a = ((n as f64).powf(epsilon).round() as u64).max(2);
                ConsensusParams {
                    x: (a as usize).min(n.max(2)),
                    d: log,
                    alpha: a,
                    graph_seed: 0,
                    relaxed: false,
                }
            }
            Preset::Polylog => ConsensusParams {
                x: 2,
                d: log,
                alpha: log,
                graph_seed: 0,
                relaxed: false,
            },
        }
    }

    pub fn coin_params(&self, n: usize) -> Result<CoinParams, SimError> {
        if self.relaxed {
            CoinParams::relaxed(n, self.d, self.alpha)
        } else {
            CoinParams::new(n, self.d, self.alpha)
        }
    }

    pub fn counting_params(&self) -> CountingParams {
        CountingParams {
            x: self.x,
            d: self.d,
            alpha: self.alpha,
        }
    }
}

/// Everything about a consensus run that depends only on `n` and the
/// parameters. Reusable across seeds.
#[derive(Debug)]
pub struct ConsensusSetup {
    pub n: usize,
    pub params: ConsensusParams,
    pub plan: Arc<CountingPlan>,
    pub coin: CoinParams,
    pub threshold: f64,
    pub window: u64,
}

impl ConsensusSetup {
    pub fn new(n: usize, params: ConsensusParams) -> Result<Arc<Self>, SimError> {
        if n == 0 {
            return Err(SimError::InvalidConfig("n must be at least 1".into()));
        }
        let coin = params.coin_params(n)?;
        let members: Vec<ProcessId> = (0..n).map(ProcessId::from_index).collect();
        let plan = Arc::new(CountingPlan::build(n, &members, params.counting_params(), params.graph_seed)?);
        Ok(Arc::new(ConsensusSetup {
            n,
            params,
            plan,
            coin,
            threshold: fallback_threshold(n),
            window: 1 + fallback_rounds(n),
        }))
    }

    pub fn counting_rounds(&self) -> u64 {
        self.plan.rounds()
    }

    pub fn phase_rounds(&self) -> u64 {
        self.plan.rounds() + self.window + self.coin.rounds()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PhaseRecord {
    pub phase: u32,
    /// Running processes preferring 1 / 0 when counting started.
    pub start: Tally,
    /// The same processes, minus those that crashed during counting.
    pub end: Tally,
    /// Counting results of the processes that finished counting.
    pub counts: Vec<(ProcessId, Tally)>,
    pub flippers: u32,
    pub triggered: u32,
    pub stopped: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PhaseStats {
    pub phases: u32,
    pub rounds: u64,
    pub totals: CostTotals,
    pub coin_invocations: u32,
    pub fallback_used: bool,
    pub records: Vec<PhaseRecord>,
}

#[derive(Clone, Debug)]
struct Proc {
    b: u8,
    decided: bool,
    history: Vec<u32>,
    counting: Option<CountingRun>,
    coin: Option<Exchange<HiddenRegister>>,
    flip: bool,
    participant: bool,
    value: u8,
    halted: bool,
    output: Option<u8>,
}

pub struct ConsensusProtocol {
    setup: Arc<ConsensusSetup>,
    seed: u64,
    procs: Vec<Proc>,
    stats: PhaseStats,
    phase: u32,
    offset: u64,
    /// Preference of each process running when the current phase began.
    entered: Vec<Option<u8>>,
}

impl ConsensusProtocol {
    pub fn new(setup: Arc<ConsensusSetup>, inputs: &[u8], seed: u64) -> Result<Self, SimError> {
        if inputs.len() != setup.n {
            return Err(SimError::InvalidConfig(format!(
                "{} inputs for n = {}",
                inputs.len(),
                setup.n
            )));
        }
        if let Some(b) = inputs.iter().find(|&&b| b > 1) {
            return Err(SimError::InvalidConfig(format!("input {b} is not a bit")));
        }
        let single = setup.n == 1;
        let procs = inputs
            .iter()
            .map(|&b| Proc {
                b,
                decided: false,
                history: Vec::new(),
                counting: None,
                coin: None,
                flip: false,
                participant: false,
                value: b,
                halted: single,
                output: single.then_some(b),
            })
            .collect();
        Ok(ConsensusProtocol {
            setup,
            seed,
            procs,
            stats: PhaseStats::default(),
            phase: 0,
            offset: 0,
            entered: vec![None; inputs.len()],
        })
    }

    pub fn stats(&self) -> &PhaseStats {
        &self.stats
    }

    fn window_start(&self) -> u64 {
        self.setup.counting_rounds()
    }

    fn coin_start(&self) -> u64 {
        self.setup.counting_rounds() + self.setup.window
    }

    fn record(&mut self) -> &mut PhaseRecord {
        self.stats.records.last_mut().expect("phase started")
    }

    fn running(status: &[Status]) -> impl Iterator<Item = usize> + '_ {
        status.iter().enumerate().filter(|(_, s)| s.is_running()).map(|(i, _)| i)
    }

    fn after_counting(&mut self, i: usize) {
        let threshold = self.setup.threshold;
        let p = &mut self.procs[i];
        let tally = p
            .counting
            .take()
            .and_then(|c| c.result())
            .expect("counting finished for a running process");
        let big_n = tally.total();
        p.history.push(big_n);
        let mut triggered = false;
        let mut stopped = false;
        let mut flip = false;
        if (big_n as f64) < threshold {
            p.participant = true;
            p.value = p.b;
            triggered = true;
        } else {
            if p.decided {
                match termination_check(&p.history) {
                    Some(Termination::Stop) => {
                        p.halted = true;
                        p.output = Some(p.b);
                        stopped = true;
                    }
                    Some(Termination::Continue) => p.decided = false,
                    None => {}
                }
            }
            if !stopped {
                match phase_decision(tally.ones, big_n) {
                    PhaseAction::Decide1 => {
                        p.b = 1;
                        p.decided = true;
                    }
                    PhaseAction::Lean1 => p.b = 1,
                    PhaseAction::Decide0 => {
                        p.b = 0;
                        p.decided = true;
                    }
                    PhaseAction::Lean0 => p.b = 0,
                    PhaseAction::FlipCoin => {
                        p.flip = true;
                        flip = true;
                    }
                }
            }
        }
        let rec = self.record();
        rec.counts.push((ProcessId::from_index(i), tally));
        rec.triggered += u32::from(triggered);
        rec.stopped += u32::from(stopped);
        rec.flippers += u32::from(flip);
        if triggered {
            self.stats.fallback_used = true;
        }
    }
}

fn true_tally<'a>(procs: &[Proc], running: impl Iterator<Item = usize> + 'a) -> Tally {
    running.fold(Tally::default(), |t, i| t.add(Tally::of_bit(procs[i].b)))
}

impl Protocol for ConsensusProtocol {
    type Output = u8;

    fn n(&self) -> usize {
        self.setup.n
    }

    fn expected_rounds(&self) -> u64 {
        // The default cap (ten times this) allows sixty phases.
        6 * self.setup.phase_rounds()
    }

    fn begin_round(&mut self, round: u64, status: &[Status]) {
        let len = self.setup.phase_rounds();
        self.phase = ((round - 1) / len) as u32 + 1;
        self.offset = (round - 1) % len;
        if self.offset == 0 {
            let start = true_tally(&self.procs, Self::running(status));
            self.stats.records.push(PhaseRecord {
                phase: self.phase,
                start,
                ..PhaseRecord::default()
            });
            self.stats.phases = self.phase;
            for (i, s) in status.iter().enumerate() {
                self.entered[i] = s.is_running().then_some(self.procs[i].b);
            }
            for i in Self::running(status) {
                let p = &mut self.procs[i];
                p.counting = Some(CountingRun::new(
                    Arc::clone(&self.setup.plan),
                    ProcessId::from_index(i),
                    Tally::of_bit(p.b),
                ));
            }
        }
        if self.offset == self.coin_start() {
            let mut any = false;
            for i in Self::running(status) {
                let params = self.setup.coin;
                self.procs[i].coin = Some(coin_machine(
                    &params,
                    ProcessId::from_index(i),
                    self.seed,
                    u64::from(self.phase),
                ));
                any = true;
            }
            self.stats.coin_invocations += u32::from(any);
        }
    }

    fn send(&mut self, p: ProcessId, _round: u64, out: &mut Vec<MessageIntent>) {
        let offset = self.offset;
        let (ws, cs) = (self.window_start(), self.coin_start());
        let n = self.setup.n;
        let proc = &mut self.procs[p.index()];
        if offset < ws {
            if let Some(c) = proc.counting.as_mut() {
                c.send(offset, out);
            }
        } else if offset < cs {
            if proc.participant {
                for q in (0..n).filter(|&q| q != p.index()) {
                    out.push(MessageIntent {
                        sender: p,
                        recipient: ProcessId::from_index(q),
                        payload: Payload::Value(proc.value),
                        hidden: None,
                        classical_bits: 1,
                        qubits: 0,
                    });
                }
            }
        } else if let Some(c) = proc.coin.as_mut() {
            c.send(offset - cs, out);
        }
    }

    fn receive(&mut self, p: ProcessId, _round: u64, inbox: &[Delivery]) {
        let offset = self.offset;
        let (ws, cs) = (self.window_start(), self.coin_start());
        let i = p.index();
        if offset < ws {
            if let Some(c) = self.procs[i].counting.as_mut() {
                c.receive(offset, inbox);
            }
            if offset + 1 == ws {
                self.after_counting(i);
            }
        } else if offset < cs {
            let proc = &mut self.procs[i];
            let heard = inbox
                .iter()
                .filter_map(|d| match d.payload {
                    Payload::Value(v) => Some(v),
                    _ => None,
                })
                .min();
            if let Some(v) = heard {
                proc.value = if proc.participant { proc.value.min(v) } else { v };
                proc.participant = true;
            }
            if offset + 1 == cs && proc.participant {
                proc.halted = true;
                proc.output = Some(proc.value);
            }
        } else {
            let len = self.setup.phase_rounds();
            let proc = &mut self.procs[i];
            if let Some(c) = proc.coin.as_mut() {
                c.receive(offset - cs, inbox);
            }
            if offset + 1 == len {
                let coin = proc.coin.take().expect("coin ran");
                if proc.flip {
                    proc.b = coin.carried().coin_bit;
                    proc.flip = false;
                }
            }
        }
    }

    fn end_round(&mut self, _round: u64, status: &[Status]) {
        if self.offset + 1 == self.window_start() {
            // Processes that stopped on this count still took part in it.
            let end = self
                .entered
                .iter()
                .zip(status)
                .filter(|(_, s)| !s.is_crashed())
                .filter_map(|(b, _)| *b)
                .fold(Tally::default(), |t, b| t.add(Tally::of_bit(b)));
            let rec = self.record();
            rec.end = end;
        }
    }

    fn is_halted(&self, p: ProcessId) -> bool {
        self.procs[p.index()].halted
    }

    fn snapshot(&self, p: ProcessId) -> ProcessSnapshot {
        let proc = &self.procs[p.index()];
        let coin = proc.coin.as_ref();
        ProcessSnapshot {
            phase: self.phase,
            preference: Some(proc.b),
            decided: proc.decided,
            degree: coin.map(|c| c.degree()),
            adaptive: coin.map(|c| c.adaptive()),
            tally: proc.counting.as_ref().map(CountingRun::current),
        }
    }

    fn output(&self, p: ProcessId) -> Option<u8> {
        self.procs[p.index()].output
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsensusOutcome {
    pub transcript: Transcript<u8>,
    pub stats: PhaseStats,
    pub agreed: bool,
    pub valid: bool,
    /// Every process that never crashed produced a decision.
    pub terminated: bool,
}

impl ConsensusOutcome {
    pub fn decision(&self) -> Option<u8> {
        self.transcript.outputs.iter().flatten().next().copied()
    }
}

pub fn run_consensus_with(
    setup: Arc<ConsensusSetup>,
    inputs: &[u8],
    adversary: &mut dyn Adversary,
    cfg: &EngineConfig,
) -> Result<ConsensusOutcome, SimError> {
    let mut protocol = ConsensusProtocol::new(setup, inputs, cfg.seed)?;
    let transcript = run_simulation(&mut protocol, adversary, cfg)?;
    let mut stats = protocol.stats.clone();
    stats.rounds = transcript.rounds;
    stats.totals = transcript.ledger.totals();
    // A record exists for the process that halted before any phase (n = 1).
    let decisions: Vec<u8> = transcript.outputs.iter().flatten().copied().collect();
    let agreed = decisions.windows(2).all(|w| w[0] == w[1]);
    let valid = decisions.iter().all(|b| inputs.contains(b));
    let terminated = transcript
        .status
        .iter()
        .zip(&transcript.outputs)
        .all(|(s, o)| s.is_crashed() || o.is_some());
    Ok(ConsensusOutcome {
        transcript,
        stats,
        agreed,
        valid,
        terminated,
    })
}

pub fn run_consensus(
    inputs: &[u8],
    params: ConsensusParams,
    adversary: &mut dyn Adversary,
    cfg: &EngineConfig,
) -> Result<ConsensusOutcome, SimError> {
    let setup = ConsensusSetup::new(inputs.len(), params)?;
    run_consensus_with(setup, inputs, adversary, cfg)
}
