//! Weak global coin over hidden registers.
//!
//! Each process draws a register (leader value, coin bit) that the
//! adversary never sees. Registers travel only inside responses and are
//! merged by maximum, so a process ends up holding the largest register
//! that reached it and outputs that register's coin bit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::exchange::{ceil_log2, Carry, Exchange, Level, Neighbors, Packed, Wire};
use crate::graph::{draw_layers, layer_probabilities, top_level};
use crate::message::{Delivery, MessageIntent, ProcessId, ProcessSnapshot};
use crate::rng::{split_rng, SimRng, Tag};
use crate::sim::{run_simulation, Adversary, EngineConfig, Protocol};
use crate::transcript::Transcript;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HiddenRegister {
    pub leader_value: u64,
    pub coin_bit: u8,
    pub origin: ProcessId,
}

/// Width of the leader field: 3 * ceil(log2 n) bits.
pub fn leader_bits(n: usize) -> u32 {
    3 * ceil_log2(n as u64)
}

/// Qubits of one register copy: the leader field plus the coin bit.
pub fn register_qubits(n: usize) -> u32 {
    leader_bits(n) + 1
}

pub fn init_register(n: usize, p: ProcessId, rng: &mut SimRng) -> HiddenRegister {
    let bits = leader_bits(n);
    let leader_value = if bits == 0 { 0 } else { rng.random_range(0..1u64 << bits) };
    HiddenRegister {
        leader_value,
        coin_bit: rng.random_bool(0.5) as u8,
        origin: p,
    }
}

/// The register with the larger `(leader_value, origin)`.
pub fn merge_registers(mine: HiddenRegister, received: HiddenRegister) -> HiddenRegister {
    if (received.leader_value, received.origin) > (mine.leader_value, mine.origin) {
        received
    } else {
        mine
    }
}

/// Response attachment: a copy of the register plus its qubit charge.
pub fn send_register_copy(register: &HiddenRegister, wire: &Wire) -> Packed {
    Packed {
        rumors: None,
        hidden: Some(*register),
        classical_bits: 0,
        qubits: wire.register_qubits,
    }
}

impl Carry for HiddenRegister {
    fn pack(&mut self, wire: &Wire) -> Packed {
        send_register_copy(self, wire)
    }

    fn absorb(&mut self, delivery: &Delivery) {
        if let Some(h) = delivery.hidden {
            *self = merge_registers(*self, h);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoinParams {
    pub n: usize,
    pub d: u64,
    pub alpha: u64,
    /// Top degree level: smallest `k` with `d * alpha^k >= n`.
    pub k: u32,
    /// Smallest `gamma` with `alpha^gamma >= n`.
    pub gamma: u32,
    /// Responses required to keep an adaptive level.
    pub delta: u32,
    pub epochs: u32,
    pub iterations: u32,
}

impl CoinParams {
    /// Parameters with `d, alpha >= max(2, ceil(log2 n))`.
    pub fn new(n: usize, d: u64, alpha: u64) -> Result<Self, SimError> {
        let floor = u64::from(ceil_log2(n as u64)).max(2);
        if d < floor || alpha < floor {
            return Err(SimError::InvalidConfig(format!(
                "d = {d} and alpha = {alpha} must both be at least {floor} for n = {n} \
                 (use relaxed parameters for smaller values)"
            )));
        }
        Self::relaxed(n, d, alpha)
    }

    /// Parameters with only `d >= 1` and `alpha >= 2` enforced.
    pub fn relaxed(n: usize, d: u64, alpha: u64) -> Result<Self, SimError> {
        if n == 0 || d == 0 || alpha < 2 {
            return Err(SimError::InvalidConfig(format!(
                "need n >= 1, d >= 1, alpha >= 2; got n = {n}, d = {d}, alpha = {alpha}"
            )));
        }
        let k = top_level(n as u64, d, alpha);
        let gamma = top_level(n as u64, 1, alpha);
        Ok(CoinParams {
            n,
            d,
            alpha,
            k,
            gamma,
            delta: (2 * alpha).div_ceil(3) as u32,
            epochs: (k + 2) * (k + 2),
            iterations: gamma + 1,
        })
    }

    pub fn with_delta(mut self, delta: u32) -> Self {
        self.delta = delta;
        self
    }

    /// Communication rounds of one full run.
    pub fn rounds(&self) -> u64 {
        u64::from(self.epochs) * u64::from(self.iterations) * 2
    }

    pub fn level_probabilities(&self) -> Vec<f64> {
        layer_probabilities(self.n as u64, self.d, self.alpha).0
    }

    pub fn wire(&self) -> Wire {
        let n = self.n as u64;
        Wire {
            level_bits: ceil_log2(n) + ceil_log2(u64::from(self.k) + 1),
            register_qubits: register_qubits(self.n),
            key_bits: 0,
            value_bits: 0,
        }
    }
}

/// Builds `p`'s coin state machine. `salt` separates independent coin
/// invocations under one seed.
pub fn coin_machine(params: &CoinParams, p: ProcessId, seed: u64, salt: u64) -> Exchange<HiddenRegister> {
    let mut reg_rng = split_rng(seed, p.get(), salt, Tag::COIN_REGISTER);
    let register = init_register(params.n, p, &mut reg_rng);
    let mut nb_rng = split_rng(seed, p.get(), salt, Tag::COIN_NEIGHBORS);
    let sets = draw_layers(params.n, p, &params.level_probabilities(), &mut nb_rng);
    Exchange::new(p, *params, params.wire(), Neighbors::Private(sets), register)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoinOutcome {
    pub bit: u8,
    pub register: HiddenRegister,
    pub degree_history: Vec<Level>,
}

impl CoinOutcome {
    fn of(m: &Exchange<HiddenRegister>) -> Self {
        CoinOutcome {
            bit: m.carried().coin_bit,
            register: *m.carried(),
            degree_history: m.degree_history().to_vec(),
        }
    }
}

/// Standalone coin run: every process flips once.
pub struct CoinProtocol {
    params: CoinParams,
    machines: Vec<Exchange<HiddenRegister>>,
    round: u64,
}

impl CoinProtocol {
    pub fn new(params: CoinParams, seed: u64) -> Self {
        let machines = (0..params.n)
            .map(|i| coin_machine(&params, ProcessId::from_index(i), seed, 0))
            .collect();
        CoinProtocol {
            params,
            machines,
            round: 0,
        }
    }
}

impl Protocol for CoinProtocol {
    type Output = CoinOutcome;

    fn n(&self) -> usize {
        self.params.n
    }

    fn expected_rounds(&self) -> u64 {
        self.params.rounds()
    }

    fn begin_round(&mut self, round: u64, _status: &[crate::message::Status]) {
        self.round = round;
    }

    fn send(&mut self, p: ProcessId, round: u64, out: &mut Vec<MessageIntent>) {
        self.machines[p.index()].send(round - 1, out);
    }

    fn receive(&mut self, p: ProcessId, round: u64, inbox: &[Delivery]) {
        self.machines[p.index()].receive(round - 1, inbox);
    }

    fn is_halted(&self, _p: ProcessId) -> bool {
        self.round >= self.params.rounds()
    }

    fn snapshot(&self, p: ProcessId) -> ProcessSnapshot {
        let m = &self.machines[p.index()];
        ProcessSnapshot {
            degree: Some(m.degree()),
            adaptive: Some(m.adaptive()),
            ..ProcessSnapshot::default()
        }
    }

    fn output(&self, p: ProcessId) -> Option<CoinOutcome> {
        Some(CoinOutcome::of(&self.machines[p.index()]))
    }
}

pub fn run_coin(
    params: CoinParams,
    seed: u64,
    adversary: &mut dyn Adversary,
    cfg: &EngineConfig,
) -> Result<Transcript<CoinOutcome>, SimError> {
    let mut protocol = CoinProtocol::new(params, seed);
    run_simulation(&mut protocol, adversary, cfg)
}
