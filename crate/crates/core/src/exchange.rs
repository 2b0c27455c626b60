//! The epoch/testing-iteration inquiry-response machine shared by the coin
//! and by gossip.
//!
//! One testing iteration is two rounds: inquiries go out to the current
//! neighborhood, then every inquired process answers each inquirer with its
//! adaptive level and whatever it carries (a hidden register or a rumor
//! set). An epoch is `gamma + 1` iterations; there are `(k + 2)^2` epochs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coin::{CoinParams, HiddenRegister};
use crate::gossip::{GossipFamily, SharedRumors};
use crate::message::{Delivery, MessageIntent, Payload, ProcessId};

/// Degree level `i`, standing for the value `d * alpha^i`. Level -1 is the
/// value `d / alpha`, reachable only by `adaptive` once the literal while
/// loop divides below `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Level(pub i8);

impl Level {
    pub const BASE: Level = Level(0);

    /// `d * alpha^level` as a real number.
    pub fn value(self, d: u64, alpha: u64) -> f64 {
        d as f64 * (alpha as f64).powi(i32::from(self.0))
    }
}

/// Bits needed to distinguish `v` values.
pub fn ceil_log2(v: u64) -> u32 {
    if v <= 1 {
        0
    } else {
        64 - (v - 1).leading_zeros()
    }
}

/// One pass of the while loop: lower `current` one level at a time while
/// fewer than `delta` responders report a level at least as high and the
/// value is still at least `d` (level 0).
pub fn adapt_degree(responses: &[Level], current: Level, delta: u32) -> Level {
    let mut ad = current;
    while ad.0 >= 0 && (responses.iter().filter(|&&r| r >= ad).count() as u32) < delta {
        ad = Level(ad.0 - 1);
    }
    ad
}

/// Degree for the next epoch: one level up (capped at `k`) iff the
/// adaptive level fell below it during this epoch.
pub fn end_epoch_update(degree: Level, adaptive: Level, k: u32) -> Level {
    if adaptive < degree {
        Level((degree.0 + 1).min(k as i8))
    } else {
        degree
    }
}

/// Declared message widths for one exchange instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Wire {
    /// Classical bits of the adaptive-level field of a response.
    pub level_bits: u32,
    /// Qubits of a register copy.
    pub register_qubits: u32,
    /// Bits of a rumor key.
    pub key_bits: u32,
    /// Bits of a rumor value (two counters).
    pub value_bits: u32,
}

/// What a response carries besides the adaptive level.
#[derive(Clone, Debug, Default)]
pub struct Packed {
    pub rumors: Option<SharedRumors>,
    pub hidden: Option<HiddenRegister>,
    pub classical_bits: u32,
    pub qubits: u32,
}

pub trait Carry {
    fn pack(&mut self, wire: &Wire) -> Packed;
    fn absorb(&mut self, delivery: &Delivery);
}

#[derive(Clone, Debug)]
pub enum Neighbors {
    /// Privately drawn sets, `sets[level]`.
    Private(Vec<Vec<ProcessId>>),
    /// Neighborhood of member `local` in a public graph family.
    Shared { family: Arc<GossipFamily>, local: usize },
}

impl Neighbors {
    pub fn at(&self, level: Level) -> &[ProcessId] {
        let i = level.0.max(0) as usize;
        match self {
            Neighbors::Private(sets) => &sets[i],
            Neighbors::Shared { family, local } => family.neighbors(i, *local),
        }
    }
}

/// Position of a step inside the schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepPos {
    pub epoch: u32,
    pub iteration: u32,
    pub responding: bool,
}

impl CoinParams {
    pub fn position(&self, step: u64) -> StepPos {
        let per_epoch = 2 * u64::from(self.iterations);
        StepPos {
            epoch: (step / per_epoch) as u32,
            iteration: (step % per_epoch / 2) as u32,
            responding: step % 2 == 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Exchange<C> {
    me: ProcessId,
    params: CoinParams,
    wire: Wire,
    neighbors: Neighbors,
    degree: Level,
    adaptive: Level,
    carried: C,
    inquirers: Vec<ProcessId>,
    levels: Vec<Level>,
    degree_history: Vec<Level>,
}

impl<C: Carry> Exchange<C> {
    pub fn new(me: ProcessId, params: CoinParams, wire: Wire, neighbors: Neighbors, carried: C) -> Self {
        Exchange {
            me,
            params,
            wire,
            neighbors,
            degree: Level::BASE,
            adaptive: Level::BASE,
            carried,
            inquirers: Vec::new(),
            levels: Vec::new(),
            degree_history: Vec::new(),
        }
    }

    pub fn carried(&self) -> &C {
        &self.carried
    }

    pub fn into_carried(self) -> C {
        self.carried
    }

    pub fn degree(&self) -> Level {
        self.degree
    }

    pub fn adaptive(&self) -> Level {
        self.adaptive
    }

    /// Degree level at the start of every epoch begun so far.
    pub fn degree_history(&self) -> &[Level] {
        &self.degree_history
    }

    pub fn send(&mut self, step: u64, out: &mut Vec<MessageIntent>) {
        let pos = self.params.position(step);
        if !pos.responding {
            if pos.iteration == 0 {
                self.adaptive = self.degree;
                self.degree_history.push(self.degree);
            }
            for &q in self.neighbors.at(self.degree) {
                out.push(MessageIntent {
                    sender: self.me,
                    recipient: q,
                    payload: Payload::Inquiry,
                    hidden: None,
                    classical_bits: 1,
                    qubits: 0,
                });
            }
        } else if !self.inquirers.is_empty() {
            let packed = self.carried.pack(&self.wire);
            for &q in &self.inquirers {
                out.push(MessageIntent {
                    sender: self.me,
                    recipient: q,
                    payload: Payload::Response {
                        adaptive: self.adaptive,
                        rumors: packed.rumors.clone(),
                    },
                    hidden: packed.hidden,
                    classical_bits: self.wire.level_bits + packed.classical_bits,
                    qubits: packed.qubits,
                });
            }
        }
    }

    pub fn receive(&mut self, step: u64, inbox: &[Delivery]) {
        let pos = self.params.position(step);
        if !pos.responding {
            self.inquirers.clear();
            self.inquirers.extend(
                inbox
                    .iter()
                    .filter(|d| matches!(d.payload, Payload::Inquiry))
                    .map(|d| d.sender),
            );
            return;
        }
        self.inquirers.clear();
        self.levels.clear();
        for d in inbox {
            if let Payload::Response { adaptive, .. } = d.payload {
                self.levels.push(adaptive);
                self.carried.absorb(d);
            }
        }
        self.adaptive = adapt_degree(&self.levels, self.adaptive, self.params.delta);
        if pos.iteration + 1 == self.params.iterations {
            self.degree = end_epoch_update(self.degree, self.adaptive, self.params.k);
        }
    }
}
