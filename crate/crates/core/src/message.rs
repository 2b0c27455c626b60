//! Process ids, message intents and what the adversary is allowed to see.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::coin::HiddenRegister;
use crate::exchange::Level;
use crate::gossip::{SharedRumors, Tally};

/// Process identifier in `[1, n]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(u32);

impl ProcessId {
    pub fn new(id: u32) -> Self {
        assert!(id >= 1, "process ids start at 1");
        ProcessId(id)
    }

    pub fn from_index(i: usize) -> Self {
        ProcessId(i as u32 + 1)
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

/// Classical message content. Everything here is visible to the adversary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Payload {
    /// The one-bit inquiry of a testing iteration.
    Inquiry,
    /// Reply to an inquiry: the responder's adaptive level, plus its rumor
    /// set when gossiping. Coin replies carry the register as hidden payload.
    Response {
        adaptive: Level,
        rumors: Option<SharedRumors>,
    },
    /// A single protocol bit (fallback flooding, test protocols).
    Value(u8),
}

/// A message a running process wants to send this round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MessageIntent {
    pub sender: ProcessId,
    pub recipient: ProcessId,
    pub payload: Payload,
    pub hidden: Option<HiddenRegister>,
    pub classical_bits: u32,
    pub qubits: u32,
}

/// An intent with the hidden register stripped. The adversary only ever
/// receives these; the type has no field that could hold a register.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct VisibleIntent {
    pub sender: ProcessId,
    pub recipient: ProcessId,
    pub payload: Payload,
    pub classical_bits: u32,
    pub qubits: u32,
}

impl MessageIntent {
    pub fn split(self) -> (VisibleIntent, Option<HiddenRegister>) {
        (
            VisibleIntent {
                sender: self.sender,
                recipient: self.recipient,
                payload: self.payload,
                classical_bits: self.classical_bits,
                qubits: self.qubits,
            },
            self.hidden,
        )
    }
}

/// A message as it arrives at its recipient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Delivery {
    pub sender: ProcessId,
    pub payload: Payload,
    pub hidden: Option<HiddenRegister>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Halted { round: u64 },
    Crashed { round: u64 },
}

impl Status {
    pub fn is_running(self) -> bool {
        matches!(self, Status::Running)
    }

    pub fn is_crashed(self) -> bool {
        matches!(self, Status::Crashed { .. })
    }
}

/// Classical process state exposed to the adversary. Protocols fill in the
/// fields that exist for them.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ProcessSnapshot {
    pub phase: u32,
    pub preference: Option<u8>,
    pub decided: bool,
    pub degree: Option<Level>,
    pub adaptive: Option<Level>,
    pub tally: Option<Tally>,
}
