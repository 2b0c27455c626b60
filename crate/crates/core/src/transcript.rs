//! Run records and the streaming transcript digest.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::coin::HiddenRegister;
use crate::ledger::CostLedger;
use crate::message::{Payload, ProcessId, ProcessSnapshot, Status, VisibleIntent};

/// How much of a run the engine keeps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordMode {
    /// Outputs, ledger and per-round costs only.
    Off,
    /// Additionally a SHA-256 digest over the canonical round encoding.
    #[default]
    Digest,
    /// Digest plus every round record.
    Full,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RoundCost {
    pub intents: u64,
    pub delivered: u64,
    pub classical_bits: u64,
    pub qubits: u64,
    pub crashed: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IntentRecord {
    #[serde(flatten)]
    pub visible: VisibleIntent,
    pub hidden: Option<HiddenRegister>,
    pub transmitted: bool,
    pub delivered: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    pub round: u64,
    pub intents: Vec<IntentRecord>,
    pub crashed: Vec<ProcessId>,
    pub partial_delivery: BTreeMap<ProcessId, BTreeSet<ProcessId>>,
    pub snapshots: Vec<ProcessSnapshot>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Transcript<O> {
    pub n: usize,
    pub t: usize,
    pub seed: u64,
    pub adversary: String,
    pub rounds: u64,
    pub status: Vec<Status>,
    pub outputs: Vec<Option<O>>,
    pub ledger: CostLedger,
    pub round_costs: Vec<RoundCost>,
    pub digest: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub records: Vec<RoundRecord>,
}

impl<O> Transcript<O> {
    pub fn crashed(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.status
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_crashed())
            .map(|(i, _)| ProcessId::from_index(i))
    }

    pub fn crash_count(&self) -> usize {
        self.status.iter().filter(|s| s.is_crashed()).count()
    }

    /// Processes that never crashed.
    pub fn survivors(&self) -> impl Iterator<Item = ProcessId> + '_ {
        self.status
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.is_crashed())
            .map(|(i, _)| ProcessId::from_index(i))
    }

    /// Outputs of processes that never crashed.
    pub fn survivor_outputs(&self) -> impl Iterator<Item = (ProcessId, &O)> + '_ {
        self.outputs
            .iter()
            .enumerate()
            .filter_map(|(i, o)| o.as_ref().map(|o| (ProcessId::from_index(i), o)))
    }

    pub fn to_json(&self) -> serde_json::Result<String>
    where
        O: Serialize,
    {
        serde_json::to_string_pretty(self)
    }
}

/// Streaming SHA-256 over a fixed little-endian encoding.
pub(crate) struct Canon(Sha256);

impl Canon {
    pub fn new() -> Self {
        Canon(Sha256::new())
    }

    pub fn u8(&mut self, v: u8) {
        self.0.update([v]);
    }

    pub fn u32(&mut self, v: u32) {
        self.0.update(v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.0.update(v.to_le_bytes());
    }

    pub fn bytes(&mut self, v: &[u8]) {
        self.u64(v.len() as u64);
        self.0.update(v);
    }

    pub fn payload(&mut self, p: &Payload) {
        match p {
            Payload::Inquiry => self.u8(0),
            Payload::Response { adaptive, rumors } => {
                self.u8(1);
                self.u8(adaptive.0 as u8);
                match rumors {
                    None => self.u8(0),
                    Some(r) => {
                        self.u8(1);
                        self.u64(r.fingerprint());
                    }
                }
            }
            Payload::Value(v) => {
                self.u8(2);
                self.u8(*v);
            }
        }
    }

    pub fn hidden(&mut self, h: &Option<HiddenRegister>) {
        match h {
            None => self.u8(0),
            Some(r) => {
                self.u8(1);
                self.u64(r.leader_value);
                self.u8(r.coin_bit);
                self.u32(r.origin.get());
            }
        }
    }

    pub fn snapshot(&mut self, s: &ProcessSnapshot) {
        self.u32(s.phase);
        self.u8(s.preference.map_or(0xff, |b| b));
        self.u8(s.decided as u8);
        self.u8(s.degree.map_or(0x80, |l| l.0 as u8));
        self.u8(s.adaptive.map_or(0x80, |l| l.0 as u8));
        match s.tally {
            None => self.u8(0),
            Some(t) => {
                self.u8(1);
                self.u32(t.ones);
                self.u32(t.zeros);
            }
        }
    }

    pub fn status(&mut self, s: Status) {
        match s {
            Status::Running => self.u8(0),
            Status::Halted { round } => {
                self.u8(1);
                self.u64(round);
            }
            Status::Crashed { round } => {
                self.u8(2);
                self.u64(round);
            }
        }
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}
