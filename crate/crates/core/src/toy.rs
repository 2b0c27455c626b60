//! Minimal protocols for exercising the engine.

use crate::message::{Delivery, MessageIntent, Payload, ProcessId, ProcessSnapshot, Status};
use crate::sim::Protocol;

/// Every process sends its current value to every other process for
/// `rounds` rounds, keeping the minimum it has seen, then halts.
/// One round of this is an echo.
#[derive(Clone, Debug)]
pub struct Flood {
    values: Vec<u8>,
    rounds: u64,
    round: u64,
}

impl Flood {
    pub fn new(values: Vec<u8>, rounds: u64) -> Self {
        Flood { values, rounds, round: 0 }
    }
}

impl Protocol for Flood {
    type Output = u8;

    fn n(&self) -> usize {
        self.values.len()
    }

    fn expected_rounds(&self) -> u64 {
        self.rounds
    }

    fn begin_round(&mut self, round: u64, _status: &[Status]) {
        self.round = round;
    }

    fn send(&mut self, p: ProcessId, _round: u64, out: &mut Vec<MessageIntent>) {
        for q in 0..self.values.len() {
            if q != p.index() {
                out.push(MessageIntent {
                    sender: p,
                    recipient: ProcessId::from_index(q),
                    payload: Payload::Value(self.values[p.index()]),
                    hidden: None,
                    classical_bits: 1,
                    qubits: 0,
                });
            }
        }
    }

    fn receive(&mut self, p: ProcessId, _round: u64, inbox: &[Delivery]) {
        for d in inbox {
            if let Payload::Value(v) = d.payload {
                let mine = &mut self.values[p.index()];
                *mine = (*mine).min(v);
            }
        }
    }

    fn is_halted(&self, _p: ProcessId) -> bool {
        self.round >= self.rounds
    }

    fn snapshot(&self, p: ProcessId) -> ProcessSnapshot {
        ProcessSnapshot {
            preference: Some(self.values[p.index()]),
            ..ProcessSnapshot::default()
        }
    }

    fn output(&self, p: ProcessId) -> Option<u8> {
        Some(self.values[p.index()])
    }
}
