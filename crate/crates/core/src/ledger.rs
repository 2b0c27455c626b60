//! Per-process cost accounting.

use serde::Serialize;

use crate::message::ProcessId;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ProcessCost {
    pub rounds_active: u64,
    pub classical_bits_sent: u64,
    pub qubits_sent: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CostTotals {
    pub rounds_active: u64,
    pub classical_bits: u64,
    pub qubits: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CostLedger {
    per_process: Vec<ProcessCost>,
}

impl CostLedger {
    pub fn new(n: usize) -> Self {
        CostLedger {
            per_process: vec![ProcessCost::default(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.per_process.len()
    }

    pub fn charge(&mut self, sender: ProcessId, classical_bits: u32, qubits: u32) {
        let c = &mut self.per_process[sender.index()];
        c.classical_bits_sent += u64::from(classical_bits);
        c.qubits_sent += u64::from(qubits);
    }

    pub fn mark_active(&mut self, p: ProcessId) {
        self.per_process[p.index()].rounds_active += 1;
    }

    pub fn process(&self, p: ProcessId) -> ProcessCost {
        self.per_process[p.index()]
    }

    pub fn per_process(&self) -> &[ProcessCost] {
        &self.per_process
    }

    pub fn totals(&self) -> CostTotals {
        self.per_process.iter().fold(CostTotals::default(), |mut t, c| {
            t.rounds_active += c.rounds_active;
            t.classical_bits += c.classical_bits_sent;
            t.qubits += c.qubits_sent;
            t
        })
    }

    /// Total classical bits over n as `(numerator, denominator)`.
    pub fn amortized_bits_exact(&self) -> (u64, u64) {
        (self.totals().classical_bits, self.n().max(1) as u64)
    }

    /// Total classical bits divided by n, rounded to the nearest f64.
    /// Exact whenever the total is below 2^53.
    pub fn amortized_bits(&self) -> f64 {
        let (num, den) = self.amortized_bits_exact();
        num as f64 / den as f64
    }

    pub fn amortized_qubits(&self) -> f64 {
        self.totals().qubits as f64 / self.n().max(1) as f64
    }

    /// Largest per-process classical bit count.
    pub fn max_bits(&self) -> u64 {
        self.per_process.iter().map(|c| c.classical_bits_sent).max().unwrap_or(0)
    }

    /// Adds another ledger of the same width into this one.
    pub fn absorb(&mut self, other: &CostLedger) {
        assert_eq!(self.n(), other.n());
        for (a, b) in self.per_process.iter_mut().zip(&other.per_process) {
            a.rounds_active += b.rounds_active;
            a.classical_bits_sent += b.classical_bits_sent;
            a.qubits_sent += b.qubits_sent;
        }
    }
}
