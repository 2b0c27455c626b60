//! Experiment files: one JSON document per invocation, tagged by command.

use std::collections::BTreeSet;

use qsim_core::adversary::AdversaryConfig;
use qsim_core::config::ProtocolConfig;
use qsim_core::transcript::RecordMode;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Run {
        n: usize,
        t: usize,
        seeds: Seeds,
        protocol: ProtocolConfig,
        #[serde(default = "no_adversary")]
        adversary: AdversaryConfig,
        #[serde(default)]
        round_cap: Option<u64>,
        #[serde(default)]
        record: RecordMode,
    },
    Sweep {
        n: Vec<usize>,
        t: Faults,
        seeds: Seeds,
        protocol: ProtocolConfig,
        #[serde(default = "no_adversary")]
        adversary: AdversaryConfig,
        #[serde(default)]
        round_cap: Option<u64>,
    },
    CoinStats {
        n: usize,
        #[serde(default)]
        t: usize,
        #[serde(default)]
        d: Option<u64>,
        #[serde(default)]
        alpha: Option<u64>,
        #[serde(default)]
        relaxed: bool,
        seeds: Seeds,
        #[serde(default = "no_adversary")]
        adversary: AdversaryConfig,
    },
    CheckGraphs {
        graph: GraphSource,
        checks: Vec<Check>,
        #[serde(default)]
        budget: Option<u64>,
        #[serde(default)]
        trials: Option<u64>,
        #[serde(default)]
        seed: u64,
    },
}

impl Experiment {
    pub fn command(&self) -> &'static str {
        match self {
            Experiment::Run { .. } => "run",
            Experiment::Sweep { .. } => "sweep",
            Experiment::CoinStats { .. } => "coin-stats",
            Experiment::CheckGraphs { .. } => "check-graphs",
        }
    }

    pub fn seeds_mut(&mut self) -> Option<&mut Seeds> {
        match self {
            Experiment::Run { seeds, .. } | Experiment::Sweep { seeds, .. } | Experiment::CoinStats { seeds, .. } => {
                Some(seeds)
            }
            Experiment::CheckGraphs { .. } => None,
        }
    }
}

fn no_adversary() -> AdversaryConfig {
    AdversaryConfig::None
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range { from: u64, count: u64 },
}

impl Seeds {
    /// The seeds in first-appearance order, with duplicates dropped.
    pub fn resolve(&self) -> (Vec<u64>, Vec<u64>) {
        let all: Vec<u64> = match self {
            Seeds::List(v) => v.clone(),
            Seeds::Range { from, count } => (*from..from.saturating_add(*count)).collect(),
        };
        let mut seen = BTreeSet::new();
        let mut dropped = BTreeSet::new();
        let mut kept = Vec::new();
        for s in all {
            if seen.insert(s) {
                kept.push(s);
            } else {
                dropped.insert(s);
            }
        }
        (kept, dropped.into_iter().collect())
    }
}

/// Crash tolerance for a sweep: a fixed t or a fraction of each n.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(untagged)]
pub enum Faults {
    Fixed(usize),
    Fraction { fraction: f64 },
}

impl Faults {
    pub fn for_n(&self, n: usize) -> usize {
        match *self {
            Faults::Fixed(t) => t,
            Faults::Fraction { fraction } => ((n as f64 * fraction).floor() as usize).min(n),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum GraphSource {
    Path { path: String },
    Random { gnp: Gnp },
    Inline(serde_json::Value),
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Gnp {
    pub n: usize,
    pub y: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(tag = "property", rename_all = "snake_case", deny_unknown_fields)]
pub enum Check {
    Expanding { l: usize },
    EdgeDense { l: usize, a: f64, b: f64 },
    Compact { l: usize, eps: f64, delta: usize },
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Estimate {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CoinStats {
    pub n: usize,
    pub d: u64,
    pub alpha: u64,
    pub trials: u64,
    /// Mean number of crashes per run.
    pub crashes: f64,
    pub p_all_zero: Estimate,
    pub p_all_one: Estimate,
    pub p_all_same: Estimate,
    pub mean_qubits_per_process: f64,
    pub rounds: u64,
}
