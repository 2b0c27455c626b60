//! JSON run configuration and the report produced by one run.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::AdversaryConfig;
use crate::coin::{run_coin, CoinParams};
use crate::consensus::{run_consensus_with, ConsensusParams, ConsensusSetup, Preset};
use crate::counting::{fast_counting, CountingParams};
use crate::error::SimError;
use crate::exchange::ceil_log2;
use crate::gossip::Tally;
use crate::rng::{split_rng, Tag, PUBLIC_OWNER};
use crate::sim::EngineConfig;
use crate::transcript::RecordMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputPattern {
    /// Independent fair bits drawn from the run seed.
    Random,
    AllZero,
    AllOne,
    /// p1 = 0, p2 = 1, p3 = 0, ...
    Alternating,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputSpec {
    Pattern(InputPattern),
    Explicit(Vec<u8>),
}

impl Default for InputSpec {
    fn default() -> Self {
        InputSpec::Pattern(InputPattern::Random)
    }
}

impl InputSpec {
    pub fn bits(&self, n: usize, seed: u64) -> Result<Vec<u8>, SimError> {
        Ok(match self {
            InputSpec::Pattern(InputPattern::Random) => {
                let mut rng = split_rng(seed, PUBLIC_OWNER, 0, Tag::INPUTS);
                (0..n).map(|_| rng.random_bool(0.5) as u8).collect()
            }
            InputSpec::Pattern(InputPattern::AllZero) => vec![0; n],
            InputSpec::Pattern(InputPattern::AllOne) => vec![1; n],
            InputSpec::Pattern(InputPattern::Alternating) => (0..n).map(|i| (i % 2) as u8).collect(),
            InputSpec::Explicit(v) => {
                if v.len() != n || v.iter().any(|&b| b > 1) {
                    return Err(SimError::InvalidConfig(format!(
                        "explicit inputs must be {n} bits, got {v:?}"
                    )));
                }
                v.clone()
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProtocolConfig {
    Consensus {
        #[serde(default)]
        preset: Option<Preset>,
        /// Explicit parameters; overrides the preset.
        #[serde(default)]
        params: Option<ConsensusParams>,
        #[serde(default)]
        inputs: InputSpec,
    },
    Coin {
        /// Defaults to ceil(log2 n), at least 2.
        #[serde(default)]
        d: Option<u64>,
        #[serde(default)]
        alpha: Option<u64>,
        #[serde(default)]
        relaxed: bool,
    },
    Counting {
        x: usize,
        #[serde(default)]
        d: Option<u64>,
        #[serde(default)]
        alpha: Option<u64>,
        #[serde(default)]
        inputs: InputSpec,
        #[serde(default)]
        graph_seed: u64,
    },
}

fn no_adversary() -> AdversaryConfig {
    AdversaryConfig::None
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n: usize,
    pub t: usize,
    pub seed: u64,
    pub protocol: ProtocolConfig,
    #[serde(default = "no_adversary")]
    pub adversary: AdversaryConfig,
    #[serde(default)]
    pub round_cap: Option<u64>,
    #[serde(default)]
    pub record: RecordMode,
}

impl SimConfig {
    pub fn from_json(s: &str) -> Result<Self, SimError> {
        serde_json::from_str(s).map_err(|e| SimError::InvalidConfig(e.to_string()))
    }

    pub fn engine(&self) -> EngineConfig {
        EngineConfig {
            n: self.n,
            t: self.t,
            seed: self.seed,
            round_cap: self.round_cap,
            cap_factor: 10,
            record: self.record,
        }
    }

    fn default_log(&self) -> u64 {
        u64::from(ceil_log2(self.n as u64)).max(2)
    }

    pub fn consensus_params(&self) -> Result<ConsensusParams, SimError> {
        match &self.protocol {
            ProtocolConfig::Consensus { preset, params, .. } => Ok(match (params, preset) {
                (Some(p), _) => *p,
                (None, Some(preset)) => ConsensusParams::preset(self.n, *preset),
                (None, None) => ConsensusParams::preset(self.n, Preset::Polylog),
            }),
            _ => Err(SimError::InvalidConfig("not a consensus configuration".into())),
        }
    }

    pub fn run(&self) -> Result<RunReport, SimError> {
        self.run_with_setup(None)
    }

    /// Runs the configured scenario; `setup` may carry a prebuilt consensus
    /// setup for the same `n` and parameters.
    pub fn run_with_setup(&self, setup: Option<std::sync::Arc<ConsensusSetup>>) -> Result<RunReport, SimError> {
        if self.n == 0 || self.t > self.n {
            return Err(SimError::InvalidConfig(format!(
                "need 1 <= n and t <= n, got n = {}, t = {}",
                self.n, self.t
            )));
        }
        let mut adversary = self.adversary.build(self.n)?;
        let engine = self.engine();
        let mut report = RunReport {
            protocol: String::new(),
            n: self.n,
            t: self.t,
            seed: self.seed,
            adversary: self.adversary.label().to_string(),
            rounds: 0,
            crashes: 0,
            bits_total: 0,
            qubits_total: 0,
            bits_amortized: 0.0,
            qubits_amortized: 0.0,
            invariants_hold: true,
            digest: None,
            detail: Detail::None,
        };
        match &self.protocol {
            ProtocolConfig::Consensus { inputs, .. } => {
                let params = self.consensus_params()?;
                let setup = match setup {
                    Some(s) if s.n == self.n && s.params == params => s,
                    _ => ConsensusSetup::new(self.n, params)?,
                };
                let bits = inputs.bits(self.n, self.seed)?;
                let out = run_consensus_with(setup, &bits, adversary.as_mut(), &engine)?;
                report.fill(&out.transcript);
                report.protocol = "consensus".into();
                report.invariants_hold = out.agreed && out.valid && out.terminated;
                report.detail = Detail::Consensus {
                    params,
                    phases: out.stats.phases,
                    agreed: out.agreed,
                    valid: out.valid,
                    terminated: out.terminated,
                    decision: out.decision(),
                    coin_invocations: out.stats.coin_invocations,
                    fallback_used: out.stats.fallback_used,
                };
            }
            ProtocolConfig::Coin { d, alpha, relaxed } => {
                let d = d.unwrap_or(self.default_log());
                let alpha = alpha.unwrap_or(self.default_log());
                let params = if *relaxed {
                    CoinParams::relaxed(self.n, d, alpha)?
                } else {
                    CoinParams::new(self.n, d, alpha)?
                };
                let tr = run_coin(params, self.seed, adversary.as_mut(), &engine)?;
                report.fill(&tr);
                report.protocol = "coin".into();
                let bits: Vec<u8> = tr.survivor_outputs().map(|(_, o)| o.bit).collect();
                let all_same = bits.windows(2).all(|w| w[0] == w[1]);
                report.detail = Detail::Coin {
                    d,
                    alpha,
                    all_same,
                    common_bit: if all_same { bits.first().copied() } else { None },
                    ones: bits.iter().filter(|&&b| b == 1).count(),
                    survivors: bits.len(),
                };
            }
            ProtocolConfig::Counting {
                x,
                d,
                alpha,
                inputs,
                graph_seed,
            } => {
                let params = CountingParams {
                    x: *x,
                    d: d.unwrap_or(self.default_log()),
                    alpha: alpha.unwrap_or(self.default_log()),
                };
                let bits = inputs.bits(self.n, self.seed)?;
                let tr = fast_counting(&bits, params, *graph_seed, adversary.as_mut(), &engine)?;
                report.fill(&tr);
                report.protocol = "counting".into();
                let start = bits.iter().fold(Tally::default(), |t, &b| t.add(Tally::of_bit(b)));
                let end = tr
                    .survivors()
                    .fold(Tally::default(), |t, p| t.add(Tally::of_bit(bits[p.index()])));
                let sandwich = tr.survivor_outputs().all(|(_, o)| {
                    end.ones <= o.ones && o.ones <= start.ones && end.zeros <= o.zeros && o.zeros <= start.zeros
                });
                report.invariants_hold = sandwich;
                report.detail = Detail::Counting {
                    params,
                    true_ones: start.ones,
                    surviving_ones: end.ones,
                    min_count: tr.survivor_outputs().map(|(_, o)| o.ones).min(),
                    max_count: tr.survivor_outputs().map(|(_, o)| o.ones).max(),
                    sandwich,
                };
            }
        }
        Ok(report)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Detail {
    None,
    Consensus {
        params: ConsensusParams,
        phases: u32,
        agreed: bool,
        valid: bool,
        terminated: bool,
        decision: Option<u8>,
        coin_invocations: u32,
        fallback_used: bool,
    },
    Coin {
        d: u64,
        alpha: u64,
        all_same: bool,
        common_bit: Option<u8>,
        ones: usize,
        survivors: usize,
    },
    Counting {
        params: CountingParams,
        true_ones: u32,
        surviving_ones: u32,
        min_count: Option<u32>,
        max_count: Option<u32>,
        sandwich: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub protocol: String,
    pub n: usize,
    pub t: usize,
    pub seed: u64,
    pub adversary: String,
    pub rounds: u64,
    pub crashes: usize,
    pub bits_total: u64,
    pub qubits_total: u64,
    pub bits_amortized: f64,
    pub qubits_amortized: f64,
    pub invariants_hold: bool,
    pub digest: Option<String>,
    #[serde(flatten)]
    pub detail: Detail,
}

impl RunReport {
    fn fill<O>(&mut self, tr: &crate::transcript::Transcript<O>) {
        let totals = tr.ledger.totals();
        self.rounds = tr.rounds;
        self.crashes = tr.crash_count();
        self.bits_total = totals.classical_bits;
        self.qubits_total = totals.qubits;
        self.bits_amortized = tr.ledger.amortized_bits();
        self.qubits_amortized = tr.ledger.amortized_qubits();
        self.digest = tr.digest.clone();
    }
}
