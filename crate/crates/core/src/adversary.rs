//! Built-in crash strategies.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::message::ProcessId;
use crate::rng::SimRng;
use crate::sim::{Adversary, AdversaryView, CrashDecision};

/// Crashes still available to a strategy with an optional private cap.
fn allowance(view: &AdversaryView<'_>, own_cap: Option<usize>, used: usize) -> usize {
    let own = own_cap.map_or(usize::MAX, |c| c.saturating_sub(used));
    view.remaining_budget().min(own)
}

#[derive(Clone, Debug, Default)]
pub struct NoneAdversary;

impl Adversary for NoneAdversary {
    fn name(&self) -> String {
        "none".into()
    }

    fn decide(&mut self, _view: &AdversaryView<'_>, _rng: &mut SimRng) -> CrashDecision {
        CrashDecision::none()
    }
}

/// Crashes each running process with probability `rate` per round; a
/// crashing sender still reaches each of its recipients with probability 1/2.
#[derive(Clone, Debug)]
pub struct RandomCrasher {
    pub rate: f64,
    pub budget: Option<usize>,
    used: usize,
}

impl RandomCrasher {
    pub fn new(rate: f64, budget: Option<usize>) -> Self {
        assert!((0.0..=1.0).contains(&rate), "crash rate {rate} outside [0, 1]");
        RandomCrasher { rate, budget, used: 0 }
    }
}

impl Adversary for RandomCrasher {
    fn name(&self) -> String {
        "random".into()
    }

    fn decide(&mut self, view: &AdversaryView<'_>, rng: &mut SimRng) -> CrashDecision {
        let mut left = allowance(view, self.budget, self.used);
        let mut decision = CrashDecision::none();
        if left == 0 || self.rate == 0.0 {
            return decision;
        }
        for p in view.running() {
            if left == 0 {
                break;
            }
            if rng.random_bool(self.rate) {
                decision.newly_crashed.insert(p);
                left -= 1;
            }
        }
        for v in view.intents {
            if decision.newly_crashed.contains(&v.sender) && rng.random_bool(0.5) {
                decision
                    .partial_delivery
                    .entry(v.sender)
                    .or_default()
                    .insert(v.recipient);
            }
        }
        self.used += decision.newly_crashed.len();
        decision
    }
}

/// Crashes the senders with the most outgoing intents, lowest id first on
/// ties, delivering nothing for them.
#[derive(Clone, Debug)]
pub struct DegreeTargeter {
    pub per_round: usize,
    pub budget: Option<usize>,
    used: usize,
}

impl DegreeTargeter {
    pub fn new(per_round: usize, budget: Option<usize>) -> Self {
        DegreeTargeter {
            per_round,
            budget,
            used: 0,
        }
    }
}

impl Adversary for DegreeTargeter {
    fn name(&self) -> String {
        "degree_targeter".into()
    }

    fn decide(&mut self, view: &AdversaryView<'_>, _rng: &mut SimRng) -> CrashDecision {
        let left = allowance(view, self.budget, self.used).min(self.per_round);
        let mut decision = CrashDecision::none();
        if left == 0 {
            return decision;
        }
        let mut out: BTreeMap<ProcessId, usize> = BTreeMap::new();
        for v in view.intents {
            *out.entry(v.sender).or_default() += 1;
        }
        let mut ranked: Vec<(ProcessId, usize)> = out.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        decision.newly_crashed = ranked.into_iter().take(left).map(|(p, _)| p).collect();
        self.used += decision.newly_crashed.len();
        decision
    }
}

/// Tries to cut `target` off: crashes, in id order, every process sending
/// to it and every recipient of its messages, never touching `protected`.
#[derive(Clone, Debug)]
pub struct SplitAttacker {
    pub target: ProcessId,
    pub protected: ProcessId,
    pub budget: Option<usize>,
    used: usize,
}

impl SplitAttacker {
    pub fn new(target: ProcessId, protected: ProcessId, budget: Option<usize>) -> Self {
        SplitAttacker {
            target,
            protected,
            budget,
            used: 0,
        }
    }
}

impl Adversary for SplitAttacker {
    fn name(&self) -> String {
        "split_attacker".into()
    }

    fn decide(&mut self, view: &AdversaryView<'_>, _rng: &mut SimRng) -> CrashDecision {
        let left = allowance(view, self.budget, self.used);
        let mut decision = CrashDecision::none();
        if left == 0 {
            return decision;
        }
        let mut bridging = BTreeSet::new();
        for v in view.intents {
            if v.recipient == self.target {
                bridging.insert(v.sender);
            } else if v.sender == self.target {
                bridging.insert(v.recipient);
            }
        }
        decision.newly_crashed = bridging
            .into_iter()
            .filter(|&p| p != self.protected && p != self.target && view.status[p.index()].is_running())
            .take(left)
            .collect();
        self.used += decision.newly_crashed.len();
        decision
    }
}

/// Strategy selection as it appears in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversaryConfig {
    None,
    Random {
        rate: f64,
        #[serde(default)]
        budget: Option<usize>,
    },
    DegreeTargeter {
        #[serde(default = "one")]
        per_round: usize,
        #[serde(default)]
        budget: Option<usize>,
    },
    SplitAttacker {
        #[serde(default)]
        target: Option<u32>,
        #[serde(default)]
        protected: Option<u32>,
        #[serde(default)]
        budget: Option<usize>,
    },
}

fn one() -> usize {
    1
}

impl AdversaryConfig {
    pub fn label(&self) -> &'static str {
        match self {
            AdversaryConfig::None => "none",
            AdversaryConfig::Random { .. } => "random",
            AdversaryConfig::DegreeTargeter { .. } => "degree_targeter",
            AdversaryConfig::SplitAttacker { .. } => "split_attacker",
        }
    }

    /// Instantiates the strategy for `n` processes. The split attacker
    /// defaults to target p1 and protects pn.
    pub fn build(&self, n: usize) -> Result<Box<dyn Adversary + Send>, SimError> {
        let id = |v: u32| -> Result<ProcessId, SimError> {
            if v == 0 || v as usize > n {
                Err(SimError::InvalidConfig(format!("process id {v} outside [1, {n}]")))
            } else {
                Ok(ProcessId::new(v))
            }
        };
        Ok(match *self {
            AdversaryConfig::None => Box::new(NoneAdversary),
            AdversaryConfig::Random { rate, budget } => {
                if !(0.0..=1.0).contains(&rate) {
                    return Err(SimError::InvalidConfig(format!("crash rate {rate} outside [0, 1]")));
                }
                Box::new(RandomCrasher::new(rate, budget))
            }
            AdversaryConfig::DegreeTargeter { per_round, budget } => Box::new(DegreeTargeter::new(per_round, budget)),
            AdversaryConfig::SplitAttacker {
                target,
                protected,
                budget,
            } => Box::new(SplitAttacker::new(
                id(target.unwrap_or(1))?,
                id(protected.unwrap_or(n as u32))?,
                budget,
            )),
        })
    }
}
