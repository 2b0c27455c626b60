//! Recursive fuzzy counting.
//!
//! The member list is split into at most `x` balanced contiguous groups,
//! each group counts itself recursively, and the group subtotals are then
//! gossiped among all members as rumors keyed by group index. A process's
//! count is the sum of the subtotals it heard about.
//!
//! Scheduling: the plan is a tree of nodes. A leaf finishes at step 0. An
//! internal node starts its gossip once its slowest child has finished and
//! runs it for the gossip length of its own size. Every process follows the
//! path from its leaf to the root and is idle between windows.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::exchange::Exchange;
use crate::gossip::{GossipFamily, RumorCarry, RumorSet, Tally};
use crate::graph::top_level;
use crate::message::{Delivery, MessageIntent, ProcessId, ProcessSnapshot, Status};
use crate::rng::{derive_seed, Tag, PUBLIC_OWNER};
use crate::sim::{run_simulation, Adversary, EngineConfig, Protocol};
use crate::transcript::Transcript;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountingParams {
    pub x: usize,
    pub d: u64,
    pub alpha: u64,
}

impl CountingParams {
    pub fn validate(&self, n: usize) -> Result<(), SimError> {
        if self.x < 2 || (n >= 2 && self.x > n) {
            return Err(SimError::InvalidConfig(format!(
                "branching factor x = {} must lie in [2, n = {n}]",
                self.x
            )));
        }
        if self.d == 0 || self.alpha < 2 {
            return Err(SimError::InvalidConfig(format!(
                "need d >= 1 and alpha >= 2, got d = {}, alpha = {}",
                self.d, self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GroupPartition {
    pub groups: Vec<Vec<ProcessId>>,
}

impl GroupPartition {
    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }
}

/// Splits a sorted member list into `min(x, len)` contiguous groups whose
/// sizes differ by at most one, larger groups first.
pub fn partition(members: &[ProcessId], x: usize) -> GroupPartition {
    assert!(x >= 1 && !members.is_empty());
    let g = x.min(members.len());
    let base = members.len() / g;
    let extra = members.len() % g;
    let mut groups = Vec::with_capacity(g);
    let mut at = 0;
    for i in 0..g {
        let size = base + usize::from(i < extra);
        groups.push(members[at..at + size].to_vec());
        at += size;
    }
    GroupPartition { groups }
}

/// Recursion depth: smallest `j` with `x^j >= m`.
pub fn counting_depth(m: usize, x: usize) -> u32 {
    top_level(m as u64, 1, x as u64)
}

#[derive(Clone, Debug)]
pub struct PlanNode {
    pub members: Vec<ProcessId>,
    pub children: Vec<usize>,
    pub family: Option<Arc<GossipFamily>>,
    /// First step of this node's gossip.
    pub start: u64,
    /// Step after its last gossip round.
    pub end: u64,
    pub depth: u32,
}

/// Public recursion tree shared by every process.
#[derive(Clone, Debug)]
pub struct CountingPlan {
    params: CountingParams,
    nodes: Vec<PlanNode>,
    /// Per process index: (node, key of the child containing the process)
    /// from the leaf's parent up to the root, and the leaf node.
    paths: Vec<Option<(usize, Vec<(usize, u32)>)>>,
}

impl CountingPlan {
    /// `n` is the id range; `members` the sorted participants.
    pub fn build(n: usize, members: &[ProcessId], params: CountingParams, graph_seed: u64) -> Result<Self, SimError> {
        if members.is_empty() {
            return Err(SimError::InvalidConfig("counting needs at least one member".into()));
        }
        params.validate(members.len())?;
        let mut plan = CountingPlan {
            params,
            nodes: Vec::new(),
            paths: vec![None; n],
        };
        plan.add_node(members.to_vec(), 0, graph_seed)?;
        for leaf in 0..plan.nodes.len() {
            if !plan.nodes[leaf].children.is_empty() {
                continue;
            }
            let p = plan.nodes[leaf].members[0];
            plan.paths[p.index()] = Some((leaf, Vec::new()));
        }
        plan.fill_paths(0);
        Ok(plan)
    }

    fn add_node(&mut self, members: Vec<ProcessId>, depth: u32, graph_seed: u64) -> Result<usize, SimError> {
        let id = self.nodes.len();
        self.nodes.push(PlanNode {
            members: members.clone(),
            children: Vec::new(),
            family: None,
            start: 0,
            end: 0,
            depth,
        });
        if members.len() == 1 {
            return Ok(id);
        }
        let part = partition(&members, self.params.x);
        let mut children = Vec::with_capacity(part.groups.len());
        for g in part.groups {
            children.push(self.add_node(g, depth + 1, graph_seed)?);
        }
        let start = children.iter().map(|&c| self.nodes[c].end).max().unwrap_or(0);
        let seed = derive_seed(graph_seed, PUBLIC_OWNER, id as u64, Tag::GOSSIP_GRAPH);
        let family = GossipFamily::sample(members, self.params.d, self.params.alpha, children.len(), seed)?;
        let node = &mut self.nodes[id];
        node.start = start;
        node.end = start + family.rounds();
        node.family = Some(Arc::new(family));
        node.children = children;
        Ok(id)
    }

    fn fill_paths(&mut self, id: usize) {
        let children = self.nodes[id].children.clone();
        for (key, &c) in children.iter().enumerate() {
            self.fill_paths(c);
            for p in self.nodes[c].members.clone() {
                if let Some((_, path)) = self.paths[p.index()].as_mut() {
                    path.push((id, key as u32));
                }
            }
        }
    }

    pub fn params(&self) -> &CountingParams {
        &self.params
    }

    pub fn nodes(&self) -> &[PlanNode] {
        &self.nodes
    }

    pub fn root(&self) -> &PlanNode {
        &self.nodes[0]
    }

    /// Total steps of one counting run.
    pub fn rounds(&self) -> u64 {
        self.nodes[0].end
    }

    /// Height of the recursion tree.
    pub fn depth(&self) -> u32 {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn is_member(&self, p: ProcessId) -> bool {
        self.paths.get(p.index()).is_some_and(Option::is_some)
    }

    fn path(&self, p: ProcessId) -> &[(usize, u32)] {
        &self.paths[p.index()].as_ref().expect("member of the plan").1
    }
}

/// One process's progress through a counting run.
#[derive(Clone, Debug)]
pub struct CountingRun {
    plan: Arc<CountingPlan>,
    me: ProcessId,
    /// Next path entry to run.
    next: usize,
    /// Result of the last finished node.
    partial: Tally,
    active: Option<(usize, Exchange<RumorCarry>)>,
    done: bool,
}

impl CountingRun {
    pub fn new(plan: Arc<CountingPlan>, me: ProcessId, input: Tally) -> Self {
        let done = plan.path(me).is_empty();
        CountingRun {
            plan,
            me,
            next: 0,
            partial: input,
            active: None,
            done,
        }
    }

    /// The count, once the root has finished.
    pub fn result(&self) -> Option<Tally> {
        self.done.then_some(self.partial)
    }

    /// Best current knowledge: the sum of rumors heard in the active window,
    /// or the last completed subtotal.
    pub fn current(&self) -> Tally {
        match &self.active {
            Some((_, m)) => m.carried().set().sum(),
            None => self.partial,
        }
    }

    pub fn active_node(&self) -> Option<usize> {
        self.active.as_ref().map(|(node, _)| *node)
    }

    pub fn send(&mut self, step: u64, out: &mut Vec<MessageIntent>) {
        if self.active.is_none() && !self.done {
            let (node, key) = self.plan.path(self.me)[self.next];
            let info = &self.plan.nodes()[node];
            if info.start == step {
                let family = info.family.as_ref().expect("internal node has a family");
                let machine = family.machine(self.me, RumorSet::single(key, self.partial));
                self.active = Some((node, machine));
            }
        }
        if let Some((node, m)) = self.active.as_mut() {
            m.send(step - self.plan.nodes()[*node].start, out);
        }
    }

    pub fn receive(&mut self, step: u64, inbox: &[Delivery]) {
        let Some((node, m)) = self.active.as_mut() else {
            return;
        };
        let info = &self.plan.nodes()[*node];
        m.receive(step - info.start, inbox);
        if step + 1 == info.end {
            self.partial = m.carried().set().sum();
            self.active = None;
            self.next += 1;
            self.done = self.next == self.plan.path(self.me).len();
        }
    }
}

/// Standalone fuzzy counting of the processes whose input bit is 1 (and,
/// alongside, of those whose bit is 0).
pub struct CountingProtocol {
    plan: Arc<CountingPlan>,
    runs: Vec<CountingRun>,
    round: u64,
}

impl CountingProtocol {
    pub fn new(inputs: &[u8], params: CountingParams, graph_seed: u64) -> Result<Self, SimError> {
        let n = inputs.len();
        let members: Vec<ProcessId> = (0..n).map(ProcessId::from_index).collect();
        let plan = Arc::new(CountingPlan::build(n, &members, params, graph_seed)?);
        Ok(Self::with_plan(inputs, plan))
    }

    pub fn with_plan(inputs: &[u8], plan: Arc<CountingPlan>) -> Self {
        let runs = inputs
            .iter()
            .enumerate()
            .map(|(i, &b)| CountingRun::new(Arc::clone(&plan), ProcessId::from_index(i), Tally::of_bit(b)))
            .collect();
        CountingProtocol { plan, runs, round: 0 }
    }

    pub fn plan(&self) -> &Arc<CountingPlan> {
        &self.plan
    }
}

impl Protocol for CountingProtocol {
    type Output = Tally;

    fn n(&self) -> usize {
        self.runs.len()
    }

    fn expected_rounds(&self) -> u64 {
        self.plan.rounds()
    }

    fn begin_round(&mut self, round: u64, _status: &[Status]) {
        self.round = round;
    }

    fn send(&mut self, p: ProcessId, round: u64, out: &mut Vec<MessageIntent>) {
        self.runs[p.index()].send(round - 1, out);
    }

    fn receive(&mut self, p: ProcessId, round: u64, inbox: &[Delivery]) {
        self.runs[p.index()].receive(round - 1, inbox);
    }

    fn is_halted(&self, _p: ProcessId) -> bool {
        self.round >= self.plan.rounds()
    }

    fn snapshot(&self, p: ProcessId) -> ProcessSnapshot {
        ProcessSnapshot {
            tally: Some(self.runs[p.index()].current()),
            ..ProcessSnapshot::default()
        }
    }

    fn output(&self, p: ProcessId) -> Option<Tally> {
        self.runs[p.index()].result()
    }
}

pub fn fast_counting(
    inputs: &[u8],
    params: CountingParams,
    graph_seed: u64,
    adversary: &mut dyn Adversary,
    cfg: &EngineConfig,
) -> Result<Transcript<Tally>, SimError> {
    let mut protocol = CountingProtocol::new(inputs, params, graph_seed)?;
    run_simulation(&mut protocol, adversary, cfg)
}
