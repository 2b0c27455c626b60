use proptest::prelude::*;
use qsim_core::adversary::{NoneAdversary, RandomCrasher};
use qsim_core::coin::CoinParams;
use qsim_core::gossip::{merge_rumors, run_gossip, GossipProtocol, RumorSet, Tally};
use qsim_core::message::Payload;
use qsim_core::rng::SimRng;
use qsim_core::sim::{run_simulation, Adversary, AdversaryView, CrashDecision, EngineConfig};
use qsim_core::transcript::RecordMode;
use qsim_core::ProcessId;

/// Members of group `g` all start with the rumor `g -> one active process`.
fn grouped(n: usize, group: usize) -> Vec<RumorSet> {
    (0..n).map(|i| RumorSet::single((i / group) as u32, Tally { ones: 1, zeros: 0 })).collect()
}

#[test]
fn single_process_keeps_its_input() {
    let input = vec![RumorSet::single(0, Tally { ones: 1, zeros: 0 })];
    let tr = run_gossip(input.clone(), 2, 2, 0, &mut NoneAdversary, &EngineConfig::new(1, 0, 0)).unwrap();
    assert_eq!(tr.outputs, vec![Some(input[0].clone())]);
}

#[test]
fn one_rumor_reaches_everyone() {
    let mut initial = vec![RumorSet::new(); 8];
    initial[0] = RumorSet::single(0, Tally { ones: 1, zeros: 0 });
    let reaches = |graph_seed: u64| {
        let tr = run_gossip(initial.clone(), 3, 3, graph_seed, &mut NoneAdversary, &EngineConfig::new(8, 0, 0)).unwrap();
        let all = tr.survivor_outputs().all(|(_, o)| o.get(0) == Some(Tally { ones: 1, zeros: 0 }));
        all
    };
    assert!(reaches(0));
    // Delivery is a whp property of the graph family. At n = 8 the level-0
    // graph G(8, 3/8) leaves p1 without neighbors about 4% of the time,
    // and p1's rumor can then stay put.
    let misses = (0..1000).filter(|&s| !reaches(s)).count();
    assert!(misses <= 50, "{misses} of 1000 graph families lose the rumor");
}

struct WipeGroup(Vec<ProcessId>);

impl Adversary for WipeGroup {
    fn name(&self) -> String {
        "wipe".into()
    }

    fn decide(&mut self, view: &AdversaryView<'_>, _rng: &mut SimRng) -> CrashDecision {
        let mut d = CrashDecision::none();
        if view.round == 1 {
            d.newly_crashed = self.0.iter().copied().collect();
        }
        d
    }
}

#[test]
fn a_wiped_group_may_vanish_but_the_rest_arrive() {
    let n = 16;
    let mut adv = WipeGroup((1..=4).map(ProcessId::new).collect());
    let tr = run_gossip(grouped(n, 4), 4, 4, 1, &mut adv, &EngineConfig::new(n, n, 1)).unwrap();
    assert_eq!(tr.crash_count(), 4);
    for (_, o) in tr.survivor_outputs() {
        for key in 1..4 {
            assert_eq!(o.get(key).map(|t| t.ones), Some(1));
        }
    }
}

#[test]
fn survivors_agree_when_every_group_survives() {
    let n = 32;
    let (mut judged, mut failures) = (0, 0);
    for seed in 0..100 {
        let rate = 0.002 + 0.0001 * (seed % 10) as f64;
        let cfg = EngineConfig::new(n, n / 3 + 1, seed).record(RecordMode::Off);
        let tr = run_gossip(grouped(n, 4), 5, 5, seed, &mut RandomCrasher::new(rate, None), &cfg).unwrap();
        let alive: Vec<usize> = tr.survivors().map(|p| p.index()).collect();
        let every_group = (0..n / 4).all(|g| alive.iter().any(|&i| i / 4 == g));
        if !every_group || alive.len() * 3 < 2 * n {
            continue;
        }
        judged += 1;
        let outs: Vec<&RumorSet> = tr.survivor_outputs().map(|(_, o)| o).collect();
        if outs.windows(2).any(|w| w[0] != w[1]) {
            failures += 1;
        }
    }
    assert!(judged >= 50);
    assert!(failures as f64 <= 0.01 * judged as f64, "{failures} of {judged} runs disagree");
}

#[test]
fn responses_charge_level_plus_rumor_bits() {
    let n = 16;
    let mut proto = GossipProtocol::new(grouped(n, 4), 4, 4, 2).unwrap();
    let wire = *proto.family().wire();
    let family_rounds = proto.family().rounds();
    let tr = run_simulation(&mut proto, &mut NoneAdversary, &EngineConfig::new(n, 0, 2).record(RecordMode::Full)).unwrap();
    // key: ceil(log2 4) bits; value: two counts of ceil(log2 17) bits each.
    assert_eq!((wire.key_bits, wire.value_bits), (2, 10));
    for i in tr.records.iter().flat_map(|r| &r.intents) {
        if let Payload::Response { rumors: Some(r), .. } = &i.visible.payload {
            let entries = r.set().len() as u32;
            assert_eq!(i.visible.classical_bits, wire.level_bits + entries * 12);
            assert_eq!(i.visible.qubits, 0);
        }
    }
    let coin = CoinParams::relaxed(n, 4, 4).unwrap();
    assert_eq!(tr.rounds, coin.rounds());
    assert_eq!(family_rounds, coin.rounds());
}

fn rumor_set() -> impl Strategy<Value = RumorSet> {
    prop::collection::vec((0u32..6, 0u32..9, 0u32..9), 0..6).prop_map(|entries| {
        let mut s = RumorSet::new();
        for (k, ones, zeros) in entries {
            s.insert(k, Tally { ones, zeros });
        }
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn merge_is_a_semilattice(a in rumor_set(), b in rumor_set(), c in rumor_set()) {
        prop_assert_eq!(merge_rumors(&a, &RumorSet::new()), a.clone());
        prop_assert_eq!(merge_rumors(&a, &a), a.clone());
        prop_assert_eq!(merge_rumors(&a, &b), merge_rumors(&b, &a));
        prop_assert_eq!(merge_rumors(&merge_rumors(&a, &b), &c), merge_rumors(&a, &merge_rumors(&b, &c)));
    }

    #[test]
    fn merge_keeps_every_key(a in rumor_set(), b in rumor_set()) {
        let m = merge_rumors(&a, &b);
        for (k, v) in a.iter().chain(b.iter()) {
            let got = m.get(k).unwrap();
            prop_assert!(got.ones >= v.ones && got.zeros >= v.zeros);
        }
        prop_assert_eq!(m.len(), a.iter().chain(b.iter()).map(|(k, _)| k).collect::<std::collections::BTreeSet<_>>().len());
    }
}
