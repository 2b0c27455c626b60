//! End-to-end acceptance suite. Every criterion runs at its stated scale and
//! prints one PASS/FAIL line; the test fails if any criterion fails.
//!
//! Run with `cargo test -p qsim-core --test acceptance -- --nocapture` to see
//! the per-criterion lines and diagnostics.

use std::sync::Arc;
use std::time::Instant;

use num_rational::Ratio;
use proptest::prelude::*;
use qsim_core::adversary::{AdversaryConfig, NoneAdversary, RandomCrasher};
use qsim_core::coin::{merge_registers, run_coin, CoinParams, HiddenRegister};
use qsim_core::config::{InputPattern, InputSpec, ProtocolConfig, SimConfig};
use qsim_core::consensus::{phase_decision, run_consensus_with, ConsensusParams, ConsensusSetup, PhaseAction, Preset};
use qsim_core::counting::{CountingParams, CountingPlan, CountingProtocol};
use qsim_core::gossip::Tally;
use qsim_core::graph::{delta_core, is_compact, is_edge_dense, is_expanding, sample_gnp, CheckOptions, Graph, Method};
use qsim_core::rng::{split_rng, Tag};
use qsim_core::sim::{run_simulation, EngineConfig};
use qsim_core::stats::{mean, std_dev, wilson};
use qsim_core::transcript::RecordMode;
use qsim_core::ProcessId;
use rand::Rng;
use rayon::prelude::*;

struct Outcome {
    id: u32,
    title: &'static str,
    pass: bool,
    note: String,
}

fn report(id: u32, title: &'static str, pass: bool, note: String) -> Outcome {
    Outcome { id, title, pass, note }
}

const PRESETS: [Preset; 2] = [Preset::Constant { epsilon: 0.5 }, Preset::Polylog];

fn adversaries() -> Vec<AdversaryConfig> {
    vec![
        AdversaryConfig::None,
        AdversaryConfig::Random { rate: 0.02, budget: None },
        AdversaryConfig::DegreeTargeter {
            per_round: 1,
            budget: None,
        },
        AdversaryConfig::SplitAttacker {
            target: None,
            protected: None,
            budget: None,
        },
    ]
}

fn members(n: usize) -> Vec<ProcessId> {
    (0..n).map(ProcessId::from_index).collect()
}

fn popcount(bits: &[u8], keep: impl Fn(usize) -> bool) -> Tally {
    bits.iter()
        .enumerate()
        .filter(|&(i, _)| keep(i))
        .fold(Tally::default(), |t, (_, &b)| t.add(Tally::of_bit(b)))
}

// 1. Agreement and validity on every run.
fn safety() -> Outcome {
    let seeds = 96u64;
    let (mut runs, mut bad) = (0u32, Vec::new());
    for n in [8usize, 16, 32, 64] {
        for preset in PRESETS {
            let setup = ConsensusSetup::new(n, ConsensusParams::preset(n, preset)).unwrap();
            for adv in adversaries() {
                for seed in 0..seeds {
                    let t = if seed % 2 == 0 { (n / 3).max(1) } else { n };
                    let inputs = InputSpec::default().bits(n, seed).unwrap();
                    let cfg = EngineConfig::new(n, t, seed).record(RecordMode::Off);
                    let mut a = adv.build(n).unwrap();
                    let out = run_consensus_with(setup.clone(), &inputs, a.as_mut(), &cfg).unwrap();
                    // Agreement and validity recomputed from the raw outputs.
                    let decided: Vec<u8> = out.transcript.outputs.iter().flatten().copied().collect();
                    let agree = decided.windows(2).all(|w| w[0] == w[1]);
                    let valid = decided.iter().all(|b| inputs.contains(b));
                    let live = out
                        .transcript
                        .status
                        .iter()
                        .zip(&out.transcript.outputs)
                        .all(|(s, o)| s.is_crashed() || o.is_some());
                    runs += 1;
                    if !(agree && valid && live) {
                        bad.push(format!("n={n} {preset:?} {} seed={seed} t={t}", adv.label()));
                    }
                }
            }
        }
    }
    report(
        1,
        "safety: agreement and validity with probability 1",
        bad.is_empty() && runs >= 3000,
        format!("{runs} runs, {} violations {:?}", bad.len(), bad.iter().take(3).collect::<Vec<_>>()),
    )
}

// 2. Counting sandwich and crash-free exactness.
fn counting_sandwich() -> Outcome {
    let seeds = 64u64;
    let (mut runs, mut bad, mut inexact) = (0u32, 0u32, 0u32);
    for n in [8usize, 16, 32, 64] {
        let log = u64::from(qsim_core::exchange::ceil_log2(n as u64)).max(2);
        for x in [2usize, 4] {
            let params = CountingParams { x, d: log, alpha: log };
            let plan = Arc::new(CountingPlan::build(n, &members(n), params, 11).unwrap());
            for adv in adversaries() {
                for seed in 0..seeds {
                    let t = if seed % 2 == 0 { (n / 3).max(1) } else { n };
                    let inputs = InputSpec::default().bits(n, seed).unwrap();
                    let cfg = EngineConfig::new(n, t, seed).record(RecordMode::Off);
                    let mut a = adv.build(n).unwrap();
                    let mut proto = CountingProtocol::with_plan(&inputs, plan.clone());
                    let tr = run_simulation(&mut proto, a.as_mut(), &cfg).unwrap();
                    let start = popcount(&inputs, |_| true);
                    let end = popcount(&inputs, |i| !tr.status[i].is_crashed());
                    runs += 1;
                    for (_, o) in tr.survivor_outputs() {
                        let ok = end.ones <= o.ones && o.ones <= start.ones && end.zeros <= o.zeros && o.zeros <= start.zeros;
                        if !ok {
                            bad += 1;
                        }
                        if tr.crash_count() == 0 && *o != start {
                            inexact += 1;
                        }
                    }
                    if tr.survivor_outputs().count() != tr.survivors().count() {
                        bad += 1;
                    }
                }
            }
        }
    }
    report(
        2,
        "fuzzy-counting sandwich, exact when crash-free",
        bad == 0 && inexact == 0 && runs >= 2000,
        format!("{runs} runs, {bad} sandwich violations, {inexact} inexact crash-free outputs"),
    )
}

// 3. Weak-coin fairness at n = 64.
fn coin_fairness() -> Outcome {
    let n = 64;
    let params = CoinParams::new(n, 6, 8).unwrap();
    let trials = 2000u64;
    let budget = n / 3;
    let (mut zeros, mut ones, mut crashes) = (0u64, 0u64, 0usize);
    for seed in 0..trials {
        // t = budget + 1 lets the engine allow exactly `budget` crashes.
        let cfg = EngineConfig::new(n, budget + 1, seed).record(RecordMode::Off);
        let mut adv = RandomCrasher::new(0.005, Some(budget));
        let tr = run_coin(params, seed, &mut adv, &cfg).unwrap();
        crashes += tr.crash_count();
        let bits: Vec<u8> = tr.survivor_outputs().map(|(_, o)| o.bit).collect();
        if bits.iter().all(|&b| b == 0) {
            zeros += 1;
        }
        if bits.iter().all(|&b| b == 1) {
            ones += 1;
        }
    }
    let (lo0, _) = wilson(zeros, trials, 1.96);
    let (lo1, _) = wilson(ones, trials, 1.96);

    let clean = 500u64;
    let mut agree = 0u64;
    for seed in 0..clean {
        let cfg = EngineConfig::new(n, 0, 10_000 + seed).record(RecordMode::Off);
        let tr = run_coin(params, 10_000 + seed, &mut NoneAdversary, &cfg).unwrap();
        let bits: Vec<u8> = tr.survivor_outputs().map(|(_, o)| o.bit).collect();
        if bits.len() == n && bits.windows(2).all(|w| w[0] == w[1]) {
            agree += 1;
        }
    }
    report(
        3,
        "weak-coin fairness at n = 64",
        lo0 >= 0.25 && lo1 >= 0.25 && agree == clean,
        format!(
            "P(all 0) = {:.3} (lower {lo0:.3}), P(all 1) = {:.3} (lower {lo1:.3}), mean crashes {:.1}, crash-free agreement {agree}/{clean}",
            zeros as f64 / trials as f64,
            ones as f64 / trials as f64,
            crashes as f64 / trials as f64
        ),
    )
}

// 4. Expected phases stay constant in n.
fn expected_phases() -> Outcome {
    // Pilot (48 seeds per n, same adversary): every run took exactly 5
    // phases. The crash budget is spent during the first phase, which fails
    // the first termination check and passes the next one. The bound below is
    // the stated ceiling, not the pilot value.
    let bound = 12.0;
    let seeds = 48u64;
    let mut xs = Vec::new();
    let mut means = Vec::new();
    let mut vars = Vec::new();
    for n in [32usize, 64, 128] {
        let setup = ConsensusSetup::new(n, ConsensusParams::preset(n, Preset::Constant { epsilon: 0.5 })).unwrap();
        let mut phases = Vec::new();
        for seed in 0..seeds {
            let inputs = InputSpec::default().bits(n, seed).unwrap();
            let cfg = EngineConfig::new(n, n / 3, seed).record(RecordMode::Off);
            let mut adv = RandomCrasher::new(0.01, None);
            let out = run_consensus_with(setup.clone(), &inputs, &mut adv, &cfg).unwrap();
            phases.push(f64::from(out.stats.phases));
        }
        xs.push((n as f64).log2());
        means.push(mean(&phases));
        vars.push(std_dev(&phases).powi(2) / phases.len() as f64);
    }
    // Weighted least-squares slope of the means against log2 n and its
    // standard error from the per-n sampling variances.
    let mx = mean(&xs);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope: f64 = xs.iter().zip(&means).map(|(x, m)| (x - mx) * m).sum::<f64>() / sxx;
    let se = xs.iter().zip(&vars).map(|(x, v)| (x - mx).powi(2) * v).sum::<f64>().sqrt() / sxx;
    let max_mean = means.iter().cloned().fold(f64::MIN, f64::max);
    let increasing = means.windows(2).all(|w| w[1] > w[0]);
    let trend = increasing && slope > 2.0 * se + 1e-9;
    report(
        4,
        "expected phases O(1), constant preset eps = 0.5",
        max_mean <= bound && !trend,
        format!("means {means:.2?} at n = 32/64/128, slope {slope:.3} per doubling (se {se:.3})"),
    )
}

fn smallest_power(base: u64, scale: u64, target: u64) -> u32 {
    let (mut i, mut v) = (0u32, scale);
    while v < target {
        v = v.saturating_mul(base);
        i += 1;
    }
    i
}

// 5. Exact structural round counts.
fn structural_rounds() -> Outcome {
    let mut bad = Vec::new();
    let mut checked = 0;
    for (n, d, alpha) in [(8usize, 3u64, 3u64), (16, 4, 4), (32, 5, 6), (64, 6, 6), (64, 6, 8), (100, 7, 7), (128, 7, 11)] {
        let params = CoinParams::new(n, d, alpha).unwrap();
        let k = u64::from(smallest_power(alpha, d, n as u64));
        let gamma = u64::from(smallest_power(alpha, 1, n as u64));
        let expected = (k + 2).pow(2) * (gamma + 1) * 2;
        let cfg = EngineConfig::new(n, 0, 1).record(RecordMode::Off);
        let tr = run_coin(params, 1, &mut NoneAdversary, &cfg).unwrap();
        checked += 1;
        if tr.rounds != expected || params.rounds() != expected {
            bad.push(format!("coin n={n} d={d} a={alpha}: {} vs {expected}", tr.rounds));
        }
    }
    for n in 2usize..=130 {
        for x in [2usize, 3, 4, 5, 8, 11, 16] {
            if x > n {
                continue;
            }
            let params = CountingParams { x, d: 2, alpha: 2 };
            let plan = CountingPlan::build(n, &members(n), params, 0).unwrap();
            let expected = smallest_power(x as u64, 1, n as u64);
            checked += 1;
            if plan.depth() != expected {
                bad.push(format!("counting n={n} x={x}: depth {} vs {expected}", plan.depth()));
            }
        }
    }
    report(
        5,
        "structural round counts and counting depth",
        bad.is_empty(),
        format!("{checked} configurations, mismatches {bad:?}"),
    )
}

// 6. Communication constants against the asymptotic formulas.
fn communication_shape() -> Outcome {
    let seeds = 20u64;
    let mut pass = true;
    let mut notes = Vec::new();
    for preset in PRESETS {
        let mut coin_c = Vec::new();
        let mut count_c = Vec::new();
        for n in [32usize, 64, 128] {
            let p = ConsensusParams::preset(n, preset);
            let (l, la, lx) = ((n as f64).log2(), (p.alpha as f64).log2(), (p.x as f64).log2());
            let core = (l / la).powi(4) * p.d as f64 * (p.alpha as f64).powi(2) * l;
            let coin_formula = core;
            let count_formula = (l / lx) * core * p.x as f64;
            let params = CoinParams::new(n, p.d, p.alpha).unwrap();
            let plan = Arc::new(CountingPlan::build(n, &members(n), p.counting_params(), 0).unwrap());
            let (mut coin, mut count) = (0.0, 0.0);
            for seed in 0..seeds {
                let cfg = EngineConfig::new(n, 0, seed).record(RecordMode::Off);
                let tr = run_coin(params, seed, &mut NoneAdversary, &cfg).unwrap();
                // Quantum and classical communication together.
                coin += tr.ledger.amortized_qubits() + tr.ledger.amortized_bits();
                let inputs = InputSpec::default().bits(n, seed).unwrap();
                let mut proto = CountingProtocol::with_plan(&inputs, plan.clone());
                let tr = run_simulation(&mut proto, &mut NoneAdversary, &cfg).unwrap();
                count += tr.ledger.amortized_bits();
            }
            coin_c.push(coin / seeds as f64 / coin_formula);
            count_c.push(count / seeds as f64 / count_formula);
        }
        for (what, cs) in [("coin", &coin_c), ("counting", &count_c)] {
            let spread = cs.iter().cloned().fold(f64::MIN, f64::max) / cs.iter().cloned().fold(f64::MAX, f64::min);
            let ok = spread <= 2.0;
            pass &= ok;
            let name = match preset {
                Preset::Constant { .. } => "constant",
                Preset::Polylog => "polylog",
            };
            notes.push(format!("{name} {what} c = {cs:.3?} spread {spread:.2}{}", if ok { "" } else { " (over 2)" }));
        }
    }
    report(6, "communication shape, constants within a factor 2", pass, notes.join("; "))
}

// Brute-force property oracles over bitmasks.
fn adjacency_masks(g: &Graph) -> Vec<u32> {
    (0..g.n())
        .map(|v| g.neighbors(v).iter().fold(0u32, |m, &u| m | 1 << u))
        .collect()
}

fn internal_edges(adj: &[u32], set: u32) -> u32 {
    let mut s = set;
    let mut twice = 0;
    while s != 0 {
        let v = s.trailing_zeros() as usize;
        s &= s - 1;
        twice += (adj[v] & set).count_ones();
    }
    twice / 2
}

fn min_degree_ok(adj: &[u32], set: u32, delta: u32) -> bool {
    let mut s = set;
    while s != 0 {
        let v = s.trailing_zeros() as usize;
        s &= s - 1;
        if (adj[v] & set).count_ones() < delta {
            return false;
        }
    }
    true
}

/// Largest subset of `set` with minimum internal degree `delta`, by
/// trying every submask.
fn brute_core_size(adj: &[u32], set: u32, delta: u32) -> u32 {
    let mut best = 0;
    let mut sub = set;
    loop {
        if sub.count_ones() > best && min_degree_ok(adj, sub, delta) {
            best = sub.count_ones();
        }
        if sub == 0 {
            return best;
        }
        sub = (sub - 1) & set;
    }
}

fn brute_expanding(adj: &[u32], n: usize, l: u32) -> bool {
    let full = (1u32 << n) - 1;
    let sets: Vec<u32> = (0..=full).filter(|m| m.count_ones() == l).collect();
    for &x in &sets {
        let reach = (0..n).filter(|&v| x >> v & 1 == 1).fold(0, |m, v| m | adj[v]);
        if sets.iter().any(|&y| y & x == 0 && y & reach == 0) {
            return false;
        }
    }
    true
}

fn brute_edge_dense(adj: &[u32], n: usize, l: u32, a: f64, b: f64) -> bool {
    (1..1u32 << n).all(|s| {
        let (size, e) = (s.count_ones(), f64::from(internal_edges(adj, s)));
        (size < l || e >= a * f64::from(size)) && (size > l || e <= b * f64::from(size))
    })
}

fn brute_compact(adj: &[u32], n: usize, l: u32, eps: f64, delta: u32) -> bool {
    (1..1u32 << n)
        .filter(|s| s.count_ones() >= l)
        .all(|s| f64::from(brute_core_size(adj, s, delta)) >= eps * f64::from(l))
}

// 7. Graph certification.
fn graph_certification() -> Outcome {
    let n = 256usize;
    let log = (n as f64).log2();
    let y = 64.0 * log / n as f64;
    let l = 130.0 * log / y;
    let (big_l, delta) = ((16.0 * l).ceil() as usize, ((2.0 / 3.0) * y * l).ceil() as usize);
    let opts = CheckOptions {
        trials: 10_000,
        seed: 7,
        ..CheckOptions::default()
    };
    let g = sample_gnp(n, y.min(1.0), 5);
    let literal = is_compact(&g, big_l, 0.75, delta, &opts);
    let literal_note = format!(
        "literal point y = {y:.2} (sampled at {}), 16l = {big_l} > n: {:?}",
        y.min(1.0),
        literal.method
    );

    // The literal point is vacuous at n = 256, so also certify a scaled
    // point where the property has content.
    let (ys, ls) = (8.0 * log / n as f64, log);
    let scaled_delta = ((2.0 / 3.0) * ys * ls).ceil() as usize;
    let gs = sample_gnp(n, ys, 6);
    let scaled = is_compact(&gs, (16.0 * ls) as usize, 0.75, scaled_delta, &opts);
    let scaled_ok = scaled.verdict && matches!(scaled.method, Method::Randomized { trials: 10_000 });

    // Exact verdicts against bitmask brute force for n <= 14.
    let mut rng = split_rng(99, 0, 0, Tag::GRAPH_SAMPLE);
    let exhaustive = CheckOptions::default();
    let (mut cases, mut mismatches) = (0, Vec::new());
    for case in 0..60u64 {
        let gn = rng.random_range(4..=14usize);
        let y = rng.random_range(0.2..0.9);
        let g = sample_gnp(gn, y, 1000 + case);
        let adj = adjacency_masks(&g);
        let l = rng.random_range(1..=3u32).min(gn as u32 / 2);
        let e = is_expanding(&g, l as usize, &exhaustive);
        let (a, b) = (rng.random_range(0.0..1.5), rng.random_range(0.5..3.0));
        let dl = rng.random_range(1..=gn as u32);
        let ed = is_edge_dense(&g, dl as usize, a, b, &exhaustive);
        let (cl, ce, cd) = (rng.random_range(1..=gn as u32), rng.random_range(0.1..1.0), rng.random_range(0..4u32));
        let c = is_compact(&g, cl as usize, ce, cd as usize, &exhaustive);
        for (name, got, method, want) in [
            ("expanding", e.verdict, &e.method, brute_expanding(&adj, gn, l)),
            ("edge_dense", ed.verdict, &ed.method, brute_edge_dense(&adj, gn, dl, a, b)),
            ("compact", c.verdict, &c.method, brute_compact(&adj, gn, cl, ce, cd)),
        ] {
            cases += 1;
            if got != want || !matches!(method, Method::Exhaustive { .. }) {
                mismatches.push(format!("{name} case {case} n={gn}"));
            }
        }
    }
    report(
        7,
        "graph certification",
        literal.verdict && literal.witness.is_none() && scaled_ok && mismatches.is_empty(),
        format!(
            "{literal_note}; scaled y = {ys:.4}, l = {ls}: verdict {} over {:?}; exact {cases} checks, mismatches {mismatches:?}",
            scaled.verdict, scaled.method
        ),
    )
}

// 8. Oracle equivalence.
fn oracle_equivalence() -> Outcome {
    let mut rng = split_rng(8, 0, 0, Tag::GRAPH_SAMPLE);
    let mut core_bad = 0;
    for case in 0..200u64 {
        let n = rng.random_range(1..=12usize);
        let g = sample_gnp(n, rng.random_range(0.1..0.9), 500 + case);
        let subset: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.7)).collect();
        let delta = rng.random_range(0..5usize);
        let got = delta_core(&g, &subset, delta);
        let adj = adjacency_masks(&g);
        let set = subset.iter().fold(0u32, |m, &v| m | 1 << v);
        // The maximum qualifying subset is the union of all qualifying ones.
        let mut union = 0u32;
        let mut sub = set;
        loop {
            if min_degree_ok(&adj, sub, delta as u32) {
                union |= sub;
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & set;
        }
        let want: Vec<usize> = (0..n).filter(|&v| union >> v & 1 == 1).collect();
        if got != want || !min_degree_ok(&adj, union, delta as u32) {
            core_bad += 1;
        }
    }

    let mut merge_bad = 0;
    for _ in 0..10_000 {
        let regs: Vec<HiddenRegister> = (0..3)
            .map(|_| HiddenRegister {
                leader_value: rng.random_range(0..8),
                coin_bit: rng.random_range(0..2),
                origin: ProcessId::new(rng.random_range(1..=4)),
            })
            .collect();
        let mut want = regs[0];
        for r in &regs[1..] {
            if r.leader_value > want.leader_value || (r.leader_value == want.leader_value && r.origin > want.origin) {
                want = *r;
            }
        }
        // Equal (leader, origin) pairs must carry the same coin bit to be
        // the same register, so the oracle only compares the key then.
        for order in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let got = merge_registers(merge_registers(regs[order[0]], regs[order[1]]), regs[order[2]]);
            if (got.leader_value, got.origin) != (want.leader_value, want.origin) {
                merge_bad += 1;
            }
        }
    }

    let mut decision_bad = 0;
    for n in 0..=200u32 {
        for o in 0..=n {
            let big = Ratio::from_integer(i64::from(o));
            let at = |k: i64| Ratio::new(k * i64::from(n) - 1, 10);
            let want = if big > at(7) {
                PhaseAction::Decide1
            } else if big > at(6) {
                PhaseAction::Lean1
            } else if big < at(4) {
                PhaseAction::Decide0
            } else if big < at(5) {
                PhaseAction::Lean0
            } else {
                PhaseAction::FlipCoin
            };
            if phase_decision(o, n) != want {
                decision_bad += 1;
            }
        }
    }
    report(
        8,
        "oracle equivalence",
        core_bad == 0 && merge_bad == 0 && decision_bad == 0,
        format!("delta-core mismatches {core_bad}/200, merge mismatches {merge_bad}/60000, phase_decision mismatches {decision_bad}/20301"),
    )
}

// 9. Replay determinism, sequential and on a multi-threaded pool.
fn determinism() -> Outcome {
    let mut configs = Vec::new();
    for (i, adv) in adversaries().into_iter().enumerate() {
        for preset in PRESETS {
            configs.push(SimConfig {
                n: 32,
                t: 10,
                seed: 40 + i as u64,
                protocol: ProtocolConfig::Consensus {
                    preset: Some(preset),
                    params: None,
                    inputs: InputSpec::Pattern(InputPattern::Random),
                },
                adversary: adv.clone(),
                round_cap: None,
                record: RecordMode::Digest,
            });
        }
        configs.push(SimConfig {
            n: 32,
            t: 10,
            seed: 50 + i as u64,
            protocol: ProtocolConfig::Coin {
                d: None,
                alpha: None,
                relaxed: false,
            },
            adversary: adv.clone(),
            round_cap: None,
            record: RecordMode::Full,
        });
        configs.push(SimConfig {
            n: 32,
            t: 10,
            seed: 60 + i as u64,
            protocol: ProtocolConfig::Counting {
                x: 4,
                d: None,
                alpha: None,
                inputs: InputSpec::Pattern(InputPattern::Alternating),
                graph_seed: 3,
            },
            adversary: adv,
            round_cap: None,
            record: RecordMode::Digest,
        });
    }
    let digest = |c: &SimConfig| c.run().unwrap().digest.expect("digest recorded");
    let first: Vec<String> = configs.iter().map(digest).collect();
    let second: Vec<String> = configs.iter().map(digest).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let parallel: Vec<String> = pool.install(|| configs.par_iter().map(digest).collect());
    let distinct = first.iter().collect::<std::collections::BTreeSet<_>>().len();
    report(
        9,
        "determinism of transcript digests",
        first == second && first == parallel && distinct == configs.len(),
        format!("{} configs replayed sequentially and on 4 threads, {distinct} distinct digests", configs.len()),
    )
}

#[test]
fn acceptance() {
    let criteria: [fn() -> Outcome; 9] = [
        safety,
        counting_sandwich,
        coin_fairness,
        expected_phases,
        structural_rounds,
        communication_shape,
        graph_certification,
        oracle_equivalence,
        determinism,
    ];
    let start = Instant::now();
    let mut failed = Vec::new();
    for run in criteria {
        let t0 = Instant::now();
        let o = run();
        println!(
            "{} criterion {}: {} ({:.1}s) - {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.id,
            o.title,
            t0.elapsed().as_secs_f64(),
            o.note
        );
        if !o.pass {
            failed.push(o.id);
        }
    }
    println!("acceptance finished in {:.1}s", start.elapsed().as_secs_f64());
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    // Criterion 9 at the level of arbitrary seeds: a replay never drifts.
    #[test]
    fn replay_is_stable(seed in any::<u64>(), n in 2usize..20) {
        let cfg = SimConfig {
            n,
            t: n / 2,
            seed,
            protocol: ProtocolConfig::Consensus {
                preset: Some(Preset::Polylog),
                params: None,
                inputs: InputSpec::Pattern(InputPattern::Random),
            },
            adversary: AdversaryConfig::Random { rate: 0.05, budget: None },
            round_cap: None,
            record: RecordMode::Digest,
        };
        prop_assert_eq!(cfg.run().unwrap().digest, cfg.run().unwrap().digest);
    }
}
