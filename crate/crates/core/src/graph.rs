//! Random communication graphs and certification of their combinatorial
//! properties.
//!
//! Graph nodes are indices `0..n`; node `i` stands for process `i + 1`.
//! JSON exports and property witnesses use the 1-based process numbering.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::message::ProcessId;
use crate::rng::{split_rng, SimRng, Tag, PUBLIC_OWNER};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    adjacency: Vec<Vec<u32>>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph { adj: vec![Vec::new(); n] }
    }

    pub fn complete(n: usize) -> Self {
        let adj = (0..n)
            .map(|v| (0..n as u32).filter(|&u| u as usize != v).collect())
            .collect();
        Graph { adj }
    }

    /// Builds a graph from undirected edges; duplicates are merged.
    /// Panics on self-loops or out-of-range endpoints.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in edges {
            assert!(u < n && v < n, "edge ({u}, {v}) out of range");
            assert_ne!(u, v, "self-loop at {u}");
            adj[u].push(v as u32);
            adj[v].push(u as u32);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Graph { adj }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&(v as u32)).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, list)| {
            list.iter()
                .map(|&v| v as usize)
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    /// Adjacency as bitmasks; only for graphs with at most 64 nodes.
    pub fn masks(&self) -> Option<Vec<u64>> {
        (self.n() <= 64).then(|| {
            self.adj
                .iter()
                .map(|list| list.iter().fold(0u64, |m, &v| m | (1u64 << v)))
                .collect()
        })
    }

    pub fn to_json(&self) -> String {
        let g = GraphJson {
            n: self.n(),
            adjacency: self
                .adj
                .iter()
                .map(|l| l.iter().map(|&v| v + 1).collect())
                .collect(),
        };
        serde_json::to_string(&g).expect("graph serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, SimError> {
        let g: GraphJson =
            serde_json::from_str(s).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        if g.adjacency.len() != g.n {
            return Err(SimError::InvalidConfig(format!(
                "adjacency has {} rows for n = {}",
                g.adjacency.len(),
                g.n
            )));
        }
        let mut edges = Vec::new();
        for (u, row) in g.adjacency.iter().enumerate() {
            for &id in row {
                if id == 0 || id as usize > g.n || id as usize == u + 1 {
                    return Err(SimError::InvalidConfig(format!("bad neighbor {id} of {}", u + 1)));
                }
                edges.push((u, id as usize - 1));
            }
        }
        let graph = Graph::from_edges(g.n, &edges);
        for (u, row) in g.adjacency.iter().enumerate() {
            if graph.degree(u) != row.len() {
                return Err(SimError::InvalidConfig(format!(
                    "adjacency of {} is not symmetric or has duplicates",
                    u + 1
                )));
            }
        }
        Ok(graph)
    }
}

/// Samples G(n, y): every unordered pair is an edge independently with
/// probability `y`.
pub fn sample_gnp(n: usize, y: f64, seed: u64) -> Graph {
    let mut rng = split_rng(seed, PUBLIC_OWNER, 0, Tag::GRAPH_SAMPLE);
    sample_gnp_with(n, y, &mut rng)
}

pub fn sample_gnp_with(n: usize, y: f64, rng: &mut SimRng) -> Graph {
    assert!((0.0..=1.0).contains(&y), "edge probability {y} outside [0, 1]");
    let mut adj = vec![Vec::new(); n];
    for u in 0..n {
        for v in u + 1..n {
            if y >= 1.0 || (y > 0.0 && rng.random_bool(y)) {
                adj[u].push(v as u32);
                adj[v].push(u as u32);
            }
        }
    }
    Graph { adj }
}

/// Smallest `i >= 0` with `d * alpha^i >= n`.
pub fn top_level(n: u64, d: u64, alpha: u64) -> u32 {
    assert!(d >= 1 && alpha >= 2);
    let mut i = 0;
    let mut v = d;
    while v < n {
        v = v.saturating_mul(alpha);
        i += 1;
    }
    i
}

/// Inclusion probability `min(d * alpha^i / n, 1)` for each level up to
/// `top_level`, plus whether any level was clamped at 1 before reaching it
/// exactly (that is, `d > n`).
pub fn layer_probabilities(n: u64, d: u64, alpha: u64) -> (Vec<f64>, bool) {
    let k = top_level(n, d, alpha);
    let mut probs = Vec::with_capacity(k as usize + 1);
    let mut v = d as f64;
    for _ in 0..=k {
        probs.push((v / n as f64).min(1.0));
        v *= alpha as f64;
    }
    (probs, d > n)
}

/// Draws `me`'s neighbor set at every level: each other process joins level
/// `i` independently with probability `probs[i]`.
pub fn draw_layers(n: usize, me: ProcessId, probs: &[f64], rng: &mut SimRng) -> Vec<Vec<ProcessId>> {
    probs
        .iter()
        .map(|&p| {
            (0..n)
                .filter(|&q| q != me.index())
                .filter(|_| p >= 1.0 || rng.random_bool(p))
                .map(ProcessId::from_index)
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct LayeredNeighborhoods {
    pub n: usize,
    pub d: u64,
    pub alpha: u64,
    pub k: u32,
    pub probabilities: Vec<f64>,
    /// Set when `d > n` forced the probabilities to be clamped at 1.
    pub clamped: bool,
    /// `sets[p][i]` is the level-`i` neighborhood of process `p + 1`.
    pub sets: Vec<Vec<Vec<ProcessId>>>,
}

impl LayeredNeighborhoods {
    pub fn neighbors(&self, p: ProcessId, level: usize) -> &[ProcessId] {
        &self.sets[p.index()][level]
    }
}

pub fn sample_layers(n: usize, d: u64, alpha: u64, seed: u64) -> Result<LayeredNeighborhoods, SimError> {
    if d < 1 || alpha < 2 {
        return Err(SimError::InvalidConfig(format!(
            "layers need d >= 1 and alpha >= 2, got d = {d}, alpha = {alpha}"
        )));
    }
    let (probabilities, clamped) = layer_probabilities(n as u64, d, alpha);
    let sets = (0..n)
        .map(|i| {
            let p = ProcessId::from_index(i);
            let mut rng = split_rng(seed, p.get(), 0, Tag::COIN_NEIGHBORS);
            draw_layers(n, p, &probabilities, &mut rng)
        })
        .collect();
    Ok(LayeredNeighborhoods {
        n,
        d,
        alpha,
        k: probabilities.len() as u32 - 1,
        probabilities,
        clamped,
        sets,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Exhaustive { checked: u64 },
    Randomized { trials: u64 },
    /// No set of the required size exists.
    Vacuous,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    /// Node sets in 1-based process numbering.
    pub sets: Vec<Vec<u32>>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyReport {
    pub property: String,
    pub params: BTreeMap<String, f64>,
    pub verdict: bool,
    pub method: Method,
    pub witness: Option<Witness>,
}

impl PropertyReport {
    fn new(property: &str, params: &[(&str, f64)], verdict: bool, method: Method, witness: Option<Witness>) -> Self {
        PropertyReport {
            property: property.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            verdict,
            method,
            witness,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CheckOptions {
    /// Exhaustive search is used when its enumeration size fits.
    pub budget: u64,
    /// Number of sampled sets for randomized certification.
    pub trials: u64,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            budget: 1_000_000,
            trials: 10_000,
            seed: 0,
        }
    }
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * u128::from(n - i) / u128::from(i + 1);
        if r > u128::from(u64::MAX) {
            return u128::MAX;
        }
    }
    r
}

fn ids(set: &[usize]) -> Vec<u32> {
    set.iter().map(|&v| v as u32 + 1).collect()
}

fn mask_members(mask: u64) -> Vec<usize> {
    (0..64).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Calls `f` on every `l`-subset of `0..n` in lexicographic order until it
/// returns false.
fn for_each_subset(n: usize, l: usize, mut f: impl FnMut(&[usize]) -> bool) {
    if l > n {
        return;
    }
    let mut idx: Vec<usize> = (0..l).collect();
    loop {
        if !f(&idx) {
            return;
        }
        let mut i = l;
        while i > 0 && idx[i - 1] == i - 1 + n - l {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..l {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn random_subset(n: usize, size: usize, rng: &mut SimRng, scratch: &mut Vec<usize>) -> Vec<usize> {
    scratch.clear();
    scratch.extend(0..n);
    let (chosen, _) = scratch.partial_shuffle(rng, size);
    let mut s = chosen.to_vec();
    s.sort_unstable();
    s
}

/// Nodes outside `x` with no edge into `x`.
fn non_neighbors(g: &Graph, x: &[usize], mark: &mut [bool]) -> Vec<usize> {
    mark.iter_mut().for_each(|m| *m = false);
    for &v in x {
        mark[v] = true;
        for &u in g.neighbors(v) {
            mark[u as usize] = true;
        }
    }
    (0..g.n()).filter(|&v| !mark[v]).collect()
}

/// ℓ-expansion: every two disjoint ℓ-subsets are joined by an edge.
///
/// For a fixed `X` a bad partner exists iff at least ℓ nodes lie outside
/// `X` and its neighborhood, so each check enumerates one side only.
pub fn is_expanding(g: &Graph, l: usize, opts: &CheckOptions) -> PropertyReport {
    let n = g.n();
    let params = [("l", l as f64)];
    if l == 0 || 2 * l > n {
        return PropertyReport::new("expanding", &params, true, Method::Vacuous, None);
    }
    let mut mark = vec![false; n];
    let mut witness = None;
    let mut check = |x: &[usize], mark: &mut [bool]| {
        let rest = non_neighbors(g, x, mark);
        if rest.len() >= l {
            let y = &rest[rest.len() - l..];
            witness = Some(Witness {
                sets: vec![ids(x), ids(y)],
                detail: "no edge between the two sets".into(),
            });
            false
        } else {
            true
        }
    };
    let subsets = binomial(n as u64, l as u64);
    let method = if subsets.saturating_mul(subsets) <= u128::from(opts.budget) {
        let mut checked = 0u64;
        for_each_subset(n, l, |x| {
            checked += 1;
            check(x, &mut mark)
        });
        Method::Exhaustive { checked }
    } else {
        let mut rng = split_rng(opts.seed, PUBLIC_OWNER, 0, Tag::CERTIFY);
        let mut scratch = Vec::new();
        let mut trials = 0;
        while trials < opts.trials {
            trials += 1;
            let x = random_subset(n, l, &mut rng, &mut scratch);
            if !check(&x, &mut mark) {
                break;
            }
        }
        Method::Randomized { trials }
    };
    PropertyReport::new("expanding", &params, witness.is_none(), method, witness)
}

fn internal_edges(g: &Graph, set: &[usize], member: &mut [bool]) -> usize {
    for &v in set {
        member[v] = true;
    }
    let e = set
        .iter()
        .map(|&v| g.neighbors(v).iter().filter(|&&u| member[u as usize]).count())
        .sum::<usize>()
        / 2;
    for &v in set {
        member[v] = false;
    }
    e
}

/// Edge density: every set of at least ℓ nodes spans at least `a|X|`
/// edges, and every nonempty set of at most ℓ nodes spans at most `b|Y|`.
pub fn is_edge_dense(g: &Graph, l: usize, a: f64, b: f64, opts: &CheckOptions) -> PropertyReport {
    let n = g.n();
    let params = [("l", l as f64), ("a", a), ("b", b)];
    let lower_ok = |e: usize, s: usize| s < l || e as f64 >= a * s as f64;
    let upper_ok = |e: usize, s: usize| s == 0 || s > l || e as f64 <= b * s as f64;
    let explain = |e: usize, s: usize| {
        if !lower_ok(e, s) {
            format!("{s} nodes span {e} edges, fewer than a*{s}")
        } else {
            format!("{s} nodes span {e} edges, more than b*{s}")
        }
    };

    if n <= 25 && (1u64 << n) <= opts.budget {
        let masks = g.masks().expect("n <= 25");
        let total = 1usize << n;
        let mut edges = vec![0u16; total];
        let mut witness = None;
        for mask in 1..total {
            let low = mask.trailing_zeros() as usize;
            let rest = mask & (mask - 1);
            edges[mask] = edges[rest] + (masks[low] & rest as u64).count_ones() as u16;
            let s = mask.count_ones() as usize;
            let e = edges[mask] as usize;
            if !(lower_ok(e, s) && upper_ok(e, s)) {
                witness = Some(Witness {
                    sets: vec![ids(&mask_members(mask as u64))],
                    detail: explain(e, s),
                });
                break;
            }
        }
        let verdict = witness.is_none();
        return PropertyReport::new(
            "edge_dense",
            &params,
            verdict,
            Method::Exhaustive { checked: total as u64 - 1 },
            witness,
        );
    }

    let mut rng = split_rng(opts.seed, PUBLIC_OWNER, 1, Tag::CERTIFY);
    let mut scratch = Vec::new();
    let mut member = vec![false; n];
    let mut witness = None;
    let mut trials = 0;
    while trials < opts.trials && witness.is_none() {
        trials += 1;
        // Alternate between the two clauses.
        let size = if trials % 2 == 1 && l <= n {
            rng.random_range(l.max(1)..=n)
        } else {
            rng.random_range(1..=l.clamp(1, n.max(1)))
        };
        if n == 0 {
            break;
        }
        let set = random_subset(n, size, &mut rng, &mut scratch);
        let e = internal_edges(g, &set, &mut member);
        if !(lower_ok(e, size) && upper_ok(e, size)) {
            witness = Some(Witness {
                sets: vec![ids(&set)],
                detail: explain(e, size),
            });
        }
    }
    PropertyReport::new(
        "edge_dense",
        &params,
        witness.is_none(),
        Method::Randomized { trials },
        witness,
    )
}

/// The δ-core of `G` restricted to `subset`: repeatedly delete nodes with
/// fewer than δ neighbors left. Returns the surviving nodes, sorted.
pub fn delta_core(g: &Graph, subset: &[usize], delta: usize) -> Vec<usize> {
    let n = g.n();
    let mut alive = vec![false; n];
    for &v in subset {
        alive[v] = true;
    }
    let mut deg = vec![0usize; n];
    let mut queue = VecDeque::new();
    for &v in subset {
        deg[v] = g.neighbors(v).iter().filter(|&&u| alive[u as usize]).count();
        if deg[v] < delta {
            queue.push_back(v);
        }
    }
    while let Some(v) = queue.pop_front() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        for &u in g.neighbors(v) {
            let u = u as usize;
            if alive[u] {
                deg[u] -= 1;
                if deg[u] + 1 == delta {
                    queue.push_back(u);
                }
            }
        }
    }
    let mut core: Vec<usize> = subset.iter().copied().filter(|&v| alive[v]).collect();
    core.sort_unstable();
    core.dedup();
    core
}

fn delta_core_mask(masks: &[u64], mut set: u64, delta: u32) -> u64 {
    loop {
        let mut next = set;
        let mut s = set;
        while s != 0 {
            let v = s.trailing_zeros() as usize;
            s &= s - 1;
            if (masks[v] & set).count_ones() < delta {
                next &= !(1u64 << v);
            }
        }
        if next == set {
            return set;
        }
        set = next;
    }
}

/// Compactness: for every node set B with |B| ≥ ℓ, the δ-core of G|_B has at
/// least εℓ nodes.
pub fn is_compact(g: &Graph, l: usize, eps: f64, delta: usize, opts: &CheckOptions) -> PropertyReport {
    let n = g.n();
    let params = [("l", l as f64), ("eps", eps), ("delta", delta as f64)];
    let need = eps * l as f64;
    if l > n {
        return PropertyReport::new("compact", &params, true, Method::Vacuous, None);
    }
    let fail = |b: &[usize], core: usize| Witness {
        sets: vec![ids(b)],
        detail: format!("{}-core of this set has {core} nodes, fewer than {need}", delta),
    };

    let count: u128 = (l..=n).map(|s| binomial(n as u64, s as u64)).fold(0, u128::saturating_add);
    if n <= 25 && count <= u128::from(opts.budget) {
        let masks = g.masks().expect("n <= 25");
        let mut witness = None;
        let mut checked = 0u64;
        for mask in 1u64..(1u64 << n) {
            if (mask.count_ones() as usize) < l {
                continue;
            }
            checked += 1;
            let core = delta_core_mask(&masks, mask, delta as u32).count_ones() as usize;
            if (core as f64) < need {
                witness = Some(fail(&mask_members(mask), core));
                break;
            }
        }
        let verdict = witness.is_none();
        return PropertyReport::new("compact", &params, verdict, Method::Exhaustive { checked }, witness);
    }

    let mut rng = split_rng(opts.seed, PUBLIC_OWNER, 2, Tag::CERTIFY);
    let mut scratch = Vec::new();
    let mut witness = None;
    let mut trials = 0;
    while trials < opts.trials && witness.is_none() {
        trials += 1;
        let size = rng.random_range(l.max(1)..=n.max(1));
        let b = random_subset(n, size, &mut rng, &mut scratch);
        let core = delta_core(g, &b, delta).len();
        if (core as f64) < need {
            witness = Some(fail(&b, core));
        }
    }
    PropertyReport::new("compact", &params, witness.is_none(), Method::Randomized { trials }, witness)
}

/// Hop distances from `v`, `None` beyond `limit`.
fn distances(g: &Graph, v: usize, limit: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.n()];
    dist[v] = Some(0);
    let mut queue = VecDeque::from([v]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].expect("queued nodes have a distance");
        if du == limit {
            continue;
        }
        for &w in g.neighbors(u) {
            let w = w as usize;
            if dist[w].is_none() {
                dist[w] = Some(du + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Largest S within distance γ of `v` (among `alive` nodes) such that every
/// node of S closer than γ to `v` has at least δ neighbors in S. Returns
/// `None` when no such set contains `v`.
pub fn dense_neighborhood(g: &Graph, v: usize, gamma: usize, delta: usize, alive: &[bool]) -> Option<Vec<usize>> {
    assert!(alive[v], "dense neighborhood of a dead node");
    let dist = distances(g, v, gamma);
    let n = g.n();
    let mut inside: Vec<bool> = (0..n).map(|u| alive[u] && dist[u].is_some()).collect();
    let inner = |u: usize| dist[u].is_some_and(|d| d < gamma);
    let mut deg: Vec<usize> = (0..n)
        .map(|u| {
            if inside[u] {
                g.neighbors(u).iter().filter(|&&w| inside[w as usize]).count()
            } else {
                0
            }
        })
        .collect();
    let mut queue: VecDeque<usize> = (0..n).filter(|&u| inside[u] && inner(u) && deg[u] < delta).collect();
    while let Some(u) = queue.pop_front() {
        if !inside[u] {
            continue;
        }
        inside[u] = false;
        for &w in g.neighbors(u) {
            let w = w as usize;
            if inside[w] {
                deg[w] -= 1;
                if inner(w) && deg[w] + 1 == delta {
                    queue.push_back(w);
                }
            }
        }
    }
    inside[v].then(|| (0..n).filter(|&u| inside[u]).collect())
}
