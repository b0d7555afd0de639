//! Graph construction and sequencing: minimum spanning tree, shortest
//! Hamiltonian path and cycle, and key-frame paths along the tree.
//!
//! Exact solutions come from Held-Karp dynamic programming up to
//! `exact_threshold` nodes; above it a multi-start nearest-neighbour
//! construction is improved by 2-opt and Or-opt local search.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frameset::DistanceMatrix;

/// Largest instance Held-Karp is allowed to take (memory grows as `n·2ⁿ`).
pub const MAX_EXACT_THRESHOLD: usize = 20;
const IMPROVEMENT_EPS: f64 = 1e-12;

/// The complete weighted graph over a distance matrix. Edge weights are the
/// matrix entries.
#[derive(Debug, Clone, Copy)]
pub struct CompleteGraph<'a> {
    matrix: &'a DistanceMatrix,
}

impl<'a> CompleteGraph<'a> {
    pub fn new(matrix: &'a DistanceMatrix) -> Result<Self> {
        if matrix.n() < 2 {
            return Err(Error::contract(format!(
                "a graph needs at least 2 frames, got {}",
                matrix.n()
            )));
        }
        Ok(Self { matrix })
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn edge_count(&self) -> usize {
        self.n() * (self.n() - 1) / 2
    }

    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.matrix.get(u, v)
    }

    pub fn matrix(&self) -> &'a DistanceMatrix {
        self.matrix
    }

    pub fn frame_ids(&self) -> &'a [String] {
        self.matrix.frame_ids()
    }

    pub fn node(&self, id: &str) -> Result<usize> {
        self.matrix
            .index_of(id)
            .ok_or_else(|| Error::contract(format!("unknown frame id {id:?}")))
    }

    fn dense(&self) -> Dense {
        let n = self.n();
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                w[i * n + j] = self.weight(i, j);
            }
        }
        Dense { n, w }
    }
}

/// `build_graph` under its conventional name.
pub fn build_graph(m: &DistanceMatrix) -> Result<CompleteGraph<'_>> {
    CompleteGraph::new(m)
}

struct Dense {
    n: usize,
    w: Vec<f64>,
}

impl Dense {
    #[inline]
    fn d(&self, u: usize, v: usize) -> f64 {
        self.w[u * self.n + v]
    }

    fn open_cost(&self, order: &[usize]) -> f64 {
        order.windows(2).map(|p| self.d(p[0], p[1])).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeEdge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MstTree {
    frame_ids: Vec<String>,
    edges: Vec<TreeEdge>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl MstTree {
    pub fn frame_ids(&self) -> &[String] {
        &self.frame_ids
    }

    pub fn n(&self) -> usize {
        self.frame_ids.len()
    }

    /// Edges in the order Kruskal accepted them, each with `u < v`.
    pub fn edges(&self) -> &[TreeEdge] {
        &self.edges
    }

    /// Neighbours of each node, ascending by index.
    pub fn adjacency(&self) -> &[Vec<(usize, f64)>] {
        &self.adjacency
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    pub fn node(&self, id: &str) -> Result<usize> {
        self.frame_ids
            .iter()
            .position(|f| f == id)
            .ok_or_else(|| Error::contract(format!("unknown frame id {id:?}")))
    }

    /// The unique tree path from `from` to `to`, both included.
    pub fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let n = self.n();
        let mut parent = vec![usize::MAX; n];
        parent[from] = from;
        let mut stack = vec![from];
        while let Some(u) = stack.pop() {
            if u == to {
                break;
            }
            for &(v, _) in &self.adjacency[u] {
                if parent[v] == usize::MAX {
                    parent[v] = u;
                    stack.push(v);
                }
            }
        }
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = parent[cur];
            path.push(cur);
        }
        path.reverse();
        path
    }

    /// Weighted tree distances from `source` to every node.
    pub fn geodesics_from(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::NAN; self.n()];
        dist[source] = 0.0;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for &(v, w) in &self.adjacency[u] {
                if dist[v].is_nan() {
                    dist[v] = dist[u] + w;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// JSON view with frame ids in place of node indices.
    pub fn to_json(&self) -> serde_json::Value {
        let edges: Vec<_> = self
            .edges
            .iter()
            .map(|e| {
                serde_json::json!({
                    "u": self.frame_ids[e.u],
                    "v": self.frame_ids[e.v],
                    "weight": e.weight,
                })
            })
            .collect();
        serde_json::json!({
            "nodes": self.frame_ids,
            "edges": edges,
            "total_weight": self.total_weight(),
        })
    }
}

struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Kruskal's algorithm; equal weights are taken in lexicographic `(u, v)` order.
pub fn minimum_spanning_tree(g: &CompleteGraph<'_>) -> MstTree {
    let n = g.n();
    let mut candidates: Vec<TreeEdge> = Vec::with_capacity(g.edge_count());
    for u in 0..n {
        for v in u + 1..n {
            candidates.push(TreeEdge { u, v, weight: g.weight(u, v) });
        }
    }
    candidates.sort_by(|a, b| a.weight.total_cmp(&b.weight).then(a.u.cmp(&b.u)).then(a.v.cmp(&b.v)));
    let mut sets = DisjointSets::new(n);
    let mut edges = Vec::with_capacity(n - 1);
    let mut adjacency = vec![Vec::new(); n];
    for e in candidates {
        if sets.union(e.u, e.v) {
            adjacency[e.u].push((e.v, e.weight));
            adjacency[e.v].push((e.u, e.weight));
            edges.push(e);
            if edges.len() == n - 1 {
                break;
            }
        }
    }
    for list in &mut adjacency {
        list.sort_by_key(|&(v, _)| v);
    }
    MstTree {
        frame_ids: g.frame_ids().to_vec(),
        edges,
        adjacency,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub seed: u64,
    /// Cap on local-search sweeps; the search normally stops earlier, when a
    /// sweep finds no improving move.
    pub two_opt_passes: usize,
    /// Instances up to this size are solved exactly.
    pub exact_threshold: usize,
    /// Random initial tours tried in addition to the nearest-neighbour ones.
    pub random_restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            two_opt_passes: 1000,
            exact_threshold: 12,
            random_restarts: 8,
        }
    }
}

impl SolverConfig {
    fn check(&self) -> Result<()> {
        if self.exact_threshold > MAX_EXACT_THRESHOLD {
            return Err(Error::contract(format!(
                "exact_threshold {} exceeds the supported maximum {MAX_EXACT_THRESHOLD}",
                self.exact_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    Path,
    Cycle,
    Keyframe,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceConstraints {
    pub start: Option<String>,
    pub end: Option<String>,
    pub keyframes: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceResult {
    pub kind: SequenceKind,
    pub order: Vec<String>,
    pub total_cost: f64,
    pub solver: String,
    pub seed: Option<u64>,
    pub constraints: SequenceConstraints,
}

pub const SOLVER_EXACT: &str = "held-karp";
pub const SOLVER_HEURISTIC: &str = "nn+2opt+oropt";
pub const SOLVER_TREE: &str = "mst";

/// Sum of matrix entries along `order`, plus the closing edge when `closed`.
pub fn sequence_cost(m: &DistanceMatrix, order: &[String], closed: bool) -> Result<f64> {
    let idx = order
        .iter()
        .map(|id| m.index_of(id).ok_or_else(|| Error::contract(format!("unknown frame id {id:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let mut cost: f64 = idx.windows(2).map(|p| m.get(p[0], p[1])).sum();
    if closed && idx.len() > 1 {
        cost += m.get(idx[idx.len() - 1], idx[0]);
    }
    Ok(cost)
}

/// Shortest Hamiltonian path, optionally pinned at either or both ends.
pub fn shortest_hamiltonian_path(
    g: &CompleteGraph<'_>,
    start: Option<&str>,
    end: Option<&str>,
    config: &SolverConfig,
) -> Result<SequenceResult> {
    config.check()?;
    let s = start.map(|id| g.node(id)).transpose()?;
    let e = end.map(|id| g.node(id)).transpose()?;
    if s.is_some() && s == e {
        return Err(Error::contract("start and end must be different frames"));
    }
    let dense = g.dense();
    let n = g.n();
    let (order, exact) = if n <= config.exact_threshold.max(2) {
        (held_karp_path(&dense, s, e), true)
    } else {
        (heuristic_path(&dense, s, e, config), false)
    };
    let ids = g.frame_ids();
    Ok(SequenceResult {
        kind: SequenceKind::Path,
        order: order.iter().map(|&i| ids[i].clone()).collect(),
        total_cost: dense.open_cost(&order),
        solver: if exact { SOLVER_EXACT } else { SOLVER_HEURISTIC }.into(),
        seed: (!exact).then_some(config.seed),
        constraints: SequenceConstraints {
            start: start.map(str::to_owned),
            end: end.map(str::to_owned),
            keyframes: None,
        },
    })
}

/// Shortest Hamiltonian cycle, reported in canonical rotation and orientation.
pub fn shortest_hamiltonian_cycle(g: &CompleteGraph<'_>, config: &SolverConfig) -> Result<SequenceResult> {
    config.check()?;
    let n = g.n();
    if n < 3 {
        return Err(Error::contract(format!("a cycle needs at least 3 frames, got {n}")));
    }
    let dense = g.dense();
    let (tour, exact) = if n <= config.exact_threshold {
        (held_karp_cycle(&dense), true)
    } else {
        (heuristic_cycle(&dense, config), false)
    };
    let ids = g.frame_ids();
    let tour = canonical_cycle(&tour, ids, |a, b| dense.d(a, b));
    let mut closed = tour.clone();
    closed.push(tour[0]);
    Ok(SequenceResult {
        kind: SequenceKind::Cycle,
        order: tour.iter().map(|&i| ids[i].clone()).collect(),
        total_cost: dense.open_cost(&closed),
        solver: if exact { SOLVER_EXACT } else { SOLVER_HEURISTIC }.into(),
        seed: (!exact).then_some(config.seed),
        constraints: SequenceConstraints::default(),
    })
}

/// Rotate a tour so the lexicographically smallest id leads, and orient it
/// so the cheaper of that node's two neighbours follows (smaller id on a tie).
pub fn canonical_cycle(tour: &[usize], ids: &[String], d: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let k = tour.len();
    if k == 0 {
        return Vec::new();
    }
    let lead = (0..k).min_by(|&a, &b| ids[tour[a]].cmp(&ids[tour[b]])).unwrap();
    let forward: Vec<usize> = (0..k).map(|i| tour[(lead + i) % k]).collect();
    if k < 3 {
        return forward;
    }
    let (next, prev) = (forward[1], forward[k - 1]);
    let (dn, dp) = (d(forward[0], next), d(forward[0], prev));
    let reverse = dp < dn || (dp == dn && ids[prev] < ids[next]);
    if reverse {
        let mut r = vec![forward[0]];
        r.extend(forward[1..].iter().rev());
        r
    } else {
        forward
    }
}

/// Key-frame path: the tree paths between consecutive key-frames, with each
/// junction emitted once.
pub fn keyframe_path(t: &MstTree, keyframes: &[String]) -> Result<SequenceResult> {
    if keyframes.len() < 2 {
        return Err(Error::contract(format!(
            "need at least 2 key-frames, got {}",
            keyframes.len()
        )));
    }
    let nodes = keyframes.iter().map(|id| t.node(id)).collect::<Result<Vec<_>>>()?;
    let mut order = vec![nodes[0]];
    for pair in nodes.windows(2) {
        if pair[0] == pair[1] {
            return Err(Error::contract(format!(
                "consecutive key-frames must differ ({:?} repeats)",
                t.frame_ids[pair[0]]
            )));
        }
        order.extend(t.path(pair[0], pair[1]).into_iter().skip(1));
    }
    let mut cost = 0.0;
    for p in order.windows(2) {
        cost += t.adjacency[p[0]]
            .iter()
            .find(|&&(v, _)| v == p[1])
            .map(|&(_, w)| w)
            .expect("consecutive path nodes share a tree edge");
    }
    Ok(SequenceResult {
        kind: SequenceKind::Keyframe,
        order: order.iter().map(|&i| t.frame_ids[i].clone()).collect(),
        total_cost: cost,
        solver: SOLVER_TREE.into(),
        seed: None,
        constraints: SequenceConstraints {
            start: None,
            end: None,
            keyframes: Some(keyframes.to_vec()),
        },
    })
}

// ---------------------------------------------------------------------------
// Held-Karp

fn held_karp_path(d: &Dense, start: Option<usize>, end: Option<usize>) -> Vec<usize> {
    if start.is_none() && end.is_some() {
        let mut order = held_karp(d, end, None, false);
        order.reverse();
        return order;
    }
    held_karp(d, start, end, false)
}

fn held_karp_cycle(d: &Dense) -> Vec<usize> {
    held_karp(d, Some(0), None, true)
}

/// `dp[mask][j]`: cheapest path over the nodes in `mask` that starts at an
/// admissible start and ends at `j`.
fn held_karp(d: &Dense, start: Option<usize>, end: Option<usize>, closed: bool) -> Vec<usize> {
    let n = d.n;
    let full = (1usize << n) - 1;
    let mut dp = vec![f64::INFINITY; (full + 1) * n];
    let mut parent = vec![u8::MAX; (full + 1) * n];
    match start {
        Some(s) => dp[(1 << s) * n + s] = 0.0,
        None => {
            for j in 0..n {
                dp[(1 << j) * n + j] = 0.0;
            }
        }
    }
    for mask in 1..=full {
        for j in 0..n {
            let cur = dp[mask * n + j];
            if mask & (1 << j) == 0 || !cur.is_finite() {
                continue;
            }
            for k in 0..n {
                if mask & (1 << k) != 0 {
                    continue;
                }
                // a fixed end may only be entered last
                if end == Some(k) && (mask | (1 << k)) != full {
                    continue;
                }
                let next = mask | (1 << k);
                let cand = cur + d.d(j, k);
                if cand < dp[next * n + k] {
                    dp[next * n + k] = cand;
                    parent[next * n + k] = j as u8;
                }
            }
        }
    }
    let closing = |j: usize| if closed { d.d(j, start.unwrap_or(0)) } else { 0.0 };
    let last = match end {
        Some(e) => e,
        None => {
            let mut best = usize::MAX;
            let mut best_cost = f64::INFINITY;
            for j in 0..n {
                let c = dp[full * n + j] + closing(j);
                if c < best_cost {
                    best_cost = c;
                    best = j;
                }
            }
            best
        }
    };
    let mut order = Vec::with_capacity(n);
    let (mut mask, mut j) = (full, last);
    loop {
        order.push(j);
        let p = parent[mask * n + j];
        if p == u8::MAX {
            break;
        }
        mask &= !(1 << j);
        j = p as usize;
    }
    order.reverse();
    order
}

// ---------------------------------------------------------------------------
// Heuristic

fn nearest_neighbour(d: &Dense, first: usize, hold_back: Option<usize>) -> Vec<usize> {
    let n = d.n;
    let mut visited = vec![false; n];
    visited[first] = true;
    if let Some(h) = hold_back {
        visited[h] = true;
    }
    let mut order = Vec::with_capacity(n);
    order.push(first);
    let mut cur = first;
    loop {
        let mut best: Option<(f64, usize)> = None;
        for v in 0..n {
            if !visited[v] && best.is_none_or(|(bd, _)| d.d(cur, v) < bd) {
                best = Some((d.d(cur, v), v));
            }
        }
        match best {
            Some((_, v)) => {
                visited[v] = true;
                order.push(v);
                cur = v;
            }
            None => break,
        }
    }
    if let Some(h) = hold_back {
        order.push(h);
    }
    order
}

/// Picks the cheapest improved candidate; ties keep the earliest.
fn best_of(d: &Dense, candidates: Vec<Vec<usize>>, lock_first: bool, lock_last: bool, passes: usize) -> Vec<usize> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for mut seq in candidates {
        local_search(d, &mut seq, lock_first, lock_last, passes);
        let c = d.open_cost(&seq);
        if best.as_ref().is_none_or(|(bc, _)| c < *bc) {
            best = Some((c, seq));
        }
    }
    best.expect("at least one candidate").1
}

fn heuristic_path(d: &Dense, start: Option<usize>, end: Option<usize>, config: &SolverConfig) -> Vec<usize> {
    let n = d.n;
    let starts: Vec<usize> = match start {
        Some(s) => vec![s],
        None => (0..n).filter(|&v| Some(v) != end).collect(),
    };
    let mut candidates: Vec<Vec<usize>> = starts.iter().map(|&s| nearest_neighbour(d, s, end)).collect();
    let free: Vec<usize> = (0..n).filter(|&v| Some(v) != start && Some(v) != end).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.random_restarts {
        let mut middle = free.clone();
        middle.shuffle(&mut rng);
        let mut seq: Vec<usize> = start.into_iter().collect();
        seq.extend(middle);
        seq.extend(end);
        candidates.push(seq);
    }
    best_of(d, candidates, start.is_some(), end.is_some(), config.two_opt_passes)
}

/// Tours are handled as closed walks `0 … 0` with both ends locked, so the
/// path moves apply unchanged.
fn heuristic_cycle(d: &Dense, config: &SolverConfig) -> Vec<usize> {
    let n = d.n;
    let close = |tour: Vec<usize>| {
        let at = tour.iter().position(|&v| v == 0).unwrap();
        let mut walk: Vec<usize> = (0..=n).map(|i| tour[(at + i) % n]).collect();
        walk[n] = 0;
        walk
    };
    let mut candidates: Vec<Vec<usize>> = (0..n).map(|s| close(nearest_neighbour(d, s, None))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.random_restarts {
        let mut middle: Vec<usize> = (1..n).collect();
        middle.shuffle(&mut rng);
        let mut walk = vec![0];
        walk.extend(middle);
        walk.push(0);
        candidates.push(walk);
    }
    let mut walk = best_of(d, candidates, true, true, config.two_opt_passes);
    walk.pop();
    walk
}

/// First-improvement 2-opt and Or-opt until a sweep finds nothing better
/// (or `max_passes` sweeps). Only strictly improving moves are applied.
/// Returns the number of moves applied.
fn local_search(d: &Dense, seq: &mut Vec<usize>, lock_first: bool, lock_last: bool, max_passes: usize) -> usize {
    let mut moves = 0;
    for _ in 0..max_passes {
        let before = moves;
        moves += two_opt_sweep(d, seq, lock_first, lock_last);
        moves += or_opt_sweep(d, seq, lock_first, lock_last);
        if moves == before {
            break;
        }
    }
    moves
}

/// Reversal of `seq[i..=j]`.
fn two_opt_delta(d: &Dense, seq: &[usize], i: usize, j: usize) -> f64 {
    let last = seq.len() - 1;
    let mut delta = 0.0;
    if i > 0 {
        delta += d.d(seq[i - 1], seq[j]) - d.d(seq[i - 1], seq[i]);
    }
    if j < last {
        delta += d.d(seq[i], seq[j + 1]) - d.d(seq[j], seq[j + 1]);
    }
    delta
}

fn two_opt_sweep(d: &Dense, seq: &mut [usize], lock_first: bool, lock_last: bool) -> usize {
    let len = seq.len();
    let lo = usize::from(lock_first);
    let hi = if lock_last { len - 2 } else { len - 1 };
    let mut applied = 0;
    for i in lo..=hi {
        for j in i + 1..=hi {
            if i == 0 && j == len - 1 {
                continue;
            }
            if two_opt_delta(d, seq, i, j) < -IMPROVEMENT_EPS {
                seq[i..=j].reverse();
                applied += 1;
            }
        }
    }
    applied
}

/// Moves a segment of 1 to 3 nodes elsewhere, optionally reversed.
fn or_opt_sweep(d: &Dense, seq: &mut Vec<usize>, lock_first: bool, lock_last: bool) -> usize {
    let mut applied = 0;
    let mut seg_len = 1;
    while seg_len <= 3 {
        let len = seq.len();
        let lo = usize::from(lock_first);
        let hi = if lock_last { len - 1 } else { len };
        if hi < lo + seg_len {
            seg_len += 1;
            continue;
        }
        let mut moved = false;
        'scan: for i in lo..=hi - seg_len {
            let (a, b) = (seq[i], seq[i + seg_len - 1]);
            let prev = i.checked_sub(1).map(|p| seq[p]);
            let next = seq.get(i + seg_len).copied();
            let removed = prev.map_or(0.0, |p| d.d(p, a))
                + next.map_or(0.0, |q| d.d(b, q))
                - match (prev, next) {
                    (Some(p), Some(q)) => d.d(p, q),
                    _ => 0.0,
                };
            // the remaining sequence, indexed without the segment
            let rest = |r: usize| if r < i { seq[r] } else { seq[r + seg_len] };
            let rest_len = len - seg_len;
            for gap in 0..=rest_len {
                if (gap == 0 && lock_first) || (gap == rest_len && lock_last) {
                    continue;
                }
                let left = gap.checked_sub(1).map(rest);
                let right = (gap < rest_len).then(|| rest(gap));
                for reversed in [false, true] {
                    if gap == i && (!reversed || seg_len == 1) {
                        continue;
                    }
                    let (first, last) = if reversed { (b, a) } else { (a, b) };
                    let added = left.map_or(0.0, |l| d.d(l, first)) + right.map_or(0.0, |r| d.d(last, r))
                        - match (left, right) {
                            (Some(l), Some(r)) => d.d(l, r),
                            _ => 0.0,
                        };
                    if added - removed < -IMPROVEMENT_EPS {
                        let mut segment: Vec<usize> = seq.drain(i..i + seg_len).collect();
                        if reversed {
                            segment.reverse();
                        }
                        seq.splice(gap..gap, segment);
                        applied += 1;
                        moved = true;
                        break 'scan;
                    }
                }
            }
        }
        if !moved {
            seg_len += 1;
        }
    }
    applied
}
