use std::collections::VecDeque;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reseq_core::frameset::DistanceMatrix;
use reseq_core::graphseq::{
    build_graph, keyframe_path, minimum_spanning_tree, sequence_cost, shortest_hamiltonian_cycle,
    shortest_hamiltonian_path, SolverConfig, SOLVER_EXACT, SOLVER_HEURISTIC,
};

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("n{i:02}")).collect()
}

/// Weights are multiples of 1/1024, so every path sum is exact in f64.
fn quantized(n: usize, seed: u64) -> DistanceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DistanceMatrix::from_upper(ids(n), "t", |_, _| rng.random_range(1..=1024) as f64 / 1024.0).unwrap()
}

/// Exhaustive depth-first enumeration of orders, cutting branches whose
/// prefix already costs at least the best complete order.
struct Brute<'a> {
    m: &'a DistanceMatrix,
    best: f64,
    closed: bool,
}

impl Brute<'_> {
    fn extend(&mut self, order: &mut Vec<usize>, used: &mut [bool], cost: f64, end: Option<usize>) {
        let n = self.m.n();
        if cost >= self.best {
            return;
        }
        if order.len() == n {
            let total = if self.closed { cost + self.m.get(order[n - 1], order[0]) } else { cost };
            self.best = self.best.min(total);
            return;
        }
        for v in 0..n {
            if used[v] || (Some(v) == end && order.len() + 1 < n) {
                continue;
            }
            used[v] = true;
            let step = self.m.get(*order.last().unwrap(), v);
            order.push(v);
            self.extend(order, used, cost + step, end);
            order.pop();
            used[v] = false;
        }
    }
}

fn brute_path(m: &DistanceMatrix, start: Option<usize>, end: Option<usize>) -> f64 {
    let mut b = Brute { m, best: f64::INFINITY, closed: false };
    let starts: Vec<usize> = match start {
        Some(s) => vec![s],
        None => (0..m.n()).filter(|&v| Some(v) != end).collect(),
    };
    for s in starts {
        let mut used = vec![false; m.n()];
        used[s] = true;
        b.extend(&mut vec![s], &mut used, 0.0, end);
    }
    b.best
}

fn brute_cycle(m: &DistanceMatrix) -> f64 {
    let mut b = Brute { m, best: f64::INFINITY, closed: true };
    let mut used = vec![false; m.n()];
    used[0] = true;
    b.extend(&mut vec![0], &mut used, 0.0, None);
    b.best
}

#[test]
fn exact_solver_matches_enumeration() {
    for k in 0..20u64 {
        let n = 5 + (k as usize % 8);
        let m = quantized(n, 100 + k);
        let g = build_graph(&m).unwrap();
        let path = shortest_hamiltonian_path(&g, None, None, &SolverConfig::default()).unwrap();
        let cycle = shortest_hamiltonian_cycle(&g, &SolverConfig::default()).unwrap();
        assert_eq!(path.solver, SOLVER_EXACT);
        assert_eq!(cycle.solver, SOLVER_EXACT);
        assert_eq!(path.total_cost, brute_path(&m, None, None), "path n={n}");
        assert_eq!(cycle.total_cost, brute_cycle(&m), "cycle n={n}");
    }
}

#[test]
fn exact_solver_matches_enumeration_with_pinned_ends() {
    for k in 0..12u64 {
        let n = 5 + (k as usize % 5);
        let m = quantized(n, 200 + k);
        let g = build_graph(&m).unwrap();
        let cases = [(Some(0), Some(n - 1)), (Some(2), None), (None, Some(1))];
        for (s, e) in cases {
            let name = |v: Option<usize>| v.map(|v| m.frame_ids()[v].clone());
            let (sn, en) = (name(s), name(e));
            let r = shortest_hamiltonian_path(&g, sn.as_deref(), en.as_deref(), &SolverConfig::default()).unwrap();
            assert_eq!(r.total_cost, brute_path(&m, s, e), "n={n} {s:?}->{e:?}");
        }
    }
}

#[test]
fn heuristic_stays_within_five_percent_at_ten_frames() {
    let heuristic = SolverConfig {
        exact_threshold: 0,
        ..SolverConfig::default()
    };
    let mut good = 0;
    for k in 0..20u64 {
        let m = quantized(10, 300 + k);
        let g = build_graph(&m).unwrap();
        let opt = brute_path(&m, None, None);
        let r = shortest_hamiltonian_path(&g, None, None, &heuristic).unwrap();
        assert_eq!(r.solver, SOLVER_HEURISTIC);
        if r.total_cost <= 1.05 * opt {
            good += 1;
        }
    }
    assert!(good >= 18, "{good}/20");
}

#[test]
fn heuristic_with_many_restarts_finds_the_optimum_on_small_instances() {
    for k in 0..20u64 {
        let n = 4 + (k as usize % 6);
        let m = quantized(n, 400 + k);
        let g = build_graph(&m).unwrap();
        let config = SolverConfig {
            exact_threshold: 0,
            random_restarts: 200,
            seed: k,
            ..SolverConfig::default()
        };
        let path = shortest_hamiltonian_path(&g, None, None, &config).unwrap();
        assert_eq!(path.total_cost, brute_path(&m, None, None), "path n={n}");
        let cycle = shortest_hamiltonian_cycle(&g, &config).unwrap();
        assert_eq!(cycle.total_cost, brute_cycle(&m), "cycle n={n}");
    }
}

/// Prim's algorithm over the dense matrix.
fn prim_weight(m: &DistanceMatrix) -> f64 {
    let n = m.n();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    best[0] = 0.0;
    let mut total = 0.0;
    for _ in 0..n {
        let u = (0..n).filter(|&v| !in_tree[v]).min_by(|&a, &b| best[a].total_cmp(&best[b])).unwrap();
        in_tree[u] = true;
        total += best[u];
        for v in 0..n {
            if !in_tree[v] {
                best[v] = best[v].min(m.get(u, v));
            }
        }
    }
    total
}

fn bfs_path(adj: &[Vec<(usize, f64)>], from: usize, to: usize) -> Vec<usize> {
    let mut parent = vec![usize::MAX; adj.len()];
    parent[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for &(v, _) in &adj[u] {
            if parent[v] == usize::MAX {
                parent[v] = u;
                queue.push_back(v);
            }
        }
    }
    let mut path = vec![to];
    while *path.last().unwrap() != from {
        path.push(parent[*path.last().unwrap()]);
    }
    path.reverse();
    path
}

#[test]
fn spanning_tree_matches_prim() {
    for k in 0..30u64 {
        let n = 2 + (k as usize % 25);
        let m = quantized(n, 500 + k);
        let t = minimum_spanning_tree(&build_graph(&m).unwrap());
        assert_eq!(t.edges().len(), n - 1);
        assert_eq!(t.total_weight(), prim_weight(&m));
    }
}

#[test]
fn keyframe_examples() {
    // tree a - c - d - b as the only cheap edges
    let names: Vec<String> = ["a", "b", "c", "d"].map(String::from).to_vec();
    let cheap = [(0, 2), (2, 3), (1, 3)];
    let m = DistanceMatrix::from_upper(names, "t", |i, j| if cheap.contains(&(i, j)) || cheap.contains(&(j, i)) { 1.0 } else { 10.0 }).unwrap();
    let t = minimum_spanning_tree(&build_graph(&m).unwrap());
    let r = keyframe_path(&t, &["a".into(), "b".into()]).unwrap();
    assert_eq!(r.order, ["a", "c", "d", "b"]);
    let r = keyframe_path(&t, &["c".into(), "d".into()]).unwrap();
    assert_eq!(r.order, ["c", "d"]);
    let r = keyframe_path(&t, &["a".into(), "d".into(), "a".into()]).unwrap();
    assert_eq!(r.order, ["a", "c", "d", "c", "a"]);
    assert_eq!(r.total_cost, sequence_cost(&m, &r.order, false).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tree_paths_match_breadth_first_search(seed in any::<u64>(), n in 2usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DistanceMatrix::from_upper(ids(n), "t", |_, _| rng.random_range(0.0..1.0)).unwrap();
        let t = minimum_spanning_tree(&build_graph(&m).unwrap());
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        prop_assert_eq!(t.path(a, b), bfs_path(t.adjacency(), a, b));
    }

    #[test]
    fn paths_are_permutations_that_honour_endpoints(
        seed in any::<u64>(),
        n in 3usize..26,
        pin in 0u8..4,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DistanceMatrix::from_upper(ids(n), "t", |_, _| rng.random_range(0.0..5.0)).unwrap();
        let g = build_graph(&m).unwrap();
        let s = rng.random_range(0..n);
        let e = (s + 1 + rng.random_range(0..n - 1)) % n;
        let start = (pin & 1 == 1).then(|| m.frame_ids()[s].clone());
        let end = (pin & 2 == 2).then(|| m.frame_ids()[e].clone());
        let config = SolverConfig { seed, ..SolverConfig::default() };
        let r = shortest_hamiltonian_path(&g, start.as_deref(), end.as_deref(), &config).unwrap();

        let mut sorted = r.order.clone();
        sorted.sort();
        prop_assert_eq!(&sorted, &ids(n));
        if let Some(s) = &start {
            prop_assert_eq!(&r.order[0], s);
        }
        if let Some(e) = &end {
            prop_assert_eq!(r.order.last().unwrap(), e);
        }
        let recomputed = sequence_cost(&m, &r.order, false).unwrap();
        prop_assert!((recomputed - r.total_cost).abs() <= 1e-9);

        let c = shortest_hamiltonian_cycle(&g, &config).unwrap();
        let mut sorted = c.order.clone();
        sorted.sort();
        prop_assert_eq!(&sorted, &ids(n));
        prop_assert!((sequence_cost(&m, &c.order, true).unwrap() - c.total_cost).abs() <= 1e-9);
    }
}
