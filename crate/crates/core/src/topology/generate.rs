use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Topology;
use crate::error::{param, Result};

/// Recipe for a synthetic topology.
///
/// Random kinds draw from ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`),
/// a counter-based generator whose stream is fixed for a given seed, so equal
/// seeds reproduce identical graphs across builds and platforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TopologySpec {
    Complete { n: usize },
    Path { n: usize },
    /// Node 0 is the hub.
    Star { n: usize },
    /// `rows × cols` lattice; node id is `row * cols + col`.
    Grid { rows: usize, cols: usize },
    /// Erdős–Rényi G(n, p): every unordered pair is an independent coin flip.
    Er { n: usize, p: f64, seed: u64 },
    /// Barabási–Albert preferential attachment, `m` edges per arriving node.
    Ba { n: usize, m: usize, seed: u64 },
    /// Watts–Strogatz ring of degree `k` with rewiring probability `beta`.
    Ws { n: usize, k: usize, beta: f64, seed: u64 },
}

impl TopologySpec {
    pub fn validate(&self) -> Result<()> {
        let need_n = |n: usize| {
            if n < 2 {
                Err(param(format!("n must be >= 2, got {n}")))
            } else {
                Ok(())
            }
        };
        match *self {
            TopologySpec::Complete { n } | TopologySpec::Path { n } | TopologySpec::Star { n } => need_n(n),
            TopologySpec::Grid { rows, cols } => {
                if rows == 0 || cols == 0 {
                    return Err(param("grid dimensions must be positive"));
                }
                need_n(rows * cols)
            }
            TopologySpec::Er { n, p, .. } => {
                need_n(n)?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(param(format!("p must lie in [0, 1], got {p}")));
                }
                Ok(())
            }
            TopologySpec::Ba { n, m, .. } => {
                need_n(n)?;
                if m < 1 || m >= n {
                    return Err(param(format!("ba requires 1 <= m < n, got m = {m}, n = {n}")));
                }
                Ok(())
            }
            TopologySpec::Ws { n, k, beta, .. } => {
                need_n(n)?;
                if k < 2 || k % 2 != 0 || k >= n {
                    return Err(param(format!("ws requires even k with 2 <= k < n, got k = {k}")));
                }
                if !(0.0..=1.0).contains(&beta) {
                    return Err(param(format!("beta must lie in [0, 1], got {beta}")));
                }
                Ok(())
            }
        }
    }

    /// Short human-readable name, e.g. `grid(7,7)`.
    pub fn name(&self) -> String {
        match *self {
            TopologySpec::Complete { n } => format!("complete({n})"),
            TopologySpec::Path { n } => format!("path({n})"),
            TopologySpec::Star { n } => format!("star({n})"),
            TopologySpec::Grid { rows, cols } => format!("grid({rows},{cols})"),
            TopologySpec::Er { n, p, seed } => format!("er({n},{p},seed={seed})"),
            TopologySpec::Ba { n, m, seed } => format!("ba({n},{m},seed={seed})"),
            TopologySpec::Ws { n, k, beta, seed } => format!("ws({n},{k},{beta},seed={seed})"),
        }
    }
}

pub fn generate(spec: &TopologySpec) -> Result<Topology> {
    spec.validate()?;
    match *spec {
        TopologySpec::Complete { n } => {
            let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
            Topology::from_edges_unlabeled(n, edges)
        }
        TopologySpec::Path { n } => Topology::from_edges_unlabeled(n, (1..n).map(|v| (v - 1, v))),
        TopologySpec::Star { n } => Topology::from_edges_unlabeled(n, (1..n).map(|v| (0, v))),
        TopologySpec::Grid { rows, cols } => {
            let mut edges = Vec::with_capacity(2 * rows * cols);
            for r in 0..rows {
                for c in 0..cols {
                    let u = r * cols + c;
                    if c + 1 < cols {
                        edges.push((u, u + 1));
                    }
                    if r + 1 < rows {
                        edges.push((u, u + cols));
                    }
                }
            }
            Topology::from_edges_unlabeled(rows * cols, edges)
        }
        TopologySpec::Er { n, p, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen::<f64>() < p {
                        edges.push((u, v));
                    }
                }
            }
            Topology::from_edges_unlabeled(n, edges)
        }
        TopologySpec::Ba { n, m, seed } => Topology::from_edges_unlabeled(n, barabasi_albert(n, m, seed)),
        TopologySpec::Ws { n, k, beta, seed } => Topology::from_edges_unlabeled(n, watts_strogatz(n, k, beta, seed)),
    }
}

/// Seeds with a star on nodes `0..=m`, then attaches each new node to `m`
/// distinct existing nodes drawn proportionally to degree.
fn barabasi_albert(n: usize, m: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges: Vec<(usize, usize)> = (1..=m).map(|v| (0, v)).collect();
    // Every node appears once per incident edge.
    let mut pool: Vec<usize> = edges.iter().flat_map(|&(u, v)| [u, v]).collect();
    let mut targets = Vec::with_capacity(m);
    for source in m + 1..n {
        targets.clear();
        while targets.len() < m {
            let t = pool[rng.gen_range(0..pool.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((t, source));
            pool.push(t);
            pool.push(source);
        }
    }
    edges
}

fn watts_strogatz(n: usize, k: usize, beta: f64, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for u in 0..n {
        for j in 1..=k / 2 {
            let v = (u + j) % n;
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    for j in 1..=k / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            if !adj[u].contains(&v) || rng.gen::<f64>() >= beta {
                continue;
            }
            if adj[u].len() >= n - 1 {
                continue;
            }
            let w = loop {
                let w = rng.gen_range(0..n);
                if w != u && !adj[u].contains(&w) {
                    break w;
                }
            };
            adj[u].remove(&v);
            adj[v].remove(&u);
            adj[u].insert(w);
            adj[w].insert(u);
        }
    }
    adj.iter()
        .enumerate()
        .flat_map(|(u, set)| set.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_edges_hit_hub() {
        let g = generate(&TopologySpec::Star { n: 50 }).unwrap();
        assert_eq!(g.edge_count(), 49);
        assert!(g.edges().all(|(u, _)| u == 0));
    }

    #[test]
    fn complete_edge_count() {
        assert_eq!(generate(&TopologySpec::Complete { n: 5 }).unwrap().edge_count(), 10);
    }

    #[test]
    fn grid_edge_count_matches_lattice_count() {
        let g = generate(&TopologySpec::Grid { rows: 7, cols: 7 }).unwrap();
        assert_eq!(g.node_count(), 49);
        // horizontal + vertical lattice edges, counted independently
        let mut count = 0;
        for u in 0..49usize {
            for v in u + 1..49 {
                let (ru, cu, rv, cv) = (u / 7, u % 7, v / 7, v % 7);
                if ru.abs_diff(rv) + cu.abs_diff(cv) == 1 {
                    count += 1;
                }
            }
        }
        assert_eq!(count, 84);
        assert_eq!(g.edge_count(), 84);
    }

    #[test]
    fn random_models_are_seed_stable() {
        for spec in [
            TopologySpec::Er { n: 60, p: 0.1, seed: 7 },
            TopologySpec::Ba { n: 60, m: 2, seed: 7 },
            TopologySpec::Ws { n: 60, k: 4, beta: 0.2, seed: 7 },
        ] {
            assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap(), "{}", spec.name());
        }
        let a = generate(&TopologySpec::Er { n: 60, p: 0.1, seed: 1 }).unwrap();
        let b = generate(&TopologySpec::Er { n: 60, p: 0.1, seed: 2 }).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn ba_edge_count_and_degrees() {
        let g = generate(&TopologySpec::Ba { n: 50, m: 2, seed: 3 }).unwrap();
        // star on 3 nodes, then 2 edges for each of the remaining 47
        assert_eq!(g.edge_count(), 2 + 47 * 2);
        assert!(g.is_connected());
        assert!((3..50).all(|u| g.degree(u) >= 2));
    }

    #[test]
    fn ws_keeps_edge_count() {
        for beta in [0.0, 0.3, 1.0] {
            let g = generate(&TopologySpec::Ws { n: 40, k: 4, beta, seed: 11 }).unwrap();
            assert_eq!(g.edge_count(), 80);
        }
        let ring = generate(&TopologySpec::Ws { n: 10, k: 2, beta: 0.0, seed: 0 }).unwrap();
        assert!((0..10).all(|u| ring.degree(u) == 2));
    }

    #[test]
    fn er_extremes() {
        assert_eq!(generate(&TopologySpec::Er { n: 20, p: 0.0, seed: 1 }).unwrap().edge_count(), 0);
        assert_eq!(generate(&TopologySpec::Er { n: 20, p: 1.0, seed: 1 }).unwrap().edge_count(), 190);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        for spec in [
            TopologySpec::Star { n: 1 },
            TopologySpec::Grid { rows: 0, cols: 3 },
            TopologySpec::Er { n: 10, p: 1.5, seed: 0 },
            TopologySpec::Ba { n: 10, m: 10, seed: 0 },
            TopologySpec::Ba { n: 10, m: 0, seed: 0 },
            TopologySpec::Ws { n: 10, k: 3, beta: 0.1, seed: 0 },
            TopologySpec::Ws { n: 10, k: 4, beta: -0.1, seed: 0 },
        ] {
            assert!(generate(&spec).is_err(), "{spec:?}");
        }
    }
}
