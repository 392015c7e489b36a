//! Graph construction, ingestion, reduction, and the all-pairs cost histogram.

mod generate;
mod histogram;
mod io;
mod reduce;

pub use generate::{generate, TopologySpec};
pub use histogram::{cumulative_count, hop_histogram, moments, CostClass, CostHistogram, Moments};
pub use io::{load_caida, load_edge_list, write_edge_list, Loaded};
pub use reduce::{k_core, largest_component};

use crate::error::{Error, Result};

/// Undirected simple graph with contiguous internal ids `0..N` and an
/// external label (e.g. an AS number) per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    adjacency: Vec<Vec<u32>>,
    labels: Vec<u64>,
}

/// Edges dropped while building a [`Topology`] from raw input.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EdgeStats {
    pub duplicates: usize,
    pub self_loops: usize,
}

impl Topology {
    /// Builds a graph over `labels.len()` nodes. Self-loops and repeated
    /// edges (in either orientation) are dropped and counted.
    pub fn from_edges<I>(labels: Vec<u64>, edges: I) -> Result<(Topology, EdgeStats)>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let n = labels.len();
        if n < 2 {
            return Err(Error::DegenerateGraph(format!("{n} node(s), need at least 2")));
        }
        let mut stats = EdgeStats::default();
        let mut pairs = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::Parameter(format!("edge ({u}, {v}) out of range for {n} nodes")));
            }
            if u == v {
                stats.self_loops += 1;
                continue;
            }
            pairs.push((u.min(v), u.max(v)));
        }
        let raw = pairs.len();
        pairs.sort_unstable();
        pairs.dedup();
        stats.duplicates = raw - pairs.len();

        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &pairs {
            adjacency[u].push(v as u32);
            adjacency[v].push(u as u32);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok((Topology { adjacency, labels }, stats))
    }

    /// Graph whose labels are the internal ids.
    pub fn from_edges_unlabeled<I>(n: usize, edges: I) -> Result<Topology>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Topology::from_edges((0..n as u64).collect(), edges).map(|(g, _)| g)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, u: usize) -> &[u32] {
        &self.adjacency[u]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    pub fn label(&self, u: usize) -> u64 {
        self.labels[u]
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&(v as u32)).is_ok()
    }

    /// Each undirected edge once, as `(u, v)` with `u < v`, in id order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, list)| {
            list.iter()
                .map(|&v| v as usize)
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    /// Connected components as sorted node lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            stack.push(start);
            let mut members = Vec::new();
            while let Some(u) = stack.pop() {
                members.push(u);
                for &v in &self.adjacency[u] {
                    let v = v as usize;
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() == 1
    }

    /// Induced subgraph on `nodes` (ascending ids), re-compacted with labels kept.
    pub(crate) fn induced(&self, nodes: &[usize]) -> Result<Topology> {
        let mut remap = vec![u32::MAX; self.node_count()];
        for (new, &old) in nodes.iter().enumerate() {
            remap[old] = new as u32;
        }
        let labels = nodes.iter().map(|&u| self.labels[u]).collect();
        let edges = nodes.iter().flat_map(|&u| {
            let remap = &remap;
            self.adjacency[u].iter().filter_map(move |&v| {
                let nv = remap[v as usize];
                (nv != u32::MAX && (u as u32) < v).then(|| (remap[u] as usize, nv as usize))
            })
        });
        Topology::from_edges(labels, edges).map(|(g, _)| g)
    }
}
