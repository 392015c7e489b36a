use super::Topology;
use crate::error::{param, Error, Result};

/// Restricts `g` to its largest connected component. Ties go to the
/// component containing the smallest external label.
///
/// Fails only when every component is a single node, since a topology needs
/// at least two nodes.
pub fn largest_component(g: &Topology) -> Result<Topology> {
    let components = g.components();
    if components.len() == 1 {
        return Ok(g.clone());
    }
    let min_label = |c: &Vec<usize>| c.iter().map(|&u| g.label(u)).min().unwrap_or(u64::MAX);
    let best = components
        .iter()
        .max_by(|x, y| x.len().cmp(&y.len()).then_with(|| min_label(y).cmp(&min_label(x))))
        .expect("a topology has at least two nodes");
    if best.len() < 2 {
        return Err(Error::DegenerateGraph("graph has no edges".into()));
    }
    g.induced(best)
}

/// Maximal subgraph in which every node has degree at least `k`, found by
/// iterative peeling. An empty core is reported as [`Error::EmptyCore`].
pub fn k_core(g: &Topology, k: usize) -> Result<Topology> {
    if k == 0 {
        return Err(param("k must be >= 1"));
    }
    let n = g.node_count();
    let mut degree: Vec<usize> = (0..n).map(|u| g.degree(u)).collect();
    let mut removed = vec![false; n];
    let mut stack: Vec<usize> = (0..n).filter(|&u| degree[u] < k).collect();
    for &u in &stack {
        removed[u] = true;
    }
    while let Some(u) = stack.pop() {
        for &v in g.neighbors(u) {
            let v = v as usize;
            if removed[v] {
                continue;
            }
            degree[v] -= 1;
            if degree[v] < k {
                removed[v] = true;
                stack.push(v);
            }
        }
    }
    let keep: Vec<usize> = (0..n).filter(|&u| !removed[u]).collect();
    if keep.is_empty() {
        return Err(Error::EmptyCore { k });
    }
    g.induced(&keep)
}
