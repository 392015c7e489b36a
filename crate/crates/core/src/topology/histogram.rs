use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Topology;
use crate::error::{param, Error, Result};

/// One cost class: every ordered pair at this path cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostClass {
    pub cost: f64,
    pub count: u64,
}

/// Multiset of all-pairs path costs, stored as `{cost -> ordered-pair count}`.
///
/// Every satisfaction and imbalance metric depends on the pair costs only
/// through this histogram. Costs are real so that affine re-scalings of the
/// cost axis stay representable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostHistogram {
    classes: Vec<CostClass>,
    pair_total: u64,
}

impl CostHistogram {
    /// Builds a histogram from `(cost, count)` entries in any order; equal
    /// costs are merged.
    pub fn new(entries: impl IntoIterator<Item = (f64, u64)>) -> Result<Self> {
        let mut classes: Vec<CostClass> = Vec::new();
        for (cost, count) in entries {
            if !(cost.is_finite() && cost > 0.0) {
                return Err(param(format!("path costs must be finite and > 0, got {cost}")));
            }
            if count == 0 {
                return Err(param(format!("cost {cost} has zero count")));
            }
            classes.push(CostClass { cost, count });
        }
        classes.sort_by(|x, y| x.cost.total_cmp(&y.cost));
        classes.dedup_by(|next, kept| {
            if next.cost == kept.cost {
                kept.count += next.count;
                true
            } else {
                false
            }
        });
        let pair_total: u64 = classes.iter().map(|c| c.count).sum();
        if pair_total < 2 {
            return Err(param(format!("need at least 2 pairs, got {pair_total}")));
        }
        Ok(CostHistogram { classes, pair_total })
    }

    /// One entry per pair.
    pub fn from_costs(costs: impl IntoIterator<Item = f64>) -> Result<Self> {
        CostHistogram::new(costs.into_iter().map(|c| (c, 1)))
    }

    /// Classes in strictly increasing cost order.
    pub fn classes(&self) -> &[CostClass] {
        &self.classes
    }

    /// `M`, the number of ordered pairs.
    pub fn pair_total(&self) -> u64 {
        self.pair_total
    }

    pub fn min_cost(&self) -> f64 {
        self.classes[0].cost
    }

    pub fn max_cost(&self) -> f64 {
        self.classes[self.classes.len() - 1].cost
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    /// Same counts with every cost passed through `f`.
    pub fn map_costs(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        CostHistogram::new(self.classes.iter().map(|c| (f(c.cost), c.count)))
    }
}

/// Count-weighted moments of the pair-cost distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    /// `E|h - mean|^3`
    pub m3: f64,
    /// `E|h - mean|^4`
    pub m4: f64,
}

pub fn moments(h: &CostHistogram) -> Moments {
    let m = h.pair_total() as f64;
    let mean = h.classes().iter().map(|c| c.cost * c.count as f64).sum::<f64>() / m;
    let central = |p: i32| {
        h.classes()
            .iter()
            .map(|c| (c.cost - mean).abs().powi(p) * c.count as f64)
            .sum::<f64>()
            / m
    };
    Moments { mean, variance: central(2), m3: central(3), m4: central(4) }
}

/// `K(h0)`: number of pairs whose cost is strictly below `h0`.
pub fn cumulative_count(h: &CostHistogram, h0: f64) -> u64 {
    h.classes().iter().take_while(|c| c.cost < h0).map(|c| c.count).sum()
}

/// Hop-count histogram over all `N(N-1)` ordered pairs, by breadth-first
/// search from every node. Sources are processed in parallel; per-thread
/// integer tallies are summed, so the result does not depend on scheduling.
pub fn hop_histogram(g: &Topology) -> Result<CostHistogram> {
    let components = g.components();
    if components.len() > 1 {
        return Err(Error::Disconnected {
            from: g.label(components[0][0]),
            to: g.label(components[1][0]),
        });
    }
    let n = g.node_count();

    // CSR copy of the adjacency for cache-friendly scans.
    let mut offsets = Vec::with_capacity(n + 1);
    let mut targets = Vec::with_capacity(2 * g.edge_count());
    offsets.push(0usize);
    for u in 0..n {
        targets.extend_from_slice(g.neighbors(u));
        offsets.push(targets.len());
    }

    let tally = (0..n)
        .into_par_iter()
        .fold(
            || (vec![0u64; n], vec![u32::MAX; n], Vec::<u32>::with_capacity(n)),
            |(mut counts, mut dist, mut queue), source| {
                dist.fill(u32::MAX);
                queue.clear();
                dist[source] = 0;
                queue.push(source as u32);
                let mut head = 0;
                while head < queue.len() {
                    let u = queue[head] as usize;
                    head += 1;
                    let next = dist[u] + 1;
                    for &v in &targets[offsets[u]..offsets[u + 1]] {
                        let slot = &mut dist[v as usize];
                        if *slot == u32::MAX {
                            *slot = next;
                            counts[next as usize] += 1;
                            queue.push(v);
                        }
                    }
                }
                (counts, dist, queue)
            },
        )
        .map(|(counts, _, _)| counts)
        .reduce(
            || vec![0u64; n],
            |mut acc, part| {
                acc.iter_mut().zip(part).for_each(|(a, b)| *a += b);
                acc
            },
        );

    CostHistogram::new(
        tally
            .iter()
            .enumerate()
            .filter(|&(_, &count)| count > 0)
            .map(|(d, &count)| (d as f64, count)),
    )
}
