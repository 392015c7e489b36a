//! Limiting regimes of the imbalance surface: the quadratic law for small
//! strictness and the piecewise-constant staircase for large strictness.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::qoe::{model, SlaPoint};
use crate::topology::{moments, CostHistogram};

/// Theoretical small-`a` coefficient `k` in `I ≈ k a²`:
/// `Var(h) / (8 ln 2 log2 M)`, which is `Var(h) / (8 ln M)`.
pub fn small_a_coefficient(h: &CostHistogram) -> f64 {
    moments(h).variance / (8.0 * (h.pair_total() as f64).ln())
}

/// The same coefficient without the `ln 2` factor, `Var(h) / (8 log2 M)`.
/// Reported alongside for comparison only.
pub fn small_a_coefficient_no_ln2(h: &CostHistogram) -> f64 {
    moments(h).variance / (8.0 * (h.pair_total() as f64).log2())
}

/// 16 log-spaced strictness values in `[1e-3, 1e-2]`.
pub fn default_a_samples() -> Vec<f64> {
    log_space(1e-3, 1e-2, 16)
}

pub(crate) fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (l, r) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| match i {
            0 => lo,
            _ if i == n - 1 => hi,
            _ => (l + (r - l) * i as f64 / (n - 1) as f64).exp(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallAReport {
    pub k_theory: f64,
    pub k_theory_no_ln2: f64,
    pub k_fit: f64,
    /// `k_fit / k_theory`; absent when the histogram has zero variance.
    pub ratio: Option<f64>,
    /// Uncentered coefficient of determination of the through-origin fit.
    pub fit_r2: f64,
    pub a_samples: Vec<f64>,
    pub h0_used: f64,
}

/// Least-squares slope of `I(a, h0)` against `a²`, constrained through the
/// origin.
pub fn fit_small_a_slope(h: &CostHistogram, h0: f64, a_samples: &[f64]) -> Result<SmallAReport> {
    if a_samples.len() < 3 {
        return Err(param(format!("need at least 3 strictness samples, got {}", a_samples.len())));
    }
    let mut points = Vec::with_capacity(a_samples.len());
    for &a in a_samples {
        let sla = SlaPoint::new(a, h0)?;
        points.push((a * a, model(h, sla).imbalance()));
    }
    let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
    let syy: f64 = points.iter().map(|(_, y)| y * y).sum();
    let k_fit = sxy / sxx;
    let sse: f64 = points.iter().map(|(x, y)| (y - k_fit * x).powi(2)).sum();
    let fit_r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let k_theory = small_a_coefficient(h);
    Ok(SmallAReport {
        k_theory,
        k_theory_no_ln2: small_a_coefficient_no_ln2(h),
        k_fit,
        ratio: (k_theory > 0.0).then(|| k_fit / k_theory),
        fit_r2,
        a_samples: a_samples.to_vec(),
        h0_used: h0,
    })
}

/// One flat step of the large-`a` limit, covering `(lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    /// `None` for the plateau below the smallest cost.
    pub lower: Option<f64>,
    /// `None` for the plateau above the largest cost.
    pub upper: Option<f64>,
    /// Pairs sharing the limit weight.
    pub k: u64,
    pub limit: f64,
    /// True when no pair is strictly below the threshold and the limit is
    /// taken as uniform over the minimum-cost pairs.
    pub argmin_convention: bool,
}

impl Plateau {
    pub fn contains(&self, h0: f64) -> bool {
        self.lower.is_none_or(|l| h0 > l) && self.upper.is_none_or(|u| h0 <= u)
    }

    /// Midpoint of a bounded plateau.
    pub fn midpoint(&self) -> Option<f64> {
        Some(0.5 * (self.lower? + self.upper?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseProfile {
    pub breakpoints: Vec<f64>,
    pub plateaus: Vec<Plateau>,
    pub pair_total: u64,
}

impl StaircaseProfile {
    pub fn plateau_at(&self, h0: f64) -> &Plateau {
        self.plateaus.iter().find(|p| p.contains(h0)).unwrap_or(&self.plateaus[0])
    }

    /// `I∞(h0)`.
    pub fn limit_at(&self, h0: f64) -> f64 {
        self.plateau_at(h0).limit
    }

    /// Change in the limit across `breakpoint`: left plateau minus right.
    pub fn step_at(&self, breakpoint: f64) -> Option<f64> {
        let i = self.breakpoints.iter().position(|&c| c == breakpoint)?;
        Some(self.plateaus[i].limit - self.plateaus[i + 1].limit)
    }
}

fn limit_for(k: u64, pairs: u64) -> f64 {
    if k >= pairs {
        0.0
    } else {
        (1.0 - (k as f64).ln() / (pairs as f64).ln()).clamp(0.0, 1.0)
    }
}

/// `I∞(h0) = 1 - log2 K(h0) / log2 M` where `K(h0)` counts pairs with cost
/// strictly below `h0`.
pub fn staircase(h: &CostHistogram) -> StaircaseProfile {
    let classes = h.classes();
    let pairs = h.pair_total();
    let breakpoints: Vec<f64> = classes.iter().map(|c| c.cost).collect();
    let mut plateaus = Vec::with_capacity(classes.len() + 1);
    let first = classes[0].count;
    plateaus.push(Plateau {
        lower: None,
        upper: Some(breakpoints[0]),
        k: first,
        limit: limit_for(first, pairs),
        argmin_convention: true,
    });
    let mut below = 0u64;
    for (i, class) in classes.iter().enumerate() {
        below += class.count;
        plateaus.push(Plateau {
            lower: Some(class.cost),
            upper: breakpoints.get(i + 1).copied(),
            k: below,
            limit: limit_for(below, pairs),
            argmin_convention: false,
        });
    }
    StaircaseProfile { breakpoints, plateaus, pair_total: pairs }
}

/// Detail of a transition-width measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionWidth {
    pub width: f64,
    pub window: (f64, f64),
    pub resolution: f64,
    pub step: f64,
}

/// Length of the `h0` set around `breakpoint` where `|I(a, h0) - I∞(h0)|`
/// exceeds `eps`.
///
/// The scan runs from the previous cost to the next one (mirrored gap at the
/// ends) at resolution `1e-3 / a`.
pub fn transition_width(h: &CostHistogram, a: f64, breakpoint: f64, eps: f64) -> Result<TransitionWidth> {
    if !(a.is_finite() && a > 0.0) {
        return Err(param(format!("strictness must be finite and > 0, got {a}")));
    }
    let profile = staircase(h);
    let i = profile
        .breakpoints
        .iter()
        .position(|&c| c == breakpoint)
        .ok_or_else(|| param(format!("breakpoint {breakpoint} is not a cost in the histogram")))?;
    let step = profile.step_at(breakpoint).unwrap_or(0.0).abs();
    if !(eps > 0.0 && eps < 0.5 * step) {
        return Err(param(format!("eps {eps} must lie in (0, {}) for the plateau step at {breakpoint}", 0.5 * step)));
    }
    let costs = &profile.breakpoints;
    let lo = match i {
        0 => match costs.get(1) {
            Some(next) => breakpoint - (next - breakpoint),
            None => 0.0,
        },
        _ => costs[i - 1],
    };
    let hi = match costs.get(i + 1) {
        Some(&next) => next,
        None if i > 0 => breakpoint + (breakpoint - costs[i - 1]),
        None => 2.0 * breakpoint,
    };
    let lo = lo.max(0.0);
    let resolution = 1e-3 / a;
    let n = ((hi - lo) / resolution).ceil() as usize;
    let mut over = 0usize;
    for j in 0..n {
        let h0 = lo + (j as f64 + 0.5) * resolution;
        if h0 <= 0.0 || h0 >= hi {
            continue;
        }
        let i_now = model(h, SlaPoint::new(a, h0)?).imbalance();
        if (i_now - profile.limit_at(h0)).abs() > eps {
            over += 1;
        }
    }
    Ok(TransitionWidth { width: over as f64 * resolution, window: (lo, hi), resolution, step })
}
