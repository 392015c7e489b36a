use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Explicit probability vector, independent of any graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareVector(Vec<f64>);

impl ShareVector {
    /// Accepts non-negative entries summing to 1 within 1e-12.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("share vector is empty".into()));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!("share {bad} is not a finite non-negative number")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("shares sum to {sum}, not 1")));
        }
        Ok(ShareVector(values))
    }

    /// Normalizes non-negative raw scores into shares.
    pub fn from_scores(scores: &[f64]) -> Result<Self> {
        let total: f64 = scores.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Domain(format!("scores must have a positive finite total, got {total}")));
        }
        ShareVector::new(scores.iter().map(|s| s / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        ShareVector::new(vec![1.0 / n as f64; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Shannon entropy in bits, with `0 log 0 = 0`.
pub(crate) fn entropy_bits(values: impl IntoIterator<Item = f64>) -> f64 {
    -values
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| p * p.log2())
        .sum::<f64>()
}

/// `I = 1 - H(p) / log2 n`. Uniform vectors give exactly 0 and one-hot
/// vectors exactly 1.
pub fn imbalance_of_shares(p: &ShareVector) -> Result<f64> {
    let n = p.len();
    if n < 2 {
        return Err(Error::Domain(format!("imbalance needs at least 2 shares, got {n}")));
    }
    let values = p.values();
    if values.iter().all(|&v| v == values[0]) {
        return Ok(0.0);
    }
    // sum p ln(n p) / ln n, the entropy gap relative to its maximum
    let ln_n = (n as f64).ln();
    let gap: f64 = values
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * (v.ln() + ln_n))
        .sum();
    Ok((gap / ln_n).clamp(0.0, 1.0))
}

/// Entropy-gap chain rule over a partition of the share indices, in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// `log2 M - H(p)`
    pub total_gap: f64,
    /// `D(q || m/M)`: gap of the group masses against group sizes.
    pub between_gap: f64,
    /// `log2 m_g - H(p | g)` per group, in input order.
    pub within_gaps: Vec<f64>,
    pub group_masses: Vec<f64>,
    /// `between_gap + sum_g q_g within_g`; equals `total_gap` up to rounding.
    pub reconstruction: f64,
}

/// Splits the entropy gap of `p` into a between-group term and mass-weighted
/// within-group terms.
pub fn decompose(p: &ShareVector, groups: &[Vec<usize>]) -> Result<Decomposition> {
    let n = p.len();
    let mut seen = vec![false; n];
    for group in groups {
        if group.is_empty() {
            return Err(Error::Domain("empty group in partition".into()));
        }
        for &i in group {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Domain(format!("index {i} is out of range or repeated")));
            }
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Domain(format!("index {missing} is not covered by the partition")));
    }

    let values = p.values();
    let total_gap = (n as f64).log2() - entropy_bits(values.iter().copied());
    let mut between_gap = 0.0;
    let mut within_gaps = Vec::with_capacity(groups.len());
    let mut group_masses = Vec::with_capacity(groups.len());
    for group in groups {
        let mass: f64 = group.iter().map(|&i| values[i]).sum();
        if mass <= 0.0 {
            return Err(Error::Domain("a group has zero mass".into()));
        }
        let size = group.len() as f64;
        between_gap += mass * (mass * n as f64 / size).log2();
        within_gaps.push(size.log2() - entropy_bits(group.iter().map(|&i| values[i] / mass)));
        group_masses.push(mass);
    }
    let reconstruction = between_gap + group_masses.iter().zip(&within_gaps).map(|(q, w)| q * w).sum::<f64>();
    Ok(Decomposition { total_gap, between_gap, within_gaps, group_masses, reconstruction })
}

/// Classical inequality indices used as comparison baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceIndices {
    /// Mean-absolute-difference Gini: `sum_ij |x_i - x_j| / (2 n^2 mean)`.
    pub gini: f64,
    /// Jain's index `(sum x)^2 / (n sum x^2)`; 1 is perfectly fair.
    pub jfi: f64,
    /// Coefficient of variation with the population standard deviation.
    pub cv: f64,
    /// Population variance.
    pub variance: f64,
}

/// Works on any non-negative vector, not only normalized shares, so the same
/// function serves the scale-invariance checks on raw scores.
pub fn reference_indices(values: &[f64]) -> ReferenceIndices {
    let n = values.len() as f64;
    let sum: f64 = values.iter().sum();
    let mean = sum / n;
    let sum_sq: f64 = values.iter().map(|x| x * x).sum();
    let variance = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // sum_ij |x_i - x_j| = 2 sum_i (2i - n + 1) x_(i) over ascending order
    let abs_diff_sum: f64 = 2.0
        * sorted
            .iter()
            .enumerate()
            .map(|(i, x)| (2.0 * i as f64 - n + 1.0) * x)
            .sum::<f64>();

    ReferenceIndices {
        gini: abs_diff_sum / (2.0 * n * n * mean),
        jfi: sum * sum / (n * sum_sq),
        cv: variance.sqrt() / mean,
        variance,
    }
}
