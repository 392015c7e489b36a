//! Sigmoid satisfaction model and the entropy-gap imbalance metric.
//!
//! Evaluation always runs in the log domain: weights are carried as
//! `ln w = -softplus(a (h - h0))` and normalized with a max-shifted
//! log-sum-exp, so shares stay finite and normalized even when every weight
//! underflows (large `a` with `h0` below the smallest cost).

mod affine;
pub mod axioms;
mod shares;

pub use affine::affine_transform;
pub use shares::{decompose, imbalance_of_shares, reference_indices, Decomposition, ReferenceIndices, ShareVector};

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::topology::CostHistogram;

/// SLA parameters: strictness `a` (per unit cost) and threshold `h0` (cost units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlaPoint {
    a: f64,
    h0: f64,
}

impl SlaPoint {
    pub fn new(a: f64, h0: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(param(format!("strictness a must be finite and > 0, got {a}")));
        }
        if !(h0.is_finite() && h0 > 0.0) {
            return Err(param(format!("threshold h0 must be finite and > 0, got {h0}")));
        }
        Ok(SlaPoint { a, h0 })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic `1 / (1 + e^x)`, evaluated through `e^{-|x|}`.
fn logistic_complement(x: f64) -> f64 {
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// `w = 1 / (1 + exp[a (cost - h0)])`, in (0, 1) up to floating-point saturation.
pub fn satisfaction_weight(cost: f64, sla: SlaPoint) -> f64 {
    logistic_complement(sla.a * (cost - sla.h0))
}

/// `1 - w`, accurate where `w` rounds to 1.
pub fn satisfaction_deficit(cost: f64, sla: SlaPoint) -> f64 {
    logistic_complement(-sla.a * (cost - sla.h0))
}

/// `t e^t - (e^t - 1)`: the per-pair entropy-gap term `q ln q - q + 1` at
/// `q = e^t`. Non-negative; the series branch avoids cancellation near `t = 0`.
pub(crate) fn gap_term(t: f64) -> f64 {
    if t.abs() < 0.05 {
        // sum_{n>=2} (n-1)/n! t^n
        const C: [f64; 8] = [
            1.0 / 2.0,
            1.0 / 3.0,
            1.0 / 8.0,
            1.0 / 30.0,
            1.0 / 144.0,
            1.0 / 840.0,
            1.0 / 5760.0,
            1.0 / 45360.0,
        ];
        let mut acc = 0.0;
        for c in C.iter().rev() {
            acc = acc * t + c;
        }
        acc * t * t
    } else if t == f64::NEG_INFINITY {
        1.0
    } else {
        t * t.exp() - t.exp_m1()
    }
}

/// Per-class quantities shared by evaluation and the gradient code.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ClassTerms {
    pub cost: f64,
    pub count: f64,
    pub w: f64,
    /// `1 - w`
    pub deficit: f64,
    pub p: f64,
    pub ln_p: f64,
    /// `ln(p M)`, the log-ratio to the uniform share
    pub ln_q: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Model {
    pub terms: Vec<ClassTerms>,
    pub ln_total_weight: f64,
    pub ln_pairs: f64,
    pub pair_total: f64,
}

pub(crate) fn model(h: &CostHistogram, sla: SlaPoint) -> Model {
    let pair_total = h.pair_total() as f64;
    let ln_pairs = pair_total.ln();
    let log_weight: Vec<f64> = h.classes().iter().map(|c| -softplus(sla.a * (c.cost - sla.h0))).collect();
    let shift = log_weight.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_mean_weight = shift
        + h.classes()
            .iter()
            .zip(&log_weight)
            .map(|(c, &l)| c.count as f64 / pair_total * (l - shift).exp())
            .sum::<f64>()
            .ln();
    let ln_total_weight = ln_mean_weight + ln_pairs;

    let terms = h
        .classes()
        .iter()
        .zip(&log_weight)
        .map(|(c, &l)| {
            let x = sla.a * (c.cost - sla.h0);
            let ln_q = l - ln_mean_weight;
            ClassTerms {
                cost: c.cost,
                count: c.count as f64,
                w: logistic_complement(x),
                deficit: logistic_complement(-x),
                p: (ln_q - ln_pairs).exp(),
                ln_p: ln_q - ln_pairs,
                ln_q,
            }
        })
        .collect();
    Model { terms, ln_total_weight, ln_pairs, pair_total }
}

impl Model {
    /// `ln M - H(p)` in nats.
    pub fn gap_nats(&self) -> f64 {
        self.terms.iter().map(|t| t.count * gap_term(t.ln_q)).sum::<f64>() / self.pair_total
    }

    pub fn imbalance(&self) -> f64 {
        (self.gap_nats() / self.ln_pairs).clamp(0.0, 1.0)
    }

    pub fn mean_satisfaction(&self) -> f64 {
        self.terms.iter().map(|t| t.count * t.w).sum::<f64>() / self.pair_total
    }
}

/// One cost class inside a [`QoeSnapshot`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassShare {
    pub cost: f64,
    pub count: u64,
    /// Sigmoid satisfaction `w` of each pair in the class.
    pub weight: f64,
    /// Normalized share `p = w / W` of each pair in the class.
    pub share: f64,
}

/// All first-order metrics at one SLA point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoeSnapshot {
    pub sla: SlaPoint,
    pub classes: Vec<ClassShare>,
    /// `W = sum of count * w`; may underflow to 0 in extreme regimes, see `log_total_weight`.
    pub total_weight: f64,
    pub log_total_weight: f64,
    pub mean_satisfaction: f64,
    pub entropy_bits: f64,
    pub imbalance: f64,
    pub pair_total: u64,
}

/// Evaluates shares, average satisfaction, entropy and imbalance over the
/// cost classes of `h`.
pub fn evaluate(h: &CostHistogram, sla: SlaPoint) -> QoeSnapshot {
    let m = model(h, sla);
    let gap = m.gap_nats();
    let imbalance = m.imbalance();
    QoeSnapshot {
        sla,
        classes: m
            .terms
            .iter()
            .map(|t| ClassShare { cost: t.cost, count: t.count as u64, weight: t.w, share: t.p })
            .collect(),
        total_weight: m.ln_total_weight.exp(),
        log_total_weight: m.ln_total_weight,
        mean_satisfaction: m.mean_satisfaction(),
        entropy_bits: ((m.ln_pairs - gap) / std::f64::consts::LN_2).max(0.0),
        imbalance,
        pair_total: h.pair_total(),
    }
}

/// Imbalance only; the hot path of scans and finite differences.
pub fn imbalance(h: &CostHistogram, sla: SlaPoint) -> f64 {
    model(h, sla).imbalance()
}

pub fn mean_satisfaction(h: &CostHistogram, sla: SlaPoint) -> f64 {
    model(h, sla).mean_satisfaction()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{generate, hop_histogram, TopologySpec};

    fn sla(a: f64, h0: f64) -> SlaPoint {
        SlaPoint::new(a, h0).unwrap()
    }

    fn hist(spec: TopologySpec) -> CostHistogram {
        hop_histogram(&generate(&spec).unwrap()).unwrap()
    }

    #[test]
    fn weight_examples() {
        for a in [0.01, 1.0, 37.0] {
            assert_eq!(satisfaction_weight(3.0, sla(a, 3.0)), 0.5);
        }
        assert!((satisfaction_weight(5.0, sla(1.0, 3.0)) - 1.0 / (1.0 + 2f64.exp())).abs() < 1e-15);
        assert!((satisfaction_weight(5.0, sla(1.0, 3.0)) - 0.119203).abs() < 1e-6);
        let w = satisfaction_weight(2.0, sla(50.0, 3.0));
        assert_eq!(w, 1.0);
        let deficit = satisfaction_deficit(2.0, sla(50.0, 3.0));
        assert!((deficit / (-50f64).exp() - 1.0).abs() < 1e-12);
        assert!((deficit - 1.9287e-22).abs() < 1e-25);
        assert_eq!(satisfaction_weight(1000.0, sla(100.0, 1.0)), 0.0);
    }

    #[test]
    fn invalid_sla_rejected() {
        assert!(SlaPoint::new(0.0, 1.0).is_err());
        assert!(SlaPoint::new(1.0, -1.0).is_err());
        assert!(SlaPoint::new(f64::NAN, 1.0).is_err());
        assert!(SlaPoint::new(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn gap_term_series_matches_closed_form() {
        // long power series as the oracle; the closed form cancels near zero
        let series = |t: f64| {
            let (mut term, mut acc) = (t, 0.0);
            for n in 2..40 {
                term *= t / n as f64;
                acc += (n - 1) as f64 * term;
            }
            acc
        };
        for t in [-0.049, -0.01, 1e-3, 0.02, 0.0499] {
            assert!((gap_term(t) - series(t)).abs() <= 1e-15 * series(t).abs(), "{t}");
        }
        for t in [-0.06, 0.08, -3.0, 2.0] {
            assert!((gap_term(t) - series(t)).abs() <= 1e-13 * series(t).abs(), "{t}");
        }
        assert_eq!(gap_term(0.0), 0.0);
        assert_eq!(gap_term(f64::NEG_INFINITY), 1.0);
        assert!((gap_term(-800.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complete_graph_is_perfectly_fair() {
        let h = hist(TopologySpec::Complete { n: 50 });
        let snap = evaluate(&h, sla(1.0, 3.0));
        assert_eq!(snap.imbalance, 0.0);
        assert!((snap.mean_satisfaction - 0.880797).abs() < 1e-6);
        assert!((snap.mean_satisfaction - satisfaction_weight(1.0, sla(1.0, 3.0))).abs() < 1e-15);
    }

    #[test]
    fn two_class_symmetric_point() {
        let h = CostHistogram::new([(1.0, 1), (2.0, 1)]).unwrap();
        let snap = evaluate(&h, sla(0.1, 1.5));
        assert!((snap.mean_satisfaction - 0.5).abs() < 1e-15);
        // binary-entropy oracle at p = sigma(0.05)
        let p = 1.0 / (1.0 + (-0.05f64).exp());
        let hb = -(p * p.log2() + (1.0 - p) * (1.0 - p).log2());
        assert!((snap.imbalance - (1.0 - hb)).abs() < 1e-15);
        assert!((snap.imbalance - 4.5070e-4).abs() < 1e-7);
    }

    #[test]
    fn star_at_strict_sla() {
        // numpy oracle; see the note on the 24x class-size ratio in the README
        let h = hist(TopologySpec::Star { n: 50 });
        let snap = evaluate(&h, sla(10.0, 1.5));
        assert!((snap.imbalance - 0.304078322565762).abs() < 1e-12);
    }

    #[test]
    fn snapshot_invariants_hold_in_extreme_regimes() {
        let h = hist(TopologySpec::Grid { rows: 7, cols: 7 });
        for &(a, h0) in &[(50.0, 0.1), (100.0, 0.05), (100.0, 0.5), (1e-4, 6.0), (3.0, 4.2), (100.0, 12.9)] {
            let snap = evaluate(&h, sla(a, h0));
            let norm: f64 = snap.classes.iter().map(|c| c.count as f64 * c.share).sum();
            assert!((norm - 1.0).abs() < 1e-12, "a={a} h0={h0} norm={norm}");
            assert!(snap.imbalance.is_finite() && (0.0..=1.0).contains(&snap.imbalance));
            let hmax = (h.pair_total() as f64).log2();
            assert!((snap.entropy_bits - (1.0 - snap.imbalance) * hmax).abs() < 1e-12);
            assert!(snap.classes.windows(2).all(|w| w[0].weight >= w[1].weight));
        }
    }

    #[test]
    fn log_domain_at_underflow_matches_argmin_limit() {
        // every weight underflows; shares must concentrate on the cheapest class
        let h = CostHistogram::new([(10.0, 98), (20.0, 2352)]).unwrap();
        let snap = evaluate(&h, sla(100.0, 1.0));
        assert_eq!(snap.total_weight, 0.0);
        assert!((snap.classes[0].share * 98.0 - 1.0).abs() < 1e-12);
        let expected = 1.0 - 98f64.log2() / 2450f64.log2();
        assert!((snap.imbalance - expected).abs() < 1e-12);
    }
}
