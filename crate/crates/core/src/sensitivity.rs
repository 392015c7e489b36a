//! First- and second-order sensitivity of imbalance and average satisfaction
//! over the `(a, h0)` plane.
//!
//! The imbalance gradient is the share-weighted covariance between the
//! entropy leverage `1 + ln p` of each cost class and its parameter
//! sensitivity `g = (∂w/∂θ) / w`:
//!
//! ```text
//! ∂I/∂θ = Cov_p(1 + ln p, g) / (ln 2 · log2 M)
//! g_a  = -(h - h0)(1 - w)
//! g_h0 =  a (1 - w)
//! ```
//!
//! Second derivatives are central differences of this analytic gradient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qoe::{self, model, Model, SlaPoint};
use crate::topology::CostHistogram;

/// SLA parameter being differentiated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    A,
    H0,
}

impl std::str::FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(Param::A),
            "h0" => Ok(Param::H0),
            other => Err(Error::Parameter(format!("unknown parameter {other:?}, expected 'a' or 'h0'"))),
        }
    }
}

/// Gradients of `I` and `s̄`, plus the angle between them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientPair {
    pub di_da: f64,
    pub di_dh0: f64,
    pub ds_da: f64,
    pub ds_dh0: f64,
    /// Angle between ∇I and ∇s̄ in degrees; `None` when either norm is
    /// below 1e-14.
    pub angle_deg: Option<f64>,
}

impl GradientPair {
    fn new(di_da: f64, di_dh0: f64, ds_da: f64, ds_dh0: f64) -> Self {
        let ni = di_da.hypot(di_dh0);
        let ns = ds_da.hypot(ds_dh0);
        let angle_deg = (ni > 1e-14 && ns > 1e-14)
            .then(|| ((di_da * ds_da + di_dh0 * ds_dh0) / (ni * ns)).clamp(-1.0, 1.0).acos().to_degrees());
        GradientPair { di_da, di_dh0, ds_da, ds_dh0, angle_deg }
    }

    pub fn imbalance(&self, param: Param) -> f64 {
        match param {
            Param::A => self.di_da,
            Param::H0 => self.di_dh0,
        }
    }
}

fn sensitivity(t: &qoe::ClassTerms, sla: SlaPoint, param: Param) -> f64 {
    match param {
        Param::A => -(t.cost - sla.h0()) * t.deficit,
        Param::H0 => sla.a() * t.deficit,
    }
}

fn expected_sensitivity(m: &Model, sla: SlaPoint, param: Param) -> f64 {
    m.terms.iter().map(|t| t.count * t.p * sensitivity(t, sla, param)).sum()
}

/// `∂I/∂θ` from a prepared model. The leverage is taken as `ln(p M)`, which
/// differs from `1 + ln p` by a constant and so leaves the covariance
/// unchanged while avoiding cancellation.
fn imbalance_derivative(m: &Model, sla: SlaPoint, param: Param) -> f64 {
    let mean_g = expected_sensitivity(m, sla, param);
    let cov: f64 = m
        .terms
        .iter()
        .filter(|t| t.p > 0.0)
        .map(|t| t.count * t.p * t.ln_q * (sensitivity(t, sla, param) - mean_g))
        .sum();
    cov / m.ln_pairs
}

fn satisfaction_derivative(m: &Model, sla: SlaPoint, param: Param) -> f64 {
    let factor = |cost: f64| match param {
        Param::A => -(cost - sla.h0()),
        Param::H0 => sla.a(),
    };
    m.terms.iter().map(|t| t.count * factor(t.cost) * t.w * t.deficit).sum::<f64>() / m.pair_total
}

/// `Cov_p(1 + ln p, g)` computed literally as `E[XY] - E[X] E[Y]`.
///
/// The gradient divides this by `ln M`; the two code paths are kept separate
/// so the identity can be checked.
pub fn leverage_covariance(h: &CostHistogram, sla: SlaPoint, param: Param) -> f64 {
    let m = model(h, sla);
    let mut e_xy = 0.0;
    let mut e_x = 0.0;
    let mut e_y = 0.0;
    for t in m.terms.iter().filter(|t| t.p > 0.0) {
        let weight = t.count * t.p;
        let x = 1.0 + t.ln_p;
        let y = sensitivity(t, sla, param);
        e_xy += weight * x * y;
        e_x += weight * x;
        e_y += weight * y;
    }
    e_xy - e_x * e_y
}

/// Analytic gradient of imbalance and average satisfaction at `sla`.
pub fn gradient(h: &CostHistogram, sla: SlaPoint) -> GradientPair {
    let m = model(h, sla);
    GradientPair::new(
        imbalance_derivative(&m, sla, Param::A),
        imbalance_derivative(&m, sla, Param::H0),
        satisfaction_derivative(&m, sla, Param::A),
        satisfaction_derivative(&m, sla, Param::H0),
    )
}

/// `(∂I/∂a, ∂I/∂h0)` only.
pub(crate) fn imbalance_gradient(h: &CostHistogram, sla: SlaPoint) -> (f64, f64) {
    let m = model(h, sla);
    (imbalance_derivative(&m, sla, Param::A), imbalance_derivative(&m, sla, Param::H0))
}

fn shifted(sla: SlaPoint, da: f64, dh0: f64, step: f64) -> Result<SlaPoint> {
    SlaPoint::new(sla.a() + da, sla.h0() + dh0).map_err(|_| Error::StepTooLarge {
        step,
        at: format!("a = {}, h0 = {}", sla.a(), sla.h0()),
    })
}

/// Central finite differences of evaluated `I` and `s̄`; an oracle for
/// [`gradient`].
pub fn gradient_fd(h: &CostHistogram, sla: SlaPoint, step: f64) -> Result<GradientPair> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Parameter(format!("step must be > 0, got {step}")));
    }
    let eval = |da: f64, dh0: f64| -> Result<(f64, f64)> {
        let m = model(h, shifted(sla, da, dh0, step)?);
        Ok((m.imbalance(), m.mean_satisfaction()))
    };
    let (ia_hi, sa_hi) = eval(step, 0.0)?;
    let (ia_lo, sa_lo) = eval(-step, 0.0)?;
    let (ih_hi, sh_hi) = eval(0.0, step)?;
    let (ih_lo, sh_lo) = eval(0.0, -step)?;
    let d = 2.0 * step;
    Ok(GradientPair::new((ia_hi - ia_lo) / d, (ih_hi - ih_lo) / d, (sa_hi - sa_lo) / d, (sh_hi - sh_lo) / d))
}

/// Hessian of the imbalance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianI {
    pub d2_aa: f64,
    pub d2_h0h0: f64,
    /// `∂/∂a (∂I/∂h0)`
    pub d2_ah0: f64,
    /// `∂/∂h0 (∂I/∂a)`
    pub d2_h0a: f64,
    pub step_a: f64,
    pub step_h0: f64,
    /// Set when some cost lies within two `h0` steps of the threshold; the
    /// stencil then straddles a steep riser and the estimate is noisy.
    pub step_limited: bool,
}

/// Default stencil: `max(1e-4, 1e-4 |θ|)` per parameter, capped at `θ / 2`
/// so the stencil stays inside the domain.
pub fn default_steps(sla: SlaPoint) -> (f64, f64) {
    let step = |x: f64| 1e-4f64.max(1e-4 * x).min(0.5 * x);
    (step(sla.a()), step(sla.h0()))
}

/// Central differences of the analytic gradient. `step` overrides both
/// per-parameter defaults.
pub fn hessian(h: &CostHistogram, sla: SlaPoint, step: Option<f64>) -> Result<HessianI> {
    let (step_a, step_h0) = match step {
        Some(s) if s.is_finite() && s > 0.0 => (s, s),
        Some(s) => return Err(Error::Parameter(format!("step must be > 0, got {s}"))),
        None => default_steps(sla),
    };
    let (ia_ap, ih_ap) = imbalance_gradient(h, shifted(sla, step_a, 0.0, step_a)?);
    let (ia_am, ih_am) = imbalance_gradient(h, shifted(sla, -step_a, 0.0, step_a)?);
    let (ia_hp, ih_hp) = imbalance_gradient(h, shifted(sla, 0.0, step_h0, step_h0)?);
    let (ia_hm, ih_hm) = imbalance_gradient(h, shifted(sla, 0.0, -step_h0, step_h0)?);
    Ok(HessianI {
        d2_aa: (ia_ap - ia_am) / (2.0 * step_a),
        d2_h0h0: (ih_hp - ih_hm) / (2.0 * step_h0),
        d2_ah0: (ih_ap - ih_am) / (2.0 * step_a),
        d2_h0a: (ia_hp - ia_hm) / (2.0 * step_h0),
        step_a,
        step_h0,
        step_limited: h.classes().iter().any(|c| (c.cost - sla.h0()).abs() < 2.0 * step_h0),
    })
}

/// One cost class's share of `∂I/∂θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub cost: f64,
    pub count: u64,
    pub share: f64,
    /// Entropy leverage `1 + ln p`.
    pub leverage: f64,
    /// Parameter sensitivity `g`.
    pub sensitivity: f64,
    /// `count · p · leverage · (g - E_p[g]) / (ln 2 · log2 M)`; the rows sum
    /// to `∂I/∂θ`.
    pub contribution: f64,
}

/// Per-class breakdown of `∂I/∂param`, largest absolute contribution first.
pub fn diagnose(h: &CostHistogram, sla: SlaPoint, param: Param) -> Vec<DiagnosticRow> {
    let m = model(h, sla);
    let mean_g = expected_sensitivity(&m, sla, param);
    let mut rows: Vec<DiagnosticRow> = m
        .terms
        .iter()
        .map(|t| {
            let g = sensitivity(t, sla, param);
            let leverage = 1.0 + t.ln_p;
            let contribution = if t.p > 0.0 { t.count * t.p * leverage * (g - mean_g) / m.ln_pairs } else { 0.0 };
            DiagnosticRow { cost: t.cost, count: t.count as u64, share: t.p, leverage, sensitivity: g, contribution }
        })
        .collect();
    rows.sort_by(|x, y| y.contribution.abs().total_cmp(&x.contribution.abs()).then(x.cost.total_cmp(&y.cost)));
    rows
}
