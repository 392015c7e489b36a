use crate::error::{Error, Result};
use crate::qoe::SlaPoint;
use crate::topology::CostHistogram;

/// Maps costs to `scale * cost + shift` and adjusts the SLA so the sigmoid
/// exponent `a (h - h0)` is unchanged: `h0 -> scale * h0 + shift`,
/// `a -> a / scale`.
pub fn affine_transform(h: &CostHistogram, sla: SlaPoint, shift: f64, scale: f64) -> Result<(CostHistogram, SlaPoint)> {
    if !(scale.is_finite() && scale > 0.0) || !shift.is_finite() {
        return Err(Error::Domain(format!("need finite shift and scale > 0, got shift {shift}, scale {scale}")));
    }
    let map = |x: f64| scale * x + shift;
    if map(h.min_cost()) <= 0.0 {
        return Err(Error::Domain(format!("transformed cost {} is not positive", map(h.min_cost()))));
    }
    let h0 = map(sla.h0());
    if h0 <= 0.0 {
        return Err(Error::Domain(format!("transformed threshold {h0} is not positive")));
    }
    let histogram = h.map_costs(map)?;
    let sla = SlaPoint::new(sla.a() / scale, h0).map_err(|e| Error::Domain(e.to_string()))?;
    Ok((histogram, sla))
}
