//! Dense scans of the `(a, h0)` plane and the maps derived from them:
//! ridges and stable belts, operating regions, curvature asymmetry.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::log_space;
use crate::error::{param, Error, Result};
use crate::qoe::{model, SlaPoint};
use crate::report::fmt_g;
use crate::sensitivity::hessian;
use crate::topology::CostHistogram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    pub spacing: Spacing,
}

impl Axis {
    pub fn linear(min: f64, max: f64, steps: usize) -> Self {
        Axis { min, max, steps, spacing: Spacing::Linear }
    }

    pub fn log(min: f64, max: f64, steps: usize) -> Self {
        Axis { min, max, steps, spacing: Spacing::Log }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min > 0.0 && self.min < self.max) {
            return Err(param(format!("{name} axis needs 0 < min < max, got [{}, {}]", self.min, self.max)));
        }
        if self.steps < 2 {
            return Err(param(format!("{name} axis needs at least 2 steps, got {}", self.steps)));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        match self.spacing {
            Spacing::Log => log_space(self.min, self.max, self.steps),
            Spacing::Linear => {
                let span = self.max - self.min;
                let last = self.steps - 1;
                (0..self.steps)
                    .map(|i| if i == last { self.max } else { self.min + span * i as f64 / last as f64 })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub a_axis: Axis,
    pub h0_axis: Axis,
}

impl GridSpec {
    pub fn new(a_axis: Axis, h0_axis: Axis) -> Result<Self> {
        let spec = GridSpec { a_axis, h0_axis };
        spec.validate()?;
        Ok(spec)
    }

    /// 64 log-spaced strictness values in `[0.05, 20]` by 256 thresholds in
    /// `[0.5, max cost + 0.5]`.
    pub fn default_for(h: &CostHistogram) -> Self {
        GridSpec { a_axis: Axis::log(0.05, 20.0, 64), h0_axis: Axis::linear(0.5, h.max_cost() + 0.5, 256) }
    }

    pub fn validate(&self) -> Result<()> {
        self.a_axis.validate("a")?;
        self.h0_axis.validate("h0")
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.a_axis.steps, self.h0_axis.steps)
    }
}

/// Everything computed at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Cell {
    pub imbalance: f64,
    pub s_bar: f64,
    pub di_da: f64,
    pub di_dh0: f64,
    pub ds_da: f64,
    pub ds_dh0: f64,
    pub d2i_aa: f64,
    pub d2i_h0h0: f64,
    pub d2i_ah0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layer {
    Imbalance,
    SBar,
    DiDa,
    DiDh0,
    DsDa,
    DsDh0,
    D2iAa,
    D2iH0h0,
    D2iAh0,
}

impl Layer {
    pub const ALL: [Layer; 9] = [
        Layer::Imbalance,
        Layer::SBar,
        Layer::DiDa,
        Layer::DiDh0,
        Layer::DsDa,
        Layer::DsDh0,
        Layer::D2iAa,
        Layer::D2iH0h0,
        Layer::D2iAh0,
    ];

    /// Column name in the grid CSV.
    pub fn name(self) -> &'static str {
        match self {
            Layer::Imbalance => "I",
            Layer::SBar => "s_bar",
            Layer::DiDa => "dI_da",
            Layer::DiDh0 => "dI_dh0",
            Layer::DsDa => "ds_da",
            Layer::DsDh0 => "ds_dh0",
            Layer::D2iAa => "d2I_aa",
            Layer::D2iH0h0 => "d2I_h0h0",
            Layer::D2iAh0 => "d2I_ah0",
        }
    }

    pub fn from_name(name: &str) -> Option<Layer> {
        Layer::ALL.into_iter().find(|l| l.name() == name)
    }

    pub fn of(self, c: &Cell) -> f64 {
        match self {
            Layer::Imbalance => c.imbalance,
            Layer::SBar => c.s_bar,
            Layer::DiDa => c.di_da,
            Layer::DiDh0 => c.di_dh0,
            Layer::DsDa => c.ds_da,
            Layer::DsDh0 => c.ds_dh0,
            Layer::D2iAa => c.d2i_aa,
            Layer::D2iH0h0 => c.d2i_h0h0,
            Layer::D2iAh0 => c.d2i_ah0,
        }
    }

    fn set(self, c: &mut Cell, v: f64) {
        let slot = match self {
            Layer::Imbalance => &mut c.imbalance,
            Layer::SBar => &mut c.s_bar,
            Layer::DiDa => &mut c.di_da,
            Layer::DiDh0 => &mut c.di_dh0,
            Layer::DsDa => &mut c.ds_da,
            Layer::DsDh0 => &mut c.ds_dh0,
            Layer::D2iAa => &mut c.d2i_aa,
            Layer::D2iH0h0 => &mut c.d2i_h0h0,
            Layer::D2iAh0 => &mut c.d2i_ah0,
        };
        *slot = v;
    }
}

/// Scan result. Cells are stored with `h0` varying fastest: index
/// `i_a * h0_steps + i_h0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    pub spec: GridSpec,
    pub a_values: Vec<f64>,
    pub h0_values: Vec<f64>,
    pub cells: Vec<Cell>,
}

impl ScanGrid {
    pub fn index(&self, i_a: usize, i_h0: usize) -> usize {
        i_a * self.h0_values.len() + i_h0
    }

    pub fn cell(&self, i_a: usize, i_h0: usize) -> &Cell {
        &self.cells[self.index(i_a, i_h0)]
    }

    pub fn layer(&self, layer: Layer) -> Vec<f64> {
        self.cells.iter().map(|c| layer.of(c)).collect()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.a_values.len(), self.h0_values.len())
    }

    /// `(i_a, i_h0)` for a flat index.
    pub fn position(&self, index: usize) -> (usize, usize) {
        (index / self.h0_values.len(), index % self.h0_values.len())
    }
}

fn evaluate_cell(h: &CostHistogram, sla: SlaPoint) -> Cell {
    let m = model(h, sla);
    let grad = crate::sensitivity::gradient(h, sla);
    let hess = hessian(h, sla, None).expect("default stencil stays in the domain");
    Cell {
        imbalance: m.imbalance(),
        s_bar: m.mean_satisfaction(),
        di_da: grad.di_da,
        di_dh0: grad.di_dh0,
        ds_da: grad.ds_da,
        ds_dh0: grad.ds_dh0,
        d2i_aa: hess.d2_aa,
        d2i_h0h0: hess.d2_h0h0,
        d2i_ah0: hess.d2_ah0,
    }
}

/// Evaluates value, gradient and Hessian layers at every grid point.
/// Cells are independent, so the result does not depend on the thread count.
pub fn scan(h: &CostHistogram, spec: &GridSpec) -> Result<ScanGrid> {
    spec.validate()?;
    let a_values = spec.a_axis.values();
    let h0_values = spec.h0_axis.values();
    let nh = h0_values.len();
    let cells = (0..a_values.len() * nh)
        .into_par_iter()
        .map(|k| evaluate_cell(h, SlaPoint::new(a_values[k / nh], h0_values[k % nh]).expect("validated axes")))
        .collect();
    Ok(ScanGrid { spec: *spec, a_values, h0_values, cells })
}

/// Linear-interpolation percentile (`q` in `[0, 100]`) of unsorted data.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeMap {
    pub ridge: Vec<bool>,
    pub belt: Vec<bool>,
    pub ridge_threshold: f64,
    pub belt_threshold: f64,
}

/// Ridge cells have `|d2I/dh0²|` above the `percentile`-th percentile; belt
/// cells lie below the `100 - percentile`-th.
pub fn detect_ridges(g: &ScanGrid, percentile_q: f64) -> Result<RidgeMap> {
    if !(50.0..100.0).contains(&percentile_q) {
        return Err(param(format!("percentile must lie in [50, 100), got {percentile_q}")));
    }
    let curvature: Vec<f64> = g.cells.iter().map(|c| c.d2i_h0h0.abs()).collect();
    if curvature.iter().all(|&v| v == 0.0) {
        return Ok(RidgeMap {
            ridge: vec![false; curvature.len()],
            belt: vec![true; curvature.len()],
            ridge_threshold: 0.0,
            belt_threshold: 0.0,
        });
    }
    let ridge_threshold = percentile(&curvature, percentile_q);
    let belt_threshold = percentile(&curvature, 100.0 - percentile_q);
    Ok(RidgeMap {
        ridge: curvature.iter().map(|&v| v > ridge_threshold).collect(),
        belt: curvature.iter().map(|&v| v < belt_threshold).collect(),
        ridge_threshold,
        belt_threshold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingRegion {
    pub mask: Vec<bool>,
    pub i_max: f64,
    pub s_min: f64,
    pub aor_percent: f64,
    /// `(i_a, i_h0)` of masked cells on the region edge.
    pub boundary_cells: Vec<(usize, usize)>,
    /// Largest `|d2I/dh0²|` over the boundary; `None` for an empty region.
    pub mcr: Option<f64>,
}

/// Cells with `I <= i_max` and `s̄ >= s_min`, their share of the grid and
/// the worst threshold curvature along the region edge.
pub fn operating_region(g: &ScanGrid, i_max: f64, s_min: f64) -> Result<OperatingRegion> {
    if !(0.0..=1.0).contains(&i_max) || !(0.0..=1.0).contains(&s_min) {
        return Err(param(format!("constraints must lie in [0, 1], got i_max {i_max}, s_min {s_min}")));
    }
    let mask: Vec<bool> = g.cells.iter().map(|c| c.imbalance <= i_max && c.s_bar >= s_min).collect();
    let (na, nh) = g.shape();
    let masked = |i: usize, j: usize| mask[i * nh + j];
    let mut boundary_cells = Vec::new();
    for i in 0..na {
        for j in 0..nh {
            if !masked(i, j) {
                continue;
            }
            let on_border = i == 0 || j == 0 || i + 1 == na || j + 1 == nh;
            let exposed = on_border || !masked(i - 1, j) || !masked(i + 1, j) || !masked(i, j - 1) || !masked(i, j + 1);
            if exposed {
                boundary_cells.push((i, j));
            }
        }
    }
    let mcr = boundary_cells.iter().map(|&(i, j)| g.cell(i, j).d2i_h0h0.abs()).reduce(f64::max);
    let count = mask.iter().filter(|&&m| m).count();
    Ok(OperatingRegion {
        aor_percent: 100.0 * count as f64 / mask.len() as f64,
        mask,
        i_max,
        s_min,
        boundary_cells,
        mcr,
    })
}

/// Per-cell `|d2I/dh0²| / max(|d2I/da²|, floor)`.
pub fn curvature_asymmetry(g: &ScanGrid, floor: f64) -> Result<Vec<f64>> {
    if !(floor.is_finite() && floor > 0.0) {
        return Err(param(format!("floor must be > 0, got {floor}")));
    }
    Ok(g.cells.iter().map(|c| c.d2i_h0h0.abs() / c.d2i_aa.abs().max(floor)).collect())
}

pub const CSV_HEADER: &str = "a,h0,I,s_bar,dI_da,dI_dh0,ds_da,ds_dh0,d2I_aa,d2I_h0h0,d2I_ah0";

/// Grid CSV, one row per cell with `h0` varying fastest, `%.9g` numbers.
pub fn write_csv<W: Write>(g: &ScanGrid, mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for (k, c) in g.cells.iter().enumerate() {
        let (i, j) = g.position(k);
        let mut line = format!("{},{}", fmt_g(g.a_values[i], 9), fmt_g(g.h0_values[j], 9));
        for layer in Layer::ALL {
            line.push(',');
            line.push_str(&fmt_g(layer.of(c), 9));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn infer_axis(values: &[f64]) -> Axis {
    let n = values.len();
    let (min, max) = (values[0], values[n - 1]);
    let linear_err = values
        .iter()
        .enumerate()
        .map(|(i, &v)| (v - (min + (max - min) * i as f64 / (n - 1) as f64)).abs() / max.abs())
        .fold(0.0, f64::max);
    let spacing = if linear_err < 1e-7 { Spacing::Linear } else { Spacing::Log };
    Axis { min, max, steps: n, spacing }
}

/// Reads a grid CSV written by [`write_csv`]. Axis spacing is inferred.
pub fn read_csv<R: BufRead>(input: R) -> Result<ScanGrid> {
    let mut lines = input.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line?,
        None => return Err(Error::Parse { line: 1, message: "empty grid file".into() }),
    };
    if header.trim_end() != CSV_HEADER {
        return Err(Error::Parse { line: 1, message: format!("unexpected header {header:?}") });
    }
    let mut rows: Vec<(f64, f64, Cell)> = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse { line: idx + 1, message: format!("bad number: {e}") })?;
        if fields.len() != 11 {
            return Err(Error::Parse { line: idx + 1, message: format!("expected 11 fields, got {}", fields.len()) });
        }
        let mut cell = Cell::default();
        for (layer, &v) in Layer::ALL.iter().zip(&fields[2..]) {
            layer.set(&mut cell, v);
        }
        rows.push((fields[0], fields[1], cell));
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 2, message: "no grid rows".into() });
    }
    let first_a = rows[0].0;
    let nh = rows.iter().take_while(|r| r.0 == first_a).count();
    if rows.len() % nh != 0 {
        return Err(Error::Parse { line: rows.len() + 1, message: "ragged grid".into() });
    }
    let h0_values: Vec<f64> = rows[..nh].iter().map(|r| r.1).collect();
    let a_values: Vec<f64> = rows.iter().step_by(nh).map(|r| r.0).collect();
    for (k, r) in rows.iter().enumerate() {
        if r.0 != a_values[k / nh] || r.1 != h0_values[k % nh] {
            return Err(Error::Parse { line: k + 2, message: "rows are not in grid order".into() });
        }
    }
    if a_values.len() < 2 || nh < 2 {
        return Err(Error::Parse { line: 2, message: "grid needs at least 2 values per axis".into() });
    }
    let spec = GridSpec { a_axis: infer_axis(&a_values), h0_axis: infer_axis(&h0_values) };
    Ok(ScanGrid { spec, a_values, h0_values, cells: rows.into_iter().map(|r| r.2).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{generate, hop_histogram, TopologySpec};

    fn hist(spec: TopologySpec) -> CostHistogram {
        hop_histogram(&generate(&spec).unwrap()).unwrap()
    }

    fn gradient_at(h: &CostHistogram, g: &ScanGrid, index: usize) -> (f64, f64) {
        let (i, j) = g.position(index);
        crate::sensitivity::imbalance_gradient(h, SlaPoint::new(g.a_values[i], g.h0_values[j]).unwrap())
    }

    fn small_spec(h: &CostHistogram) -> GridSpec {
        GridSpec::new(Axis::log(0.1, 10.0, 24), Axis::linear(0.5, h.max_cost() + 0.5, 60)).unwrap()
    }

    #[test]
    fn axis_values() {
        assert_eq!(Axis::linear(1.0, 2.0, 3).values(), vec![1.0, 1.5, 2.0]);
        let log = Axis::log(0.1, 10.0, 3).values();
        assert_eq!((log[0], log[2]), (0.1, 10.0));
        assert!((log[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_specs() {
        assert!(GridSpec::new(Axis::log(0.0, 1.0, 4), Axis::linear(0.5, 2.0, 4)).is_err());
        assert!(GridSpec::new(Axis::log(1.0, 1.0, 4), Axis::linear(0.5, 2.0, 4)).is_err());
        assert!(GridSpec::new(Axis::log(0.1, 1.0, 1), Axis::linear(0.5, 2.0, 4)).is_err());
        assert!(GridSpec::new(Axis::log(0.1, 1.0, 4), Axis::linear(-0.5, 2.0, 4)).is_err());
    }

    #[test]
    fn complete_graph_scan_is_flat() {
        let h = hist(TopologySpec::Complete { n: 50 });
        let g = scan(&h, &small_spec(&h)).unwrap();
        for c in &g.cells {
            assert_eq!([c.imbalance, c.di_da, c.di_dh0, c.d2i_aa, c.d2i_h0h0, c.d2i_ah0], [0.0; 6]);
        }
        let r = detect_ridges(&g, 90.0).unwrap();
        assert!(r.ridge.iter().all(|&x| !x) && r.belt.iter().all(|&x| x));
        assert!(curvature_asymmetry(&g, 1e-12).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn complete_graph_region_is_upper_threshold_band() {
        let h = hist(TopologySpec::Complete { n: 50 });
        let g = scan(&h, &small_spec(&h)).unwrap();
        let r = operating_region(&g, 0.1, 0.5).unwrap();
        for (k, &m) in r.mask.iter().enumerate() {
            assert_eq!(m, g.h0_values[g.position(k).1] >= 1.0);
        }
        let above = g.h0_values.iter().filter(|&&h0| h0 >= 1.0).count();
        assert!((r.aor_percent - 100.0 * above as f64 / g.h0_values.len() as f64).abs() < 1e-12);
        assert_eq!(r.mcr, Some(0.0));
    }

    #[test]
    fn star_ridge_sits_between_costs() {
        let h = hist(TopologySpec::Star { n: 50 });
        let g = scan(&h, &small_spec(&h)).unwrap();
        let r = detect_ridges(&g, 95.0).unwrap();
        let ridge_h0: Vec<f64> =
            r.ridge.iter().enumerate().filter(|(_, &m)| m).map(|(k, _)| g.h0_values[g.position(k).1]).collect();
        assert!(!ridge_h0.is_empty());
        let inside = ridge_h0.iter().filter(|&&h0| h0 > 1.0 && h0 < 2.0).count();
        assert!(inside as f64 / ridge_h0.len() as f64 > 0.9, "{inside}/{}", ridge_h0.len());
    }

    #[test]
    fn region_invariants() {
        let h = hist(TopologySpec::Grid { rows: 7, cols: 7 });
        let g = scan(&h, &small_spec(&h)).unwrap();
        let r = operating_region(&g, 0.1, 0.8).unwrap();
        assert!(r.aor_percent > 0.0);
        for (k, &m) in r.mask.iter().enumerate() {
            if m {
                assert!(g.cells[k].imbalance <= 0.1 && g.cells[k].s_bar >= 0.8);
            }
        }
        let mcr = r.mcr.unwrap();
        assert!(r.boundary_cells.iter().any(|&(i, j)| g.cell(i, j).d2i_h0h0.abs() == mcr));
        assert!(r.boundary_cells.iter().all(|&(i, j)| r.mask[g.index(i, j)]));
        let looser = operating_region(&g, 0.2, 0.7).unwrap();
        assert!(looser.aor_percent >= r.aor_percent);
        let none = operating_region(&g, 0.0, 0.5).unwrap();
        assert_eq!((none.aor_percent, none.mcr), (0.0, None));
        assert!(operating_region(&g, 1.5, 0.5).is_err());
    }

    #[test]
    fn two_class_asymmetry_is_finite() {
        let h = CostHistogram::new([(1.0, 1), (2.0, 1)]).unwrap();
        let spec = GridSpec::new(Axis::log(0.5, 4.0, 5), Axis::linear(1.0, 2.0, 3)).unwrap();
        let g = scan(&h, &spec).unwrap();
        assert!(curvature_asymmetry(&g, 1e-12).unwrap().iter().all(|x| x.is_finite()));
        assert!(curvature_asymmetry(&g, 0.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let h = hist(TopologySpec::Star { n: 20 });
        let g = scan(&h, &GridSpec::new(Axis::log(0.1, 10.0, 5), Axis::linear(0.5, 2.5, 7)).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_csv(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert_eq!(text.lines().count(), 1 + 35);
        assert!(!text.contains('\r'));
        let back = read_csv(&buf[..]).unwrap();
        assert_eq!(back.shape(), g.shape());
        assert_eq!(back.spec.a_axis.spacing, Spacing::Log);
        assert_eq!(back.spec.h0_axis.spacing, Spacing::Linear);
        let (gi, bi) = (g.layer(Layer::Imbalance), back.layer(Layer::Imbalance));
        for (x, y) in gi.iter().zip(&bi) {
            assert!((x - y).abs() <= 1e-8 * x.abs().max(1e-300));
        }
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn stored_gradient_matches_recomputation() {
        let h = hist(TopologySpec::Path { n: 10 });
        let g = scan(&h, &small_spec(&h)).unwrap();
        for k in [0, 17, 400, g.cells.len() - 1] {
            assert_eq!(gradient_at(&h, &g, k), (g.cells[k].di_da, g.cells[k].di_dh0));
        }
    }

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&[3.0, 1.0, 2.0, 4.0], 50.0), 2.5);
        assert_eq!(percentile(&[1.0, 2.0], 100.0), 2.0);
    }
}
