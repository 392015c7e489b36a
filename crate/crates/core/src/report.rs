//! Output plumbing: number formatting, JSON envelopes, PGM heatmaps,
//! multi-topology comparison and the validation suites behind `validate`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::asymptotics::{fit_small_a_slope, staircase, SmallAReport};
use crate::error::{param, Error, Result};
use crate::landscape::{operating_region, scan, GridSpec, Layer, ScanGrid};
use crate::qoe::axioms::{check_entropy_axioms, find_counterexamples, AxiomCheck, ClassicalIndex, Counterexample};
use crate::qoe::{imbalance, SlaPoint};
use crate::sensitivity::{diagnose, gradient, gradient_fd, Param};
use crate::topology::{moments, CostHistogram};
use crate::TOOL_VERSION;

/// C-style `%.{precision}g`.
pub fn fmt_g(value: f64, precision: usize) -> String {
    if value.is_nan() {
        return "nan".into();
    }
    if value.is_infinite() {
        return if value > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if value == 0.0 {
        return if value.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let p = precision.max(1);
    let sci = format!("{:.*e}", p - 1, value);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp) as usize;
        trim_fraction(&format!("{value:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds to `digits` significant digits.
pub fn round_sig(value: f64, digits: usize) -> f64 {
    if !value.is_finite() || value == 0.0 {
        return value;
    }
    format!("{:.*e}", digits.max(1) - 1, value).parse().unwrap_or(value)
}

/// Rounds every float in a JSON tree to 9 significant digits.
pub fn round_json(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap_or(0.0), 9);
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

/// Standard output document: tool version, command, effective configuration
/// and result, with floats rounded.
pub fn envelope(command: &str, config: Value, result: Value) -> Value {
    round_json(json!({
        "tool_version": TOOL_VERSION,
        "command": command,
        "config": config,
        "result": result,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaling {
    /// `[min, max]` onto `[0, 255]`.
    MinMax,
    /// `[-m, m]` onto `[0, 255]` with `m = max |v|`.
    AbsMax,
}

impl std::str::FromStr for Scaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minmax" => Ok(Scaling::MinMax),
            "absmax" => Ok(Scaling::AbsMax),
            other => Err(param(format!("unknown scaling {other:?}, expected minmax or absmax"))),
        }
    }
}

/// Everything needed to map pixel values back to data values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgmSidecar {
    /// Data value at pixel 0.
    pub min: f64,
    /// Data value at pixel 255.
    pub max: f64,
    pub scaling: Scaling,
    pub width: usize,
    pub height: usize,
    /// True when the layer is constant and rendered as mid-gray.
    pub constant: bool,
    pub window: Option<Value>,
}

/// Binary greyscale image of `rows` (top row first), maxval 255.
pub fn encode_pgm(rows: &[Vec<f64>], scaling: Scaling) -> Result<(Vec<u8>, PgmSidecar)> {
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if height == 0 || width == 0 {
        return Err(param("heatmap layer is empty"));
    }
    if rows.iter().any(|r| r.len() != width) {
        return Err(param("heatmap rows have different lengths"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(param("heatmap layer contains non-finite values"));
    }
    let values = rows.iter().flatten().copied();
    let (lo, hi) = match scaling {
        Scaling::MinMax => values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v))),
        Scaling::AbsMax => {
            let m = values.fold(0.0f64, |m, v| m.max(v.abs()));
            (-m, m)
        }
    };
    let constant = hi <= lo || rows.iter().flatten().all(|&v| v == rows[0][0]);
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    for &v in rows.iter().flatten() {
        bytes.push(if constant { 128 } else { ((v - lo) / (hi - lo) * 255.0).floor().clamp(0.0, 255.0) as u8 });
    }
    let (min, max) = if constant { (rows[0][0], rows[0][0]) } else { (lo, hi) };
    Ok((bytes, PgmSidecar { min, max, scaling, width, height, constant, window: None }))
}

/// Arranges a scan layer as image rows: `h0` descending top to bottom, `a`
/// ascending left to right.
pub fn layer_rows(g: &ScanGrid, layer: Layer) -> Vec<Vec<f64>> {
    let (na, nh) = g.shape();
    (0..nh).rev().map(|j| (0..na).map(|i| layer.of(g.cell(i, j))).collect()).collect()
}

/// Sidecar location for a heatmap: the image path with `.json` appended.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Writes the image and its JSON sidecar.
pub fn write_pgm_heatmap(rows: &[Vec<f64>], path: &Path, scaling: Scaling, window: Option<Value>) -> Result<PgmSidecar> {
    let (bytes, mut sidecar) = encode_pgm(rows, scaling)?;
    sidecar.window = window;
    fs::write(path, bytes)?;
    let doc = round_json(json!({ "tool_version": TOOL_VERSION, "heatmap": sidecar }));
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&doc).expect("serializable") + "\n")?;
    Ok(sidecar)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub n: usize,
    pub var_h: f64,
    pub aor_percent: f64,
    pub mcr: Option<f64>,
}

/// A named histogram entering a comparison.
#[derive(Debug, Clone)]
pub struct NamedHistogram {
    pub name: String,
    pub nodes: usize,
    pub histogram: CostHistogram,
}

/// Window shared by every entry: the default window for the largest cost
/// seen.
pub fn shared_window(items: &[NamedHistogram]) -> Option<GridSpec> {
    items.iter().map(|it| &it.histogram).max_by(|x, y| x.max_cost().total_cmp(&y.max_cost())).map(GridSpec::default_for)
}

/// Scans every topology on the same window and constraints.
pub fn compare(items: &[NamedHistogram], i_max: f64, s_min: f64, spec: &GridSpec) -> Result<Vec<ComparisonRow>> {
    if items.len() < 2 {
        return Err(param(format!("compare needs at least 2 topologies, got {}", items.len())));
    }
    items
        .iter()
        .map(|it| {
            let run = || -> Result<ComparisonRow> {
                let grid = scan(&it.histogram, spec)?;
                let region = operating_region(&grid, i_max, s_min)?;
                Ok(ComparisonRow {
                    name: it.name.clone(),
                    n: it.nodes,
                    var_h: moments(&it.histogram).variance,
                    aor_percent: region.aor_percent,
                    mcr: region.mcr,
                })
            };
            run().map_err(|e| e.in_topology(&it.name))
        })
        .collect()
}

/// Aligned plain-text rendering of comparison rows.
pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let header = ["name", "N", "var_h", "aor_percent", "mcr"];
    let body: Vec<[String; 5]> = rows
        .iter()
        .map(|r| {
            [
                r.name.clone(),
                r.n.to_string(),
                fmt_g(r.var_h, 6),
                fmt_g(r.aor_percent, 6),
                r.mcr.map_or_else(|| "-".to_string(), |m| fmt_g(m, 6)),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut push = |cells: [&str; 5]| {
        let line: Vec<String> = cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(k, (c, w))| if k == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    };
    push(header);
    for row in &body {
        push([&row[0], &row[1], &row[2], &row[3], &row[4]]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValidationMode {
    SmallA,
    LargeA,
    Gradient,
    Axioms,
}

impl std::str::FromStr for ValidationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small-a" => Ok(ValidationMode::SmallA),
            "large-a" => Ok(ValidationMode::LargeA),
            "gradient" => Ok(ValidationMode::Gradient),
            "axioms" => Ok(ValidationMode::Axioms),
            other => Err(param(format!("unknown validation mode {other:?}"))),
        }
    }
}

/// One numeric check with its threshold and verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub threshold: String,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: Option<f64>, threshold: impl Into<String>, passed: bool) -> Self {
        Check { name: name.into(), value, threshold: threshold.into(), passed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub mode: ValidationMode,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub details: Value,
}

impl ValidationReport {
    fn new(mode: ValidationMode, checks: Vec<Check>, details: Value) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        ValidationReport { mode, checks, passed, details }
    }
}

/// Settings for [`validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub seed: u64,
    pub samples: usize,
    pub a_large: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig { seed: 1, samples: 200, a_large: 10.0 }
    }
}

pub fn validate(h: &CostHistogram, mode: ValidationMode, cfg: &ValidationConfig) -> Result<ValidationReport> {
    match mode {
        ValidationMode::SmallA => validate_small_a(h),
        ValidationMode::LargeA => validate_large_a(h, cfg.a_large),
        ValidationMode::Gradient => validate_gradient(h, cfg.samples, cfg.seed),
        ValidationMode::Axioms => Ok(validate_axioms(cfg.samples.max(1000), cfg.seed)),
    }
}

/// Fits at the mean cost and half a unit above it.
pub fn validate_small_a(h: &CostHistogram) -> Result<ValidationReport> {
    let mean = moments(h).mean;
    let samples = crate::asymptotics::default_a_samples();
    let fits: Vec<SmallAReport> =
        [mean, mean + 0.5].iter().map(|&h0| fit_small_a_slope(h, h0, &samples)).collect::<Result<_>>()?;
    let mut checks = Vec::new();
    for fit in &fits {
        let label = format!("ratio at h0 = {}", fmt_g(fit.h0_used, 6));
        checks.push(match fit.ratio {
            Some(r) => Check::new(label, Some(r), "[0.98, 1.02]", (0.98..=1.02).contains(&r)),
            None => Check::new(label, None, "k_fit = 0 when Var(h) = 0", fit.k_fit == 0.0),
        });
    }
    let (k0, k1) = (fits[0].k_fit, fits[1].k_fit);
    let spread = if k0 == k1 { 0.0 } else { (k0 - k1).abs() / k0.abs().max(k1.abs()) };
    checks.push(Check::new("k_fit agreement across h0", Some(spread), "< 0.02", spread < 0.02));
    Ok(ValidationReport::new(ValidationMode::SmallA, checks, json!({ "fits": fits })))
}

/// Deviation from the staircase at plateau midpoints at least 0.5 from any
/// cost, at `a` and `2a`.
pub fn validate_large_a(h: &CostHistogram, a: f64) -> Result<ValidationReport> {
    let profile = staircase(h);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    let mut converging = true;
    for p in &profile.plateaus {
        let (Some(lo), Some(hi)) = (p.lower, p.upper) else { continue };
        if hi - lo < 1.0 {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let d1 = (imbalance(h, SlaPoint::new(a, mid)?) - p.limit).abs();
        let d2 = (imbalance(h, SlaPoint::new(2.0 * a, mid)?) - p.limit).abs();
        worst = worst.max(d1);
        converging &= d2 < d1 || d1 == 0.0;
        rows.push(json!({ "h0": mid, "limit": p.limit, "deviation": d1, "deviation_double_a": d2 }));
    }
    let checks = vec![
        Check::new("midpoints examined", Some(rows.len() as f64), ">= 1", !rows.is_empty()),
        Check::new(format!("max deviation at a = {}", fmt_g(a, 6)), Some(worst), "< 0.02", !rows.is_empty() && worst < 0.02),
        Check::new(format!("deviation shrinks at a = {}", fmt_g(2.0 * a, 6)), None, "strictly smaller at every midpoint", converging),
    ];
    Ok(ValidationReport::new(ValidationMode::LargeA, checks, json!({ "a": a, "midpoints": rows, "staircase": profile })))
}

fn relative_error(x: f64, y: f64) -> f64 {
    let diff = (x - y).abs();
    if diff <= 1e-10 { 0.0 } else { diff / x.abs().max(y.abs()) }
}

/// Analytic gradient against central differences (step 1e-5) at random SLA
/// points with `a ∈ [0.2, 8]` and `h0 ∈ [0.5, max cost]`; also checks that
/// diagnostic rows sum to the gradient.
pub fn validate_gradient(h: &CostHistogram, samples: usize, seed: u64) -> Result<ValidationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h0_hi = h.max_cost().max(0.5 + 1e-9);
    let mut worst_rel: f64 = 0.0;
    let mut worst_at = Value::Null;
    let mut worst_sum: f64 = 0.0;
    for _ in 0..samples {
        let sla = SlaPoint::new(rng.gen_range(0.2..=8.0), rng.gen_range(0.5..=h0_hi))?;
        let an = gradient(h, sla);
        let fd = gradient_fd(h, sla, 1e-5)?;
        let rel = [
            relative_error(an.di_da, fd.di_da),
            relative_error(an.di_dh0, fd.di_dh0),
            relative_error(an.ds_da, fd.ds_da),
            relative_error(an.ds_dh0, fd.ds_dh0),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        if rel > worst_rel {
            worst_rel = rel;
            worst_at = json!({ "a": sla.a(), "h0": sla.h0(), "analytic": an, "fd": fd });
        }
        for param in [Param::A, Param::H0] {
            let total: f64 = diagnose(h, sla, param).iter().map(|r| r.contribution).sum();
            worst_sum = worst_sum.max((total - an.imbalance(param)).abs());
        }
    }
    let checks = vec![
        Check::new("max relative error", Some(worst_rel), "<= 1e-05", worst_rel <= 1e-5),
        Check::new("diagnostic sum error", Some(worst_sum), "<= 1e-10", worst_sum <= 1e-10),
    ];
    Ok(ValidationReport::new(
        ValidationMode::Gradient,
        checks,
        json!({ "samples": samples, "seed": seed, "worst": worst_at }),
    ))
}

/// Entropy axioms A1–A5 and the counterexample search for the classical
/// indices.
pub fn validate_axioms(samples: usize, seed: u64) -> ValidationReport {
    let axioms: Vec<AxiomCheck> = check_entropy_axioms(samples, seed);
    let found: Vec<Counterexample> = find_counterexamples(seed, 10_000);
    let mut checks: Vec<Check> = axioms
        .iter()
        .map(|c| Check::new(c.axiom.clone(), Some(c.worst), format!("<= {}", fmt_g(c.tolerance, 3)), c.passed))
        .collect();
    for (index, axiom) in [
        (ClassicalIndex::Gini, "A5"),
        (ClassicalIndex::Jfi, "A5"),
        (ClassicalIndex::Cv, "A5"),
        (ClassicalIndex::Variance, "A2"),
    ] {
        let hit = found.iter().find(|c| c.index() == index);
        checks.push(Check::new(
            format!("{index:?} violates {axiom}").to_lowercase(),
            hit.map(Counterexample::violation),
            "counterexample found",
            hit.is_some_and(Counterexample::holds),
        ));
    }
    ValidationReport::new(ValidationMode::Axioms, checks, json!({ "axioms": axioms, "counterexamples": found }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{generate, hop_histogram, TopologySpec};

    fn hist(spec: TopologySpec) -> CostHistogram {
        hop_histogram(&generate(&spec).unwrap()).unwrap()
    }

    #[test]
    fn matches_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (1e-5, "1e-05"),
            (0.0001234, "0.0001234"),
            (9.9999999999, "10"),
            (1.5e300, "1.5e+300"),
            (-3.2e-12, "-3.2e-12"),
            (0.30407832256576, "0.304078323"),
            (100.0, "100"),
        ];
        for (v, want) in cases {
            assert_eq!(fmt_g(v, 9), want, "{v}");
        }
        assert_eq!(fmt_g(f64::NAN, 9), "nan");
        assert_eq!(fmt_g(f64::NEG_INFINITY, 9), "-inf");
    }

    #[test]
    fn rounding() {
        assert_eq!(round_sig(0.123456789123, 9), 0.123456789);
        assert_eq!(round_sig(0.0, 9), 0.0);
        assert_eq!(round_sig(98765.4321, 3), 98800.0);
    }

    #[test]
    fn pgm_minmax_pixels() {
        let (bytes, side) = encode_pgm(&[vec![0.0, 1.0], vec![0.5, 0.5]], Scaling::MinMax).unwrap();
        assert_eq!(&bytes[..11], b"P5\n2 2\n255\n");
        assert_eq!(&bytes[11..], &[0, 255, 127, 127]);
        assert!(!side.constant);
        assert_eq!((side.min, side.max), (0.0, 1.0));
    }

    #[test]
    fn pgm_absmax_and_constant() {
        let (bytes, side) = encode_pgm(&[vec![-2.0, 0.0, 2.0]], Scaling::AbsMax).unwrap();
        assert_eq!(&bytes[bytes.len() - 3..], &[0, 127, 255]);
        assert_eq!((side.min, side.max), (-2.0, 2.0));
        let (bytes, side) = encode_pgm(&vec![vec![0.0; 3]; 2], Scaling::MinMax).unwrap();
        assert!(bytes[bytes.len() - 6..].iter().all(|&b| b == 128));
        assert!(side.constant);
        assert_eq!((side.min, side.max), (0.0, 0.0));
        assert!(encode_pgm(&[], Scaling::MinMax).is_err());
        assert!(encode_pgm(&[vec![1.0], vec![]], Scaling::MinMax).is_err());
    }

    #[test]
    fn pgm_file_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("layer.pgm");
        write_pgm_heatmap(&[vec![1.0, 2.0]], &path, Scaling::MinMax, Some(json!({"a": [0.1, 1.0]}))).unwrap();
        assert_eq!(fs::read(&path).unwrap().len(), 11 + 2);
        let side: Value = serde_json::from_str(&fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
        assert_eq!(side["heatmap"]["scaling"], "minmax");
        assert_eq!(side["heatmap"]["max"], 2.0);
        assert!(side["tool_version"].is_string());
    }

    #[test]
    fn envelope_rounds_numbers() {
        let doc = envelope("eval", json!({"a": 0.1}), json!({"x": 1.0 / 3.0, "n": 5, "v": [2.0 / 3.0]}));
        assert_eq!(doc["result"]["x"], 0.333333333);
        assert_eq!(doc["result"]["v"][0], 0.666666667);
        assert_eq!(doc["result"]["n"], 5);
        assert_eq!(doc["tool_version"], TOOL_VERSION);
    }

    #[test]
    fn compare_needs_two() {
        let star = hist(TopologySpec::Star { n: 10 });
        let one = [NamedHistogram { name: "star".into(), nodes: 10, histogram: star }];
        assert!(matches!(compare(&one, 0.1, 0.5, &shared_window(&one).unwrap()), Err(Error::Parameter(_))));
    }

    #[test]
    fn compare_reports_variance() {
        let items = [
            NamedHistogram { name: "star".into(), nodes: 50, histogram: hist(TopologySpec::Star { n: 50 }) },
            NamedHistogram { name: "path".into(), nodes: 50, histogram: hist(TopologySpec::Path { n: 50 }) },
        ];
        let spec = GridSpec::new(
            crate::landscape::Axis::log(0.05, 20.0, 8),
            crate::landscape::Axis::linear(0.5, 49.5, 16),
        )
        .unwrap();
        let rows = compare(&items, 0.1, 0.5, &spec).unwrap();
        assert!((rows[0].var_h - 0.0384).abs() < 1e-12);
        assert!((rows[1].var_h - 136.0).abs() < 1e-9);
        let table = comparison_table(&rows);
        assert_eq!(table.lines().count(), 3);
        assert!(table.lines().next().unwrap().starts_with("name"));
    }

    #[test]
    fn validation_modes() {
        let star = hist(TopologySpec::Star { n: 50 });
        let grid = hist(TopologySpec::Grid { rows: 7, cols: 7 });
        assert!(validate_small_a(&star).unwrap().passed);
        assert!(validate_large_a(&grid, 10.0).unwrap().passed);
        assert!(!validate_large_a(&star, 10.0).unwrap().passed);
        assert!(validate_gradient(&grid, 50, 3).unwrap().passed);
        let complete = hist(TopologySpec::Complete { n: 8 });
        assert!(validate_small_a(&complete).unwrap().passed);
    }
}
