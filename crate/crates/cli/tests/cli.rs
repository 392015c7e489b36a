use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qoe-landscape"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen(dir: &TempDir, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.path().join(name);
    let mut full = vec!["gen"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", s(&path)]);
    assert!(run(&full).status.success());
    path
}

fn classes(doc: &Value) -> Vec<(f64, u64)> {
    doc["result"]["classes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| (c["cost"].as_f64().unwrap(), c["count"].as_u64().unwrap()))
        .collect()
}

#[test]
fn gen_then_hist_gives_star_histogram() {
    let dir = TempDir::new().unwrap();
    let star = gen(&dir, "s.edges", &["--type", "star", "--n", "50"]);
    let doc = ok_json(&["hist", "--in", s(&star)]);
    assert_eq!(classes(&doc), vec![(1.0, 98), (2.0, 2352)]);
    assert_eq!(doc["result"]["moments"]["variance"], 0.0384);
    assert!(doc["tool_version"].is_string());
    assert_eq!(doc["config"]["input"], s(&star));
}

#[test]
fn eval_reports_imbalance_and_limit() {
    let dir = TempDir::new().unwrap();
    let star = gen(&dir, "s.edges", &["--type", "star", "--n", "50"]);
    let doc = ok_json(&["eval", "--in", s(&star), "--a", "10", "--h0", "1.5"]);
    let i = doc["result"]["imbalance"].as_f64().unwrap();
    assert!((i - 0.304078323).abs() < 1e-9);
    let limit = doc["result"]["large_a_limit"].as_f64().unwrap();
    assert!((limit - 0.41247).abs() < 1e-4);
    assert_eq!(doc["config"]["a"], 10.0);
}

#[test]
fn generated_files_round_trip() {
    let dir = TempDir::new().unwrap();
    for (name, args) in [
        ("ba.edges", vec!["--type", "ba", "--n", "80", "--m", "2", "--seed", "4"]),
        ("ws.edges", vec!["--type", "ws", "--n", "60", "--k", "4", "--beta", "0.3", "--seed", "9"]),
        ("grid.edges", vec!["--type", "grid", "--rows", "7", "--cols", "7"]),
    ] {
        let a = gen(&dir, name, &args);
        let again = gen(&dir, &format!("again-{name}"), &args);
        assert_eq!(fs::read(&a).unwrap(), fs::read(&again).unwrap());
        let h = ok_json(&["hist", "--in", s(&a)]);
        let total: u64 = classes(&h).iter().map(|c| c.1).sum();
        let n = h["result"]["nodes"].as_u64().unwrap();
        assert_eq!(total, n * (n - 1));
    }
}

#[test]
fn disconnected_input_uses_largest_component() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("split.edges");
    fs::write(&path, "0 1\n1 2\n2 3\n10 11\n").unwrap();
    let csv = dir.path().join("grid.csv");
    let out = run(&["scan", "--in", s(&path), "--out", s(&csv), "--a-steps", "4", "--h0-steps", "5"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("using largest component (N=4)"));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("a,h0,I,s_bar,dI_da,dI_dh0,ds_da,ds_dh0,d2I_aa,d2I_h0h0,d2I_ah0\n"));
    assert_eq!(text.lines().count(), 1 + 20);
}

#[test]
fn region_from_csv_matches_direct_scan() {
    let dir = TempDir::new().unwrap();
    let g = gen(&dir, "g.edges", &["--type", "grid", "--rows", "5", "--cols", "5"]);
    let csv = dir.path().join("grid.csv");
    let window = ["--a-steps", "16", "--h0-steps", "40"];
    let mut args = vec!["scan", "--in", s(&g), "--out", s(&csv)];
    args.extend_from_slice(&window);
    ok_json(&args);
    let from_csv = ok_json(&["region", "--grid", s(&csv), "--i-max", "0.1", "--s-min", "0.8"]);
    let mut direct = vec!["region", "--in", s(&g), "--i-max", "0.1", "--s-min", "0.8"];
    direct.extend_from_slice(&window);
    let direct = ok_json(&direct);
    for key in ["aor_percent", "mcr", "boundary_cell_count", "i_max", "s_min"] {
        assert_eq!(from_csv["result"][key], direct["result"][key], "{key}");
    }
    assert!(from_csv["result"]["aor_percent"].as_f64().unwrap() > 0.0);
    assert!(from_csv["result"]["window"]["a_axis"].is_object());
}

#[test]
fn region_flags_are_required() {
    let dir = TempDir::new().unwrap();
    let g = gen(&dir, "g.edges", &["--type", "path", "--n", "5"]);
    assert_eq!(run(&["region", "--in", s(&g), "--i-max", "0.1"]).status.code(), Some(2));
}

#[test]
fn heatmaps_and_sidecars() {
    let dir = TempDir::new().unwrap();
    let k = gen(&dir, "k.edges", &["--type", "complete", "--n", "50"]);
    let maps = dir.path().join("maps");
    let csv = dir.path().join("k.csv");
    ok_json(&["scan", "--in", s(&k), "--out", s(&csv), "--a-steps", "6", "--h0-steps", "9", "--heatmaps", s(&maps)]);
    let image = fs::read(maps.join("I.pgm")).unwrap();
    assert!(image.starts_with(b"P5\n6 9\n255\n"));
    assert!(image[image.len() - 54..].iter().all(|&b| b == 128));
    let side: Value = serde_json::from_str(&fs::read_to_string(maps.join("I.pgm.json")).unwrap()).unwrap();
    assert_eq!(side["heatmap"]["constant"], true);
    assert_eq!((side["heatmap"]["min"].as_f64(), side["heatmap"]["max"].as_f64()), (Some(0.0), Some(0.0)));
    assert!(side["heatmap"]["window"]["h0_axis"].is_object());
    assert!(maps.join("d2I_h0h0.pgm").exists());
}

#[test]
fn validate_exit_codes() {
    let dir = TempDir::new().unwrap();
    let star = gen(&dir, "s.edges", &["--type", "star", "--n", "50"]);
    let grid = gen(&dir, "g.edges", &["--type", "grid", "--rows", "7", "--cols", "7"]);
    assert_eq!(run(&["validate", "--in", s(&star), "--mode", "small-a"]).status.code(), Some(0));
    assert_eq!(run(&["validate", "--in", s(&grid), "--mode", "large-a"]).status.code(), Some(0));
    assert_eq!(run(&["validate", "--in", s(&grid), "--mode", "gradient"]).status.code(), Some(0));
    assert_eq!(run(&["validate", "--mode", "axioms"]).status.code(), Some(0));
    let fail = run(&["validate", "--in", s(&star), "--mode", "large-a"]);
    assert_eq!(fail.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&fail.stdout).unwrap();
    assert_eq!(report["result"]["passed"], false);
    assert_eq!(run(&["validate", "--mode", "small-a"]).status.code(), Some(2));
}

#[test]
fn compare_table_and_json() {
    let dir = TempDir::new().unwrap();
    let star = gen(&dir, "star.edges", &["--type", "star", "--n", "50"]);
    let path = gen(&dir, "path.edges", &["--type", "path", "--n", "50"]);
    let json = dir.path().join("cmp.json");
    let out = run(&[
        "compare", "--in", s(&star), "--in", s(&path), "--i-max", "0.1", "--s-min", "0.5", "--a-steps", "8",
        "--h0-steps", "32", "--json", s(&json),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("star") && table.contains("0.0384") && table.contains("136"));
    let doc: Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let var: Vec<f64> = doc["result"]["rows"].as_array().unwrap().iter().map(|r| r["var_h"].as_f64().unwrap()).collect();
    assert_eq!(var, vec![0.0384, 136.0]);
    let single = run(&["compare", "--in", s(&star), "--i-max", "0.1", "--s-min", "0.5"]);
    assert_eq!(single.status.code(), Some(2));
}

#[test]
fn caida_ingest_reduces_graph() {
    let dir = TempDir::new().unwrap();
    let raw = dir.path().join("as-rel.txt");
    let mut text = String::from("# source: test\n");
    for u in 1..=6u32 {
        for v in (u + 1)..=6 {
            text.push_str(&format!("{u}|{v}|0\n"));
        }
    }
    text.push_str("6|7|-1\n7|8|-1\n20|21|0\r\n1|2|-1\n");
    fs::write(&raw, text).unwrap();
    let out = dir.path().join("core.edges");
    let doc = ok_json(&["ingest-caida", "--in", s(&raw), "--out", s(&out), "--lcc", "--k-core", "5"]);
    assert_eq!(doc["result"]["raw_nodes"], 10);
    assert_eq!(doc["result"]["duplicate_edges"], 1);
    assert_eq!(doc["result"]["lcc_nodes"], 8);
    assert_eq!(doc["result"]["nodes"], 6);
    let h = ok_json(&["hist", "--in", s(&raw), "--format", "caida"]);
    assert_eq!(h["result"]["nodes"], 8);
}

#[test]
fn grad_and_diagnose() {
    let dir = TempDir::new().unwrap();
    let star = gen(&dir, "s.edges", &["--type", "star", "--n", "50"]);
    let g = ok_json(&["grad", "--in", s(&star), "--a", "4", "--h0", "1.5"]);
    let di = g["result"]["gradient"]["di_dh0"].as_f64().unwrap();
    assert!(g["result"]["hessian"]["d2_h0h0"].is_number());
    assert!(g["result"]["gradient"]["angle_deg"].is_number());
    let d = ok_json(&["diagnose", "--in", s(&star), "--a", "4", "--h0", "1.5", "--param", "h0"]);
    assert_eq!(d["result"]["rows"].as_array().unwrap().len(), 2);
    assert!((d["result"]["contribution_sum"].as_f64().unwrap() - di).abs() <= 1e-8 * di.abs());
}

#[test]
fn usage_and_parse_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.edges");
    fs::write(&bad, "0 1\n1 2 7\n").unwrap();
    let out = run(&["hist", "--in", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert_eq!(run(&["hist", "--in", "/nonexistent/file"]).status.code(), Some(2));
    assert_eq!(run(&["eval", "--in", s(&bad), "--a", "-1", "--h0", "1"]).status.code(), Some(2));
    assert_eq!(run(&["gen", "--type", "ba", "--n", "10"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
}
