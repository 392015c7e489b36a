//! Rewrites `tests/fixtures/counterexamples.json` from the seeded search.

use std::path::PathBuf;

use qoe_landscape::qoe::axioms::find_counterexamples;

fn main() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/counterexamples.json");
    let found = find_counterexamples(1, 10_000);
    std::fs::write(&path, serde_json::to_string_pretty(&found).expect("serializable") + "\n").expect("write fixture");
    println!("wrote {} counterexamples to {}", found.len(), path.display());
}
