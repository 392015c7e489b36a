//! Randomized checks of the fairness axioms and counterexample search for the
//! classical indices.
//!
//! Axioms, stated for an imbalance function `F` over share vectors:
//!
//! * A1 anonymity: `F` is invariant under permutations.
//! * A2 scale invariance: shares built from scores `s` and `λs` score alike.
//! * A3 calibration: uniform is 0, one-hot is 1.
//! * A4 transfer: moving mass from a richer to a poorer entry without
//!   reversing their order never increases `F`.
//! * A5 decomposability: `F(p) = F(between) + Σ_g q_g F(p | g)`, where
//!   `between` replaces every share by its group mean and `p | g` is the
//!   renormalized group.
//!
//! For the entropy metric A5 is checked on the gap `log2 n - H(p)` through
//! [`decompose`]. The classical indices are put through the same
//! decomposition; Jain's index enters as `1 - JFI` so that every index is an
//! inequality measure with 0 at the uniform vector.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{decompose, imbalance_of_shares, reference_indices, ShareVector};

/// Outcome of one axiom over many random vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomCheck {
    pub axiom: String,
    pub samples: usize,
    /// Largest observed violation (0 when none).
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Classical index evaluated by the counterexample search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassicalIndex {
    Gini,
    Jfi,
    Cv,
    Variance,
}

impl ClassicalIndex {
    pub const ALL: [ClassicalIndex; 4] =
        [ClassicalIndex::Gini, ClassicalIndex::Jfi, ClassicalIndex::Cv, ClassicalIndex::Variance];

    /// Inequality form: 0 at the uniform vector.
    pub fn inequality(self, values: &[f64]) -> f64 {
        let r = reference_indices(values);
        match self {
            ClassicalIndex::Gini => r.gini,
            ClassicalIndex::Jfi => 1.0 - r.jfi,
            ClassicalIndex::Cv => r.cv,
            ClassicalIndex::Variance => r.variance,
        }
    }
}

/// One axiom violation by a classical index, stored as a regression fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axiom")]
pub enum Counterexample {
    /// The decomposition identity fails by `|total - reconstruction|`.
    A5 {
        index: ClassicalIndex,
        shares: Vec<f64>,
        groups: Vec<Vec<usize>>,
        total: f64,
        reconstruction: f64,
    },
    /// Raw scores and their `scale`-multiple give different values.
    A2 {
        index: ClassicalIndex,
        scores: Vec<f64>,
        scale: f64,
        original: f64,
        scaled: f64,
    },
}

/// Violations smaller than this are treated as rounding noise.
pub const VIOLATION_THRESHOLD: f64 = 1e-6;

impl Counterexample {
    pub fn index(&self) -> ClassicalIndex {
        match self {
            Counterexample::A5 { index, .. } | Counterexample::A2 { index, .. } => *index,
        }
    }

    /// Recomputes the violation from the stored inputs.
    pub fn violation(&self) -> f64 {
        match self {
            Counterexample::A5 { index, shares, groups, .. } => {
                let (total, reconstruction) = analogous_decomposition(*index, shares, groups);
                (total - reconstruction).abs()
            }
            Counterexample::A2 { index, scores, scale, .. } => {
                let scaled: Vec<f64> = scores.iter().map(|s| s * scale).collect();
                (index.inequality(scores) - index.inequality(&scaled)).abs()
            }
        }
    }

    pub fn holds(&self) -> bool {
        self.violation() > VIOLATION_THRESHOLD
    }
}

/// `(F(p), F(between) + Σ q_g F(p|g))` for a classical index.
pub fn analogous_decomposition(index: ClassicalIndex, shares: &[f64], groups: &[Vec<usize>]) -> (f64, f64) {
    let mut between = vec![0.0; shares.len()];
    let mut within = 0.0;
    for group in groups {
        let mass: f64 = group.iter().map(|&i| shares[i]).sum();
        for &i in group {
            between[i] = mass / group.len() as f64;
        }
        let conditional: Vec<f64> = group.iter().map(|&i| shares[i] / mass).collect();
        within += mass * index.inequality(&conditional);
    }
    (index.inequality(shares), index.inequality(&between) + within)
}

/// Random share vector of length 2..=max_len. About one vector in five has
/// some exact zeros so the simplex boundary is exercised.
pub fn random_shares(rng: &mut impl Rng, max_len: usize) -> ShareVector {
    let n = rng.gen_range(2..=max_len.max(2));
    let sparse = rng.gen_bool(0.2);
    loop {
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if sparse && rng.gen_bool(0.3) {
                    0.0
                } else {
                    // heavy-ish tail: exponent spreads shares over decades
                    rng.gen::<f64>().powf(rng.gen_range(1.0..4.0))
                }
            })
            .collect();
        if let Ok(p) = ShareVector::from_scores(&scores) {
            return p;
        }
    }
}

/// Random partition of `0..n` into at most `max_groups` non-empty groups, all
/// with positive mass under `p`. Returns `None` if no such partition was drawn.
pub fn random_partition(rng: &mut impl Rng, p: &[f64], max_groups: usize) -> Option<Vec<Vec<usize>>> {
    let n = p.len();
    for _ in 0..32 {
        let k = rng.gen_range(1..=max_groups.min(n).max(1));
        let mut groups = vec![Vec::new(); k];
        for i in 0..n {
            groups[rng.gen_range(0..k)].push(i);
        }
        groups.retain(|g| !g.is_empty());
        if groups.iter().all(|g| g.iter().map(|&i| p[i]).sum::<f64>() > 0.0) {
            return Some(groups);
        }
    }
    None
}

/// Runs A1–A5 on the entropy imbalance over `samples` random share vectors.
pub fn check_entropy_axioms(samples: usize, seed: u64) -> Vec<AxiomCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 5];
    let i_of = |p: &ShareVector| imbalance_of_shares(p).expect("length >= 2");

    for _ in 0..samples {
        let p = random_shares(&mut rng, 24);
        let base = i_of(&p);

        // A1
        let mut permuted = p.values().to_vec();
        permuted.shuffle(&mut rng);
        let permuted = ShareVector::new(permuted).expect("a permutation keeps the sum");
        worst[0] = worst[0].max((i_of(&permuted) - base).abs());

        // A2 on positive raw scores
        let scores: Vec<f64> = p.values().iter().map(|v| v * rng.gen_range(0.5..2.0)).collect();
        let reference = i_of(&ShareVector::from_scores(&scores).expect("positive total"));
        for lambda in [1e-6, 1.0, 1e6] {
            let scaled: Vec<f64> = scores.iter().map(|s| s * lambda).collect();
            let value = i_of(&ShareVector::from_scores(&scaled).expect("positive total"));
            worst[1] = worst[1].max((value - reference).abs());
        }

        // A3
        let n = p.len();
        let mut one_hot = vec![0.0; n];
        one_hot[rng.gen_range(0..n)] = 1.0;
        let uniform = i_of(&ShareVector::uniform(n).expect("n >= 2"));
        let winner = i_of(&ShareVector::new(one_hot).expect("one-hot"));
        worst[2] = worst[2].max(uniform.abs()).max((winner - 1.0).abs());

        // A4: rich -> poor transfer that keeps their order
        let values = p.values();
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if values[i] > values[j] {
            let delta = rng.gen::<f64>() * (values[i] - values[j]) / 2.0;
            let mut moved = values.to_vec();
            moved[i] -= delta;
            moved[j] += delta;
            if let Ok(after) = ShareVector::new(moved) {
                worst[3] = worst[3].max(i_of(&after) - base);
            }
        }

        // A5
        if let Some(groups) = random_partition(&mut rng, values, 5) {
            let d = decompose(&p, &groups).expect("valid partition");
            worst[4] = worst[4].max((d.total_gap - d.reconstruction).abs());
        }
    }

    let names = ["A1 anonymity", "A2 scale invariance", "A3 calibration", "A4 transfer principle", "A5 decomposability"];
    let tolerances = [1e-12, 1e-12, 0.0, 1e-12, 1e-9];
    names
        .iter()
        .zip(tolerances)
        .zip(worst)
        .map(|((name, tolerance), worst)| AxiomCheck {
            axiom: name.to_string(),
            samples,
            worst,
            tolerance,
            passed: worst <= tolerance,
        })
        .collect()
}

/// Randomized search for one violation per known failure: A5 for
/// Gini, JFI and CV, A2 for the variance.
pub fn find_counterexamples(seed: u64, max_tries: usize) -> Vec<Counterexample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found = Vec::new();
    for index in [ClassicalIndex::Gini, ClassicalIndex::Jfi, ClassicalIndex::Cv] {
        for _ in 0..max_tries {
            let p = random_shares(&mut rng, 8);
            let Some(groups) = random_partition(&mut rng, p.values(), 3) else { continue };
            let (total, reconstruction) = analogous_decomposition(index, p.values(), &groups);
            if (total - reconstruction).abs() > VIOLATION_THRESHOLD {
                found.push(Counterexample::A5 { index, shares: p.values().to_vec(), groups, total, reconstruction });
                break;
            }
        }
    }
    for _ in 0..max_tries {
        let scores: Vec<f64> = (0..rng.gen_range(2..8)).map(|_| rng.gen_range(0.0..10.0)).collect();
        let scale = rng.gen_range(1.5..10.0);
        let scaled: Vec<f64> = scores.iter().map(|s| s * scale).collect();
        let (original, scaled) = (ClassicalIndex::Variance.inequality(&scores), ClassicalIndex::Variance.inequality(&scaled));
        if (original - scaled).abs() > VIOLATION_THRESHOLD {
            found.push(Counterexample::A2 { index: ClassicalIndex::Variance, scores, scale, original, scaled });
            break;
        }
    }
    found
}
