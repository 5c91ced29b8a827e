use std::collections::BTreeSet;

use crate::text::{normalize, tokens};

/// Normalized equality against any accepted answer.
pub fn exact_match(prediction: &str, gold: &[String]) -> bool {
    let p = normalize(prediction);
    gold.iter().any(|g| normalize(g) == p)
}

/// `|A ∩ B| / min(|A|, |B|)` over normalized token sets; 0 when either is empty.
pub fn overlap_coefficient(a: &str, b: &str) -> f64 {
    let a: BTreeSet<String> = tokens(a).into_iter().collect();
    let b: BTreeSet<String> = tokens(b).into_iter().collect();
    let smaller = a.len().min(b.len());
    if smaller == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / smaller as f64
}

/// Near-miss threshold for the answer-aliasing tag.
pub const NEAR_MISS_OVERLAP: f64 = 0.5;

pub fn near_miss(prediction: &str, gold: &[String]) -> bool {
    gold.iter()
        .any(|g| overlap_coefficient(prediction, g) >= NEAR_MISS_OVERLAP)
}

/// Fraction of `true` flags; 0 for no flags.
pub fn hits_at_1(correct: impl IntoIterator<Item = bool>) -> f64 {
    let (hit, n) = correct
        .into_iter()
        .fold((0usize, 0usize), |(h, n), c| (h + usize::from(c), n + 1));
    if n == 0 {
        0.0
    } else {
        hit as f64 / n as f64
    }
}
