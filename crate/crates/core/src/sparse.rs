//! Sparse count vectors keyed by term.

use std::collections::BTreeMap;

pub type Counts = BTreeMap<String, u32>;

/// Cosine similarity of two count vectors; `None` when either is empty.
///
/// Counts are integers, so the dot product and squared norms are exact and
/// the result is bitwise symmetric in its arguments.
pub fn cosine(a: &Counts, b: &Counts) -> Option<f64> {
    let norm = |v: &Counts| v.values().map(|&c| u64::from(c) * u64::from(c)).sum::<u64>();
    let (na, nb) = (norm(a), norm(b));
    if na == 0 || nb == 0 {
        return None;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: u64 = small.iter().filter_map(|(k, &x)| large.get(k).map(|&y| u64::from(x) * u64::from(y))).sum();
    let cos = dot as f64 / ((na as f64) * (nb as f64)).sqrt();
    Some(cos.clamp(0.0, 1.0))
}
