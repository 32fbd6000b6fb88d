use std::collections::BTreeMap;

/// n-gram → count for a single order. Ordered so every reduction over it runs
/// in the same order on every run.
pub type NGramCounts<'a, T> = BTreeMap<&'a [T], usize>;

pub fn ngram_counts<T: Ord>(tokens: &[T], n: usize) -> NGramCounts<'_, T> {
    let mut counts = BTreeMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}
