use std::collections::{BTreeMap, BTreeSet};

use super::{check_corpus, ngram_counts, NGramCounts};
use crate::error::Result;

type Weights<'a, T> = BTreeMap<&'a [T], f64>;

fn tf<'a, T: Ord>(counts: &NGramCounts<'a, T>) -> Weights<'a, T> {
    let total: usize = counts.values().sum();
    counts.iter().map(|(g, &c)| (*g, c as f64 / total as f64)).collect()
}

fn norm<T: Ord>(w: &Weights<'_, T>) -> f64 {
    w.values().map(|x| x * x).sum::<f64>().sqrt()
}

fn cosine<T: Ord>(a: &Weights<'_, T>, b: &Weights<'_, T>) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().filter_map(|(g, x)| b.get(g).map(|y| x * y)).sum();
    dot / (na * nb)
}

/// Similarity of one candidate/reference pair at one order. When every
/// n-gram on both sides has zero IDF (it occurs in every video, as in a
/// one-video corpus), the plain TF cosine is used instead.
fn pair_similarity<'a, T: Ord>(cand: &NGramCounts<'a, T>, reference: &NGramCounts<'a, T>, idf: &dyn Fn(&[T]) -> f64) -> f64 {
    if cand.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let (tc, tr) = (tf(cand), tf(reference));
    let weigh = |w: &Weights<'a, T>| -> Weights<'a, T> { w.iter().map(|(g, x)| (*g, x * idf(g))).collect() };
    let (wc, wr) = (weigh(&tc), weigh(&tr));
    if norm(&wc) == 0.0 && norm(&wr) == 0.0 {
        cosine(&tc, &tr)
    } else {
        cosine(&wc, &wr)
    }
}

/// CIDEr of every item: `10 · mean_n mean_refs cos(tfidf(cand), tfidf(ref))`
/// with `idf(g) = ln(N / max(1, df(g)))`, where `df(g)` counts the videos
/// whose references contain `g`.
pub fn cider_per_item<T: Ord>(candidates: &[Vec<T>], references: &[Vec<Vec<T>>], max_n: usize) -> Result<Vec<f64>> {
    check_corpus(candidates, references)?;
    let n_items = candidates.len() as f64;
    let mut scores = vec![0.0; candidates.len()];
    for n in 1..=max_n {
        let ref_counts: Vec<Vec<NGramCounts<'_, T>>> = references
            .iter()
            .map(|refs| refs.iter().map(|r| ngram_counts(r, n)).collect())
            .collect();
        let mut df: BTreeMap<&[T], usize> = BTreeMap::new();
        for refs in &ref_counts {
            let grams: BTreeSet<&[T]> = refs.iter().flat_map(|c| c.keys().copied()).collect();
            for g in grams {
                *df.entry(g).or_insert(0) += 1;
            }
        }
        let idf = |g: &[T]| (n_items / df.get(g).copied().unwrap_or(0).max(1) as f64).ln();
        for (i, (cand, refs)) in candidates.iter().zip(&ref_counts).enumerate() {
            let cc = ngram_counts(cand, n);
            let sim: f64 = refs.iter().map(|r| pair_similarity(&cc, r, &idf)).sum::<f64>() / refs.len() as f64;
            scores[i] += sim;
        }
    }
    Ok(scores.into_iter().map(|s| 10.0 * s / max_n as f64).collect())
}

/// Corpus CIDEr: the mean of the per-item scores.
pub fn cider<T: Ord>(candidates: &[Vec<T>], references: &[Vec<Vec<T>>], max_n: usize) -> Result<f64> {
    let per = cider_per_item(candidates, references, max_n)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}
