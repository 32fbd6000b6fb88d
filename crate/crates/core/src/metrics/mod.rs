//! Corpus-level caption metrics: BLEU@1–4 and CIDEr.

mod bleu;
mod cider;
mod ngram;
mod report;

pub use bleu::bleu;
pub use cider::{cider, cider_per_item};
pub use ngram::{ngram_counts, NGramCounts};
pub use report::{evaluate, evaluate_tokens, CorpusSizes, MetricConfig, MetricReport, MetricScores, PerItem};

use crate::error::{Error, Result};

fn check_corpus<T>(candidates: &[Vec<T>], references: &[Vec<Vec<T>>]) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::Metric("empty candidate list".into()));
    }
    if candidates.len() != references.len() {
        return Err(Error::Metric(format!(
            "{} candidates but {} reference sets",
            candidates.len(),
            references.len()
        )));
    }
    if let Some(i) = references.iter().position(|r| r.is_empty()) {
        return Err(Error::Metric(format!("item {i} has no references")));
    }
    Ok(())
}
