use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{bleu, cider_per_item};
use crate::data::{tokenize, VideoSample};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub cider: f64,
}

/// Self-description of the metric definitions behind the numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub smoothing: String,
    pub cider_variant: String,
    pub cider_scale: f64,
    pub idf: String,
    pub max_n: usize,
    pub tokenizer: String,
    pub code_version: String,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            smoothing: "none".into(),
            cider_variant: "cider".into(),
            cider_scale: 10.0,
            idf: "ln(N / max(1, df)) over reference sets of the evaluated split".into(),
            max_n: 4,
            tokenizer: "lowercase, split on non-alphanumeric".into(),
            code_version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerItem {
    pub id: String,
    pub candidate: String,
    pub references: usize,
    pub cider: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSizes {
    pub items: usize,
    pub references: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metrics: MetricScores,
    pub config: MetricConfig,
    pub corpus: CorpusSizes,
    pub per_item: Vec<PerItem>,
    /// Configuration of the run that produced the captions, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_config: Option<serde_json::Value>,
}

impl MetricReport {
    pub fn bleu(&self) -> [f64; 4] {
        let m = &self.metrics;
        [m.bleu1, m.bleu2, m.bleu3, m.bleu4]
    }

    /// BLEU as percentages, CIDEr on its own scale; METEOR is not computed.
    pub fn table_row(&self, label: &str) -> String {
        let m = &self.metrics;
        format!(
            "{:<24} {:>6.1} {:>6.1} {:>6.1} {:>6.1} {:>6} {:>6.2}",
            label,
            100.0 * m.bleu1,
            100.0 * m.bleu2,
            100.0 * m.bleu3,
            100.0 * m.bleu4,
            "-",
            m.cider
        )
    }

    pub fn table_header() -> String {
        format!("{:<24} {:>6} {:>6} {:>6} {:>6} {:>6} {:>6}", "model", "B@1", "B@2", "B@3", "B@4", "M", "C")
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", Self::table_header())?;
        write!(f, "{}", self.table_row("captions"))
    }
}

/// Scores pre-tokenized captions. `items` holds `(id, candidate, references)`.
pub fn evaluate_tokens(items: &[(String, Vec<String>, Vec<Vec<String>>)]) -> Result<MetricReport> {
    let candidates: Vec<Vec<String>> = items.iter().map(|(_, c, _)| c.clone()).collect();
    let references: Vec<Vec<Vec<String>>> = items.iter().map(|(_, _, r)| r.clone()).collect();
    let b = bleu(&candidates, &references, 4)?;
    let per = cider_per_item(&candidates, &references, 4)?;
    let cider = per.iter().sum::<f64>() / per.len() as f64;
    Ok(MetricReport {
        metrics: MetricScores {
            bleu1: b[0],
            bleu2: b[1],
            bleu3: b[2],
            bleu4: b[3],
            cider,
        },
        config: MetricConfig::default(),
        corpus: CorpusSizes {
            items: items.len(),
            references: references.iter().map(Vec::len).sum(),
        },
        per_item: items
            .iter()
            .zip(per)
            .map(|((id, c, r), s)| PerItem {
                id: id.clone(),
                candidate: c.join(" "),
                references: r.len(),
                cider: s,
            })
            .collect(),
        run_config: None,
    })
}

/// Scores generated captions (id → sentence) against a dataset split. Every
/// video of the split needs an output; extra ids are ignored.
pub fn evaluate(outputs: &BTreeMap<String, String>, split: &[VideoSample]) -> Result<MetricReport> {
    let missing: Vec<&str> = split
        .iter()
        .filter(|v| !outputs.contains_key(&v.id))
        .map(|v| v.id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Metric(format!("no caption for: {}", missing.join(", "))));
    }
    let items: Vec<_> = split
        .iter()
        .map(|v| {
            (
                v.id.clone(),
                tokenize(&outputs[&v.id]),
                v.captions.iter().map(|c| tokenize(c)).collect(),
            )
        })
        .collect();
    evaluate_tokens(&items)
}
