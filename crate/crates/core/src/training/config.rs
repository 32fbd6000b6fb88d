use serde::{Deserialize, Serialize};

use crate::data::Split;
use crate::error::{Error, Result};
use crate::model::InitScheme;
use crate::training::AdadeltaConfig;

/// What early stopping watches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Per-token validation loss (lower is better).
    Loss,
    /// Corpus BLEU@4 of greedy captions (higher is better).
    Bleu4,
}

impl Criterion {
    pub fn improves(self, candidate: f64, best: f64) -> bool {
        match self {
            Criterion::Loss => candidate < best,
            Criterion::Bleu4 => candidate > best,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop once this many consecutive epochs failed to improve.
    pub patience: usize,
    /// Element-wise clamp applied to batch-averaged gradients.
    pub clip_threshold: f64,
    pub dropout_rate: f64,
    pub encoder_dropout: bool,
    pub n_e: usize,
    pub encoder_hidden: usize,
    pub word_hidden: usize,
    pub mm_hidden: usize,
    pub embed_dim: usize,
    /// Training captions with more words are dropped.
    pub max_caption_len: usize,
    /// Vocabulary keeps words seen strictly more often than this.
    pub min_count: usize,
    pub init: InitScheme,
    pub optimizer: AdadeltaConfig,
    pub criterion: Criterion,
    /// Split used for validation; `train` turns a run into a memorization run.
    pub validate_on: Split,
    /// Stop as soon as validation perplexity drops below this value.
    pub target_perplexity: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            max_epochs: 500,
            patience: 20,
            clip_threshold: 10.0,
            dropout_rate: 0.5,
            encoder_dropout: true,
            n_e: 3,
            encoder_hidden: 512,
            word_hidden: 512,
            mm_hidden: 512,
            embed_dim: 512,
            max_caption_len: 30,
            min_count: 2,
            init: InitScheme::default(),
            optimizer: AdadeltaConfig::default(),
            criterion: Criterion::Loss,
            validate_on: Split::Val,
            target_perplexity: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("n_e", self.n_e),
            ("encoder_hidden", self.encoder_hidden),
            ("word_hidden", self.word_hidden),
            ("mm_hidden", self.mm_hidden),
            ("embed_dim", self.embed_dim),
            ("max_caption_len", self.max_caption_len),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::config(format!("train.{name} must be at least 1")));
            }
        }
        if !(self.clip_threshold > 0.0) {
            return Err(Error::config("train.clip_threshold must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config(format!("train.dropout_rate must lie in [0, 1), got {}", self.dropout_rate)));
        }
        if !(self.init.scale >= 0.0 && self.init.scale.is_finite() && self.init.forget_bias.is_finite()) {
            return Err(Error::config("train.init must be finite with a non-negative scale"));
        }
        if let Some(p) = self.target_perplexity {
            if !(p >= 1.0) {
                return Err(Error::config("train.target_perplexity must be at least 1"));
            }
        }
        self.optimizer.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { clip_threshold: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { dropout_rate: 1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<TrainConfig>(r#"{"batch_sz": 3}"#);
        assert!(err.is_err());
        let ok: TrainConfig = serde_json::from_str(r#"{"batch_size": 3, "criterion": "bleu4"}"#).unwrap();
        assert_eq!(ok.batch_size, 3);
        assert_eq!(ok.criterion, Criterion::Bleu4);
        assert_eq!(ok.patience, 20);
    }
}
