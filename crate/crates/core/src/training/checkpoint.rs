use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainState, CODE_VERSION};
use crate::data::Vocabulary;
use crate::error::{Error, Result};
use crate::model::{ModelDims, ModelParams};

pub const CHECKPOINT_FORMAT: &str = "tslstm-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// JSON container for a training run: configuration, vocabulary, current
/// and best parameters, optimizer accumulators and the RNG stream position.
/// Floats are written with round-trip precision, so save → load is exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub code_version: String,
    pub config: TrainConfig,
    pub dims: ModelDims,
    pub vocab: Vocabulary,
    pub state: TrainState,
}

impl Checkpoint {
    pub fn new(config: TrainConfig, dims: ModelDims, vocab: Vocabulary, state: TrainState) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            code_version: CODE_VERSION.to_string(),
            config,
            dims,
            vocab,
            state,
        }
    }

    /// Parameters of the best validation epoch.
    pub fn best_params(&self) -> &ModelParams {
        &self.state.best_params
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        ck.check()?;
        Ok(ck)
    }

    fn check(&self) -> Result<()> {
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return Err(Error::config(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            )));
        }
        for (what, p) in [("params", &self.state.params), ("best_params", &self.state.best_params)] {
            p.validate()?;
            if p.dims() != self.dims {
                return Err(Error::shape("checkpoint", what, format!("{:?} vs {:?}", p.dims(), self.dims)));
            }
        }
        if self.vocab.len() != self.dims.vocab_size {
            return Err(Error::shape(
                "checkpoint",
                format!("vocabulary of {}", self.vocab.len()),
                format!("vocab_size {}", self.dims.vocab_size),
            ));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Load {
            path: path.to_path_buf(),
            offset: 0,
            message: e.to_string(),
        })
    }
}
