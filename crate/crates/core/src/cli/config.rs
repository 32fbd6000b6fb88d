use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{Split, SynthConfig};
use crate::error::{Error, Result};
use crate::training::{GradCheckConfig, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeConfig {
    pub beam_width: usize,
    /// Maximum number of words; EOS is forced afterwards.
    pub max_len: usize,
    pub length_normalization: bool,
    /// Encoder segments at caption time; defaults to the trained value.
    pub n_e: Option<usize>,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam_width: 5,
            max_len: 30,
            length_normalization: false,
            n_e: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Dataset manifest.
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Captions file produced by `caption`.
    pub captions: Option<PathBuf>,
    /// Output directory.
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblateConfig {
    pub values: Vec<usize>,
}

impl Default for AblateConfig {
    fn default() -> Self {
        AblateConfig { values: vec![1, 3, 30] }
    }
}

/// Everything a subcommand may need. Missing keys take their defaults;
/// unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// When set, replaces the seeds of `synth`, `train` and `gradcheck`.
    pub seed: Option<u64>,
    /// Split captioned and evaluated by `caption`, `eval` and `ablate-ne`.
    pub split: Split,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub decode: DecodeConfig,
    pub gradcheck: GradCheckConfig,
    pub ablate: AblateConfig,
    pub paths: Paths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: None,
            split: Split::Test,
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
            decode: DecodeConfig::default(),
            gradcheck: GradCheckConfig::default(),
            ablate: AblateConfig::default(),
            paths: Paths {
                out: PathBuf::from("out"),
                ..Paths::default()
            },
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub beam_width: Option<usize>,
    pub n_e: Option<usize>,
    pub out: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub captions: Option<PathBuf>,
    pub split: Option<Split>,
    pub values: Option<Vec<usize>>,
}

impl RunConfig {
    /// Reads a config file; `None` gives the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    /// Applies flag overrides and resolves the shared seed.
    pub fn resolve(mut self, o: &Overrides) -> Self {
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if let Some(w) = o.beam_width {
            self.decode.beam_width = w;
        }
        if let Some(n) = o.n_e {
            self.train.n_e = n;
            self.gradcheck.n_e = n;
            self.decode.n_e = Some(n);
        }
        if let Some(out) = &o.out {
            self.paths.out = out.clone();
        }
        if o.dataset.is_some() {
            self.paths.dataset = o.dataset.clone();
        }
        if o.checkpoint.is_some() {
            self.paths.checkpoint = o.checkpoint.clone();
        }
        if o.captions.is_some() {
            self.paths.captions = o.captions.clone();
        }
        if let Some(s) = o.split {
            self.split = s;
        }
        if let Some(v) = &o.values {
            self.ablate.values = v.clone();
        }
        if let Some(seed) = self.seed {
            self.synth.seed = seed;
            self.train.seed = seed;
            self.gradcheck.seed = seed;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.train.validate()?;
        self.gradcheck.validate()?;
        if self.decode.beam_width == 0 || self.decode.max_len == 0 || self.decode.n_e == Some(0) {
            return Err(Error::config("decode.beam_width, decode.max_len and decode.n_e must be at least 1"));
        }
        if self.ablate.values.is_empty() || self.ablate.values.contains(&0) {
            return Err(Error::config("ablate.values must be a non-empty list of positive n_e values"));
        }
        if self.paths.out.as_os_str().is_empty() {
            return Err(Error::config("paths.out must not be empty"));
        }
        Ok(())
    }
}
