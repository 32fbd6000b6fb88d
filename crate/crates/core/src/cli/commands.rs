use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::data::{decode_tokens, generate_synthetic, load_dataset, save_dataset, Dataset, Split, VideoSample, Vocabulary};
use crate::decoder::{beam_search, DecodeOptions};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricReport};
use crate::model::{encode_video, ModelParams};
use crate::nn::BackwardFault;
use crate::training::{gradient_check, Checkpoint, EpochLog, GradCheckReport, StopReason, Trainer, CODE_VERSION};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn create_out(cfg: &RunConfig) -> Result<&Path> {
    let out = cfg.paths.out.as_path();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    Ok(out)
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    code_version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
}

fn echo_config(cfg: &RunConfig, command: &str) -> Result<()> {
    write_json(
        &cfg.paths.out.join("config.json"),
        &ConfigEcho {
            code_version: CODE_VERSION,
            command,
            config: cfg,
        },
    )
}

fn require<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::config(format!("paths.{what} is required for this command")))
}

#[derive(Clone, Debug, Serialize)]
pub struct SynthSummary {
    pub manifest: PathBuf,
    pub name: String,
    pub feature_dim: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub min_frames: usize,
    pub example_caption: String,
}

impl fmt::Display for SynthSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dataset {} written to {}", self.name, self.manifest.display())?;
        writeln!(f, "  feature_dim {}, shortest video {} frames", self.feature_dim, self.min_frames)?;
        writeln!(f, "  train {} / val {} / test {}", self.train, self.val, self.test)?;
        write!(f, "  e.g. \"{}\"", self.example_caption)
    }
}

/// Generates the synthetic corpus and writes it under `paths.out`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<SynthSummary> {
    cfg.validate()?;
    let ds = generate_synthetic(&cfg.synth)?;
    let out = create_out(cfg)?;
    let manifest = save_dataset(&ds, out)?;
    write_json(
        &out.join("synth_config.json"),
        &ConfigEcho {
            code_version: CODE_VERSION,
            command: "synth",
            config: cfg,
        },
    )?;
    let example = Split::ALL
        .iter()
        .flat_map(|s| ds.split(*s))
        .next()
        .map(|v| v.captions[0].clone())
        .unwrap_or_default();
    Ok(SynthSummary {
        manifest,
        name: ds.name.clone(),
        feature_dim: ds.feature_dim,
        train: ds.train.len(),
        val: ds.val.len(),
        test: ds.test.len(),
        min_frames: ds.min_frames().unwrap_or(0),
        example_caption: example,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_score: Option<f64>,
    pub stop_reason: Option<StopReason>,
}

impl fmt::Display for TrainSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "trained {} epochs (best {} with score {:.6}, stop: {:?}); checkpoint {}",
            self.epochs,
            self.best_epoch,
            self.best_score.unwrap_or(f64::NAN),
            self.stop_reason,
            self.checkpoint.display()
        )
    }
}

/// Trains on `paths.dataset`, or continues the run in `resume`, writing
/// `checkpoint.json`, `training_log.json` and `config.json` to `paths.out`.
pub fn cmd_train(cfg: &RunConfig, resume: Option<&Path>, mut on_epoch: impl FnMut(&EpochLog)) -> Result<TrainSummary> {
    cfg.validate()?;
    let dataset = load_dataset(require(&cfg.paths.dataset, "dataset")?)?;
    let mut trainer = match resume {
        Some(path) => Trainer::resume(&dataset, Checkpoint::load(path)?, Some(cfg.train.max_epochs))?,
        None => Trainer::new(&dataset, cfg.train.clone())?,
    };
    let out = create_out(cfg)?;
    echo_config(cfg, "train")?;
    trainer.run(&mut on_epoch)?;
    let checkpoint_path = out.join("checkpoint.json");
    let log_path = out.join("training_log.json");
    let ck = trainer.checkpoint();
    ck.save(&checkpoint_path)?;
    write_json(&log_path, trainer.log())?;
    Ok(TrainSummary {
        checkpoint: checkpoint_path,
        log: log_path,
        epochs: ck.state.epoch,
        best_epoch: ck.state.best_epoch,
        best_score: ck.state.best_score,
        stop_reason: ck.state.stopped,
    })
}

/// Runs the finite-difference check on the configured miniature model and
/// writes `gradcheck.json`.
pub fn cmd_gradcheck(cfg: &RunConfig) -> Result<GradCheckReport> {
    cfg.validate()?;
    let report = gradient_check(&cfg.gradcheck, BackwardFault::None)?;
    let out = create_out(cfg)?;
    write_json(&out.join("gradcheck.json"), &report)?;
    Ok(report)
}

/// Captions written by [`cmd_caption`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptionFile {
    pub code_version: String,
    pub config: RunConfig,
    pub split: Split,
    pub n_e: usize,
    pub captions: BTreeMap<String, String>,
    /// Summed log-probability of each caption including EOS.
    pub log_probs: BTreeMap<String, f64>,
}

impl CaptionFile {
    /// Reads a caption file; a bare `{id: caption}` object is accepted too.
    pub fn read_captions(path: &Path) -> Result<BTreeMap<String, String>> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if let Ok(file) = serde_json::from_str::<CaptionFile>(&text) {
            return Ok(file.captions);
        }
        serde_json::from_str(&text).map_err(|e| Error::Load {
            path: path.to_path_buf(),
            offset: 0,
            message: format!("neither a caption file nor an id → caption map: {e}"),
        })
    }
}

/// Beam-searches a caption for every video; results follow `videos` order.
pub fn caption_videos(
    videos: &[VideoSample],
    params: &ModelParams,
    vocab: &Vocabulary,
    n_e: usize,
    cfg: &super::DecodeConfig,
) -> Result<Vec<(String, String, f64)>> {
    let opts = DecodeOptions {
        length_normalization: cfg.length_normalization,
        ..DecodeOptions::default()
    };
    let results: Vec<Result<(String, String, f64)>> = videos
        .par_iter()
        .map(|v| {
            let y = encode_video(&v.features, params, n_e)?;
            let d = beam_search(&y, params, cfg.beam_width, cfg.max_len, &opts)?;
            Ok((v.id.clone(), decode_tokens(d.tokens.indices(), vocab)?, d.log_prob))
        })
        .collect();
    results.into_iter().collect()
}

fn check_compatible(ck: &Checkpoint, dataset: &Dataset, path: &Path) -> Result<()> {
    if ck.dims.feature_dim != dataset.feature_dim {
        return Err(Error::Load {
            path: path.to_path_buf(),
            offset: 0,
            message: format!(
                "checkpoint expects feature_dim {}, dataset has {}",
                ck.dims.feature_dim, dataset.feature_dim
            ),
        });
    }
    Ok(())
}

fn check_segments(videos: &[VideoSample], n_e: usize) -> Result<()> {
    if let Some(v) = videos.iter().find(|v| v.features.n_v() < n_e) {
        return Err(Error::config(format!(
            "n_e = {n_e} exceeds the {} frames of video {}",
            v.features.n_v(),
            v.id
        )));
    }
    Ok(())
}

/// Captions `split` of `paths.dataset` with the best parameters of
/// `paths.checkpoint`, writing `captions.json`.
pub fn cmd_caption(cfg: &RunConfig) -> Result<CaptionFile> {
    cfg.validate()?;
    let ck_path = require(&cfg.paths.checkpoint, "checkpoint")?;
    let dataset = load_dataset(require(&cfg.paths.dataset, "dataset")?)?;
    let ck = Checkpoint::load(ck_path)?;
    check_compatible(&ck, &dataset, ck_path)?;
    let videos = dataset.split(cfg.split);
    let n_e = cfg.decode.n_e.unwrap_or(ck.config.n_e);
    check_segments(videos, n_e)?;
    let out = create_out(cfg)?;
    let rows = caption_videos(videos, ck.best_params(), &ck.vocab, n_e, &cfg.decode)?;
    let file = CaptionFile {
        code_version: CODE_VERSION.to_string(),
        config: cfg.clone(),
        split: cfg.split,
        n_e,
        captions: rows.iter().map(|(id, c, _)| (id.clone(), c.clone())).collect(),
        log_probs: rows.iter().map(|(id, _, lp)| (id.clone(), *lp)).collect(),
    };
    write_json(&out.join("captions.json"), &file)?;
    Ok(file)
}

/// Scores `paths.captions` against `split` of `paths.dataset`, writing
/// `metrics.json`.
pub fn cmd_eval(cfg: &RunConfig) -> Result<MetricReport> {
    cfg.validate()?;
    let captions = CaptionFile::read_captions(require(&cfg.paths.captions, "captions")?)?;
    let dataset = load_dataset(require(&cfg.paths.dataset, "dataset")?)?;
    let mut report = evaluate(&captions, dataset.split(cfg.split))?;
    report.run_config = Some(serde_json::to_value(cfg)?);
    let out = create_out(cfg)?;
    write_json(&out.join("metrics.json"), &report)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub model: String,
    pub n_e: usize,
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    /// Not computed; kept so the row has every column of a results table.
    pub meteor: Option<f64>,
    pub cider: f64,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AblationTable {
    pub code_version: String,
    pub config: RunConfig,
    pub split: Split,
    pub rows: Vec<AblationRow>,
    /// Training plus evaluation time per row.
    pub wall_seconds: Vec<f64>,
}

impl fmt::Display for AblationTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<20} {:>6} {:>6} {:>6} {:>6} {:>6} {:>7} {:>7}",
            "model", "B@1", "B@2", "B@3", "B@4", "M", "C", "epochs"
        )?;
        for (i, r) in self.rows.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(
                f,
                "{:<20} {:>6.1} {:>6.1} {:>6.1} {:>6.1} {:>6} {:>7.3} {:>7}",
                r.model,
                100.0 * r.bleu1,
                100.0 * r.bleu2,
                100.0 * r.bleu3,
                100.0 * r.bleu4,
                "-",
                r.cider,
                r.epochs
            )?;
        }
        Ok(())
    }
}

/// Trains and evaluates one model per `ablate.values` entry on the same
/// data and seed. Uses `paths.dataset` when set, otherwise the synthetic
/// corpus described by `synth`. Writes `ablation.json`.
pub fn cmd_ablate_ne(cfg: &RunConfig, mut on_epoch: impl FnMut(usize, &EpochLog)) -> Result<AblationTable> {
    cfg.validate()?;
    let dataset = match &cfg.paths.dataset {
        Some(p) => load_dataset(p)?,
        None => generate_synthetic(&cfg.synth)?,
    };
    let shortest = dataset.min_frames().unwrap_or(0);
    if let Some(&bad) = cfg.ablate.values.iter().find(|&&n| n > shortest) {
        return Err(Error::config(format!("ablation n_e = {bad} exceeds the shortest video ({shortest} frames)")));
    }
    if dataset.split(cfg.split).is_empty() {
        return Err(Error::config(format!("the {} split is empty", cfg.split.name())));
    }
    let out = create_out(cfg)?;
    echo_config(cfg, "ablate-ne")?;
    let mut rows = Vec::new();
    let mut wall = Vec::new();
    for &n_e in &cfg.ablate.values {
        let start = Instant::now();
        let train_cfg = crate::training::TrainConfig {
            n_e,
            ..cfg.train.clone()
        };
        let mut trainer = Trainer::new(&dataset, train_cfg)?;
        trainer.run(|e| on_epoch(n_e, e))?;
        let state = trainer.state();
        let videos = dataset.split(cfg.split);
        let decode = super::DecodeConfig {
            n_e: Some(n_e),
            ..cfg.decode.clone()
        };
        let captions = caption_videos(videos, &state.best_params, trainer.vocab(), n_e, &decode)?;
        let outputs: BTreeMap<String, String> = captions.into_iter().map(|(id, c, _)| (id, c)).collect();
        let report = evaluate(&outputs, videos)?;
        let best_val_loss = state
            .history
            .iter()
            .find(|r| r.epoch == state.best_epoch)
            .map_or(f64::NAN, |r| r.val_loss);
        rows.push(AblationRow {
            model: format!("TS-LSTM(N_e={n_e})"),
            n_e,
            bleu1: report.metrics.bleu1,
            bleu2: report.metrics.bleu2,
            bleu3: report.metrics.bleu3,
            bleu4: report.metrics.bleu4,
            meteor: None,
            cider: report.metrics.cider,
            epochs: state.epoch,
            best_epoch: state.best_epoch,
            best_val_loss,
        });
        wall.push(start.elapsed().as_secs_f64());
    }
    let table = AblationTable {
        code_version: CODE_VERSION.to_string(),
        config: cfg.clone(),
        split: cfg.split,
        rows,
        wall_seconds: wall,
    };
    write_json(&out.join("ablation.json"), &table)?;
    Ok(table)
}
