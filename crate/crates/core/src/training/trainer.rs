use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bucket_batches, clip_gradients, AdadeltaState, Checkpoint, Criterion, TrainConfig};
use crate::data::{build_vocab, decode_tokens, encode_caption, tokenize, Dataset, Split, VideoSample, Vocabulary};
use crate::decoder::{greedy_decode, CaptionTokens, DecodeOptions};
use crate::error::{Error, Result};
use crate::metrics::bleu;
use crate::model::{encode_video, sample_gradients, sample_loss, ForwardConfig, ModelDims, ModelParams};
use crate::nn::{BackwardFault, Mode};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Deterministic summary of one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-token loss over the epoch's training batches (dropout on).
    pub train_loss: f64,
    pub train_perplexity: f64,
    pub val_loss: f64,
    pub val_perplexity: f64,
    /// Value of the early-stopping criterion.
    pub val_score: f64,
    pub improved: bool,
    /// Gradient entries clamped during the epoch.
    pub clipped: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    Patience,
    TargetPerplexity,
}

/// Everything that evolves during training; enough to resume exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub params: ModelParams,
    pub best_params: ModelParams,
    pub optimizer: AdadeltaState,
    /// Completed epochs.
    pub epoch: usize,
    pub best_epoch: usize,
    pub best_score: Option<f64>,
    pub epochs_since_improvement: usize,
    pub rng: ChaCha8Rng,
    pub history: Vec<EpochRecord>,
    pub stopped: Option<StopReason>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    #[serde(flatten)]
    pub record: EpochRecord,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub code_version: String,
    pub config: TrainConfig,
    pub dims: ModelDims,
    pub train_pairs: usize,
    /// Training captions dropped for exceeding `max_caption_len`.
    pub dropped_long_captions: usize,
    pub val_pairs: usize,
    pub resumed_from_epoch: Option<usize>,
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub stop_reason: Option<StopReason>,
}

pub struct TrainOutcome {
    /// Parameters of the best validation epoch.
    pub params: ModelParams,
    pub vocab: Vocabulary,
    pub checkpoint: Checkpoint,
    pub log: TrainingLog,
}

type Pairs = Vec<(usize, CaptionTokens)>;

struct Prepared<'a> {
    vocab: Vocabulary,
    dims: ModelDims,
    train_videos: &'a [VideoSample],
    val_videos: &'a [VideoSample],
    train_pairs: Pairs,
    val_pairs: Pairs,
    dropped: usize,
}

fn prepare<'a>(dataset: &'a Dataset, cfg: &TrainConfig) -> Result<Prepared<'a>> {
    cfg.validate()?;
    let train_videos = dataset.split(Split::Train);
    let val_videos = dataset.split(cfg.validate_on);
    if train_videos.is_empty() {
        return Err(Error::config("the train split is empty"));
    }
    if val_videos.is_empty() {
        return Err(Error::config(format!("the {} split used for validation is empty", cfg.validate_on.name())));
    }
    let min_frames = train_videos.iter().chain(val_videos).map(|v| v.features.n_v()).min().unwrap_or(0);
    if cfg.n_e > min_frames {
        return Err(Error::config(format!(
            "n_e = {} exceeds the shortest video ({min_frames} frames)",
            cfg.n_e
        )));
    }
    let tokenized: Vec<Vec<Vec<String>>> = train_videos
        .iter()
        .map(|v| v.captions.iter().map(|c| tokenize(c)).collect())
        .collect();
    let corpus: Vec<Vec<String>> = tokenized.iter().flatten().cloned().collect();
    let vocab = build_vocab(&corpus, cfg.min_count)?;
    let mut train_pairs = Vec::new();
    let mut dropped = 0;
    for (vi, caps) in tokenized.iter().enumerate() {
        for toks in caps {
            if toks.len() > cfg.max_caption_len {
                dropped += 1;
            } else {
                train_pairs.push((vi, encode_caption(toks, &vocab)));
            }
        }
    }
    if train_pairs.is_empty() {
        return Err(Error::config("no training caption fits within max_caption_len"));
    }
    let val_pairs: Pairs = val_videos
        .iter()
        .enumerate()
        .flat_map(|(vi, v)| {
            let vocab = &vocab;
            v.captions.iter().map(move |c| (vi, encode_caption(&tokenize(c), vocab)))
        })
        .collect();
    let dims = ModelDims {
        feature_dim: dataset.feature_dim,
        encoder_hidden: cfg.encoder_hidden,
        embed_dim: cfg.embed_dim,
        word_hidden: cfg.word_hidden,
        mm_hidden: cfg.mm_hidden,
        vocab_size: vocab.len(),
    };
    dims.validate()?;
    Ok(Prepared {
        vocab,
        dims,
        train_videos,
        val_videos,
        train_pairs,
        val_pairs,
        dropped,
    })
}

/// Epoch-at-a-time training loop with early stopping and exact resume.
pub struct Trainer<'a> {
    cfg: TrainConfig,
    data: Prepared<'a>,
    state: TrainState,
    log: TrainingLog,
}

impl<'a> Trainer<'a> {
    pub fn new(dataset: &'a Dataset, cfg: TrainConfig) -> Result<Self> {
        let data = prepare(dataset, &cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let params = ModelParams::init(&data.dims, cfg.init, &mut rng);
        let state = TrainState {
            best_params: params.clone(),
            optimizer: AdadeltaState::new(&params, cfg.optimizer),
            params,
            epoch: 0,
            best_epoch: 0,
            best_score: None,
            epochs_since_improvement: 0,
            rng,
            history: Vec::new(),
            stopped: None,
        };
        Ok(Self::assemble(cfg, data, state, None))
    }

    /// Continues a run from a checkpoint taken on the same dataset.
    /// `max_epochs` may extend a run that stopped at its epoch limit.
    pub fn resume(dataset: &'a Dataset, checkpoint: Checkpoint, max_epochs: Option<usize>) -> Result<Self> {
        let Checkpoint {
            mut config,
            mut state,
            vocab,
            dims,
            ..
        } = checkpoint;
        if let Some(m) = max_epochs {
            config.max_epochs = m;
            if state.stopped == Some(StopReason::MaxEpochs) && state.epoch < m {
                state.stopped = None;
            }
        }
        let data = prepare(dataset, &config)?;
        if data.vocab != vocab || data.dims != dims {
            return Err(Error::config("checkpoint vocabulary or dimensions do not match this dataset"));
        }
        state.params.validate()?;
        let epoch = state.epoch;
        Ok(Self::assemble(config, data, state, Some(epoch)))
    }

    fn assemble(cfg: TrainConfig, data: Prepared<'a>, state: TrainState, resumed: Option<usize>) -> Self {
        let log = TrainingLog {
            code_version: CODE_VERSION.to_string(),
            config: cfg.clone(),
            dims: data.dims,
            train_pairs: data.train_pairs.len(),
            dropped_long_captions: data.dropped,
            val_pairs: data.val_pairs.len(),
            resumed_from_epoch: resumed,
            epochs: Vec::new(),
            best_epoch: state.best_epoch,
            stop_reason: state.stopped,
        };
        Trainer { cfg, data, state, log }
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.data.vocab
    }

    pub fn state(&self) -> &TrainState {
        &self.state
    }

    pub fn log(&self) -> &TrainingLog {
        &self.log
    }

    pub fn is_done(&self) -> bool {
        self.state.stopped.is_some()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(self.cfg.clone(), self.data.dims, self.data.vocab.clone(), self.state.clone())
    }

    fn forward_config(&self) -> ForwardConfig {
        ForwardConfig {
            n_e: self.cfg.n_e,
            dropout_rate: self.cfg.dropout_rate,
            encoder_dropout: self.cfg.encoder_dropout,
            mode: Mode::Train,
        }
    }

    /// Runs one epoch of mini-batch updates followed by validation.
    pub fn run_epoch(&mut self) -> Result<&EpochLog> {
        if self.is_done() {
            return Err(Error::config("training has already stopped"));
        }
        let start = Instant::now();
        let epoch = self.state.epoch + 1;
        let fwd = self.forward_config();
        let pairs = &self.data.train_pairs;
        let videos = self.data.train_videos;
        let st = &mut self.state;

        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(&mut st.rng);
        let lengths: Vec<usize> = pairs.iter().map(|(_, c)| c.num_targets()).collect();
        let mut batches = bucket_batches(&order, &lengths, self.cfg.batch_size);
        batches.shuffle(&mut st.rng);

        let (mut nll, mut tokens, mut clipped) = (0.0, 0usize, 0usize);
        let workers = rayon::current_num_threads().max(1);
        for (b, batch) in batches.iter().enumerate() {
            let seeds: Vec<u64> = batch.iter().map(|_| st.rng.next_u64()).collect();
            let mut grads = st.params.zeros_like();
            let mut loss_finite = true;
            let inv = 1.0 / batch.len() as f64;
            let params = &st.params;
            // Chunks bound peak memory; summation stays in batch order.
            for (items, chunk_seeds) in batch.chunks(workers).zip(seeds.chunks(workers)) {
                let results: Vec<Result<_>> = items
                    .par_iter()
                    .zip(chunk_seeds.par_iter())
                    .map(|(&i, &seed)| {
                        let (vi, caption) = &pairs[i];
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        sample_gradients(&videos[*vi].features, caption, params, &fwd, &mut rng, BackwardFault::None)
                    })
                    .collect();
                for r in results {
                    let g = r?;
                    loss_finite &= g.loss.is_finite();
                    nll += g.loss * g.targets as f64;
                    tokens += g.targets;
                    grads.add_scaled(&g.params, inv);
                }
            }
            if let Some(name) = grads.first_non_finite() {
                return Err(Error::NonFinite(format!("gradient of {name} at epoch {epoch}, batch {b}")));
            }
            if !loss_finite {
                return Err(Error::NonFinite(format!("training loss at epoch {epoch}, batch {b}")));
            }
            clipped += clip_gradients(&mut grads, self.cfg.clip_threshold)?;
            st.optimizer.step(&mut st.params, &grads)?;
            if let Some(name) = st.params.first_non_finite() {
                return Err(Error::NonFinite(format!("parameter {name} after epoch {epoch}, batch {b}")));
            }
        }
        let train_loss = nll / tokens as f64;

        let (val_loss, _) = validation_loss(&self.data.val_pairs, self.data.val_videos, &st.params, self.cfg.n_e)?;
        let val_score = match self.cfg.criterion {
            Criterion::Loss => val_loss,
            Criterion::Bleu4 => greedy_bleu4(
                self.data.val_videos,
                &st.params,
                &self.data.vocab,
                self.cfg.n_e,
                self.cfg.max_caption_len,
            )?,
        };
        let improved = st.best_score.is_none_or(|best| self.cfg.criterion.improves(val_score, best));
        if improved {
            st.best_score = Some(val_score);
            st.best_params = st.params.clone();
            st.best_epoch = epoch;
            st.epochs_since_improvement = 0;
        } else {
            st.epochs_since_improvement += 1;
        }
        st.epoch = epoch;
        let record = EpochRecord {
            epoch,
            train_loss,
            train_perplexity: train_loss.exp(),
            val_loss,
            val_perplexity: val_loss.exp(),
            val_score,
            improved,
            clipped,
        };
        st.stopped = if self.cfg.target_perplexity.is_some_and(|t| record.val_perplexity < t) {
            Some(StopReason::TargetPerplexity)
        } else if st.epochs_since_improvement > self.cfg.patience {
            Some(StopReason::Patience)
        } else if epoch >= self.cfg.max_epochs {
            Some(StopReason::MaxEpochs)
        } else {
            None
        };
        st.history.push(record.clone());
        self.log.best_epoch = st.best_epoch;
        self.log.stop_reason = st.stopped;
        self.log.epochs.push(EpochLog {
            record,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        Ok(self.log.epochs.last().expect("just pushed"))
    }

    /// Trains until a stopping rule fires, calling `on_epoch` after each epoch.
    pub fn run(&mut self, mut on_epoch: impl FnMut(&EpochLog)) -> Result<()> {
        while !self.is_done() {
            let entry = self.run_epoch()?;
            on_epoch(entry);
        }
        Ok(())
    }

    pub fn finish(self) -> TrainOutcome {
        let checkpoint = self.checkpoint();
        TrainOutcome {
            params: self.state.best_params,
            vocab: self.data.vocab,
            checkpoint,
            log: self.log,
        }
    }
}

/// Trains from scratch until a stopping rule fires.
pub fn train(dataset: &Dataset, cfg: TrainConfig) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(dataset, cfg)?;
    trainer.run(|_| {})?;
    Ok(trainer.finish())
}

/// Per-token loss over `(video, caption)` pairs in eval mode, with the
/// number of scored tokens.
pub fn validation_loss(pairs: &[(usize, CaptionTokens)], videos: &[VideoSample], params: &ModelParams, n_e: usize) -> Result<(f64, usize)> {
    let fwd = ForwardConfig::eval(n_e);
    let results: Vec<Result<(f64, usize)>> = pairs
        .par_iter()
        .map(|(vi, caption)| {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let loss = sample_loss(&videos[*vi].features, caption, params, &fwd, &mut rng)?;
            Ok((loss, caption.num_targets()))
        })
        .collect();
    let (mut nll, mut tokens) = (0.0, 0usize);
    for r in results {
        let (loss, n) = r?;
        nll += loss * n as f64;
        tokens += n;
    }
    if tokens == 0 {
        return Err(Error::EmptyInput("validation captions"));
    }
    Ok((nll / tokens as f64, tokens))
}

fn greedy_bleu4(videos: &[VideoSample], params: &ModelParams, vocab: &Vocabulary, n_e: usize, max_len: usize) -> Result<f64> {
    let opts = DecodeOptions::default();
    let candidates: Vec<Result<Vec<String>>> = videos
        .par_iter()
        .map(|v| {
            let y = encode_video(&v.features, params, n_e)?;
            let out = greedy_decode(&y, params, max_len, &opts)?;
            Ok(tokenize(&decode_tokens(out.tokens.indices(), vocab)?))
        })
        .collect();
    let candidates = candidates.into_iter().collect::<Result<Vec<_>>>()?;
    let references: Vec<Vec<Vec<String>>> = videos
        .iter()
        .map(|v| v.captions.iter().map(|c| tokenize(c)).collect())
        .collect();
    Ok(bleu(&candidates, &references, 4)?[3])
}
