//! Full parameter set and the end-to-end forward/backward pass for one
//! (video, caption) pair.

use rand::{Rng, RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::decoder::{teacher_forced_backward, teacher_forced_loss, CaptionTokens, Dropout};
use crate::encoder::{encode_with, encoder_backward, fuse, FeatureMatrix, FusedContext};
use crate::error::{Error, Result};
use crate::nn::{fill_uniform, BackwardFault, EmbeddingParams, LstmParams, MlstmParams, Mode, OutputParams, ParamSet};
use crate::tensor::{Matrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDims {
    pub feature_dim: usize,
    pub encoder_hidden: usize,
    pub embed_dim: usize,
    pub word_hidden: usize,
    pub mm_hidden: usize,
    pub vocab_size: usize,
}

impl ModelDims {
    pub fn context_dim(&self) -> usize {
        self.feature_dim + self.encoder_hidden
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("feature_dim", self.feature_dim),
            ("encoder_hidden", self.encoder_hidden),
            ("embed_dim", self.embed_dim),
            ("word_hidden", self.word_hidden),
            ("mm_hidden", self.mm_hidden),
            ("vocab_size", self.vocab_size),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// Initialization: weights uniform in `[-scale, scale]`, zero biases, and a
/// constant forget-gate bias.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitScheme {
    pub scale: f64,
    pub forget_bias: f64,
}

impl Default for InitScheme {
    fn default() -> Self {
        InitScheme {
            scale: 0.08,
            forget_bias: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub encoder: LstmParams,
    pub embedding: EmbeddingParams,
    pub word: LstmParams,
    pub mm: MlstmParams,
    pub output: OutputParams,
}

impl ModelParams {
    pub fn zeros(d: &ModelDims) -> Self {
        ModelParams {
            encoder: LstmParams::zeros(d.feature_dim, d.encoder_hidden),
            embedding: EmbeddingParams {
                w_s: Matrix::zeros(d.embed_dim, d.vocab_size),
            },
            word: LstmParams::zeros(d.embed_dim, d.word_hidden),
            mm: MlstmParams::zeros(d.word_hidden, d.context_dim(), d.mm_hidden),
            output: OutputParams::zeros(d.vocab_size, d.mm_hidden),
        }
    }

    pub fn init<R: Rng + ?Sized>(d: &ModelDims, scheme: InitScheme, rng: &mut R) -> Self {
        let mut p = Self::zeros(d);
        for (name, t) in p.named_tensors_mut() {
            let is_bias = name.rsplit('.').next().is_some_and(|leaf| leaf.starts_with("b_"));
            if is_bias {
                if name.ends_with("b_f") && !name.starts_with("output.") {
                    t.fill(scheme.forget_bias);
                }
            } else {
                fill_uniform(t, scheme.scale, rng);
            }
        }
        p
    }

    pub fn dims(&self) -> ModelDims {
        ModelDims {
            feature_dim: self.encoder.input_size(),
            encoder_hidden: self.encoder.hidden_size(),
            embed_dim: self.embedding.embed_dim(),
            word_hidden: self.word.hidden_size(),
            mm_hidden: self.mm.cell.hidden_size(),
            vocab_size: self.embedding.vocab_size(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.dims())
    }

    /// Checks that every block agrees with the dimensions implied by the
    /// encoder and embedding.
    pub fn validate(&self) -> Result<()> {
        let d = self.dims();
        d.validate()?;
        let expected = Self::zeros(&d);
        for ((name, a), (_, b)) in self.named_tensors().iter().zip(expected.named_tensors()) {
            if a.len() != b.len() {
                return Err(Error::shape("ModelParams", name, format!("{} values, expected {}", a.len(), b.len())));
            }
        }
        if self.output.w_f.shape() != (d.vocab_size, d.mm_hidden)
            || self.mm.context_size() != d.context_dim()
            || self.mm.cell.input_size() != d.word_hidden
            || self.word.input_size() != d.embed_dim
        {
            return Err(Error::shape("ModelParams", "block shapes", format!("{d:?}")));
        }
        Ok(())
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for ((_, a), (_, b)) in self.named_tensors_mut().into_iter().zip(other.named_tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (_, t) in self.named_tensors_mut() {
            t.iter_mut().for_each(|x| *x *= s);
        }
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<String> {
        self.named_tensors()
            .into_iter()
            .find(|(_, t)| t.iter().any(|x| !x.is_finite()))
            .map(|(n, _)| n)
    }
}

fn prefixed<'a, T: 'a>(prefix: &'a str, items: Vec<(String, T)>) -> impl Iterator<Item = (String, T)> + 'a {
    items.into_iter().map(move |(n, t)| (format!("{prefix}.{n}"), t))
}

impl ParamSet for ModelParams {
    fn named_tensors(&self) -> Vec<(String, &[f64])> {
        prefixed("encoder", self.encoder.named_tensors())
            .chain(prefixed("embedding", self.embedding.named_tensors()))
            .chain(prefixed("word", self.word.named_tensors()))
            .chain(prefixed("mm", self.mm.named_tensors()))
            .chain(prefixed("output", self.output.named_tensors()))
            .collect()
    }

    fn named_tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let ModelParams {
            encoder,
            embedding,
            word,
            mm,
            output,
        } = self;
        prefixed("encoder", encoder.named_tensors_mut())
            .chain(prefixed("embedding", embedding.named_tensors_mut()))
            .chain(prefixed("word", word.named_tensors_mut()))
            .chain(prefixed("mm", mm.named_tensors_mut()))
            .chain(prefixed("output", output.named_tensors_mut()))
            .collect()
    }
}

/// Settings that shape one forward pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForwardConfig {
    pub n_e: usize,
    pub dropout_rate: f64,
    /// Also drop out encoder LSTM outputs before they are averaged.
    pub encoder_dropout: bool,
    pub mode: Mode,
}

impl ForwardConfig {
    pub fn eval(n_e: usize) -> Self {
        ForwardConfig {
            n_e,
            dropout_rate: 0.0,
            encoder_dropout: false,
            mode: Mode::Eval,
        }
    }

    fn encoder_rate(&self) -> f64 {
        if self.encoder_dropout {
            self.dropout_rate
        } else {
            0.0
        }
    }
}

/// Encodes a video into its fused context in eval mode.
pub fn encode_video(v: &FeatureMatrix, params: &ModelParams, n_e: usize) -> Result<FusedContext> {
    let mut rng = rand_chacha::ChaCha8Rng::from_seed([0; 32]);
    let trace = encode_with(v, n_e, &params.encoder, 0.0, Mode::Eval, &mut rng)?;
    fuse(v, &trace.outputs)
}

/// Result of one end-to-end pass with gradients.
#[derive(Clone, Debug)]
pub struct SampleGradients {
    /// Negative mean per-token log-likelihood.
    pub loss: f64,
    pub targets: usize,
    pub params: ModelParams,
    /// Gradient with respect to each input frame feature.
    pub frames: Vec<Vector>,
}

/// Teacher-forced loss of one caption given the video.
pub fn sample_loss(
    v: &FeatureMatrix,
    caption: &CaptionTokens,
    params: &ModelParams,
    cfg: &ForwardConfig,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let trace = encode_with(v, cfg.n_e, &params.encoder, cfg.encoder_rate(), cfg.mode, rng)?;
    let y = fuse(v, &trace.outputs)?;
    let mut drop = Dropout::new(cfg.dropout_rate, cfg.mode, rng);
    let (loss, _) = teacher_forced_loss(caption, &y, params, &mut drop)?;
    Ok(loss)
}

/// Loss plus exact gradients for every parameter and every frame feature.
pub fn sample_gradients(
    v: &FeatureMatrix,
    caption: &CaptionTokens,
    params: &ModelParams,
    cfg: &ForwardConfig,
    rng: &mut dyn RngCore,
    fault: BackwardFault,
) -> Result<SampleGradients> {
    let enc_trace = encode_with(v, cfg.n_e, &params.encoder, cfg.encoder_rate(), cfg.mode, rng)?;
    let y = fuse(v, &enc_trace.outputs)?;
    let mut drop = Dropout::new(cfg.dropout_rate, cfg.mode, rng);
    let (loss, dec_trace) = teacher_forced_loss(caption, &y, params, &mut drop)?;
    let mut grads = params.zeros_like();
    let grad_y = teacher_forced_backward(&dec_trace, &y, params, &mut grads, fault)?;
    let enc = encoder_backward(&grad_y, v, &enc_trace, &params.encoder, &mut grads.encoder, fault)?;
    Ok(SampleGradients {
        loss,
        targets: dec_trace.targets(),
        params: grads,
        frames: enc.frames,
    })
}
