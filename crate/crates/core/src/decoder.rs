//! Stacked sentence generator: embedding, word LSTM, multi-modal LSTM fed the
//! fused video context at every step, and a softmax head. Provides the
//! teacher-forced loss with its backward pass, plus greedy and beam-search
//! decoding.

use std::cmp::Ordering;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::data::{BOS, EOS, PAD, UNK};
use crate::encoder::FusedContext;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::nn::{
    dropout, dropout_backward, embed, embed_backward, lstm_backward_with, lstm_forward,
    mlstm_backward_with, mlstm_forward, output_backward, project_logits, BackwardFault, CellCache,
    LstmState, Mode,
};
use crate::tensor::{log_softmax, softmax, Vector};

/// Token indices of one caption: `BOS w_1 … w_n EOS`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CaptionTokens(Vec<usize>);

impl CaptionTokens {
    pub fn new(indices: Vec<usize>, vocab_size: usize) -> Result<Self> {
        let n = indices.len();
        if n < 2 || indices[0] != BOS || indices[n - 1] != EOS {
            return Err(Error::config(format!(
                "caption must start with BOS and end with EOS, got {indices:?}"
            )));
        }
        for (pos, &t) in indices.iter().enumerate() {
            if t >= vocab_size {
                return Err(Error::Vocabulary {
                    index: t,
                    size: vocab_size,
                });
            }
            let interior = pos != 0 && pos != n - 1;
            if interior && (t == BOS || t == EOS || t == PAD) {
                return Err(Error::config(format!(
                    "reserved token {t} at interior position {pos}"
                )));
            }
        }
        Ok(CaptionTokens(indices))
    }

    /// Wraps word indices in BOS/EOS.
    pub fn from_words(words: &[usize], vocab_size: usize) -> Result<Self> {
        let mut v = Vec::with_capacity(words.len() + 2);
        v.push(BOS);
        v.extend_from_slice(words);
        v.push(EOS);
        Self::new(v, vocab_size)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    /// Tokens between BOS and EOS.
    pub fn words(&self) -> &[usize] {
        &self.0[1..self.0.len() - 1]
    }

    /// Number of scored positions (words plus the final EOS).
    pub fn num_targets(&self) -> usize {
        self.0.len() - 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoderState {
    pub word: LstmState,
    pub mm: LstmState,
}

impl DecoderState {
    pub fn zeros(params: &ModelParams) -> Self {
        DecoderState {
            word: LstmState::zeros(params.word.hidden_size()),
            mm: LstmState::zeros(params.mm.cell.hidden_size()),
        }
    }
}

/// Dropout source for one pass; `Off` is eval mode.
pub enum Dropout<'a> {
    Off,
    On { rate: f64, rng: &'a mut dyn RngCore },
}

impl<'a> Dropout<'a> {
    pub fn new(rate: f64, mode: Mode, rng: &'a mut dyn RngCore) -> Self {
        match mode {
            Mode::Train if rate > 0.0 => Dropout::On { rate, rng },
            _ => Dropout::Off,
        }
    }

    fn apply(&mut self, x: &Vector) -> Result<(Vector, Vector)> {
        match self {
            Dropout::Off => Ok((x.clone(), Vector::filled(x.len(), 1.0))),
            Dropout::On { rate, rng } => dropout(x, *rate, Mode::Train, *rng),
        }
    }
}

#[derive(Clone, Debug)]
pub struct StepCache {
    pub token: usize,
    pub emb_mask: Vector,
    pub word: CellCache,
    pub q_mask: Vector,
    pub mm: CellCache,
    pub out_mask: Vector,
    /// The (dropped-out) M-LSTM output fed to the softmax head.
    pub head_input: Vector,
    pub probs: Vector,
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    pub state: DecoderState,
    pub probs: Vector,
    pub log_probs: Vector,
    pub cache: StepCache,
}

/// One decoder step from `prev_token`.
pub fn step(
    prev_token: usize,
    state: &DecoderState,
    y: &FusedContext,
    params: &ModelParams,
    drop: &mut Dropout<'_>,
) -> Result<StepOutput> {
    let m = embed(prev_token, &params.embedding)?;
    let (m_in, emb_mask) = drop.apply(&m)?;
    let (word, word_cache) = lstm_forward(&m_in, &state.word, &params.word)?;
    let (q_in, q_mask) = drop.apply(&word.h)?;
    let (mm, mm_cache) = mlstm_forward(&q_in, &y.y, &state.mm, &params.mm)?;
    let (head_input, out_mask) = drop.apply(&mm.h)?;
    let logits = project_logits(&head_input, &params.output)?;
    let probs = softmax(&logits);
    let log_probs = log_softmax(&logits);
    Ok(StepOutput {
        state: DecoderState { word, mm },
        probs: probs.clone(),
        log_probs,
        cache: StepCache {
            token: prev_token,
            emb_mask,
            word: word_cache,
            q_mask,
            mm: mm_cache,
            out_mask,
            head_input,
            probs,
        },
    })
}

/// Forward record of a teacher-forced pass.
#[derive(Clone, Debug)]
pub struct DecodeTrace {
    pub steps: Vec<StepCache>,
    pub targets: Vec<usize>,
    /// `ln P(target_t | prefix, video)` for each scored position.
    pub token_log_probs: Vec<f64>,
}

impl DecodeTrace {
    pub fn targets(&self) -> usize {
        self.targets.len()
    }

    pub fn total_log_prob(&self) -> f64 {
        self.token_log_probs.iter().sum()
    }
}

/// Negative mean per-token log-likelihood of `caption`.
///
/// Inputs are `BOS, w_1, …, w_n` and targets `w_1, …, w_n, EOS`.
pub fn teacher_forced_loss(
    caption: &CaptionTokens,
    y: &FusedContext,
    params: &ModelParams,
    drop: &mut Dropout<'_>,
) -> Result<(f64, DecodeTrace)> {
    let idx = caption.indices();
    let mut state = DecoderState::zeros(params);
    let mut steps = Vec::with_capacity(idx.len() - 1);
    let mut token_log_probs = Vec::with_capacity(idx.len() - 1);
    for pair in idx.windows(2) {
        let (input, target) = (pair[0], pair[1]);
        let out = step(input, &state, y, params, drop)?;
        if target >= out.log_probs.len() {
            return Err(Error::Vocabulary {
                index: target,
                size: out.log_probs.len(),
            });
        }
        token_log_probs.push(out.log_probs[target]);
        steps.push(out.cache);
        state = out.state;
    }
    let total: f64 = token_log_probs.iter().sum();
    let loss = -total / token_log_probs.len() as f64;
    Ok((
        loss,
        DecodeTrace {
            steps,
            targets: idx[1..].to_vec(),
            token_log_probs,
        },
    ))
}

/// Backward of [`teacher_forced_loss`]. Decoder parameter gradients are added
/// into `grads`; returns `dL/dy` summed over every step.
pub fn teacher_forced_backward(
    trace: &DecodeTrace,
    y: &FusedContext,
    params: &ModelParams,
    grads: &mut ModelParams,
    fault: BackwardFault,
) -> Result<Vector> {
    let scale = 1.0 / trace.steps.len() as f64;
    let word_hidden = params.word.hidden_size();
    let mm_hidden = params.mm.cell.hidden_size();
    let mut dh_word = Vector::zeros(word_hidden);
    let mut dc_word = Vector::zeros(word_hidden);
    let mut dh_mm = Vector::zeros(mm_hidden);
    let mut dc_mm = Vector::zeros(mm_hidden);
    let mut grad_y = Vector::zeros(y.width());
    for (s, &target) in trace.steps.iter().zip(&trace.targets).rev() {
        let d_head = output_backward(&s.head_input, &s.probs, target, scale, &params.output, &mut grads.output)?;
        let mut d_mm_h = dropout_backward(&d_head, &s.out_mask)?;
        d_mm_h.add_assign(&dh_mm)?;
        let mm = mlstm_backward_with(&d_mm_h, &dc_mm, &s.mm, &params.mm, &mut grads.mm, fault)?;
        grad_y.add_assign(mm.context.as_ref().expect("multi-modal step yields a context gradient"))?;
        dh_mm = mm.h_prev;
        dc_mm = mm.c_prev;

        let mut d_word_h = dropout_backward(&mm.x, &s.q_mask)?;
        d_word_h.add_assign(&dh_word)?;
        let word = lstm_backward_with(&d_word_h, &dc_word, &s.word, &params.word, &mut grads.word, fault)?;
        dh_word = word.h_prev;
        dc_word = word.c_prev;

        let d_emb = dropout_backward(&word.x, &s.emb_mask)?;
        embed_backward(s.token, &d_emb, &mut grads.embedding)?;
    }
    Ok(grad_y)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeOptions {
    /// Tokens that may never be emitted.
    pub banned: Vec<usize>,
    /// Rank finished hypotheses by mean instead of summed log-probability.
    pub length_normalization: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            banned: vec![PAD, BOS, UNK],
            length_normalization: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub tokens: CaptionTokens,
    /// Summed log-probability of every emitted token including EOS.
    pub log_prob: f64,
}

fn allowed_words(vocab: usize, opts: &DecodeOptions) -> Vec<usize> {
    (0..vocab)
        .filter(|t| *t != EOS && !opts.banned.contains(t))
        .collect()
}

/// Repeated argmax from BOS. At most `max_len` words are emitted; after that
/// EOS is forced. Ties go to the lowest index.
pub fn greedy_decode(y: &FusedContext, params: &ModelParams, max_len: usize, opts: &DecodeOptions) -> Result<Decoded> {
    if max_len == 0 {
        return Err(Error::config("max_len must be at least 1"));
    }
    let vocab = params.dims().vocab_size;
    let words = allowed_words(vocab, opts);
    let mut state = DecoderState::zeros(params);
    let mut tokens = vec![BOS];
    let mut log_prob = 0.0;
    loop {
        let out = step(*tokens.last().unwrap(), &state, y, params, &mut Dropout::Off)?;
        let emitted = tokens.len() - 1;
        let mut best = EOS;
        if emitted < max_len {
            for &w in &words {
                if out.log_probs[w] > out.log_probs[best] || (out.log_probs[w] == out.log_probs[best] && w < best) {
                    best = w;
                }
            }
        }
        log_prob += out.log_probs[best];
        tokens.push(best);
        if best == EOS {
            break;
        }
        state = out.state;
    }
    Ok(Decoded {
        tokens: CaptionTokens::new(tokens, vocab)?,
        log_prob,
    })
}

#[derive(Clone, Debug)]
pub struct BeamHypothesis {
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    pub state: DecoderState,
    pub finished: bool,
}

impl BeamHypothesis {
    fn score(&self, length_normalization: bool) -> f64 {
        if length_normalization {
            self.log_prob / (self.tokens.len() - 1) as f64
        } else {
            self.log_prob
        }
    }
}

fn rank(a: (f64, &[usize]), b: (f64, &[usize])) -> Ordering {
    b.0.total_cmp(&a.0)
        .then(a.1.len().cmp(&b.1.len()))
        .then_with(|| a.1.cmp(b.1))
}

/// Beam search over captions scored by summed log-probability.
///
/// Each round expands every live hypothesis over all allowed words and keeps
/// the best `width` as the next live set. An EOS extension is frozen as a
/// finished hypothesis unless the round had to prune and the extension ranks
/// below the last kept live candidate. Hypotheses that reach `max_len` words
/// can only be extended by EOS. The result is the finished hypothesis with
/// the highest score, then the shorter, then the lexicographically smaller.
pub fn beam_search(
    y: &FusedContext,
    params: &ModelParams,
    width: usize,
    max_len: usize,
    opts: &DecodeOptions,
) -> Result<Decoded> {
    if width == 0 {
        return Err(Error::config("beam width must be at least 1"));
    }
    if max_len == 0 {
        return Err(Error::config("max_len must be at least 1"));
    }
    let vocab = params.dims().vocab_size;
    let words = allowed_words(vocab, opts);
    let norm = opts.length_normalization;

    let mut live = vec![BeamHypothesis {
        tokens: vec![BOS],
        log_prob: 0.0,
        state: DecoderState::zeros(params),
        finished: false,
    }];
    let mut finished: Vec<BeamHypothesis> = Vec::new();

    while !live.is_empty() {
        if !norm {
            // Scores only decrease, so no live prefix can beat a finished one.
            let best_finished = finished.iter().map(|h| h.log_prob).fold(f64::NEG_INFINITY, f64::max);
            let best_live = live.iter().map(|h| h.log_prob).fold(f64::NEG_INFINITY, f64::max);
            if best_finished >= best_live {
                break;
            }
        }

        struct Candidate {
            parent: usize,
            token: usize,
            log_prob: f64,
            tokens: Vec<usize>,
        }
        let mut outputs = Vec::with_capacity(live.len());
        let mut candidates = Vec::new();
        for (parent, hyp) in live.iter().enumerate() {
            let out = step(*hyp.tokens.last().unwrap(), &hyp.state, y, params, &mut Dropout::Off)?;
            let emitted = hyp.tokens.len() - 1;
            let mut push = |token: usize| {
                let mut tokens = hyp.tokens.clone();
                tokens.push(token);
                candidates.push(Candidate {
                    parent,
                    token,
                    log_prob: hyp.log_prob + out.log_probs[token],
                    tokens,
                });
            };
            push(EOS);
            if emitted < max_len {
                words.iter().for_each(|&w| push(w));
            }
            outputs.push(out);
        }
        candidates.sort_by(|a, b| {
            let score = |c: &Candidate| {
                if norm {
                    c.log_prob / (c.tokens.len() - 1) as f64
                } else {
                    c.log_prob
                }
            };
            rank((score(a), &a.tokens), (score(b), &b.tokens))
        });

        let live_candidates = candidates.iter().filter(|c| c.token != EOS).count();
        let pruned = live_candidates > width;
        let mut next_live = Vec::with_capacity(width);
        for c in candidates {
            if c.token == EOS {
                if !pruned || next_live.len() < width {
                    finished.push(BeamHypothesis {
                        tokens: c.tokens,
                        log_prob: c.log_prob,
                        state: outputs[c.parent].state.clone(),
                        finished: true,
                    });
                }
            } else if next_live.len() < width {
                next_live.push(BeamHypothesis {
                    tokens: c.tokens,
                    log_prob: c.log_prob,
                    state: outputs[c.parent].state.clone(),
                    finished: false,
                });
            }
        }
        live = next_live;
    }

    let best = finished
        .into_iter()
        .min_by(|a, b| rank((a.score(norm), &a.tokens), (b.score(norm), &b.tokens)))
        .expect("at least one hypothesis finishes");
    Ok(Decoded {
        tokens: CaptionTokens::new(best.tokens, vocab)?,
        log_prob: best.log_prob,
    })
}
