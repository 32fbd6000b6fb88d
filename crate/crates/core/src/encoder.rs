//! Temporal-pooling encoder.
//!
//! Frames are split into `n_e` contiguous segments and averaged, an LSTM runs
//! over the segment means, and the fused context is the concatenation of the
//! mean frame feature and the mean LSTM output.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    dropout, dropout_backward, lstm_backward_with, lstm_forward, BackwardFault, CellCache,
    LstmParams, LstmState, Mode,
};
use crate::tensor::{mean_of, Matrix, Vector};

/// Per-video frame features; each frame is one column of width `d_v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    d_v: usize,
    frames: Vec<Vector>,
}

impl FeatureMatrix {
    pub fn new(frames: Vec<Vector>) -> Result<Self> {
        let d_v = frames
            .first()
            .map(Vector::len)
            .ok_or(Error::EmptyInput("FeatureMatrix"))?;
        for (t, f) in frames.iter().enumerate() {
            if f.len() != d_v {
                return Err(Error::shape("FeatureMatrix frame", d_v, format!("frame {t} width {}", f.len())));
            }
            if !f.is_finite() {
                return Err(Error::NonFinite(format!("frame {t}")));
            }
        }
        Ok(FeatureMatrix { d_v, frames })
    }

    /// Columns of `m` are frames.
    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        Self::new(m.columns())
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_columns(&self.frames).expect("frames share a width")
    }

    pub fn d_v(&self) -> usize {
        self.d_v
    }

    pub fn n_v(&self) -> usize {
        self.frames.len()
    }

    pub fn frames(&self) -> &[Vector] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &Vector {
        &self.frames[t]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentMeans {
    pub bounds: Vec<Range<usize>>,
    pub means: Vec<Vector>,
}

impl SegmentMeans {
    pub fn n_e(&self) -> usize {
        self.means.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusedContext {
    pub y: Vector,
    pub feature_dim: usize,
}

impl FusedContext {
    pub fn width(&self) -> usize {
        self.y.len()
    }

    /// Splits `y` back into the mean frame feature and the mean encoder output.
    pub fn parts(&self) -> (Vector, Vector) {
        self.y.split_at(self.feature_dim)
    }
}

/// Half-open frame ranges `[⌊i·n_v/n_e⌋, ⌊(i+1)·n_v/n_e⌋)` for `i = 0..n_e`.
pub fn segment_bounds(n_v: usize, n_e: usize) -> Result<Vec<Range<usize>>> {
    if n_e == 0 || n_e > n_v {
        return Err(Error::config(format!(
            "segment count must satisfy 1 <= n_e <= n_v, got n_e = {n_e}, n_v = {n_v}"
        )));
    }
    Ok((0..n_e).map(|i| i * n_v / n_e..(i + 1) * n_v / n_e).collect())
}

pub fn temporal_pool(v: &FeatureMatrix, n_e: usize) -> Result<SegmentMeans> {
    let bounds = segment_bounds(v.n_v(), n_e)?;
    let means = bounds
        .iter()
        .map(|r| mean_of(&v.frames[r.clone()]).expect("segments are non-empty"))
        .collect();
    Ok(SegmentMeans { bounds, means })
}

/// Each frame receives its segment's gradient divided by the segment length.
pub fn temporal_pool_backward(bounds: &[Range<usize>], grads: &[Vector], n_v: usize) -> Vec<Vector> {
    let width = grads.first().map_or(0, Vector::len);
    let mut out = vec![Vector::zeros(width); n_v];
    for (r, g) in bounds.iter().zip(grads) {
        let share = g.scale(1.0 / r.len() as f64);
        for slot in &mut out[r.clone()] {
            *slot = share.clone();
        }
    }
    out
}

/// Forward record of the encoder for one video.
#[derive(Clone, Debug)]
pub struct EncoderTrace {
    pub segments: SegmentMeans,
    /// Raw LSTM outputs `h_1..h_{n_e}`.
    pub hiddens: Vec<Vector>,
    /// Outputs after dropout; these are what get averaged into the context.
    pub outputs: Vec<Vector>,
    pub caches: Vec<CellCache>,
    pub masks: Vec<Vector>,
}

/// Runs the LSTM over the segment means from a zero initial state.
pub fn encode(v: &FeatureMatrix, n_e: usize, enc: &LstmParams) -> Result<(Vec<Vector>, Vec<CellCache>)> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let trace = encode_with(v, n_e, enc, 0.0, Mode::Eval, &mut rng)?;
    Ok((trace.hiddens, trace.caches))
}

pub fn encode_with<R: Rng + ?Sized>(
    v: &FeatureMatrix,
    n_e: usize,
    enc: &LstmParams,
    dropout_rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<EncoderTrace> {
    if enc.input_size() != v.d_v() {
        return Err(Error::shape("encoder input width", enc.input_size(), v.d_v()));
    }
    let segments = temporal_pool(v, n_e)?;
    let mut state = LstmState::zeros(enc.hidden_size());
    let mut hiddens = Vec::with_capacity(n_e);
    let mut outputs = Vec::with_capacity(n_e);
    let mut caches = Vec::with_capacity(n_e);
    let mut masks = Vec::with_capacity(n_e);
    for e in &segments.means {
        let (next, cache) = lstm_forward(e, &state, enc)?;
        let (out, mask) = dropout(&next.h, dropout_rate, mode, rng)?;
        hiddens.push(next.h.clone());
        outputs.push(out);
        caches.push(cache);
        masks.push(mask);
        state = next;
    }
    Ok(EncoderTrace {
        segments,
        hiddens,
        outputs,
        caches,
        masks,
    })
}

/// `y = [mean of all frames, mean of encoder outputs]`.
pub fn fuse(v: &FeatureMatrix, h_seq: &[Vector]) -> Result<FusedContext> {
    let v_bar = mean_of(v.frames()).ok_or(Error::EmptyInput("fuse: frames"))?;
    let h_bar = mean_of(h_seq).ok_or(Error::EmptyInput("fuse: encoder outputs"))?;
    Ok(FusedContext {
        y: v_bar.concat(&h_bar),
        feature_dim: v.d_v(),
    })
}

/// Gradients of the encoder path given `dL/dy`.
#[derive(Clone, Debug)]
pub struct EncoderGrads {
    pub frames: Vec<Vector>,
}

/// Backpropagates `grad_y` through fusion, the encoder LSTM and the pooling.
/// Encoder parameter gradients are added into `grads`.
pub fn encoder_backward(
    grad_y: &Vector,
    v: &FeatureMatrix,
    trace: &EncoderTrace,
    enc: &LstmParams,
    grads: &mut LstmParams,
    fault: BackwardFault,
) -> Result<EncoderGrads> {
    let d_v = v.d_v();
    if grad_y.len() != d_v + enc.hidden_size() {
        return Err(Error::shape("encoder_backward", d_v + enc.hidden_size(), grad_y.len()));
    }
    let (g_vbar, g_hbar) = grad_y.split_at(d_v);
    let n_e = trace.hiddens.len();
    let g_out = g_hbar.scale(1.0 / n_e as f64);

    let hidden = enc.hidden_size();
    let mut dh_next = Vector::zeros(hidden);
    let mut dc_next = Vector::zeros(hidden);
    let mut seg_grads = vec![Vector::zeros(d_v); n_e];
    for t in (0..n_e).rev() {
        let mut dh = dropout_backward(&g_out, &trace.masks[t])?;
        dh.add_assign(&dh_next)?;
        let step = lstm_backward_with(&dh, &dc_next, &trace.caches[t], enc, grads, fault)?;
        seg_grads[t] = step.x;
        dh_next = step.h_prev;
        dc_next = step.c_prev;
    }

    let mut frames = temporal_pool_backward(&trace.segments.bounds, &seg_grads, v.n_v());
    let share = g_vbar.scale(1.0 / v.n_v() as f64);
    for f in frames.iter_mut() {
        f.add_assign(&share)?;
    }
    Ok(EncoderGrads { frames })
}
