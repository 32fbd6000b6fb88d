//! Standard and multi-modal LSTM cells with hand-derived backward passes.
//!
//! Gate blocks are stored in the order forget, input, output, candidate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{named, ParamSet};
use crate::tensor::{sigmoid_scalar, Matrix, Vector};

pub const GATE_NAMES: [&str; 4] = ["f", "i", "o", "g"];
const FORGET: usize = 0;
const INPUT: usize = 1;
const OUTPUT: usize = 2;
const CANDIDATE: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub w_x: [Matrix; 4],
    pub w_h: [Matrix; 4],
    pub b: [Vector; 4],
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w_x: std::array::from_fn(|_| Matrix::zeros(hidden, input)),
            w_h: std::array::from_fn(|_| Matrix::zeros(hidden, hidden)),
            b: std::array::from_fn(|_| Vector::zeros(hidden)),
        }
    }

    /// Weights uniform in `[-scale, scale]`, biases zero except the forget gate.
    pub fn init<R: Rng>(input: usize, hidden: usize, scale: f64, forget_bias: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(input, hidden);
        for m in p.w_x.iter_mut().chain(p.w_h.iter_mut()) {
            fill_uniform(m.as_mut_slice(), scale, rng);
        }
        p.b[FORGET] = Vector::filled(hidden, forget_bias);
        p
    }

    pub fn input_size(&self) -> usize {
        self.w_x[0].cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_x[0].rows()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_size(), self.hidden_size())
    }

    fn check(&self) -> Result<()> {
        let (h, x) = self.w_x[0].shape();
        for k in 0..4 {
            if self.w_x[k].shape() != (h, x) || self.w_h[k].shape() != (h, h) || self.b[k].len() != h {
                return Err(Error::shape(
                    "LstmParams",
                    format!("gate {} blocks", GATE_NAMES[k]),
                    format!("hidden {h}, input {x}"),
                ));
            }
        }
        Ok(())
    }
}

impl ParamSet for LstmParams {
    fn named_tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::with_capacity(12);
        for (k, gate) in GATE_NAMES.iter().enumerate() {
            out.push((named("w_x", gate), self.w_x[k].as_slice()));
            out.push((named("w_h", gate), self.w_h[k].as_slice()));
            out.push((named("b", gate), self.b[k].as_slice()));
        }
        out
    }

    fn named_tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = Vec::with_capacity(12);
        for (k, ((wx, wh), b)) in self
            .w_x
            .iter_mut()
            .zip(self.w_h.iter_mut())
            .zip(self.b.iter_mut())
            .enumerate()
        {
            out.push((named("w_x", GATE_NAMES[k]), wx.as_mut_slice()));
            out.push((named("w_h", GATE_NAMES[k]), wh.as_mut_slice()));
            out.push((named("b", GATE_NAMES[k]), b.as_mut_slice()));
        }
        out
    }
}

/// Multi-modal LSTM: every gate also receives a context vector through `w_y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlstmParams {
    pub cell: LstmParams,
    pub w_y: [Matrix; 4],
}

impl MlstmParams {
    pub fn zeros(input: usize, context: usize, hidden: usize) -> Self {
        MlstmParams {
            cell: LstmParams::zeros(input, hidden),
            w_y: std::array::from_fn(|_| Matrix::zeros(hidden, context)),
        }
    }

    pub fn init<R: Rng>(
        input: usize,
        context: usize,
        hidden: usize,
        scale: f64,
        forget_bias: f64,
        rng: &mut R,
    ) -> Self {
        let cell = LstmParams::init(input, hidden, scale, forget_bias, rng);
        let mut w_y: [Matrix; 4] = std::array::from_fn(|_| Matrix::zeros(hidden, context));
        for m in w_y.iter_mut() {
            fill_uniform(m.as_mut_slice(), scale, rng);
        }
        MlstmParams { cell, w_y }
    }

    pub fn context_size(&self) -> usize {
        self.w_y[0].cols()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.cell.input_size(), self.context_size(), self.cell.hidden_size())
    }
}

impl ParamSet for MlstmParams {
    fn named_tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = self.cell.named_tensors();
        for (k, gate) in GATE_NAMES.iter().enumerate() {
            out.push((named("w_y", gate), self.w_y[k].as_slice()));
        }
        out
    }

    fn named_tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = self.cell.named_tensors_mut();
        for (k, m) in self.w_y.iter_mut().enumerate() {
            out.push((named("w_y", GATE_NAMES[k]), m.as_mut_slice()));
        }
        out
    }
}

pub(crate) fn fill_uniform<R: Rng + ?Sized>(xs: &mut [f64], scale: f64, rng: &mut R) {
    if scale == 0.0 {
        return;
    }
    for x in xs {
        *x = rng.random_range(-scale..=scale);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub h: Vector,
    pub c: Vector,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: Vector::zeros(hidden),
            c: Vector::zeros(hidden),
        }
    }
}

/// Everything one forward step needs to keep for its backward step.
#[derive(Clone, Debug)]
pub struct CellCache {
    pub x: Vector,
    pub context: Option<Vector>,
    pub h_prev: Vector,
    pub c_prev: Vector,
    pub f: Vector,
    pub i: Vector,
    pub o: Vector,
    pub g: Vector,
    pub c: Vector,
    pub tanh_c: Vector,
}

/// Gradients flowing out of one backward step.
#[derive(Clone, Debug)]
pub struct CellGrads {
    pub x: Vector,
    pub context: Option<Vector>,
    pub h_prev: Vector,
    pub c_prev: Vector,
}

/// Deliberate backward-pass defects, used to show that the gradient check
/// catches a broken BPTT implementation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackwardFault {
    #[default]
    None,
    /// Omit the `dc ⊙ c_{t-1}` contribution to the forget-gate gradient.
    DropPrevCellTerm,
}

fn cell_forward(
    x: &Vector,
    context: Option<(&Vector, &[Matrix; 4])>,
    prev: &LstmState,
    p: &LstmParams,
) -> Result<(LstmState, CellCache)> {
    p.check()?;
    let hidden = p.hidden_size();
    if x.len() != p.input_size() {
        return Err(Error::shape("lstm input", p.input_size(), x.len()));
    }
    if prev.h.len() != hidden || prev.c.len() != hidden {
        return Err(Error::shape(
            "lstm state",
            hidden,
            format!("h {}, c {}", prev.h.len(), prev.c.len()),
        ));
    }
    let mut pre: [Vector; 4] = std::array::from_fn(|_| Vector::zeros(0));
    for k in 0..4 {
        let mut z = p.w_x[k].matvec(x)?;
        z.add_assign(&p.w_h[k].matvec(&prev.h)?)?;
        if let Some((y, w_y)) = context {
            z.add_assign(&w_y[k].matvec(y)?)?;
        }
        z.add_assign(&p.b[k])?;
        pre[k] = z;
    }
    let f = pre[FORGET].map(sigmoid_scalar);
    let i = pre[INPUT].map(sigmoid_scalar);
    let o = pre[OUTPUT].map(sigmoid_scalar);
    let g = pre[CANDIDATE].map(f64::tanh);
    let c = Vector::from(
        (0..hidden)
            .map(|k| f[k] * prev.c[k] + i[k] * g[k])
            .collect::<Vec<_>>(),
    );
    let tanh_c = c.map(f64::tanh);
    let h = o.hadamard(&tanh_c)?;
    let cache = CellCache {
        x: x.clone(),
        context: context.map(|(y, _)| y.clone()),
        h_prev: prev.h.clone(),
        c_prev: prev.c.clone(),
        f,
        i,
        o,
        g,
        c: c.clone(),
        tanh_c,
    };
    Ok((LstmState { h, c }, cache))
}

/// Gate pre-activation gradients `[dz_f, dz_i, dz_o, dz_g]` and `dc_{t-1}`.
fn gate_grads(
    grad_h: &Vector,
    grad_c: &Vector,
    cache: &CellCache,
    fault: BackwardFault,
) -> ([Vector; 4], Vector) {
    let n = cache.c.len();
    let mut dz: [Vector; 4] = std::array::from_fn(|_| Vector::zeros(n));
    let mut dc_prev = Vector::zeros(n);
    for k in 0..n {
        let (f, i, o, g, tc) = (cache.f[k], cache.i[k], cache.o[k], cache.g[k], cache.tanh_c[k]);
        let dh = grad_h[k];
        let dc = grad_c[k] + dh * o * (1.0 - tc * tc);
        let df = match fault {
            BackwardFault::None => dc * cache.c_prev[k],
            BackwardFault::DropPrevCellTerm => 0.0,
        };
        dz[FORGET][k] = df * f * (1.0 - f);
        dz[INPUT][k] = dc * g * i * (1.0 - i);
        dz[OUTPUT][k] = dh * tc * o * (1.0 - o);
        dz[CANDIDATE][k] = dc * i * (1.0 - g * g);
        dc_prev[k] = dc * f;
    }
    (dz, dc_prev)
}

fn check_grad_shapes(grad_h: &Vector, grad_c: &Vector, cache: &CellCache, p: &LstmParams) -> Result<()> {
    let hidden = p.hidden_size();
    if cache.c.len() != hidden || cache.x.len() != p.input_size() {
        return Err(Error::shape(
            "lstm backward cache",
            format!("hidden {hidden}, input {}", p.input_size()),
            format!("hidden {}, input {}", cache.c.len(), cache.x.len()),
        ));
    }
    if grad_h.len() != hidden || grad_c.len() != hidden {
        return Err(Error::shape(
            "lstm backward upstream",
            hidden,
            format!("h {}, c {}", grad_h.len(), grad_c.len()),
        ));
    }
    Ok(())
}

fn accumulate_cell(dz: &[Vector; 4], cache: &CellCache, p: &LstmParams, grads: &mut LstmParams) -> Result<(Vector, Vector)> {
    let mut dx = Vector::zeros(p.input_size());
    let mut dh_prev = Vector::zeros(p.hidden_size());
    for k in 0..4 {
        grads.w_x[k].add_outer(&dz[k], &cache.x)?;
        grads.w_h[k].add_outer(&dz[k], &cache.h_prev)?;
        grads.b[k].add_assign(&dz[k])?;
        dx.add_assign(&p.w_x[k].matvec_transposed(&dz[k])?)?;
        dh_prev.add_assign(&p.w_h[k].matvec_transposed(&dz[k])?)?;
    }
    Ok((dx, dh_prev))
}

/// One LSTM step: `h, c = LSTM(x, h_prev, c_prev)`.
pub fn lstm_forward(x: &Vector, prev: &LstmState, p: &LstmParams) -> Result<(LstmState, CellCache)> {
    cell_forward(x, None, prev, p)
}

/// Backward through one LSTM step. Parameter gradients are added into `grads`.
pub fn lstm_backward(
    grad_h: &Vector,
    grad_c: &Vector,
    cache: &CellCache,
    p: &LstmParams,
    grads: &mut LstmParams,
) -> Result<CellGrads> {
    lstm_backward_with(grad_h, grad_c, cache, p, grads, BackwardFault::None)
}

pub fn lstm_backward_with(
    grad_h: &Vector,
    grad_c: &Vector,
    cache: &CellCache,
    p: &LstmParams,
    grads: &mut LstmParams,
    fault: BackwardFault,
) -> Result<CellGrads> {
    check_grad_shapes(grad_h, grad_c, cache, p)?;
    let (dz, dc_prev) = gate_grads(grad_h, grad_c, cache, fault);
    let (dx, dh_prev) = accumulate_cell(&dz, cache, p, grads)?;
    Ok(CellGrads {
        x: dx,
        context: None,
        h_prev: dh_prev,
        c_prev: dc_prev,
    })
}

/// One multi-modal LSTM step with word feature `q` and video context `y`.
pub fn mlstm_forward(q: &Vector, y: &Vector, prev: &LstmState, p: &MlstmParams) -> Result<(LstmState, CellCache)> {
    if y.len() != p.context_size() {
        return Err(Error::shape("mlstm context", p.context_size(), y.len()));
    }
    cell_forward(q, Some((y, &p.w_y)), prev, &p.cell)
}

/// Backward through one multi-modal step; `grads.context` is this step's
/// contribution to the gradient of `y`, to be summed over all steps.
pub fn mlstm_backward(
    grad_h: &Vector,
    grad_c: &Vector,
    cache: &CellCache,
    p: &MlstmParams,
    grads: &mut MlstmParams,
) -> Result<CellGrads> {
    mlstm_backward_with(grad_h, grad_c, cache, p, grads, BackwardFault::None)
}

pub fn mlstm_backward_with(
    grad_h: &Vector,
    grad_c: &Vector,
    cache: &CellCache,
    p: &MlstmParams,
    grads: &mut MlstmParams,
    fault: BackwardFault,
) -> Result<CellGrads> {
    check_grad_shapes(grad_h, grad_c, cache, &p.cell)?;
    let y = cache
        .context
        .as_ref()
        .ok_or_else(|| Error::shape("mlstm backward", "cache with context", "cache without context"))?;
    if y.len() != p.context_size() {
        return Err(Error::shape("mlstm backward context", p.context_size(), y.len()));
    }
    let (dz, dc_prev) = gate_grads(grad_h, grad_c, cache, fault);
    let (dx, dh_prev) = accumulate_cell(&dz, cache, &p.cell, &mut grads.cell)?;
    let mut dy = Vector::zeros(p.context_size());
    for k in 0..4 {
        grads.w_y[k].add_outer(&dz[k], y)?;
        dy.add_assign(&p.w_y[k].matvec_transposed(&dz[k])?)?;
    }
    Ok(CellGrads {
        x: dx,
        context: Some(dy),
        h_prev: dh_prev,
        c_prev: dc_prev,
    })
}
