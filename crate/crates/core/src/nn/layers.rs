use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ParamSet;
use crate::tensor::{softmax, Matrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// Word embedding matrix, one column per vocabulary entry (`embed_dim × vocab`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingParams {
    pub w_s: Matrix,
}

impl EmbeddingParams {
    pub fn vocab_size(&self) -> usize {
        self.w_s.cols()
    }

    pub fn embed_dim(&self) -> usize {
        self.w_s.rows()
    }

    pub fn zeros_like(&self) -> Self {
        EmbeddingParams {
            w_s: Matrix::zeros(self.embed_dim(), self.vocab_size()),
        }
    }
}

impl ParamSet for EmbeddingParams {
    fn named_tensors(&self) -> Vec<(String, &[f64])> {
        vec![("w_s".to_string(), self.w_s.as_slice())]
    }

    fn named_tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        vec![("w_s".to_string(), self.w_s.as_mut_slice())]
    }
}

/// `W_s · one_hot(token)`, i.e. column `token` of the embedding matrix.
pub fn embed(token: usize, p: &EmbeddingParams) -> Result<Vector> {
    if token >= p.vocab_size() {
        return Err(Error::Vocabulary {
            index: token,
            size: p.vocab_size(),
        });
    }
    Ok(p.w_s.column(token))
}

/// Adds `grad` into column `token` of `grads.w_s`; no other column is touched.
pub fn embed_backward(token: usize, grad: &Vector, grads: &mut EmbeddingParams) -> Result<()> {
    if token >= grads.vocab_size() {
        return Err(Error::Vocabulary {
            index: token,
            size: grads.vocab_size(),
        });
    }
    if grad.len() != grads.embed_dim() {
        return Err(Error::shape("embed_backward", grads.embed_dim(), grad.len()));
    }
    for i in 0..grad.len() {
        grads.w_s[(i, token)] += grad[i];
    }
    Ok(())
}

/// Softmax head: `W_f` is `vocab × hidden`, `b_f` has one entry per word.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputParams {
    pub w_f: Matrix,
    pub b_f: Vector,
}

impl OutputParams {
    pub fn zeros(vocab: usize, hidden: usize) -> Self {
        OutputParams {
            w_f: Matrix::zeros(vocab, hidden),
            b_f: Vector::zeros(vocab),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.w_f.rows(), self.w_f.cols())
    }
}

impl ParamSet for OutputParams {
    fn named_tensors(&self) -> Vec<(String, &[f64])> {
        vec![
            ("w_f".to_string(), self.w_f.as_slice()),
            ("b_f".to_string(), self.b_f.as_slice()),
        ]
    }

    fn named_tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        vec![
            ("w_f".to_string(), self.w_f.as_mut_slice()),
            ("b_f".to_string(), self.b_f.as_mut_slice()),
        ]
    }
}

pub fn project_logits(h: &Vector, p: &OutputParams) -> Result<Vector> {
    if p.b_f.len() != p.w_f.rows() {
        return Err(Error::shape("output bias", p.w_f.rows(), p.b_f.len()));
    }
    let mut z = p.w_f.matvec(h)?;
    z.add_assign(&p.b_f)?;
    Ok(z)
}

/// `softmax(W_f · h + b_f)`.
pub fn project_softmax(h: &Vector, p: &OutputParams) -> Result<Vector> {
    Ok(softmax(&project_logits(h, p)?))
}

/// Backward of `-scale · ln p[target]` through the softmax head.
///
/// The logit gradient is `scale · (p - one_hot(target))`. Returns the
/// gradient with respect to `h`.
pub fn output_backward(
    h: &Vector,
    probs: &Vector,
    target: usize,
    scale: f64,
    p: &OutputParams,
    grads: &mut OutputParams,
) -> Result<Vector> {
    if target >= probs.len() {
        return Err(Error::Vocabulary {
            index: target,
            size: probs.len(),
        });
    }
    let mut dz = probs.scale(scale);
    dz[target] -= scale;
    grads.w_f.add_outer(&dz, h)?;
    grads.b_f.add_assign(&dz)?;
    p.w_f.matvec_transposed(&dz)
}

/// Inverted dropout. The returned mask already carries the `1/(1-rate)`
/// survivor scale, so the backward pass is `grad ⊙ mask`.
pub fn dropout<R: Rng + ?Sized>(x: &Vector, rate: f64, mode: Mode, rng: &mut R) -> Result<(Vector, Vector)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::config(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((x.clone(), Vector::filled(x.len(), 1.0)));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask = Vector::from(
        (0..x.len())
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect::<Vec<_>>(),
    );
    Ok((x.hadamard(&mask)?, mask))
}

pub fn dropout_backward(grad: &Vector, mask: &Vector) -> Result<Vector> {
    grad.hadamard(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::log_softmax;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn embed_selects_columns() {
        let p = EmbeddingParams {
            w_s: Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap(),
        };
        assert_eq!(embed(0, &p).unwrap().as_slice(), &[1.0, 4.0]);
        assert_ne!(embed(1, &p).unwrap(), embed(2, &p).unwrap());
        assert!(matches!(embed(3, &p), Err(Error::Vocabulary { index: 3, size: 3 })));
    }

    #[test]
    fn embed_backward_scatters_one_column() {
        let mut g = EmbeddingParams {
            w_s: Matrix::zeros(2, 4),
        };
        embed_backward(2, &Vector::from(vec![0.5, -1.0]), &mut g).unwrap();
        embed_backward(2, &Vector::from(vec![0.5, 0.0]), &mut g).unwrap();
        assert_eq!(g.w_s.column(2).as_slice(), &[1.0, -1.0]);
        for j in [0, 1, 3] {
            assert_eq!(g.w_s.column(j).max_abs(), 0.0);
        }
    }

    #[test]
    fn zero_head_is_uniform() {
        let p = OutputParams::zeros(5, 3);
        let probs = project_softmax(&Vector::from(vec![1.0, -2.0, 0.5]), &p).unwrap();
        for v in probs.iter() {
            assert!((v - 0.2).abs() < 1e-16);
        }
    }

    #[test]
    fn head_outputs_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut p = OutputParams::zeros(7, 4);
        crate::nn::fill_uniform(p.w_f.as_mut_slice(), 2.0, &mut rng);
        crate::nn::fill_uniform(p.b_f.as_mut_slice(), 2.0, &mut rng);
        for _ in 0..50 {
            let mut h = Vector::zeros(4);
            crate::nn::fill_uniform(h.as_mut_slice(), 1.0, &mut rng);
            let probs = project_softmax(&h, &p).unwrap();
            assert!((probs.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_logit_gradient_matches_finite_differences() {
        // Identity head, so h plays the role of the logits and dL/dh = p - onehot.
        let mut p = OutputParams::zeros(4, 4);
        p.w_f = Matrix::identity(4);
        let logits = Vector::from(vec![0.2, -1.3, 0.7, 0.05]);
        let target = 2;
        let probs = project_softmax(&logits, &p).unwrap();
        let mut grads = p.zeros_like();
        let dh = output_backward(&logits, &probs, target, 1.0, &p, &mut grads).unwrap();
        let eps = 1e-5;
        for k in 0..4 {
            let mut plus = logits.clone();
            plus[k] += eps;
            let mut minus = logits.clone();
            minus[k] -= eps;
            let fd = (-log_softmax(&plus)[target] + log_softmax(&minus)[target]) / (2.0 * eps);
            let expected = probs[k] - if k == target { 1.0 } else { 0.0 };
            assert!((dh[k] - expected).abs() < 1e-15);
            assert!((fd - expected).abs() / expected.abs() < 1e-8, "k={k} fd={fd} an={expected}");
        }
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Vector::from(vec![1.0, -2.0, 3.0]);
        for mode in [Mode::Train, Mode::Eval] {
            let (y, mask) = dropout(&x, 0.0, mode, &mut rng).unwrap();
            assert_eq!(y, x);
            assert_eq!(mask.as_slice(), &[1.0; 3]);
        }
        let (y, _) = dropout(&x, 0.5, Mode::Eval, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(matches!(dropout(&x, 1.0, Mode::Train, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn dropout_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let x = Vector::from(vec![1.5, -0.5, 2.0, 4.0]);
        let n = 100_000;
        let mut survivors = 0usize;
        let mut sums = [0.0; 4];
        for _ in 0..n {
            let (y, mask) = dropout(&x, 0.5, Mode::Train, &mut rng).unwrap();
            survivors += mask.iter().filter(|&&m| m != 0.0).count();
            for k in 0..4 {
                sums[k] += y[k];
            }
        }
        let frac = survivors as f64 / (4 * n) as f64;
        assert!((frac - 0.5).abs() < 0.01, "survivor fraction {frac}");
        for k in 0..4 {
            let mean = sums[k] / n as f64;
            assert!((mean - x[k]).abs() < 0.02 * x[k].abs(), "coord {k}: {mean}");
        }
    }
}
