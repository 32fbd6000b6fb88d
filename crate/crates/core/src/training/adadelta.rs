use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::nn::ParamSet;

/// Adadelta with a global multiplier on the update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdadeltaConfig {
    pub rho: f64,
    pub epsilon: f64,
    pub lr_scale: f64,
}

impl Default for AdadeltaConfig {
    fn default() -> Self {
        AdadeltaConfig {
            rho: 0.95,
            epsilon: 1e-6,
            lr_scale: 1.0,
        }
    }
}

impl AdadeltaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::config(format!("rho must lie in (0, 1), got {}", self.rho)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::config("epsilon must be positive"));
        }
        if !(self.lr_scale > 0.0 && self.lr_scale.is_finite()) {
            return Err(Error::config("lr_scale must be positive"));
        }
        Ok(())
    }
}

/// Running averages `E[g²]` and `E[Δ²]`, shaped like the parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdadeltaState {
    pub config: AdadeltaConfig,
    pub sq_grad: ModelParams,
    pub sq_delta: ModelParams,
}

impl AdadeltaState {
    pub fn new(params: &ModelParams, config: AdadeltaConfig) -> Self {
        AdadeltaState {
            config,
            sq_grad: params.zeros_like(),
            sq_delta: params.zeros_like(),
        }
    }

    /// One in-place update:
    ///
    /// ```text
    /// E[g²] ← ρ E[g²] + (1 − ρ) g²
    /// Δ     = sqrt(E[Δ²] + ε) / sqrt(E[g²] + ε) · g
    /// E[Δ²] ← ρ E[Δ²] + (1 − ρ) Δ²
    /// θ     ← θ − lr_scale · Δ
    /// ```
    pub fn step(&mut self, params: &mut ModelParams, grads: &ModelParams) -> Result<()> {
        if params.dims() != grads.dims() || params.dims() != self.sq_grad.dims() {
            return Err(Error::shape(
                "adadelta_step",
                format!("{:?}", params.dims()),
                format!("{:?}", grads.dims()),
            ));
        }
        let AdadeltaConfig { rho, epsilon, lr_scale } = self.config;
        let g_all = grads.named_tensors();
        let p_all = params.named_tensors_mut();
        let eg_all = self.sq_grad.named_tensors_mut();
        let ed_all = self.sq_delta.named_tensors_mut();
        for ((((_, p), (_, g)), (_, eg)), (_, ed)) in p_all.into_iter().zip(g_all).zip(eg_all).zip(ed_all) {
            for k in 0..p.len() {
                eg[k] = rho * eg[k] + (1.0 - rho) * g[k] * g[k];
                let delta = (ed[k] + epsilon).sqrt() / (eg[k] + epsilon).sqrt() * g[k];
                ed[k] = rho * ed[k] + (1.0 - rho) * delta * delta;
                p[k] -= lr_scale * delta;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InitScheme, ModelDims};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dims() -> ModelDims {
        ModelDims {
            feature_dim: 3,
            encoder_hidden: 2,
            embed_dim: 2,
            word_hidden: 2,
            mm_hidden: 2,
            vocab_size: 5,
        }
    }

    fn random(seed: u64, scale: f64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ModelParams::init(&dims(), InitScheme { scale, forget_bias: 0.5 }, &mut rng)
    }

    #[test]
    fn zero_gradient_keeps_params_and_decays() {
        let mut p = random(0, 0.5);
        let before = p.clone();
        let mut st = AdadeltaState::new(&p, AdadeltaConfig::default());
        st.step(&mut p, &random(1, 2.0)).unwrap();
        let eg = st.sq_grad.clone();
        let mut after_first = p.clone();
        st.step(&mut after_first, &p.zeros_like()).unwrap();
        assert_eq!(after_first, p);
        for ((_, a), (_, b)) in st.sq_grad.named_tensors().iter().zip(eg.named_tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(*x, 0.95 * y);
            }
        }
        let mut q = before.clone();
        let mut fresh = AdadeltaState::new(&q, AdadeltaConfig::default());
        for _ in 0..10 {
            fresh.step(&mut q, &before.zeros_like()).unwrap();
        }
        assert_eq!(q, before);
    }

    #[test]
    fn first_step_closed_form_and_direction() {
        let cfg = AdadeltaConfig { rho: 0.9, epsilon: 1e-6, lr_scale: 0.5 };
        let p0 = random(2, 0.5);
        let g = random(3, 3.0);
        let mut p = p0.clone();
        let mut st = AdadeltaState::new(&p, cfg);
        st.step(&mut p, &g).unwrap();
        for (((_, a), (_, b)), (_, gg)) in p.named_tensors().iter().zip(p0.named_tensors()).zip(g.named_tensors()) {
            for k in 0..a.len() {
                let expected = -0.5 * 1e-6f64.sqrt() / ((1.0 - 0.9) * gg[k] * gg[k] + 1e-6).sqrt() * gg[k];
                let dx = a[k] - b[k];
                assert!((dx - expected).abs() <= 1e-15 * (1.0 + b[k].abs()));
                if gg[k] != 0.0 {
                    assert_eq!(dx.signum(), -gg[k].signum());
                }
            }
        }
    }

    #[test]
    fn accumulators_non_negative_and_shape_checked() {
        let mut p = random(4, 0.5);
        let mut st = AdadeltaState::new(&p, AdadeltaConfig::default());
        for s in 0..5 {
            st.step(&mut p, &random(10 + s, 1.0)).unwrap();
        }
        for (_, t) in st.sq_grad.named_tensors().into_iter().chain(st.sq_delta.named_tensors()) {
            assert!(t.iter().all(|&x| x >= 0.0));
        }
        let other = ModelParams::zeros(&ModelDims { vocab_size: 6, ..dims() });
        assert!(matches!(st.step(&mut p, &other), Err(Error::Shape { .. })));
    }

    #[test]
    fn invalid_configs() {
        assert!(AdadeltaConfig { rho: 1.0, ..Default::default() }.validate().is_err());
        assert!(AdadeltaConfig { epsilon: 0.0, ..Default::default() }.validate().is_err());
        assert!(AdadeltaConfig { lr_scale: -1.0, ..Default::default() }.validate().is_err());
        AdadeltaConfig::default().validate().unwrap();
    }
}
