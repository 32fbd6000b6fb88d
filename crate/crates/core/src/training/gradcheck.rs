use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::RESERVED;
use crate::decoder::CaptionTokens;
use crate::encoder::FeatureMatrix;
use crate::error::{Error, Result};
use crate::model::{sample_gradients, sample_loss, ForwardConfig, InitScheme, ModelDims, ModelParams};
use crate::nn::{BackwardFault, ParamSet};
use crate::tensor::Vector;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradCheckConfig {
    pub dims: ModelDims,
    pub n_v: usize,
    pub n_e: usize,
    /// Words in the random caption (EOS is always scored as well).
    pub caption_len: usize,
    /// Central-difference step.
    pub epsilon: f64,
    pub threshold: f64,
    /// Gradient magnitude below which the error is measured relative to this
    /// value instead; central differences carry roughly 1e-11 of absolute
    /// rounding noise, which would swamp a plain ratio for tiny gradients.
    pub noise_floor: f64,
    /// Uniform range of the random parameters; larger than the training
    /// initialization so every gate is away from its linear regime.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            dims: ModelDims {
                feature_dim: 6,
                encoder_hidden: 3,
                embed_dim: 3,
                word_hidden: 3,
                mm_hidden: 3,
                vocab_size: 8,
            },
            n_v: 6,
            n_e: 2,
            caption_len: 4,
            epsilon: 1e-5,
            threshold: 1e-4,
            noise_floor: 1e-5,
            init_scale: 0.5,
            seed: 0,
        }
    }
}

impl GradCheckConfig {
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if self.dims.vocab_size <= RESERVED.len() {
            return Err(Error::config("gradcheck vocabulary needs at least one non-reserved word"));
        }
        if self.n_e == 0 || self.n_e > self.n_v {
            return Err(Error::config(format!("gradcheck needs 1 <= n_e <= n_v, got n_e {} n_v {}", self.n_e, self.n_v)));
        }
        if !(self.epsilon > 0.0 && self.threshold > 0.0 && self.init_scale > 0.0 && self.noise_floor >= 0.0) {
            return Err(Error::config("gradcheck epsilon, threshold and init_scale must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub name: String,
    pub entries: usize,
    pub max_relative_error: f64,
    pub max_abs_gradient: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub config: GradCheckConfig,
    pub loss: f64,
    pub tensors: Vec<TensorCheck>,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&TensorCheck> {
        self.tensors
            .iter()
            .max_by(|a, b| a.max_relative_error.total_cmp(&b.max_relative_error))
    }
}

/// `|a − n| / max(|a|, |n|, floor)`; zero when both are zero.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    if denom == 0.0 {
        return 0.0;
    }
    (analytic - numeric).abs() / denom
}

/// A random model, video and caption for the given configuration.
pub fn gradcheck_sample(cfg: &GradCheckConfig) -> Result<(ModelParams, FeatureMatrix, CaptionTokens)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scheme = InitScheme {
        scale: cfg.init_scale,
        forget_bias: 0.5,
    };
    let mut params = ModelParams::init(&cfg.dims, scheme, &mut rng);
    // Non-zero biases everywhere so their gradients are exercised off zero.
    for (name, t) in params.named_tensors_mut() {
        if name.rsplit('.').next().is_some_and(|l| l.starts_with("b_")) {
            t.iter_mut().for_each(|x| *x += rng.random_range(-cfg.init_scale..cfg.init_scale));
        }
    }
    let frames = (0..cfg.n_v)
        .map(|_| Vector::from((0..cfg.dims.feature_dim).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>()))
        .collect();
    let features = FeatureMatrix::new(frames)?;
    let words: Vec<usize> = (0..cfg.caption_len)
        .map(|_| rng.random_range(RESERVED.len()..cfg.dims.vocab_size))
        .collect();
    let caption = CaptionTokens::from_words(&words, cfg.dims.vocab_size)?;
    Ok((params, features, caption))
}

/// Compares the analytic gradient of every parameter tensor and of the input
/// features with central finite differences. `fault` injects a deliberate
/// error into the backward pass.
pub fn gradient_check(cfg: &GradCheckConfig, fault: BackwardFault) -> Result<GradCheckReport> {
    let (params, features, caption) = gradcheck_sample(cfg)?;
    let fwd = ForwardConfig::eval(cfg.n_e);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let analytic = sample_gradients(&features, &caption, &params, &fwd, &mut rng, fault)?;
    let loss_of = |p: &ModelParams, v: &FeatureMatrix| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        sample_loss(v, &caption, p, &fwd, &mut rng)
    };
    let eps = cfg.epsilon;
    let mut tensors = Vec::new();

    let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
    let grad_tensors = analytic.params.named_tensors();
    for (ti, name) in names.iter().enumerate() {
        let grads = grad_tensors[ti].1;
        let mut worst = 0.0f64;
        let mut probe = params.clone();
        for k in 0..grads.len() {
            let original = probe.named_tensors()[ti].1[k];
            probe.named_tensors_mut()[ti].1[k] = original + eps;
            let plus = loss_of(&probe, &features)?;
            probe.named_tensors_mut()[ti].1[k] = original - eps;
            let minus = loss_of(&probe, &features)?;
            probe.named_tensors_mut()[ti].1[k] = original;
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(relative_error(grads[k], numeric, cfg.noise_floor));
        }
        tensors.push(TensorCheck {
            name: name.clone(),
            entries: grads.len(),
            max_relative_error: worst,
            max_abs_gradient: grads.iter().fold(0.0, |m, x| m.max(x.abs())),
            passed: worst < cfg.threshold,
        });
    }

    let mut worst = 0.0f64;
    let mut max_abs = 0.0f64;
    for t in 0..cfg.n_v {
        for k in 0..cfg.dims.feature_dim {
            let shifted = |delta: f64| -> Result<f64> {
                let mut frames = features.frames().to_vec();
                frames[t][k] += delta;
                loss_of(&params, &FeatureMatrix::new(frames)?)
            };
            let numeric = (shifted(eps)? - shifted(-eps)?) / (2.0 * eps);
            let a = analytic.frames[t][k];
            max_abs = max_abs.max(a.abs());
            worst = worst.max(relative_error(a, numeric, cfg.noise_floor));
        }
    }
    tensors.push(TensorCheck {
        name: "input.features".into(),
        entries: cfg.n_v * cfg.dims.feature_dim,
        max_relative_error: worst,
        max_abs_gradient: max_abs,
        passed: worst < cfg.threshold,
    });

    let passed = tensors.iter().all(|t| t.passed);
    Ok(GradCheckReport {
        config: cfg.clone(),
        loss: analytic.loss,
        tensors,
        passed,
    })
}
