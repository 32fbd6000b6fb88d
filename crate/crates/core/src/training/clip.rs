use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::nn::ParamSet;

/// Clamps every gradient entry into `[-threshold, threshold]`; returns how
/// many entries were changed.
pub fn clip_gradients(grads: &mut ModelParams, threshold: f64) -> Result<usize> {
    if !(threshold > 0.0) {
        return Err(Error::config(format!("clip threshold must be positive, got {threshold}")));
    }
    let mut clipped = 0;
    for (_, t) in grads.named_tensors_mut() {
        for x in t.iter_mut() {
            if x.abs() > threshold {
                *x = x.clamp(-threshold, threshold);
                clipped += 1;
            }
        }
    }
    Ok(clipped)
}
