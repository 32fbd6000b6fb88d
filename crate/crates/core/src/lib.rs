//! Video captioning with a temporal-pooling LSTM encoder and a stacked
//! multi-modal LSTM decoder, written from scratch on `f64` vectors.
//!
//! Frames are averaged over `n_e` contiguous segments, an LSTM runs over the
//! segment means, and the fused context `[mean frame, mean hidden]` is fed to
//! every gate of the second decoder layer. Training is teacher-forced with
//! hand-derived backpropagation through time and adadelta.

pub mod cli;
pub mod data;
pub mod decoder;
pub mod encoder;
pub mod error;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
