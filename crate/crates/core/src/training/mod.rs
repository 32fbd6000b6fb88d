//! Optimization: adadelta, element-wise clipping, the epoch loop with early
//! stopping, checkpoints and the finite-difference gradient check.

mod adadelta;
mod batch;
mod checkpoint;
mod clip;
mod config;
mod gradcheck;
mod trainer;

pub use adadelta::{AdadeltaConfig, AdadeltaState};
pub use batch::{bucket_batches, pad_captions, unpad};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use clip::clip_gradients;
pub use config::{Criterion, TrainConfig};
pub use gradcheck::{gradcheck_sample, gradient_check, relative_error, GradCheckConfig, GradCheckReport, TensorCheck};
pub use trainer::{
    train, validation_loss, EpochLog, EpochRecord, StopReason, TrainOutcome, TrainState, Trainer, TrainingLog,
    CODE_VERSION,
};
