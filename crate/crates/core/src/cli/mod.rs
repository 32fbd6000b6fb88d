//! Library side of the `tslstm` command: a JSON run configuration and one
//! function per subcommand. Each command validates its whole configuration
//! before touching the filesystem.

mod commands;
mod config;

pub use commands::{
    caption_videos, cmd_ablate_ne, cmd_caption, cmd_eval, cmd_gradcheck, cmd_synth, cmd_train, AblationRow,
    AblationTable, CaptionFile, SynthSummary, TrainSummary,
};
pub use config::{AblateConfig, DecodeConfig, Overrides, Paths, RunConfig};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_GRADCHECK: i32 = 3;

/// Validation problems exit with 1, everything else with 2.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_VALIDATION,
        _ => EXIT_RUNTIME,
    }
}
