//! Trains one small model per number of temporal segments on the same
//! synthetic corpus and prints a comparison table.
//!
//! cargo run --release --example ablate_segments

use tslstm::cli::{cmd_ablate_ne, RunConfig};
use tslstm::data::{Split, SplitRatios, SynthConfig};
use tslstm::training::TrainConfig;

fn main() -> tslstm::Result<()> {
    let cfg = RunConfig {
        split: Split::Test,
        synth: SynthConfig {
            n_videos: 60,
            frames_per_event: [12, 16],
            splits: SplitRatios { train: 0.7, val: 0.15 },
            ..SynthConfig::default()
        },
        train: TrainConfig {
            batch_size: 8,
            max_epochs: 300,
            patience: 15,
            dropout_rate: 0.1,
            encoder_hidden: 24,
            word_hidden: 24,
            mm_hidden: 24,
            embed_dim: 16,
            min_count: 0,
            ..TrainConfig::default()
        },
        ablate: tslstm::cli::AblateConfig { values: vec![1, 3, 24] },
        paths: tslstm::cli::Paths {
            out: std::env::temp_dir().join("tslstm-ablation"),
            ..Default::default()
        },
        ..RunConfig::default()
    };
    let table = cmd_ablate_ne(&cfg, |n_e, e| {
        if e.record.improved {
            eprintln!("n_e {n_e:>2} epoch {:>3} val loss {:.4}", e.record.epoch, e.record.val_loss);
        }
    })?;
    println!("{table}");
    Ok(())
}
