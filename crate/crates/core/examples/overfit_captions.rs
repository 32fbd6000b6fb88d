//! Memorizes ten two-event synthetic videos, then checks that greedy
//! decoding reproduces every training caption.
//!
//! cargo run --release --example overfit_captions

use std::collections::BTreeMap;
use std::time::Instant;

use tslstm::data::{decode_tokens, generate_synthetic, Split, SplitRatios, SynthConfig};
use tslstm::decoder::{greedy_decode, DecodeOptions};
use tslstm::metrics::evaluate;
use tslstm::model::encode_video;
use tslstm::training::{Criterion, TrainConfig, Trainer};

fn main() -> tslstm::Result<()> {
    let synth = SynthConfig {
        n_videos: 10,
        events_per_video: [2, 2],
        noise_std: 0.02,
        splits: SplitRatios { train: 1.0, val: 0.0 },
        seed: 11,
        ..SynthConfig::default()
    };
    let dataset = generate_synthetic(&synth)?;
    let cfg = TrainConfig {
        batch_size: 10,
        max_epochs: 2000,
        patience: 2000,
        dropout_rate: 0.0,
        encoder_dropout: false,
        n_e: 2,
        encoder_hidden: 64,
        word_hidden: 64,
        mm_hidden: 64,
        embed_dim: 64,
        min_count: 0,
        criterion: Criterion::Loss,
        validate_on: Split::Train,
        target_perplexity: Some(1.05),
        seed: 3,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let mut trainer = Trainer::new(&dataset, cfg)?;
    trainer.run(|e| {
        if e.record.epoch % 50 == 0 {
            println!("epoch {:>4}  perplexity {:.4}", e.record.epoch, e.record.val_perplexity);
        }
    })?;
    let state = trainer.state();
    let last = state.history.last().expect("at least one epoch");
    println!(
        "stopped after {} epochs ({:?}), perplexity {:.4}, {:.1}s",
        state.epoch,
        state.stopped,
        last.val_perplexity,
        start.elapsed().as_secs_f64()
    );

    let mut outputs = BTreeMap::new();
    let mut exact = 0;
    for v in &dataset.train {
        let y = encode_video(&v.features, &state.best_params, 2)?;
        let out = greedy_decode(&y, &state.best_params, 30, &DecodeOptions::default())?;
        let text = decode_tokens(out.tokens.indices(), trainer.vocab())?;
        exact += usize::from(text == v.captions[0]);
        println!("{:<10} {}", v.id, text);
        outputs.insert(v.id.clone(), text);
    }
    let report = evaluate(&outputs, &dataset.train)?;
    println!("exact {exact}/{}", dataset.train.len());
    println!("{report}");
    Ok(())
}
