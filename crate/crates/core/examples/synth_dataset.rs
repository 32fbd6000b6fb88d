//! Generates a small synthetic corpus, writes it to disk and loads it back.
//!
//! cargo run --example synth_dataset [OUT_DIR]

use std::path::PathBuf;

use tslstm::data::{build_vocab, generate_synthetic, load_dataset, save_dataset, tokenize, SynthConfig};

fn main() -> tslstm::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("tslstm-synth"), PathBuf::from);
    let cfg = SynthConfig {
        n_videos: 20,
        ..SynthConfig::default()
    };
    let ds = generate_synthetic(&cfg)?;
    for v in ds.train.iter().take(4) {
        println!("{}: {} frames  \"{}\"", v.id, v.features.n_v(), v.captions[0]);
    }

    let manifest = save_dataset(&ds, &out)?;
    let back = load_dataset(&manifest)?;
    println!("\nwrote {} and read back {} videos (identical: {})", manifest.display(), back.len(), back == ds);

    let corpus: Vec<Vec<String>> = ds.train.iter().flat_map(|v| v.captions.iter().map(|c| tokenize(c))).collect();
    let vocab = build_vocab(&corpus, 0)?;
    println!("vocabulary ({} entries): {:?}", vocab.len(), vocab.words());
    Ok(())
}
