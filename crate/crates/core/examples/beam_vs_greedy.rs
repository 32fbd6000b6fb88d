//! Greedy decoding against beam search of growing width on random models.
//!
//! cargo run --release --example beam_vs_greedy

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tslstm::decoder::{beam_search, greedy_decode, DecodeOptions};
use tslstm::encoder::FusedContext;
use tslstm::model::{InitScheme, ModelDims, ModelParams};
use tslstm::tensor::Vector;

fn main() -> tslstm::Result<()> {
    let dims = ModelDims {
        feature_dim: 4,
        encoder_hidden: 3,
        embed_dim: 4,
        word_hidden: 6,
        mm_hidden: 6,
        vocab_size: 10,
    };
    let opts = DecodeOptions::default();
    println!("{:>5} {:>10} {:>10} {:>10} {:>10}", "model", "greedy", "beam 2", "beam 5", "beam 20");
    for seed in 0..8 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ModelParams::init(&dims, InitScheme { scale: 1.0, forget_bias: 1.0 }, &mut rng);
        let y = FusedContext {
            y: Vector::from(vec![0.5, -0.2, 0.1, 0.9, 0.0, 0.3, -0.4]),
            feature_dim: 4,
        };
        let g = greedy_decode(&y, &params, 6, &opts)?;
        let mut row = format!("{seed:>5} {:>10.4}", g.log_prob);
        for w in [2, 5, 20] {
            row += &format!(" {:>10.4}", beam_search(&y, &params, w, 6, &opts)?.log_prob);
        }
        println!("{row}");
    }
    println!("\ncolumns are summed log-probabilities of the returned caption");
    Ok(())
}
