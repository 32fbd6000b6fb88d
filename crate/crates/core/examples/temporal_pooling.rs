//! Segment bounds, segment means and the fused context for one video.
//!
//! cargo run --example temporal_pooling

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tslstm::encoder::{encode, fuse, segment_bounds, temporal_pool, FeatureMatrix};
use tslstm::nn::LstmParams;
use tslstm::tensor::Vector;

fn main() -> tslstm::Result<()> {
    // 10 frames of a 2-d feature: the first coordinate counts frames.
    let frames = (0..10).map(|t| Vector::from(vec![t as f64, 1.0])).collect();
    let video = FeatureMatrix::new(frames)?;

    for n_e in [1, 3, 10] {
        let bounds = segment_bounds(video.n_v(), n_e)?;
        let pooled = temporal_pool(&video, n_e)?;
        println!("n_e = {n_e:>2}: segments {bounds:?}");
        for m in &pooled.means {
            println!("        mean {:?}", m.as_slice());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let encoder = LstmParams::init(2, 4, 0.08, 1.0, &mut rng);
    let (hiddens, _) = encode(&video, 3, &encoder)?;
    let y = fuse(&video, &hiddens)?;
    let (v_bar, h_bar) = y.parts();
    println!("fused context: width {} = {} (mean frame) + {} (mean hidden)", y.width(), v_bar.len(), h_bar.len());
    println!("  mean frame  {:?}", v_bar.as_slice());
    println!("  mean hidden {:?}", h_bar.as_slice());
    Ok(())
}
