//! Tokenization, vocabulary, the on-disk corpus format and the synthetic
//! event-world generator.

mod dataset;
mod synth;
mod tokenize;
mod vocab;

pub use dataset::{
    feature_file_name, load_dataset, read_features, save_dataset, write_features, Dataset,
    Manifest, ManifestSplits, Split, SplitRatios, VideoSample, FEATURE_MAGIC, FEATURE_VERSION,
};
pub use synth::{
    caption_for, generate_synthetic, generate_videos, render_video, subject_name, verb_name,
    Event, EventWorld, SynthConfig, SyntheticVideo,
};
pub use tokenize::tokenize;
pub use vocab::{
    build_vocab, decode_tokens, encode_caption, Vocabulary, BOS, EOS, PAD, RESERVED, UNK,
};
