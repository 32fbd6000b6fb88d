use std::fs;

use proptest::prelude::*;
use tslstm::data::{
    build_vocab, decode_tokens, encode_caption, generate_synthetic, load_dataset, read_features, save_dataset,
    tokenize, write_features, SplitRatios, SynthConfig, FEATURE_MAGIC,
};
use tslstm::encoder::FeatureMatrix;
use tslstm::tensor::Vector;
use tslstm::Error;

fn synth(n: usize, seed: u64) -> SynthConfig {
    SynthConfig {
        n_videos: n,
        seed,
        ..SynthConfig::default()
    }
}

#[test]
fn synthetic_dataset_round_trips_bit_exactly() {
    let ds = generate_synthetic(&synth(12, 4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = save_dataset(&ds, dir.path()).unwrap();
    let back = load_dataset(&manifest).unwrap();
    assert_eq!(back, ds);
    for (a, b) in back.train.iter().zip(&ds.train) {
        for (fa, fb) in a.features.frames().iter().zip(b.features.frames()) {
            for (x, y) in fa.iter().zip(fb.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}

#[test]
fn feature_file_layout_is_little_endian_frame_major() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.tslf");
    let fm = FeatureMatrix::new(vec![Vector::from(vec![1.0, 2.0, 3.0]), Vector::from(vec![-0.5, 0.25, 8.0])]).unwrap();
    write_features(&path, &fm).unwrap();
    let bytes = fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], FEATURE_MAGIC);
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
    let floats: Vec<f32> = bytes[16..].chunks(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    assert_eq!(floats, vec![1.0, 2.0, 3.0, -0.5, 0.25, 8.0]);
    assert_eq!(read_features(&path).unwrap(), fm);
}

#[test]
fn corrupted_files_name_file_and_offset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.tslf");
    let fm = FeatureMatrix::new(vec![Vector::from(vec![1.0, 2.0]); 3]).unwrap();
    write_features(&path, &fm).unwrap();
    let mut bytes = fs::read(&path).unwrap();
    bytes[16 + 4 * 3..16 + 4 * 4].copy_from_slice(&f32::INFINITY.to_le_bytes());
    fs::write(&path, &bytes).unwrap();
    match read_features(&path) {
        Err(Error::Load { path: p, offset, .. }) => {
            assert_eq!(p, path);
            assert_eq!(offset, 28);
        }
        other => panic!("{other:?}"),
    }
    fs::write(&path, &bytes[..20]).unwrap();
    assert!(matches!(read_features(&path), Err(Error::Load { .. })));
}

#[test]
fn missing_feature_file_fails_to_load() {
    let ds = generate_synthetic(&synth(5, 1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = save_dataset(&ds, dir.path()).unwrap();
    let victim = &ds.train[0].id;
    fs::remove_file(dir.path().join("features").join(format!("{victim}.tslf"))).unwrap();
    let err = load_dataset(&manifest).unwrap_err();
    assert!(err.to_string().contains(victim.as_str()), "{err}");
}

#[test]
fn msvd_ratios() {
    assert_eq!(SplitRatios::MSVD.sizes(1970).unwrap(), (1200, 100, 670));
}

#[test]
fn tokenizer_examples() {
    assert_eq!(tokenize("A man is Shooting."), ["a", "man", "is", "shooting"]);
    assert_eq!(tokenize("don't stop"), ["don", "t", "stop"]);
    assert!(tokenize("").is_empty());
    assert!(tokenize("?! ...").is_empty());
}

#[test]
fn vocabulary_ignores_validation_and_test_captions() {
    let mut ds = generate_synthetic(&synth(30, 2)).unwrap();
    let vocab_of = |ds: &tslstm::data::Dataset| {
        let corpus: Vec<Vec<String>> = ds.train.iter().flat_map(|v| v.captions.iter().map(|c| tokenize(c))).collect();
        build_vocab(&corpus, 0).unwrap()
    };
    let before = vocab_of(&ds);
    for v in ds.val.iter_mut().chain(ds.test.iter_mut()) {
        v.captions = vec!["zebra quux plonk".into()];
    }
    assert_eq!(vocab_of(&ds), before);
}

#[test]
fn same_events_same_caption() {
    let ds = generate_synthetic(&SynthConfig {
        n_videos: 200,
        n_subjects: 2,
        n_verbs: 2,
        events_per_video: [1, 1],
        ..SynthConfig::default()
    })
    .unwrap();
    let all: Vec<_> = ds.train.iter().chain(&ds.val).chain(&ds.test).collect();
    let captions: std::collections::BTreeSet<_> = all.iter().map(|v| v.captions[0].clone()).collect();
    assert_eq!(captions.len(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn encode_decode_inverse(words in proptest::collection::vec("[a-e]{1,3}", 1..12)) {
        let corpus = vec![words.clone()];
        let vocab = build_vocab(&corpus, 0).unwrap();
        let caption = encode_caption(&words, &vocab);
        let text = decode_tokens(caption.indices(), &vocab).unwrap();
        prop_assert_eq!(tokenize(&text), words.clone());
        prop_assert_eq!(encode_caption(&tokenize(&text), &vocab), caption);
    }

    #[test]
    fn tokenizer_output_is_clean(s in "\\PC{0,40}") {
        for t in tokenize(&s) {
            prop_assert!(!t.is_empty());
            prop_assert!(t.chars().all(|c| c.is_alphanumeric() || c == '_'));
            prop_assert_eq!(t.to_lowercase(), t.clone());
        }
    }
}
