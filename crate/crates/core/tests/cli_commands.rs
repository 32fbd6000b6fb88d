use std::fs;
use std::path::Path;
use std::process::Command;

use sha2::{Digest, Sha256};
use tslstm::cli::{self, cmd_ablate_ne, cmd_caption, cmd_eval, cmd_gradcheck, cmd_synth, cmd_train, RunConfig};
use tslstm::data::{load_dataset, Split, SplitRatios, SynthConfig};
use tslstm::training::TrainConfig;
use tslstm::Error;

fn small(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.synth = SynthConfig {
        n_videos: 16,
        feature_dim: 6,
        frames_per_event: [3, 4],
        splits: SplitRatios { train: 0.5, val: 0.25 },
        seed: 2,
        ..SynthConfig::default()
    };
    cfg.train = TrainConfig {
        batch_size: 4,
        max_epochs: 3,
        n_e: 2,
        encoder_hidden: 6,
        word_hidden: 6,
        mm_hidden: 6,
        embed_dim: 4,
        min_count: 0,
        ..TrainConfig::default()
    };
    cfg.decode.beam_width = 3;
    cfg.paths.out = out.to_path_buf();
    cfg
}

fn digest_dir(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    files
        .iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, Sha256::digest(fs::read(p).unwrap()).to_vec())
        })
        .collect()
}

#[test]
fn synth_defaults_produce_a_loadable_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.paths.out = tmp.path().join("synth");
    let summary = cmd_synth(&cfg).unwrap();
    let ds = load_dataset(&summary.manifest).unwrap();
    assert_eq!(ds.train.len() + ds.val.len() + ds.test.len(), cfg.synth.n_videos);
    assert!(ds.train.len() > ds.val.len() && ds.val.len() > 0 && ds.test.len() > 0);
    assert!(tmp.path().join("synth/synth_config.json").exists());
}

#[test]
fn synth_is_reproducible_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let mut a = small(&tmp.path().join("a"));
    a.seed = Some(42);
    let a = a.resolve(&Default::default());
    let mut b = a.clone();
    b.paths.out = tmp.path().join("b");
    cmd_synth(&a).unwrap();
    cmd_synth(&b).unwrap();
    let (da, db) = (digest_dir(&a.paths.out), digest_dir(&b.paths.out));
    // The echoed config names the output directory, everything else matches.
    let strip = |d: Vec<(String, Vec<u8>)>| d.into_iter().filter(|(n, _)| n != "synth_config.json").collect::<Vec<_>>();
    assert_eq!(strip(da.clone()), strip(db));
    let mut c = a.clone();
    c.seed = Some(43);
    c = c.resolve(&Default::default());
    c.paths.out = tmp.path().join("c");
    cmd_synth(&c).unwrap();
    assert_ne!(strip(da), strip(digest_dir(&c.paths.out)));
}

#[test]
fn single_event_videos_have_single_clause_captions() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(tmp.path());
    cfg.synth.events_per_video = [1, 1];
    let s = cmd_synth(&cfg).unwrap();
    let ds = load_dataset(&s.manifest).unwrap();
    for v in Split::ALL.iter().flat_map(|s| ds.split(*s)) {
        for c in &v.captions {
            assert!(!c.contains(" then "), "{c}");
        }
    }
}

#[test]
fn invalid_configuration_fails_before_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(&tmp.path().join("never"));
    cfg.synth.frames_per_event = [1, 1];
    cfg.synth.events_per_video = [1, 1];
    cmd_synth(&{
        let mut c = cfg.clone();
        c.paths.out = tmp.path().join("data");
        c
    })
    .unwrap();
    cfg.paths.dataset = Some(tmp.path().join("data/manifest.json"));
    cfg.train.n_e = 4;
    let err = cmd_train(&cfg, None, |_| {}).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
    assert_eq!(cli::exit_code(&err), cli::EXIT_VALIDATION);
    assert!(!cfg.paths.out.exists());

    let mut bad = small(&tmp.path().join("never2"));
    bad.decode.beam_width = 0;
    assert!(matches!(cmd_synth(&bad), Err(Error::Config(_))));
    assert!(!bad.paths.out.exists());

    let missing = Error::Load {
        path: "x".into(),
        offset: 0,
        message: "gone".into(),
    };
    assert_eq!(cli::exit_code(&missing), cli::EXIT_RUNTIME);
}

#[test]
fn train_caption_eval_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(&tmp.path().join("data"));
    let s = cmd_synth(&cfg).unwrap();
    cfg.paths.dataset = Some(s.manifest.clone());
    cfg.paths.out = tmp.path().join("run");
    let summary = cmd_train(&cfg, None, |_| {}).unwrap();
    assert_eq!(summary.epochs, 3);
    for f in ["checkpoint.json", "training_log.json", "config.json"] {
        assert!(cfg.paths.out.join(f).exists(), "{f}");
    }

    cfg.paths.checkpoint = Some(summary.checkpoint.clone());
    cfg.paths.out = tmp.path().join("cap5");
    let wide = cmd_caption(&cfg).unwrap();
    let again = cmd_caption(&cfg).unwrap();
    assert_eq!(wide.captions, again.captions);
    assert_eq!(wide.captions.len(), load_dataset(&s.manifest).unwrap().test.len());

    let mut greedy_cfg = cfg.clone();
    greedy_cfg.decode.beam_width = 1;
    greedy_cfg.paths.out = tmp.path().join("cap1");
    let greedy = cmd_caption(&greedy_cfg).unwrap();
    for (id, lp) in &wide.log_probs {
        assert!(*lp >= greedy.log_probs[id] - 1e-9, "{id}: {lp} < {}", greedy.log_probs[id]);
    }

    cfg.paths.captions = Some(cfg.paths.out.join("captions.json"));
    cfg.paths.out = tmp.path().join("eval");
    let report = cmd_eval(&cfg).unwrap();
    let m = report.metrics;
    for v in [m.bleu1, m.bleu2, m.bleu3, m.bleu4] {
        assert!((0.0..=1.0).contains(&v));
    }
    assert!(m.cider >= 0.0);
    assert!(tmp.path().join("eval/metrics.json").exists());

    // Resuming with a larger epoch budget continues the run.
    cfg.train.max_epochs = 5;
    cfg.paths.out = tmp.path().join("resumed");
    let resumed = cmd_train(&cfg, Some(&summary.checkpoint), |_| {}).unwrap();
    assert_eq!(resumed.epochs, 5);
}

#[test]
fn captioning_an_empty_split_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(&tmp.path().join("data"));
    cfg.synth.splits = SplitRatios { train: 0.75, val: 0.25 };
    let s = cmd_synth(&cfg).unwrap();
    assert_eq!(s.test, 0);
    cfg.paths.dataset = Some(s.manifest);
    cfg.paths.out = tmp.path().join("run");
    let t = cmd_train(&cfg, None, |_| {}).unwrap();
    cfg.paths.checkpoint = Some(t.checkpoint);
    let caps = cmd_caption(&cfg).unwrap();
    assert!(caps.captions.is_empty());
}

#[test]
fn ablation_rows_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(&tmp.path().join("a"));
    cfg.ablate.values = vec![1];
    let one = cmd_ablate_ne(&cfg, |_, _| {}).unwrap();
    assert_eq!(one.rows.len(), 1);
    assert_eq!(one.rows[0].model, "TS-LSTM(N_e=1)");

    cfg.ablate.values = vec![1, 3];
    let a = cmd_ablate_ne(&cfg, |_, _| {}).unwrap();
    cfg.paths.out = tmp.path().join("b");
    let b = cmd_ablate_ne(&cfg, |_, _| {}).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.rows[0], one.rows[0]);
    assert!(a.rows.iter().all(|r| r.cider.is_finite() && r.bleu4.is_finite()));

    cfg.ablate.values = vec![1000];
    assert!(matches!(cmd_ablate_ne(&cfg, |_, _| {}), Err(Error::Config(_))));
}

#[test]
fn gradcheck_command_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(tmp.path());
    let report = cmd_gradcheck(&cfg).unwrap();
    assert!(report.passed);
    assert!(tmp.path().join("gradcheck.json").exists());
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tslstm"))
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();

    let help = bin().arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
    let text = String::from_utf8_lossy(&help.stdout);
    for sub in ["synth", "train", "gradcheck", "caption", "eval", "ablate-ne"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }

    let usage = bin().arg("frobnicate").output().unwrap();
    assert_eq!(usage.status.code(), Some(cli::EXIT_VALIDATION));

    let bad_cfg = tmp.path().join("bad.json");
    fs::write(&bad_cfg, r#"{"trian": {}}"#).unwrap();
    let st = bin().args(["--config", bad_cfg.to_str().unwrap(), "--out", out, "synth"]).output().unwrap();
    assert_eq!(st.status.code(), Some(cli::EXIT_VALIDATION));

    let missing = bin()
        .args(["--out", out, "train", "--dataset", tmp.path().join("nope.json").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(cli::EXIT_RUNTIME));

    let gc = bin().args(["--out", out, "gradcheck", "--ne", "2"]).output().unwrap();
    assert_eq!(gc.status.code(), Some(cli::EXIT_OK), "{}", String::from_utf8_lossy(&gc.stderr));
}
