//! Synthetic "event world" corpus.
//!
//! A video is an ordered sequence of events. Each event is a (subject, verb)
//! pair with a fixed prototype feature vector; its frames are the prototype
//! plus Gaussian noise. The caption spells the events out in order, so every
//! caption is recoverable from the features alone, and the order of events is
//! only visible to a model that keeps some temporal resolution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SplitRatios, VideoSample};
use crate::encoder::FeatureMatrix;
use crate::error::{Error, Result};
use crate::tensor::Vector;

const SUBJECTS: [&str; 10] = [
    "man", "woman", "dog", "cat", "boy", "girl", "bird", "horse", "chef", "monkey",
];
const VERBS: [&str; 10] = [
    "running", "jumping", "eating", "swimming", "dancing", "singing", "cooking", "riding", "climbing",
    "sleeping",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub name: String,
    pub n_videos: usize,
    pub n_subjects: usize,
    pub n_verbs: usize,
    /// Inclusive `[min, max]` number of events per video.
    pub events_per_video: [usize; 2],
    /// Inclusive `[min, max]` number of frames per event.
    pub frames_per_event: [usize; 2],
    pub feature_dim: usize,
    pub noise_std: f64,
    /// Standard deviation of each prototype coordinate.
    pub prototype_separation: f64,
    pub splits: SplitRatios,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            name: "synthetic-events".to_string(),
            n_videos: 200,
            n_subjects: 4,
            n_verbs: 4,
            events_per_video: [2, 3],
            frames_per_event: [10, 15],
            feature_dim: 16,
            noise_std: 0.05,
            prototype_separation: 1.0,
            splits: SplitRatios { train: 0.8, val: 0.1 },
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_videos", self.n_videos),
            ("n_subjects", self.n_subjects),
            ("n_verbs", self.n_verbs),
            ("feature_dim", self.feature_dim),
            ("events_per_video[0]", self.events_per_video[0]),
            ("frames_per_event[0]", self.frames_per_event[0]),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::config(format!("synth.{name} must be at least 1")));
            }
        }
        for (name, [lo, hi]) in [
            ("events_per_video", self.events_per_video),
            ("frames_per_event", self.frames_per_event),
        ] {
            if lo > hi {
                return Err(Error::config(format!("synth.{name}: min {lo} exceeds max {hi}")));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::config("synth.noise_std must be finite and non-negative"));
        }
        if !(self.prototype_separation > 0.0 && self.prototype_separation.is_finite()) {
            return Err(Error::config("synth.prototype_separation must be positive"));
        }
        if self.n_subjects * self.n_verbs < 2 && self.events_per_video[1] > 1 {
            return Err(Error::config("consecutive events must differ, which needs at least two (subject, verb) pairs"));
        }
        self.splits.sizes(self.n_videos)?;
        Ok(())
    }

    /// Smallest possible frame count of a generated video.
    pub fn min_frames(&self) -> usize {
        self.events_per_video[0] * self.frames_per_event[0]
    }
}

pub fn subject_name(i: usize) -> String {
    SUBJECTS.get(i).map_or_else(|| format!("subject{i}"), |s| s.to_string())
}

pub fn verb_name(i: usize) -> String {
    VERBS.get(i).map_or_else(|| format!("verb{i}"), |s| s.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub subject: usize,
    pub verb: usize,
}

/// `"<subject> is <verb> then <subject> is <verb> ..."`.
pub fn caption_for(events: &[Event]) -> String {
    events
        .iter()
        .map(|e| format!("{} is {}", subject_name(e.subject), verb_name(e.verb)))
        .collect::<Vec<_>>()
        .join(" then ")
}

/// Fixed prototype vectors, one per subject and one per verb; an event's
/// prototype is the sum of the two.
#[derive(Clone, Debug)]
pub struct EventWorld {
    subjects: Vec<Vector>,
    verbs: Vec<Vector>,
}

impl EventWorld {
    pub fn new(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Self {
        // Each of the two codes carries half the variance.
        let normal = Normal::new(0.0, cfg.prototype_separation / std::f64::consts::SQRT_2).expect("valid std");
        let mut code = || Vector::from((0..cfg.feature_dim).map(|_| normal.sample(rng)).collect::<Vec<_>>());
        let subjects = (0..cfg.n_subjects).map(|_| code()).collect();
        let verbs = (0..cfg.n_verbs).map(|_| code()).collect();
        EventWorld { subjects, verbs }
    }

    pub fn prototype(&self, e: Event) -> Vector {
        self.subjects[e.subject].add(&self.verbs[e.verb]).expect("codes share a width")
    }
}

/// A generated video together with its latent structure.
#[derive(Clone, Debug)]
pub struct SyntheticVideo {
    pub sample: VideoSample,
    pub events: Vec<Event>,
    /// Frame count of each event, in order.
    pub event_frames: Vec<usize>,
}

fn sample_events(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<Event> {
    let n = rng.random_range(cfg.events_per_video[0]..=cfg.events_per_video[1]);
    let mut events: Vec<Event> = Vec::with_capacity(n);
    while events.len() < n {
        let e = Event {
            subject: rng.random_range(0..cfg.n_subjects),
            verb: rng.random_range(0..cfg.n_verbs),
        };
        if events.last() != Some(&e) {
            events.push(e);
        }
    }
    events
}

/// Renders the frames for a fixed event sequence.
pub fn render_video(
    id: &str,
    events: &[Event],
    world: &EventWorld,
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
) -> SyntheticVideo {
    let noise = Normal::new(0.0, cfg.noise_std.max(0.0)).expect("valid std");
    let mut frames = Vec::new();
    let mut event_frames = Vec::with_capacity(events.len());
    for &e in events {
        let proto = world.prototype(e);
        let count = rng.random_range(cfg.frames_per_event[0]..=cfg.frames_per_event[1]);
        event_frames.push(count);
        for _ in 0..count {
            // Quantized to f32 so the in-memory corpus equals its on-disk form.
            let frame: Vec<f64> = proto
                .iter()
                .map(|&p| {
                    let x = if cfg.noise_std > 0.0 { p + noise.sample(rng) } else { p };
                    f64::from(x as f32)
                })
                .collect();
            frames.push(Vector::from(frame));
        }
    }
    SyntheticVideo {
        sample: VideoSample {
            id: id.to_string(),
            features: FeatureMatrix::new(frames).expect("at least one frame per video"),
            captions: vec![caption_for(events)],
        },
        events: events.to_vec(),
        event_frames,
    }
}

/// Generates the videos with their latent events, in id order.
pub fn generate_videos(cfg: &SynthConfig) -> Result<(EventWorld, Vec<SyntheticVideo>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let world = EventWorld::new(cfg, &mut rng);
    let videos = (0..cfg.n_videos)
        .map(|i| {
            let events = sample_events(cfg, &mut rng);
            render_video(&format!("video{i:04}"), &events, &world, cfg, &mut rng)
        })
        .collect();
    Ok((world, videos))
}

/// Generates a dataset split by `cfg.splits` in id order.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset> {
    let (_, videos) = generate_videos(cfg)?;
    let (n_train, n_val, _) = cfg.splits.sizes(cfg.n_videos)?;
    let mut samples: Vec<VideoSample> = videos.into_iter().map(|v| v.sample).collect();
    let test = samples.split_off(n_train + n_val);
    let val = samples.split_off(n_train);
    Ok(Dataset {
        name: cfg.name.clone(),
        feature_dim: cfg.feature_dim,
        train: samples,
        val,
        test,
    })
}
