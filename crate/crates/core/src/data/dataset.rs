//! On-disk corpus: a JSON manifest plus one binary feature file per video.
//!
//! Feature file layout (little-endian):
//!
//! ```text
//! offset 0   b"TSLF"
//! offset 4   u32 version (= 1)
//! offset 8   u32 d_v
//! offset 12  u32 n_v
//! offset 16  d_v * n_v f32 values, frame after frame
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::encoder::FeatureMatrix;
use crate::error::{Error, Result};
use crate::tensor::Vector;

pub const FEATURE_MAGIC: &[u8; 4] = b"TSLF";
pub const FEATURE_VERSION: u32 = 1;
const HEADER_LEN: u64 = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct VideoSample {
    pub id: String,
    pub features: FeatureMatrix,
    pub captions: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::config(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub feature_dim: usize,
    pub train: Vec<VideoSample>,
    pub val: Vec<VideoSample>,
    pub test: Vec<VideoSample>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[VideoSample] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Smallest frame count over every video.
    pub fn min_frames(&self) -> Option<usize> {
        Split::ALL
            .iter()
            .flat_map(|s| self.split(*s))
            .map(|v| v.features.n_v())
            .min()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSplits {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    pub feature_dim: usize,
    pub splits: ManifestSplits,
    pub captions: BTreeMap<String, Vec<String>>,
    /// Relative to the manifest's directory unless absolute.
    pub features_dir: String,
}

pub fn feature_file_name(id: &str) -> String {
    format!("{id}.tslf")
}

pub fn write_features(path: &Path, features: &FeatureMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(FEATURE_MAGIC).map_err(io)?;
    w.write_u32::<LittleEndian>(FEATURE_VERSION).map_err(io)?;
    w.write_u32::<LittleEndian>(features.d_v() as u32).map_err(io)?;
    w.write_u32::<LittleEndian>(features.n_v() as u32).map_err(io)?;
    for frame in features.frames() {
        for &x in frame.iter() {
            w.write_f32::<LittleEndian>(x as f32).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let load_err = |offset: u64, message: String| Error::Load {
        path: path.to_path_buf(),
        offset,
        message,
    };
    let file = File::open(path).map_err(|e| load_err(0, format!("cannot open: {e}")))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|e| load_err(0, format!("truncated header: {e}")))?;
    if &magic != FEATURE_MAGIC {
        return Err(load_err(0, format!("bad magic {magic:?}")));
    }
    let mut header = [0u32; 3];
    for (k, slot) in header.iter_mut().enumerate() {
        *slot = r
            .read_u32::<LittleEndian>()
            .map_err(|e| load_err(4 + 4 * k as u64, format!("truncated header: {e}")))?;
    }
    let [version, d_v, n_v] = header;
    if version != FEATURE_VERSION {
        return Err(load_err(4, format!("unsupported version {version}")));
    }
    if d_v == 0 || n_v == 0 {
        return Err(load_err(8, format!("empty feature matrix {d_v}x{n_v}")));
    }
    let mut frames = Vec::with_capacity(n_v as usize);
    let mut offset = HEADER_LEN;
    for _ in 0..n_v {
        let mut frame = Vec::with_capacity(d_v as usize);
        for _ in 0..d_v {
            let x = r
                .read_f32::<LittleEndian>()
                .map_err(|e| load_err(offset, format!("truncated data: {e}")))?;
            if !x.is_finite() {
                return Err(load_err(offset, format!("non-finite feature value {x}")));
            }
            frame.push(f64::from(x));
            offset += 4;
        }
        frames.push(Vector::from(frame));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)
        .map_err(|e| load_err(offset, e.to_string()))?;
    if !rest.is_empty() {
        return Err(load_err(offset, format!("{} trailing bytes", rest.len())));
    }
    FeatureMatrix::new(frames).map_err(|e| load_err(HEADER_LEN, e.to_string()))
}

/// Reads a manifest and every feature file it references.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(manifest_path).map_err(|e| Error::Load {
        path: manifest_path.to_path_buf(),
        offset: 0,
        message: format!("cannot read manifest: {e}"),
    })?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Load {
        path: manifest_path.to_path_buf(),
        offset: e.column() as u64,
        message: format!("malformed manifest (line {}): {e}", e.line()),
    })?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let features_dir = resolve(base, &manifest.features_dir);

    let load_split = |ids: &[String]| -> Result<Vec<VideoSample>> {
        ids.iter()
            .map(|id| {
                let path = features_dir.join(feature_file_name(id));
                let features = read_features(&path)?;
                if features.d_v() != manifest.feature_dim {
                    return Err(Error::Load {
                        path,
                        offset: 8,
                        message: format!(
                            "feature width {} does not match manifest feature_dim {}",
                            features.d_v(),
                            manifest.feature_dim
                        ),
                    });
                }
                let captions = manifest.captions.get(id).cloned().unwrap_or_default();
                if captions.is_empty() {
                    return Err(Error::Load {
                        path: manifest_path.to_path_buf(),
                        offset: 0,
                        message: format!("video {id} has no captions"),
                    });
                }
                Ok(VideoSample {
                    id: id.clone(),
                    features,
                    captions,
                })
            })
            .collect()
    };
    Ok(Dataset {
        name: manifest.name.clone(),
        feature_dim: manifest.feature_dim,
        train: load_split(&manifest.splits.train)?,
        val: load_split(&manifest.splits.val)?,
        test: load_split(&manifest.splits.test)?,
    })
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Writes `dir/manifest.json` and `dir/features/<id>.tslf`; returns the manifest path.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf> {
    let features_dir = dir.join("features");
    fs::create_dir_all(&features_dir).map_err(|e| Error::io(&features_dir, e))?;
    let mut captions = BTreeMap::new();
    let ids = |s: &[VideoSample]| s.iter().map(|v| v.id.clone()).collect::<Vec<_>>();
    for split in Split::ALL {
        for v in dataset.split(split) {
            if v.features.d_v() != dataset.feature_dim {
                return Err(Error::shape("save_dataset", dataset.feature_dim, v.features.d_v()));
            }
            write_features(&features_dir.join(feature_file_name(&v.id)), &v.features)?;
            captions.insert(v.id.clone(), v.captions.clone());
        }
    }
    let manifest = Manifest {
        name: dataset.name.clone(),
        feature_dim: dataset.feature_dim,
        splits: ManifestSplits {
            train: ids(&dataset.train),
            val: ids(&dataset.val),
            test: ids(&dataset.test),
        },
        captions,
        features_dir: "features".to_string(),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Fractions of a corpus assigned to train and validation; the rest is test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
}

impl SplitRatios {
    /// The standard MSVD partition: 1200 / 100 / 670 of 1970 clips.
    pub const MSVD: SplitRatios = SplitRatios {
        train: 1200.0 / 1970.0,
        val: 100.0 / 1970.0,
    };

    /// `(train, val, test)` sizes for `n` items, rounding train and val.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        if !(self.train >= 0.0 && self.val >= 0.0 && self.train + self.val <= 1.0 + 1e-12) {
            return Err(Error::config(format!("invalid split ratios {self:?}")));
        }
        let train = ((n as f64) * self.train).round() as usize;
        let val = (((n as f64) * self.val).round() as usize).min(n - train.min(n));
        let train = train.min(n);
        Ok((train, val, n - train - val))
    }
}
