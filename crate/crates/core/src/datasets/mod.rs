//! Sample containers, EMNIST Q/T preprocessing and the cluster-state dataset.

pub mod glyphs;
pub mod idx;
pub mod resize;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: u64,
    pub features: Vec<f64>,
    pub label: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Adversarial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub split: Split,
    pub samples: Vec<Sample>,
    /// `(x_min, x_max)` used to normalize perturbation strengths.
    pub feature_range: (f64, f64),
}

impl Dataset {
    pub fn new(split: Split, samples: Vec<Sample>, feature_range: (f64, f64)) -> Result<Self> {
        if feature_range.1 <= feature_range.0 {
            return Err(Error::Invalid(format!(
                "feature range {feature_range:?} is empty"
            )));
        }
        if let Some(s) = samples.iter().find(|s| s.label > 1) {
            return Err(Error::Invalid(format!(
                "sample {} has label {}",
                s.id, s.label
            )));
        }
        if let Some(first) = samples.first() {
            let d = first.features.len();
            if let Some(s) = samples.iter().find(|s| s.features.len() != d) {
                return Err(Error::Dimension {
                    what: "sample features",
                    expected: d,
                    actual: s.features.len(),
                });
            }
        }
        Ok(Self {
            split,
            samples,
            feature_range,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }

    pub fn width(&self) -> f64 {
        self.feature_range.1 - self.feature_range.0
    }

    /// `[count of label 0, count of label 1]`.
    pub fn class_counts(&self) -> [usize; 2] {
        let mut counts = [0; 2];
        for s in &self.samples {
            counts[s.label as usize] += 1;
        }
        counts
    }

    pub fn feature_bounds(&self) -> Option<(f64, f64)> {
        self.samples
            .iter()
            .flat_map(|s| s.features.iter().copied())
            .fold(None, |acc, v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPair {
    pub train: Dataset,
    pub test: Dataset,
}

/// Randomly assigns `train_size` of `samples` to training and the rest to test.
fn split_samples(
    mut samples: Vec<Sample>,
    train_size: usize,
    range: (f64, f64),
    rng: &mut impl Rng,
) -> Result<DatasetPair> {
    if train_size > samples.len() {
        return Err(Error::Invalid(format!(
            "train size {train_size} exceeds {} samples",
            samples.len()
        )));
    }
    samples.shuffle(rng);
    let test = samples.split_off(train_size);
    Ok(DatasetPair {
        train: Dataset::new(Split::Train, samples, range)?,
        test: Dataset::new(Split::Test, test, range)?,
    })
}

// ---------------------------------------------------------------- EMNIST --

/// EMNIST-letters label codes (1 = 'A').
pub const LETTER_Q: u8 = 17;
pub const LETTER_T: u8 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmnistConfig {
    pub per_class: usize,
    pub train_size: usize,
    /// Side length after resizing.
    pub resolution: usize,
    /// Side of the central window fed to the circuit (`crop^2` features).
    pub crop: usize,
    /// Multiplier mapping unit grayscale to radians.
    pub angle_scale: f64,
}

impl EmnistConfig {
    /// 600 images resized to 15x15, central 13x13 window.
    pub fn paper() -> Self {
        Self {
            per_class: 300,
            train_size: 500,
            resolution: 15,
            crop: 13,
            angle_scale: PI,
        }
    }

    /// 10x10 images, all 100 pixels encoded.
    pub fn desk() -> Self {
        Self {
            resolution: 10,
            crop: 10,
            ..Self::paper()
        }
    }

    pub fn num_features(&self) -> usize {
        self.crop * self.crop
    }
}

/// Resized unit-range images before angle mapping; shared by the quantum and
/// classical pipelines so both see identical samples and ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSet {
    pub side: usize,
    pub images: Vec<(u64, Vec<f64>, u8)>,
}

/// Default file names of the EMNIST-letters training split.
pub fn emnist_paths(dir: &Path) -> (PathBuf, PathBuf) {
    (
        dir.join("emnist-letters-train-images-idx3-ubyte"),
        dir.join("emnist-letters-train-labels-idx1-ubyte"),
    )
}

/// Grayscale `u8` image to unit range, resized to `side x side`.
pub fn preprocess_image(raw: &[u8], raw_side: usize, side: usize) -> Vec<f64> {
    let unit: Vec<f64> = raw.iter().map(|&v| f64::from(v) / 255.0).collect();
    resize::resize(&unit, raw_side, raw_side, side, side)
        .into_iter()
        .map(|v| v.clamp(0.0, 1.0))
        .collect()
}

/// Transposes a square image (EMNIST stores images column-major).
fn transpose(img: &[u8], side: usize) -> Vec<u8> {
    (0..side * side)
        .map(|i| img[(i % side) * side + i / side])
        .collect()
}

/// Reads EMNIST-letters IDX files, keeps `per_class` random Q and T images
/// (Q -> label 0, T -> label 1) and resizes them.
pub fn load_emnist_images(
    images: &Path,
    labels: &Path,
    cfg: &EmnistConfig,
    seed: u64,
) -> Result<ImageSet> {
    let missing: Vec<String> = [images, labels]
        .iter()
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Format {
            path: missing.join(", "),
            reason: "EMNIST-letters IDX file not found".into(),
        });
    }
    let imgs = idx::read_images(images)?;
    let lbls = idx::read_labels(labels)?;
    if imgs.len() != lbls.len() {
        return Err(Error::Format {
            path: labels.display().to_string(),
            reason: format!("{} labels for {} images", lbls.len(), imgs.len()),
        });
    }
    if imgs.rows != imgs.cols {
        return Err(Error::Format {
            path: images.display().to_string(),
            reason: "images must be square".into(),
        });
    }
    let mut rng = substream(seed, Stream::DataSplit, 0);
    let mut picked = Vec::new();
    for (label, code) in [(0u8, LETTER_Q), (1u8, LETTER_T)] {
        let mut idxs: Vec<usize> = (0..lbls.len()).filter(|&i| lbls[i] == code).collect();
        if idxs.len() < cfg.per_class {
            return Err(Error::Invalid(format!(
                "only {} images with letter code {code}, need {}",
                idxs.len(),
                cfg.per_class
            )));
        }
        idxs.shuffle(&mut rng);
        idxs.truncate(cfg.per_class);
        idxs.sort_unstable();
        picked.extend(idxs.into_iter().map(|i| (i, label)));
    }
    let images = picked
        .into_iter()
        .map(|(i, label)| {
            let upright = transpose(imgs.image(i), imgs.rows);
            (
                i as u64,
                preprocess_image(&upright, imgs.rows, cfg.resolution),
                label,
            )
        })
        .collect();
    Ok(ImageSet {
        side: cfg.resolution,
        images,
    })
}

/// Synthetic stand-in with the same shape as the EMNIST subset.
pub fn synthetic_images(cfg: &EmnistConfig, seed: u64) -> ImageSet {
    let mut rng = substream(seed, Stream::DataSplit, 1);
    let mut images = Vec::with_capacity(2 * cfg.per_class);
    for label in [0u8, 1] {
        for k in 0..cfg.per_class {
            let raw = glyphs::render(label == 1, &mut rng);
            let id = (label as usize * cfg.per_class + k) as u64;
            images.push((
                id,
                preprocess_image(&raw, glyphs::SIDE, cfg.resolution),
                label,
            ));
        }
    }
    ImageSet {
        side: cfg.resolution,
        images,
    }
}

impl ImageSet {
    /// Angle-encoded central window, split into train/test.
    pub fn to_qnn(&self, cfg: &EmnistConfig, seed: u64) -> Result<DatasetPair> {
        let samples = self
            .images
            .iter()
            .map(|(id, img, label)| Sample {
                id: *id,
                features: resize::center_crop(img, self.side, cfg.crop)
                    .into_iter()
                    .map(|v| v * cfg.angle_scale)
                    .collect(),
                label: *label,
            })
            .collect();
        let mut rng = substream(seed, Stream::DataSplit, 2);
        split_samples(samples, cfg.train_size, (0.0, cfg.angle_scale), &mut rng)
    }

    /// Full unit-range images with the same split as [`ImageSet::to_qnn`].
    pub fn to_classical(&self, cfg: &EmnistConfig, seed: u64) -> Result<DatasetPair> {
        let samples = self
            .images
            .iter()
            .map(|(id, img, label)| Sample {
                id: *id,
                features: img.clone(),
                label: *label,
            })
            .collect();
        let mut rng = substream(seed, Stream::DataSplit, 2);
        split_samples(samples, cfg.train_size, (0.0, 1.0), &mut rng)
    }
}

pub fn load_emnist(
    images: &Path,
    labels: &Path,
    cfg: &EmnistConfig,
    seed: u64,
) -> Result<DatasetPair> {
    load_emnist_images(images, labels, cfg, seed)?.to_qnn(cfg, seed)
}

// ------------------------------------------------------------------ LCEI --

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LceiConfig {
    pub num_qubits: usize,
    pub per_class: usize,
    pub train_size: usize,
    /// Draw an independent angle for every qubit instead of one per sample.
    /// Experimental.
    #[serde(default)]
    pub per_qubit: bool,
}

impl LceiConfig {
    pub fn new(num_qubits: usize) -> Self {
        Self {
            num_qubits,
            per_class: 150,
            train_size: 200,
            per_qubit: false,
        }
    }
}

/// Angle intervals of the two classes: non-excited (0), excited (1).
pub const LCEI_INTERVALS: [(f64, f64); 2] = [(0.0, 3.0 * PI / 8.0), (5.0 * PI / 8.0, PI)];

/// Rotation angles live in `[-pi, pi]`.
pub const LCEI_RANGE: (f64, f64) = (-PI, PI);

pub fn gen_lcei(cfg: &LceiConfig, seed: u64) -> Result<DatasetPair> {
    let mut rng = substream(seed, Stream::DataSplit, 3);
    let mut samples = Vec::with_capacity(2 * cfg.per_class);
    for (label, &(lo, hi)) in LCEI_INTERVALS.iter().enumerate() {
        for _ in 0..cfg.per_class {
            let features = if cfg.per_qubit {
                (0..cfg.num_qubits)
                    .map(|_| rng.gen_range(lo..=hi))
                    .collect()
            } else {
                vec![rng.gen_range(lo..=hi); cfg.num_qubits]
            };
            samples.push(Sample {
                id: samples.len() as u64,
                features,
                label: label as u8,
            });
        }
    }
    split_samples(samples, cfg.train_size, LCEI_RANGE, &mut rng)
}

// ----------------------------------------------------------------- cache --

pub const DATASET_FORMAT: &str = "qnn-bench/dataset/v1";

/// Serialized dataset pair with the seed that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCache {
    pub format: String,
    pub seed: u64,
    pub source: String,
    pub meta: BTreeMap<String, String>,
    pub data: DatasetPair,
}

impl DatasetCache {
    pub fn new(seed: u64, source: impl Into<String>, data: DatasetPair) -> Self {
        Self {
            format: DATASET_FORMAT.into(),
            seed,
            source: source.into(),
            meta: BTreeMap::new(),
            data,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cache: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        if cache.format != DATASET_FORMAT {
            return Err(Error::Format {
                path: path.display().to_string(),
                reason: format!("unsupported format tag {:?}", cache.format),
            });
        }
        Ok(cache)
    }
}

#[cfg(test)]
mod tests;
