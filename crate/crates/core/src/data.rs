//! CIFAR-10 ingestion, seeded 60/20/20 splitting and synthetic datasets.

use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const CIFAR_SIDE: usize = 32;
pub const CIFAR_CHANNELS: usize = 3;
pub const CIFAR_CLASSES: usize = 10;
/// One label byte followed by 3072 channel-planar pixel bytes.
pub const CIFAR_RECORD_LEN: usize = 1 + CIFAR_SIDE * CIFAR_SIDE * CIFAR_CHANNELS;

/// Default train/validation/test fractions.
pub const DEFAULT_FRACTIONS: [f64; 3] = [0.6, 0.2, 0.2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Validation,
    Test,
}

/// Labelled HWC images with pixels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    height: usize,
    width: usize,
    channels: usize,
    classes: usize,
    images: Vec<f32>,
    labels: Vec<u8>,
    split: Option<SplitTag>,
}

impl Dataset {
    pub fn new(
        (height, width, channels): (usize, usize, usize),
        classes: usize,
        images: Vec<f32>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        let per_image = height * width * channels;
        if per_image == 0 || classes == 0 {
            return Err(Error::DataFormat("zero-sized image geometry or class count".into()));
        }
        if images.len() != per_image * labels.len() {
            return Err(Error::DataFormat(format!(
                "{} pixel values for {} labels of {per_image} values each",
                images.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(Error::DataFormat(format!("label {bad} outside 0..{classes}")));
        }
        if let Some(bad) = images.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::DataFormat(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(Dataset {
            height,
            width,
            channels,
            classes,
            images,
            labels,
            split: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn split_tag(&self) -> Option<SplitTag> {
        self.split
    }

    fn image_len(&self) -> usize {
        self.height * self.width * self.channels
    }

    /// Pixels of image `i` in HWC order.
    pub fn image(&self, i: usize) -> &[f32] {
        let n = self.image_len();
        &self.images[i * n..][..n]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// The samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize], tag: Option<SplitTag>) -> Dataset {
        let n = self.image_len();
        let mut images = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            images.extend_from_slice(self.image(i));
        }
        Dataset {
            height: self.height,
            width: self.width,
            channels: self.channels,
            classes: self.classes,
            images,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            split: tag,
        }
    }

    /// Image `i` quantized back to bytes (`round(x·255)`), HWC order.
    pub fn image_bytes(&self, i: usize) -> Vec<u8> {
        self.image(i).iter().map(|&x| (x * 255.0).round() as u8).collect()
    }
}

/// Decodes concatenated CIFAR-10 binary records.
pub fn parse_cifar10_records(bytes: &[u8]) -> Result<Dataset> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD_LEN) {
        return Err(Error::DataFormat(format!(
            "length {} is not a multiple of the {CIFAR_RECORD_LEN}-byte record",
            bytes.len()
        )));
    }
    let plane = CIFAR_SIDE * CIFAR_SIDE;
    let count = bytes.len() / CIFAR_RECORD_LEN;
    let mut labels = Vec::with_capacity(count);
    let mut images = Vec::with_capacity(count * plane * CIFAR_CHANNELS);
    for (r, record) in bytes.chunks_exact(CIFAR_RECORD_LEN).enumerate() {
        let label = record[0];
        if label as usize >= CIFAR_CLASSES {
            return Err(Error::DataFormat(format!("record {r}: label byte {label} > 9")));
        }
        labels.push(label);
        let pixels = &record[1..];
        for p in 0..plane {
            for c in 0..CIFAR_CHANNELS {
                images.push(pixels[c * plane + p] as f32 / 255.0);
            }
        }
    }
    Dataset::new((CIFAR_SIDE, CIFAR_SIDE, CIFAR_CHANNELS), CIFAR_CLASSES, images, labels)
}

/// Loads and concatenates CIFAR-10 binary batch files in the given order.
pub fn load_cifar10_binary<P: AsRef<Path>>(paths: &[P]) -> Result<Dataset> {
    if paths.is_empty() {
        return Err(Error::Empty("CIFAR-10 file list"));
    }
    let mut bytes = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let chunk = fs::read(path).map_err(|e| Error::DataFormat(format!("{}: {e}", path.display())))?;
        if chunk.len() % CIFAR_RECORD_LEN != 0 {
            return Err(Error::DataFormat(format!(
                "{}: length {} is not a multiple of {CIFAR_RECORD_LEN}",
                path.display(),
                chunk.len()
            )));
        }
        bytes.extend_from_slice(&chunk);
    }
    parse_cifar10_records(&bytes)
}

/// Hex SHA-256 of a file.
pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let digest = Sha256::digest(fs::read(path)?);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

pub fn verify_checksum(path: impl AsRef<Path>, expected_hex: &str) -> Result<()> {
    let path = path.as_ref();
    let actual = sha256_file(path)?;
    if !actual.eq_ignore_ascii_case(expected_hex.trim()) {
        return Err(Error::DataFormat(format!(
            "{}: sha256 {actual} does not match expected {expected_hex}",
            path.display()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

/// Seeded shuffle of `0..n` cut into train/validation/test index lists.
///
/// Validation and test get `floor(n·f)` samples; the remainder goes to train.
pub fn split_indices(n: usize, fractions: [f64; 3], seed: u64) -> Result<[Vec<usize>; 3]> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::param("fractions", format!("{fractions:?} must lie in [0, 1]")));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::param(
            "fractions",
            format!("{fractions:?} sum to {total}, not 1"),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let cut = |f: f64| ((n as f64 * f) + 1e-9).floor() as usize;
    let n_val = cut(fractions[1]);
    let n_test = cut(fractions[2]);
    let n_train = n - n_val - n_test;
    let test = order.split_off(n_train + n_val);
    let validation = order.split_off(n_train);
    Ok([order, validation, test])
}

pub fn split(dataset: &Dataset, fractions: [f64; 3], seed: u64) -> Result<Splits> {
    let [train, validation, test] = split_indices(dataset.len(), fractions, seed)?;
    Ok(Splits {
        train: dataset.subset(&train, Some(SplitTag::Train)),
        validation: dataset.subset(&validation, Some(SplitTag::Validation)),
        test: dataset.subset(&test, Some(SplitTag::Test)),
    })
}

/// Settings for the synthetic 32×32×3 classification set.
///
/// Class `c` brightens the 8×8 block at grid cell `(c / 4, c % 4)` by
/// `contrast` in colour channel `c % 3`, over a 0.25 background with
/// uniform noise of amplitude `noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n: usize,
    pub classes: usize,
    pub seed: u64,
    pub noise: f64,
    pub contrast: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n: 200,
            classes: 10,
            seed: 0,
            noise: 0.1,
            contrast: 0.5,
        }
    }
}

pub fn synthetic_dataset(n: usize, classes: usize, seed: u64) -> Result<Dataset> {
    synthetic_dataset_with(&SyntheticConfig {
        n,
        classes,
        seed,
        ..SyntheticConfig::default()
    })
}

pub fn synthetic_dataset_with(config: &SyntheticConfig) -> Result<Dataset> {
    let SyntheticConfig {
        n,
        classes,
        seed,
        noise,
        contrast,
    } = *config;
    if classes == 0 || classes > 16 {
        return Err(Error::param("classes", format!("{classes} not in 1..=16")));
    }
    if n < classes {
        return Err(Error::param("n", format!("{n} samples cannot cover {classes} classes")));
    }
    if !(0.0..=1.0).contains(&noise) || !(0.0..=1.0).contains(&contrast) {
        return Err(Error::param("noise/contrast", "must lie in [0, 1]"));
    }
    const BLOCK: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Uniform::new_inclusive(-noise, noise);
    let mut images = Vec::with_capacity(n * CIFAR_SIDE * CIFAR_SIDE * CIFAR_CHANNELS);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % classes;
        let (br, bc) = (class / 4, class % 4);
        for y in 0..CIFAR_SIDE {
            for x in 0..CIFAR_SIDE {
                let inside = y / BLOCK == br && x / BLOCK == bc;
                for c in 0..CIFAR_CHANNELS {
                    let signal = if inside && c == class % 3 { contrast } else { 0.0 };
                    let v = 0.25 + signal + jitter.sample(&mut rng);
                    images.push(v.clamp(0.0, 1.0) as f32);
                }
            }
        }
        labels.push(class as u8);
    }
    Dataset::new((CIFAR_SIDE, CIFAR_SIDE, CIFAR_CHANNELS), classes, images, labels)
}
