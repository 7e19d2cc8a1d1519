//! Labelled feature matrices, IDX ingestion, synthetic blobs and splits.

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const IDX_IMAGE_MAGIC: u32 = 2051;
pub const IDX_LABEL_MAGIC: u32 = 2049;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{file}: bad magic {found} (expected {expected})")]
    BadMagic {
        file: &'static str,
        found: u32,
        expected: u32,
    },
    #[error("{file}: truncated while reading {field}")]
    Truncated {
        file: &'static str,
        field: &'static str,
    },
    #[error("example count mismatch: images file has {images}, labels file has {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Train/validation partition of example indices (both sorted).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Features with observed (possibly corrupted) labels and the hidden clean
/// labels. Only metrics look at `clean_labels`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyDataset {
    /// One row per example, values in `[0, 1]`.
    pub features: Array2<f64>,
    pub noisy_labels: Vec<usize>,
    pub clean_labels: Vec<usize>,
    pub classes: usize,
    pub split: Split,
}

impl NoisyDataset {
    /// A clean dataset (noisy labels equal clean labels) whose split puts
    /// every example in the training part.
    pub fn clean(
        features: Array2<f64>,
        labels: Vec<usize>,
        classes: usize,
    ) -> Result<Self, DataError> {
        let n = labels.len();
        let ds = Self {
            features,
            noisy_labels: labels.clone(),
            clean_labels: labels,
            classes,
            split: Split {
                train: (0..n).collect(),
                validation: Vec::new(),
            },
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.noisy_labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noisy_labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let n = self.noisy_labels.len();
        if self.features.nrows() != n || self.clean_labels.len() != n {
            return Err(DataError::Invalid(format!(
                "{} feature rows, {} noisy labels, {} clean labels",
                self.features.nrows(),
                n,
                self.clean_labels.len()
            )));
        }
        if self.classes < 2 {
            return Err(DataError::Invalid("need at least two classes".into()));
        }
        if let Some(&bad) = self
            .noisy_labels
            .iter()
            .chain(&self.clean_labels)
            .find(|&&y| y >= self.classes)
        {
            return Err(DataError::Invalid(format!(
                "label {bad} outside [0, {})",
                self.classes
            )));
        }
        if self.features.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(DataError::Invalid("feature values must lie in [0, 1]".into()));
        }
        let mut seen = vec![false; n];
        for &i in self.split.train.iter().chain(&self.split.validation) {
            if i >= n || std::mem::replace(&mut seen[i], true) {
                return Err(DataError::Invalid(format!("split index {i} repeated or out of range")));
            }
        }
        Ok(())
    }

    /// Examples at `indices` (in that order); the split is reset to all-train.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), indices),
            noisy_labels: indices.iter().map(|&i| self.noisy_labels[i]).collect(),
            clean_labels: indices.iter().map(|&i| self.clean_labels[i]).collect(),
            classes: self.classes,
            split: Split {
                train: (0..indices.len()).collect(),
                validation: Vec::new(),
            },
        }
    }

    pub fn class_counts(&self, labels: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &y in labels {
            counts[y] += 1;
        }
        counts
    }

    /// Indices whose observed label differs from the clean one.
    pub fn flipped(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.noisy_labels[i] != self.clean_labels[i])
            .collect()
    }

    /// SHA-256 over dimensions, features, labels and split.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for dim in [self.len(), self.dim(), self.classes] {
            hasher.update((dim as u64).to_le_bytes());
        }
        for v in self.features.iter() {
            hasher.update(v.to_le_bytes());
        }
        for labels in [&self.noisy_labels, &self.clean_labels, &self.split.train, &self.split.validation] {
            hasher.update((labels.len() as u64).to_le_bytes());
            for &y in labels.iter() {
                hasher.update((y as u64).to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

fn open_maybe_gz(path: &Path) -> Result<Vec<u8>, DataError> {
    let mut raw = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut raw)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    file: &'static str,
}

impl Cursor<'_> {
    fn u32(&mut self, field: &'static str) -> Result<u32, DataError> {
        let (head, rest) = self
            .bytes
            .split_first_chunk::<4>()
            .ok_or(DataError::Truncated { file: self.file, field })?;
        self.bytes = rest;
        Ok(u32::from_be_bytes(*head))
    }

    fn take(&mut self, len: usize, field: &'static str) -> Result<&[u8], DataError> {
        if self.bytes.len() < len {
            return Err(DataError::Truncated { file: self.file, field });
        }
        let (head, rest) = self.bytes.split_at(len);
        self.bytes = rest;
        Ok(head)
    }
}

/// Raw IDX image tensor: count, rows, cols and row-major pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols).max(1)
    }
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages, DataError> {
    let mut cur = Cursor { bytes, file: "images" };
    let magic = cur.u32("magic")?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(DataError::BadMagic {
            file: "images",
            found: magic,
            expected: IDX_IMAGE_MAGIC,
        });
    }
    let n = cur.u32("count")? as usize;
    let rows = cur.u32("rows")? as usize;
    let cols = cur.u32("cols")? as usize;
    let pixels = cur.take(n * rows * cols, "pixels")?.to_vec();
    Ok(IdxImages { rows, cols, pixels })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, DataError> {
    let mut cur = Cursor { bytes, file: "labels" };
    let magic = cur.u32("magic")?;
    if magic != IDX_LABEL_MAGIC {
        return Err(DataError::BadMagic {
            file: "labels",
            found: magic,
            expected: IDX_LABEL_MAGIC,
        });
    }
    let n = cur.u32("count")? as usize;
    Ok(cur.take(n, "labels")?.to_vec())
}

pub fn write_idx_images(out: &mut impl Write, images: &IdxImages) -> io::Result<()> {
    for v in [IDX_IMAGE_MAGIC, images.count() as u32, images.rows as u32, images.cols as u32] {
        out.write_all(&v.to_be_bytes())?;
    }
    out.write_all(&images.pixels)
}

pub fn write_idx_labels(out: &mut impl Write, labels: &[u8]) -> io::Result<()> {
    out.write_all(&IDX_LABEL_MAGIC.to_be_bytes())?;
    out.write_all(&(labels.len() as u32).to_be_bytes())?;
    out.write_all(labels)
}

/// Loads an IDX image/label pair (optionally gzip-compressed) as a clean
/// dataset with pixels scaled to `[0, 1]`. The class count is one more than
/// the largest label, and at least 2.
pub fn read_idx(images_path: &Path, labels_path: &Path) -> Result<NoisyDataset, DataError> {
    let images = parse_idx_images(&open_maybe_gz(images_path)?)?;
    let labels = parse_idx_labels(&open_maybe_gz(labels_path)?)?;
    idx_to_dataset(&images, &labels)
}

pub fn idx_to_dataset(images: &IdxImages, labels: &[u8]) -> Result<NoisyDataset, DataError> {
    let n = images.count();
    if n != labels.len() {
        return Err(DataError::CountMismatch {
            images: n,
            labels: labels.len(),
        });
    }
    let d = images.rows * images.cols;
    let features = Array2::from_shape_vec(
        (n, d),
        images.pixels.iter().map(|&p| f64::from(p) / 255.0).collect(),
    )
    .map_err(|e| DataError::Invalid(e.to_string()))?;
    let labels: Vec<usize> = labels.iter().map(|&y| usize::from(y)).collect();
    let classes = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    NoisyDataset::clean(features, labels, classes)
}

/// Gaussian class clusters in `d` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub classes: usize,
    pub per_class: Vec<usize>,
    pub dim: usize,
    /// `classes x dim` cluster centres.
    pub centers: Vec<Vec<f64>>,
    pub spread: f64,
    pub seed: u64,
}

impl BlobSpec {
    /// Centres drawn uniformly from `[0.15, 0.85]^dim` with `center_seed`.
    pub fn with_random_centers(
        classes: usize,
        per_class: usize,
        dim: usize,
        spread: f64,
        center_seed: u64,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(center_seed);
        let centers = (0..classes)
            .map(|_| {
                (0..dim)
                    .map(|_| 0.15 + 0.7 * rand::Rng::random::<f64>(&mut rng))
                    .collect()
            })
            .collect();
        Self {
            classes,
            per_class: vec![per_class; classes],
            dim,
            centers,
            spread,
            seed,
        }
    }
}

/// Samples each class around its centre, clipping features to `[0, 1]`.
/// Examples are emitted class by class.
pub fn make_blobs(spec: &BlobSpec) -> Result<NoisyDataset, DataError> {
    if spec.per_class.len() != spec.classes || spec.centers.len() != spec.classes {
        return Err(DataError::Invalid("blob spec sizes disagree with class count".into()));
    }
    if spec.per_class.contains(&0) {
        return Err(DataError::Invalid("every class needs at least one example".into()));
    }
    if spec.centers.iter().any(|c| c.len() != spec.dim) {
        return Err(DataError::Invalid("centre dimension mismatch".into()));
    }
    if !(spec.spread >= 0.0) {
        return Err(DataError::Invalid("spread must be non-negative".into()));
    }
    let n: usize = spec.per_class.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut features = Array2::zeros((n, spec.dim));
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for (class, (&count, center)) in spec.per_class.iter().zip(&spec.centers).enumerate() {
        for _ in 0..count {
            for (j, &c) in center.iter().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                features[[row, j]] = (c + spec.spread * z).clamp(0.0, 1.0);
            }
            labels.push(class);
            row += 1;
        }
    }
    NoisyDataset::clean(features, labels, spec.classes)
}

/// Moves a uniformly chosen `round(fraction * |train|)` of the current
/// training indices into the validation part. Validation labels stay noisy.
pub fn split_validation(
    ds: &NoisyDataset,
    fraction: f64,
    seed: u64,
) -> Result<NoisyDataset, DataError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::Invalid(format!(
            "validation fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut pool = ds.split.train.clone();
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let m = (fraction * pool.len() as f64).round() as usize;
    let mut validation = pool[..m].to_vec();
    let mut train = pool[m..].to_vec();
    validation.extend_from_slice(&ds.split.validation);
    validation.sort_unstable();
    train.sort_unstable();
    let mut out = ds.clone();
    out.split = Split { train, validation };
    Ok(out)
}

/// Splits off a clean held-out test set of `round(fraction * n)` examples,
/// stratified by clean label so that every class keeps its share.
pub fn holdout_test(
    ds: &NoisyDataset,
    fraction: f64,
    seed: u64,
) -> Result<(NoisyDataset, NoisyDataset), DataError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::Invalid(format!(
            "test fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = Vec::new();
    let mut rest = Vec::new();
    for class in 0..ds.classes {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&i| ds.clean_labels[i] == class).collect();
        members.shuffle(&mut rng);
        let m = (fraction * members.len() as f64).round() as usize;
        test.extend_from_slice(&members[..m]);
        rest.extend_from_slice(&members[m..]);
    }
    test.sort_unstable();
    rest.shuffle(&mut rng);
    let mut test_set = ds.subset(&test);
    test_set.noisy_labels = test_set.clean_labels.clone();
    Ok((ds.subset(&rest), test_set))
}
