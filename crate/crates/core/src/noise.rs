//! Synthetic label corruption: class-dependent transition matrices,
//! feature-dependent (instance) noise, and class-imbalance subsampling.

use std::fmt;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::dataset::{NoisyDataset, Split};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("noise rate must lie in [0, 0.5), got {0}")]
    Rate(f64),
    #[error("instance noise has no single transition matrix")]
    InstanceMatrix,
    #[error("label {label} outside [0, {classes})")]
    LabelRange { label: usize, classes: usize },
    #[error("need at least two classes, got {0}")]
    Classes(usize),
    #[error("invalid transition matrix: {0}")]
    Matrix(String),
    #[error("invalid imbalance request: {0}")]
    Imbalance(String),
    #[error("feature matrix has {rows} rows but {labels} labels were given")]
    Shape { rows: usize, labels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    Symmetric,
    Asymmetric,
    Pairflip,
    Tridiagonal,
    Instance,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 5] = [
        NoiseKind::Symmetric,
        NoiseKind::Asymmetric,
        NoiseKind::Pairflip,
        NoiseKind::Tridiagonal,
        NoiseKind::Instance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Symmetric => "symmetric",
            NoiseKind::Asymmetric => "asymmetric",
            NoiseKind::Pairflip => "pairflip",
            NoiseKind::Tridiagonal => "tridiagonal",
            NoiseKind::Instance => "instance",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// MNIST: 2 -> 7, 3 -> 8, 5 <-> 6.
pub const MNIST_ASYMMETRIC_PAIRS: [(usize, usize); 4] = [(2, 7), (3, 8), (5, 6), (6, 5)];
/// Fashion-MNIST: T-shirt -> shirt, pullover -> coat, sandal -> sneaker.
pub const FMNIST_ASYMMETRIC_PAIRS: [(usize, usize); 3] = [(0, 6), (2, 4), (5, 7)];
/// CIFAR-10: truck -> automobile, bird -> airplane, deer -> horse, cat <-> dog.
pub const CIFAR10_ASYMMETRIC_PAIRS: [(usize, usize); 5] = [(9, 1), (2, 0), (4, 7), (3, 5), (5, 3)];

/// CIFAR-100 map: each class flips to the next one within its block of five
/// consecutive class ids.
pub fn cifar100_asymmetric_pairs() -> Vec<(usize, usize)> {
    (0..100).map(|c| (c, c - c % 5 + (c + 1) % 5)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub rate: f64,
    /// Source -> target flips for asymmetric noise; the MNIST map when absent.
    pub pair_map: Option<Vec<(usize, usize)>>,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, rate: f64, seed: u64) -> Self {
        Self {
            kind,
            rate,
            pair_map: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        check_rate(self.rate)
    }
}

fn check_rate(rate: f64) -> Result<(), NoiseError> {
    if (0.0..0.5).contains(&rate) {
        Ok(())
    } else {
        Err(NoiseError::Rate(rate))
    }
}

/// Row-stochastic `k x k` matrix; entry `(i, j)` is `P(noisy = j | clean = i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    classes: usize,
    rows: Vec<f64>,
}

impl TransitionMatrix {
    pub fn identity(classes: usize) -> Self {
        let mut rows = vec![0.0; classes * classes];
        for i in 0..classes {
            rows[i * classes + i] = 1.0;
        }
        Self { classes, rows }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, NoiseError> {
        let classes = rows.len();
        if rows.iter().any(|r| r.len() != classes) {
            return Err(NoiseError::Matrix("matrix is not square".into()));
        }
        let m = Self {
            classes,
            rows: rows.into_iter().flatten().collect(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, clean: usize, noisy: usize) -> f64 {
        self.rows[clean * self.classes + noisy]
    }

    pub fn row(&self, clean: usize) -> &[f64] {
        &self.rows[clean * self.classes..(clean + 1) * self.classes]
    }

    fn set(&mut self, clean: usize, noisy: usize, value: f64) {
        self.rows[clean * self.classes + noisy] = value;
    }

    fn add(&mut self, clean: usize, noisy: usize, value: f64) {
        self.rows[clean * self.classes + noisy] += value;
    }

    /// Entries in `[0, 1]` and rows summing to one within `1e-9`.
    pub fn validate(&self) -> Result<(), NoiseError> {
        for i in 0..self.classes {
            let row = self.row(i);
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(NoiseError::Matrix(format!("row {i} has an entry outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(NoiseError::Matrix(format!("row {i} sums to {sum}")));
            }
        }
        Ok(())
    }

    pub fn is_diagonally_dominant(&self) -> bool {
        (0..self.classes).all(|i| self.get(i, i) > 0.5)
    }
}

pub fn build_matrix(spec: &NoiseSpec, classes: usize) -> Result<TransitionMatrix, NoiseError> {
    spec.validate()?;
    if spec.kind == NoiseKind::Instance {
        return Err(NoiseError::InstanceMatrix);
    }
    if classes < 2 {
        return Err(NoiseError::Classes(classes));
    }
    let r = spec.rate;
    let k = classes;
    let mut m = TransitionMatrix::identity(k);
    if r == 0.0 {
        return Ok(m);
    }
    match spec.kind {
        NoiseKind::Symmetric => {
            let off = r / (k - 1) as f64;
            for i in 0..k {
                for j in 0..k {
                    m.set(i, j, if i == j { 1.0 - r } else { off });
                }
            }
        }
        NoiseKind::Asymmetric => {
            let pairs = spec
                .pair_map
                .as_deref()
                .unwrap_or(&MNIST_ASYMMETRIC_PAIRS);
            for &(s, t) in pairs {
                if s >= k || t >= k || s == t {
                    return Err(NoiseError::Matrix(format!(
                        "pair {s} -> {t} invalid for {k} classes"
                    )));
                }
                m.set(s, s, 1.0 - r);
                m.set(s, t, r);
            }
        }
        NoiseKind::Pairflip => {
            for i in 0..k {
                m.set(i, i, 1.0 - r);
                m.add(i, (i + 1) % k, r);
            }
        }
        NoiseKind::Tridiagonal => {
            for i in 0..k {
                m.set(i, i, 1.0 - r);
                m.add(i, (i + 1) % k, r / 2.0);
                m.add(i, (i + k - 1) % k, r / 2.0);
            }
        }
        NoiseKind::Instance => unreachable!(),
    }
    m.validate()?;
    Ok(m)
}

fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (j, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return j;
        }
    }
    // u landed in the rounding slack above the cumulative sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Flips each label independently by sampling its matrix row.
pub fn corrupt_class_dependent(
    labels: &[usize],
    matrix: &TransitionMatrix,
    seed: u64,
) -> Result<Vec<usize>, NoiseError> {
    let k = matrix.classes();
    if let Some(&label) = labels.iter().find(|&&y| y >= k) {
        return Err(NoiseError::LabelRange { label, classes: k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(labels
        .iter()
        .map(|&y| sample_index(matrix.row(y), rng.random::<f64>()))
        .collect())
}

/// Per-example flip distribution of the instance-noise model: the clean class
/// keeps `1 - flip_rate` and the rest is a softmax of the projected features
/// over the other classes, scaled by `flip_rate`.
pub fn instance_transition_row(
    features: &[f64],
    clean: usize,
    flip_rate: f64,
    projection: ArrayView2<f64>,
) -> Vec<f64> {
    let k = projection.ncols();
    let mut logits: Vec<f64> = (0..k)
        .map(|j| features.iter().zip(projection.column(j)).map(|(x, w)| x * w).sum())
        .collect();
    logits[clean] = f64::NEG_INFINITY;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p *= flip_rate / total;
    }
    probs[clean] = 1.0 - flip_rate;
    probs
}

/// Feature-dependent corruption.
///
/// Draw order: all per-example flip rates from `N(rate, 0.1^2)` truncated to
/// `[0, 1]`, then the `d x k` standard-normal projection, then one uniform
/// per example to sample its label. A zero rate leaves labels unchanged.
pub fn corrupt_instance_dependent(
    features: ArrayView2<f64>,
    labels: &[usize],
    classes: usize,
    rate: f64,
    seed: u64,
) -> Result<Vec<usize>, NoiseError> {
    check_rate(rate)?;
    if classes < 2 {
        return Err(NoiseError::Classes(classes));
    }
    if features.nrows() != labels.len() {
        return Err(NoiseError::Shape {
            rows: features.nrows(),
            labels: labels.len(),
        });
    }
    if let Some(&label) = labels.iter().find(|&&y| y >= classes) {
        return Err(NoiseError::LabelRange { label, classes });
    }
    if rate == 0.0 {
        return Ok(labels.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flip_rates: Vec<f64> = (0..labels.len())
        .map(|_| loop {
            let z: f64 = StandardNormal.sample(&mut rng);
            let q = rate + 0.1 * z;
            if (0.0..=1.0).contains(&q) {
                break q;
            }
        })
        .collect();
    let d = features.ncols();
    let projection = Array2::from_shape_simple_fn((d, classes), || StandardNormal.sample(&mut rng));
    let mut noisy = Vec::with_capacity(labels.len());
    for (i, &y) in labels.iter().enumerate() {
        let row = features.row(i).to_vec();
        let probs = instance_transition_row(&row, y, flip_rates[i], projection.view());
        noisy.push(sample_index(&probs, rng.random::<f64>()));
    }
    Ok(noisy)
}

/// Applies `spec` to the observed labels of `ds` (clean labels untouched).
pub fn apply_noise(ds: &NoisyDataset, spec: &NoiseSpec) -> Result<NoisyDataset, NoiseError> {
    let noisy = match spec.kind {
        NoiseKind::Instance => corrupt_instance_dependent(
            ds.features.view(),
            &ds.clean_labels,
            ds.classes,
            spec.rate,
            spec.seed,
        )?,
        _ => {
            let matrix = build_matrix(spec, ds.classes)?;
            corrupt_class_dependent(&ds.clean_labels, &matrix, spec.seed)?
        }
    };
    let mut out = ds.clone();
    out.noisy_labels = noisy;
    Ok(out)
}

/// Keeps `ceil(keep_fraction * count)` examples of every listed class (chosen
/// by clean label, uniformly with `seed`), keeps all other examples, and
/// shuffles the result. The split is reset to all-train.
pub fn make_imbalanced(
    ds: &NoisyDataset,
    minority_classes: &[usize],
    keep_fraction: f64,
    seed: u64,
) -> Result<NoisyDataset, NoiseError> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(NoiseError::Imbalance(format!(
            "keep fraction must lie in (0, 1], got {keep_fraction}"
        )));
    }
    if let Some(&c) = minority_classes.iter().find(|&&c| c >= ds.classes) {
        return Err(NoiseError::Imbalance(format!(
            "class {c} outside [0, {})",
            ds.classes
        )));
    }
    if keep_fraction == 1.0 {
        return Ok(ds.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut minority = vec![false; ds.classes];
    for &c in minority_classes {
        minority[c] = true;
    }
    let mut keep: Vec<usize> = (0..ds.len()).filter(|&i| !minority[ds.clean_labels[i]]).collect();
    for class in (0..ds.classes).filter(|&c| minority[c]) {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&i| ds.clean_labels[i] == class).collect();
        let retained = (keep_fraction * members.len() as f64 - 1e-9).ceil().max(0.0) as usize;
        members.shuffle(&mut rng);
        keep.extend_from_slice(&members[..retained.min(members.len())]);
    }
    keep.shuffle(&mut rng);
    let mut out = ds.subset(&keep);
    out.split = Split {
        train: (0..keep.len()).collect(),
        validation: Vec::new(),
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn spec(kind: NoiseKind, rate: f64) -> NoiseSpec {
        NoiseSpec::new(kind, rate, 0)
    }

    #[test]
    fn symmetric_matrix_entries() {
        let m = build_matrix(&spec(NoiseKind::Symmetric, 0.2), 10).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let expected = if i == j { 0.8 } else { 0.2 / 9.0 };
                assert!((m.get(i, j) - expected).abs() < 1e-15);
            }
        }
        assert!((m.get(0, 1) - 0.022_222).abs() < 1e-6);
    }

    #[test]
    fn zero_rate_is_identity() {
        for kind in [
            NoiseKind::Symmetric,
            NoiseKind::Asymmetric,
            NoiseKind::Pairflip,
            NoiseKind::Tridiagonal,
        ] {
            assert_eq!(build_matrix(&spec(kind, 0.0), 10).unwrap(), TransitionMatrix::identity(10));
        }
    }

    #[test]
    fn pairflip_three_classes() {
        let m = build_matrix(&spec(NoiseKind::Pairflip, 0.2), 3).unwrap();
        let expected = [[0.8, 0.2, 0.0], [0.0, 0.8, 0.2], [0.2, 0.0, 0.8]];
        for (i, row) in expected.iter().enumerate() {
            assert_eq!(m.row(i), row);
        }
    }

    #[test]
    fn tridiagonal_band() {
        let m = build_matrix(&spec(NoiseKind::Tridiagonal, 0.4), 5).unwrap();
        assert_eq!(m.row(0), &[0.6, 0.2, 0.0, 0.0, 0.2]);
        assert_eq!(m.row(2), &[0.0, 0.2, 0.6, 0.2, 0.0]);
        // two classes: both neighbours coincide
        let m = build_matrix(&spec(NoiseKind::Tridiagonal, 0.4), 2).unwrap();
        assert_eq!(m.row(0), &[0.6, 0.4]);
    }

    #[test]
    fn asymmetric_presets() {
        let m = build_matrix(&spec(NoiseKind::Asymmetric, 0.3), 10).unwrap();
        assert_eq!((m.get(2, 2), m.get(2, 7)), (0.7, 0.3));
        assert_eq!((m.get(3, 3), m.get(3, 8)), (0.7, 0.3));
        assert_eq!((m.get(5, 6), m.get(6, 5)), (0.3, 0.3));
        assert_eq!(m.row(7)[7], 1.0);
        assert_eq!(m.row(0)[0], 1.0);

        let fm = NoiseSpec {
            pair_map: Some(FMNIST_ASYMMETRIC_PAIRS.to_vec()),
            ..spec(NoiseKind::Asymmetric, 0.2)
        };
        let m = build_matrix(&fm, 10).unwrap();
        assert_eq!(m.get(0, 6), 0.2);
        assert_eq!(m.get(6, 6), 1.0);

        let c100 = NoiseSpec {
            pair_map: Some(cifar100_asymmetric_pairs()),
            ..spec(NoiseKind::Asymmetric, 0.2)
        };
        let m = build_matrix(&c100, 100).unwrap();
        assert_eq!(m.get(4, 0), 0.2);
        assert_eq!(m.get(7, 8), 0.2);
        assert!(m.is_diagonally_dominant());

        let bad = NoiseSpec {
            pair_map: Some(vec![(1, 12)]),
            ..spec(NoiseKind::Asymmetric, 0.2)
        };
        assert!(build_matrix(&bad, 10).is_err());
    }

    #[test]
    fn matrices_are_stochastic_and_dominant() {
        for kind in [
            NoiseKind::Symmetric,
            NoiseKind::Asymmetric,
            NoiseKind::Pairflip,
            NoiseKind::Tridiagonal,
        ] {
            for rate in [0.0, 0.1, 0.2, 0.3, 0.4, 0.49] {
                let m = build_matrix(&spec(kind, rate), 10).unwrap();
                m.validate().unwrap();
                if rate <= 0.4 {
                    assert!(m.is_diagonally_dominant(), "{kind} {rate}");
                }
            }
        }
    }

    #[test]
    fn build_matrix_errors() {
        assert_eq!(
            build_matrix(&spec(NoiseKind::Instance, 0.2), 10),
            Err(NoiseError::InstanceMatrix)
        );
        assert_eq!(build_matrix(&spec(NoiseKind::Symmetric, 0.5), 10), Err(NoiseError::Rate(0.5)));
        assert_eq!(build_matrix(&spec(NoiseKind::Symmetric, 0.6), 10), Err(NoiseError::Rate(0.6)));
        assert!(TransitionMatrix::from_rows(vec![vec![0.5, 0.4], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn identity_corruption_is_noop() {
        let labels: Vec<usize> = (0..100).map(|i| i % 7).collect();
        let out = corrupt_class_dependent(&labels, &TransitionMatrix::identity(7), 3).unwrap();
        assert_eq!(out, labels);
        assert_eq!(
            corrupt_class_dependent(&[7], &TransitionMatrix::identity(7), 3),
            Err(NoiseError::LabelRange { label: 7, classes: 7 })
        );
    }

    #[test]
    fn symmetric_flip_fraction_concentrates() {
        let labels: Vec<usize> = (0..60_000).map(|i| i % 10).collect();
        let m = build_matrix(&spec(NoiseKind::Symmetric, 0.2), 10).unwrap();
        let noisy = corrupt_class_dependent(&labels, &m, 42).unwrap();
        let flipped = labels.iter().zip(&noisy).filter(|(a, b)| a != b).count();
        let frac = flipped as f64 / labels.len() as f64;
        let tol = 3.0 * (0.2f64 * 0.8 / 60_000.0).sqrt();
        assert!((frac - 0.2).abs() <= tol, "{frac}");
    }

    #[test]
    fn pairflip_only_reaches_neighbour() {
        let labels = vec![4; 20_000];
        let m = build_matrix(&spec(NoiseKind::Pairflip, 0.4), 10).unwrap();
        let noisy = corrupt_class_dependent(&labels, &m, 9).unwrap();
        assert!(noisy.iter().all(|&y| y == 4 || y == 5));
        let frac = noisy.iter().filter(|&&y| y == 5).count() as f64 / 20_000.0;
        assert!((frac - 0.4).abs() < 3.0 * (0.24f64 / 20_000.0).sqrt(), "{frac}");
    }

    #[test]
    fn corruption_is_deterministic() {
        let labels: Vec<usize> = (0..500).map(|i| i % 10).collect();
        let m = build_matrix(&spec(NoiseKind::Tridiagonal, 0.3), 10).unwrap();
        assert_eq!(
            corrupt_class_dependent(&labels, &m, 5).unwrap(),
            corrupt_class_dependent(&labels, &m, 5).unwrap()
        );
        let feats = Array2::from_shape_fn((500, 4), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 10.0);
        assert_eq!(
            corrupt_instance_dependent(feats.view(), &labels, 10, 0.3, 5).unwrap(),
            corrupt_instance_dependent(feats.view(), &labels, 10, 0.3, 5).unwrap()
        );
    }

    #[test]
    fn instance_noise_zero_rate() {
        let labels: Vec<usize> = (0..50).map(|i| i % 3).collect();
        let feats = Array2::from_elem((50, 2), 0.5);
        assert_eq!(
            corrupt_instance_dependent(feats.view(), &labels, 3, 0.0, 1).unwrap(),
            labels
        );
        assert!(corrupt_instance_dependent(feats.view(), &labels, 3, 0.5, 1).is_err());
        assert!(corrupt_instance_dependent(feats.view(), &labels[..10], 3, 0.2, 1).is_err());
    }

    #[test]
    fn instance_noise_overall_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let feats = Array2::from_shape_simple_fn((10_000, 20), || rng.random::<f64>());
        let labels: Vec<usize> = (0..10_000).map(|i| i % 10).collect();
        let noisy = corrupt_instance_dependent(feats.view(), &labels, 10, 0.2, 3).unwrap();
        let frac = labels.iter().zip(&noisy).filter(|(a, b)| a != b).count() as f64 / 10_000.0;
        assert!((0.15..=0.25).contains(&frac), "{frac}");
    }

    #[test]
    fn instance_row_depends_only_on_features() {
        let projection = Array2::from_shape_fn((3, 4), |(i, j)| (i as f64 - j as f64) * 0.7);
        let x = [0.2, 0.9, 0.4];
        let a = instance_transition_row(&x, 1, 0.3, projection.view());
        let b = instance_transition_row(&x, 1, 0.3, projection.view());
        assert_eq!(a, b);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(a[1], 0.7);
        let other = instance_transition_row(&[0.9, 0.1, 0.0], 1, 0.3, projection.view());
        assert_ne!(a, other);
    }

    fn labelled(counts: &[usize]) -> NoisyDataset {
        let labels: Vec<usize> = counts
            .iter()
            .enumerate()
            .flat_map(|(c, &n)| std::iter::repeat_n(c, n))
            .collect();
        let n = labels.len();
        let feats = Array2::from_shape_fn((n, 1), |(i, _)| i as f64 / n as f64);
        NoisyDataset::clean(feats, labels, counts.len()).unwrap()
    }

    #[test]
    fn imbalance_counts() {
        let ds = labelled(&[6_000; 10]);
        let im = make_imbalanced(&ds, &[0, 1, 2, 3, 4], 0.01, 1).unwrap();
        let counts = im.class_counts(&im.clean_labels);
        assert_eq!(counts, vec![60, 60, 60, 60, 60, 6_000, 6_000, 6_000, 6_000, 6_000]);
        im.validate().unwrap();

        let ds = labelled(&[100, 40]);
        let half = make_imbalanced(&ds, &[0], 0.5, 2).unwrap();
        assert_eq!(half.class_counts(&half.clean_labels), vec![50, 40]);

        assert_eq!(make_imbalanced(&ds, &[0], 1.0, 2).unwrap(), ds);
        assert!(make_imbalanced(&ds, &[2], 0.5, 2).is_err());
        assert!(make_imbalanced(&ds, &[0], 0.0, 2).is_err());
    }

    #[test]
    fn imbalance_preserves_majority_rows() {
        let ds = labelled(&[50, 30, 20]);
        let im = make_imbalanced(&ds, &[0], 0.1, 4).unwrap();
        let mut before: Vec<u64> = (0..ds.len())
            .filter(|&i| ds.clean_labels[i] != 0)
            .map(|i| ds.features[[i, 0]].to_bits())
            .collect();
        let mut after: Vec<u64> = (0..im.len())
            .filter(|&i| im.clean_labels[i] != 0)
            .map(|i| im.features[[i, 0]].to_bits())
            .collect();
        before.sort_unstable();
        after.sort_unstable();
        assert_eq!(before, after);
    }

    #[test]
    fn apply_noise_keeps_clean_labels() {
        let ds = labelled(&[200; 10]);
        let noisy = apply_noise(&ds, &NoiseSpec::new(NoiseKind::Symmetric, 0.4, 1)).unwrap();
        assert_eq!(noisy.clean_labels, ds.clean_labels);
        assert!(!noisy.flipped().is_empty());
        let inst = apply_noise(&ds, &NoiseSpec::new(NoiseKind::Instance, 0.2, 1)).unwrap();
        assert_eq!(inst.clean_labels, ds.clean_labels);
    }
}
