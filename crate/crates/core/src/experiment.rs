//! Run manifests: dataset construction, training or sweep, CSV output.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::{holdout_test, make_blobs, read_idx, split_validation, BlobSpec, DataError, NoisyDataset};
use crate::estimator::default_knn_k;
use crate::noise::{
    apply_noise, make_imbalanced, NoiseError, NoiseKind, NoiseSpec, FMNIST_ASYMMETRIC_PAIRS,
    MNIST_ASYMMETRIC_PAIRS,
};
use crate::trainer::{run_training, sweep_hyperparameters, EpochReport, SweepCell, TrainConfig, TrainError, TrainOutcome};
use crate::tracker::NetworkId;

pub const CSV_HEADER: &str =
    "epoch,R_T,net,val_acc,test_acc,selected_ratio,selection_precision,selected_count";

/// Grid searched on each swept axis.
pub const SWEEP_GRID: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("{path}: {source}")]
    Output { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdxFlavour {
    Mnist,
    Fmnist,
}

impl IdxFlavour {
    pub fn name(self) -> &'static str {
        match self {
            IdxFlavour::Mnist => "mnist",
            IdxFlavour::Fmnist => "fmnist",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    /// Gaussian clusters; the test set is drawn separately and balanced.
    Blobs {
        classes: usize,
        per_class: usize,
        test_per_class: usize,
        dim: usize,
        spread: f64,
    },
    /// IDX files; a stratified `test_fraction` is held out as the clean
    /// test set.
    Idx {
        flavour: IdxFlavour,
        images: PathBuf,
        labels: PathBuf,
        test_fraction: f64,
    },
}

impl DatasetSource {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetSource::Blobs { .. } => "blobs",
            DatasetSource::Idx { flavour, .. } => flavour.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Imbalance {
    pub classes: Vec<usize>,
    pub keep_fraction: f64,
}

/// Everything that determines a run's output.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub dataset: DatasetSource,
    pub validation_fraction: f64,
    pub noise: NoiseKind,
    pub rate: f64,
    pub imbalance: Option<Imbalance>,
    pub train: TrainConfig,
    pub seed: u64,
    pub sweep: bool,
    /// Seconds since the Unix epoch at start. Informational only; it is not
    /// written to the CSV so that replays stay byte-identical.
    pub started_unix: u64,
}

/// Independent seed for one pipeline stage.
pub fn stage_seed(seed: u64, stage: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stage);
    rng.next_u64()
}

mod stage {
    pub const CENTERS: u64 = 1;
    pub const TRAIN_SAMPLES: u64 = 2;
    pub const TEST_SAMPLES: u64 = 3;
    pub const TEST_SPLIT: u64 = 4;
    pub const IMBALANCE: u64 = 5;
    pub const NOISE: u64 = 6;
    pub const VALIDATION: u64 = 7;
    pub const NET_FIRST: u64 = 8;
    pub const NET_SECOND: u64 = 9;
    pub const SHUFFLE: u64 = 10;
}

/// Sets the network and shuffle seeds of `cfg` from the run seed.
pub fn seed_training(cfg: &mut TrainConfig, seed: u64) {
    cfg.net_seeds = [
        stage_seed(seed, stage::NET_FIRST),
        stage_seed(seed, stage::NET_SECOND),
    ];
    cfg.shuffle_seed = stage_seed(seed, stage::SHUFFLE);
}

/// Noisy training set (with validation split) and clean test set.
pub fn build_datasets(m: &RunManifest) -> Result<(NoisyDataset, NoisyDataset), RunError> {
    let (mut train, test) = match &m.dataset {
        DatasetSource::Blobs {
            classes,
            per_class,
            test_per_class,
            dim,
            spread,
        } => {
            let centers = stage_seed(m.seed, stage::CENTERS);
            let spec = BlobSpec::with_random_centers(
                *classes,
                *per_class,
                *dim,
                *spread,
                centers,
                stage_seed(m.seed, stage::TRAIN_SAMPLES),
            );
            let test_spec = BlobSpec {
                per_class: vec![*test_per_class; *classes],
                seed: stage_seed(m.seed, stage::TEST_SAMPLES),
                ..spec.clone()
            };
            (make_blobs(&spec)?, make_blobs(&test_spec)?)
        }
        DatasetSource::Idx {
            images,
            labels,
            test_fraction,
            ..
        } => {
            let full = read_idx(images, labels)?;
            holdout_test(&full, *test_fraction, stage_seed(m.seed, stage::TEST_SPLIT))?
        }
    };
    if let Some(imb) = &m.imbalance {
        train = make_imbalanced(
            &train,
            &imb.classes,
            imb.keep_fraction,
            stage_seed(m.seed, stage::IMBALANCE),
        )?;
    }
    let pair_map = match m.dataset {
        DatasetSource::Idx {
            flavour: IdxFlavour::Fmnist,
            ..
        } => FMNIST_ASYMMETRIC_PAIRS.to_vec(),
        _ => MNIST_ASYMMETRIC_PAIRS.to_vec(),
    };
    let spec = NoiseSpec {
        kind: m.noise,
        rate: m.rate,
        pair_map: Some(pair_map),
        seed: stage_seed(m.seed, stage::NOISE),
    };
    let train = apply_noise(&train, &spec)?;
    let train = split_validation(&train, m.validation_fraction, stage_seed(m.seed, stage::VALIDATION))?;
    Ok((train, test))
}

/// Result of executing a manifest.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: TrainOutcome,
    /// Sweep cells, when a sweep chose the criterion parameters.
    pub sweep: Option<Vec<SweepCell>>,
    /// Final training configuration (after a sweep, the chosen one).
    pub train: TrainConfig,
    pub train_fingerprint: String,
    pub test_fingerprint: String,
}

pub fn execute(m: &RunManifest) -> Result<RunResult, RunError> {
    let (train_ds, test_ds) = build_datasets(m)?;
    let mut cfg = m.train.clone();
    let mut sweep = None;
    if m.sweep {
        let found = sweep_hyperparameters(&SWEEP_GRID, &SWEEP_GRID, &cfg, &train_ds, &test_ds)?;
        cfg.criterion = found.best;
        sweep = Some(found.cells);
    }
    let outcome = run_training(&cfg, &train_ds, &test_ds)?;
    Ok(RunResult {
        outcome,
        sweep,
        train: cfg,
        train_fingerprint: train_ds.fingerprint(),
        test_fingerprint: test_ds.fingerprint(),
    })
}

fn real(v: f64) -> String {
    format!("{v:.6}")
}

fn optional(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), real)
}

impl RunManifest {
    /// Key/value pairs written as CSV comments.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.train;
        let c = &t.criterion;
        let mut out: Vec<(&'static str, String)> = vec![("dataset", self.dataset.name().into())];
        match &self.dataset {
            DatasetSource::Blobs {
                classes,
                per_class,
                test_per_class,
                dim,
                spread,
            } => {
                out.push(("blob_classes", classes.to_string()));
                out.push(("blob_per_class", per_class.to_string()));
                out.push(("blob_test_per_class", test_per_class.to_string()));
                out.push(("blob_dim", dim.to_string()));
                out.push(("blob_spread", spread.to_string()));
            }
            DatasetSource::Idx {
                images,
                labels,
                test_fraction,
                ..
            } => {
                out.push(("images", images.display().to_string()));
                out.push(("labels", labels.display().to_string()));
                out.push(("test_fraction", test_fraction.to_string()));
            }
        }
        out.push(("validation_fraction", self.validation_fraction.to_string()));
        out.push(("noise", self.noise.name().into()));
        out.push(("rate", self.rate.to_string()));
        out.push(("forget_rate", t.forget_rate.to_string()));
        out.push((
            "imbalance",
            self.imbalance.as_ref().map_or_else(
                || "none".into(),
                |imb| {
                    let classes: Vec<String> = imb.classes.iter().map(usize::to_string).collect();
                    format!("{}:{}", classes.join(","), imb.keep_fraction)
                },
            ),
        ));
        out.push(("criterion", c.family.name().into()));
        out.push(("sigma2", c.sigma2.to_string()));
        out.push(("tau_min", c.tau_min.to_string()));
        out.push(("loss_bound", c.loss_bound.to_string()));
        out.push(("window", c.window.to_string()));
        out.push(("contamination", c.contamination.to_string()));
        out.push((
            "knn_k",
            c.knn_k.map_or_else(|| format!("auto ({} at full window)", default_knn_k(c.window)), |k| k.to_string()),
        ));
        out.push(("epochs", t.epochs.to_string()));
        out.push(("tk", t.warmup.to_string()));
        out.push(("batch_size", t.optimizer.batch_size.to_string()));
        out.push(("lr", t.optimizer.learning_rate.to_string()));
        out.push((
            "lr_decay_start",
            t.optimizer.decay_start.map_or_else(|| "none".into(), |s| s.to_string()),
        ));
        out.push(("hidden", t.hidden.to_string()));
        out.push(("seed", self.seed.to_string()));
        out.push(("net_seeds", format!("{},{}", t.net_seeds[0], t.net_seeds[1])));
        out.push(("shuffle_seed", t.shuffle_seed.to_string()));
        out.push(("minority", {
            let m: Vec<String> = t.minority.iter().map(usize::to_string).collect();
            if m.is_empty() { "none".into() } else { m.join(",") }
        }));
        out.push(("sweep", self.sweep.to_string()));
        out
    }
}

/// Full CSV text: manifest comments, header, one row per epoch and network,
/// and a summary block.
pub fn render_csv(manifest: &RunManifest, result: &RunResult) -> String {
    let mut s = String::new();
    for (key, value) in manifest.entries() {
        let _ = writeln!(s, "# {key}: {value}");
    }
    let _ = writeln!(s, "# train_fingerprint: {}", result.train_fingerprint);
    let _ = writeln!(s, "# test_fingerprint: {}", result.test_fingerprint);
    if let Some(cells) = &result.sweep {
        for cell in cells {
            let _ = writeln!(
                s,
                "# sweep_cell: sigma2={} tau_min={} val_acc={}",
                cell.sigma2,
                cell.tau_min,
                real(cell.val_accuracy)
            );
        }
        let c = &result.train.criterion;
        let _ = writeln!(s, "# sweep_choice: sigma2={} tau_min={}", c.sigma2, c.tau_min);
    }
    s.push_str(CSV_HEADER);
    s.push('\n');
    render_rows(&mut s, &result.outcome.reports);
    render_summary(&mut s, &result.outcome);
    s
}

fn render_rows(s: &mut String, reports: &[EpochReport]) {
    for report in reports {
        for network in NetworkId::BOTH {
            let n = report.net(network);
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                report.epoch,
                real(report.r_t),
                network,
                real(n.val_accuracy),
                real(n.test_accuracy),
                optional(n.selected_ratio),
                optional(n.selection_precision),
                n.selected_count
            );
        }
    }
}

/// Mean test accuracy of `network` over the last `n` epochs.
pub fn tail_mean(reports: &[EpochReport], network: NetworkId, n: usize) -> f64 {
    let tail = &reports[reports.len().saturating_sub(n)..];
    tail.iter().map(|r| r.net(network).test_accuracy).sum::<f64>() / tail.len() as f64
}

fn render_summary(s: &mut String, outcome: &TrainOutcome) {
    let reports = &outcome.reports;
    for network in NetworkId::BOTH {
        let best = &reports[outcome.best[network.index()]];
        let last = outcome.last();
        let _ = writeln!(
            s,
            "# net {network}: best_epoch={} best_test_acc={} last_test_acc={} last10_mean_test_acc={}",
            best.epoch,
            real(best.net(network).test_accuracy),
            real(last.net(network).test_accuracy),
            real(tail_mean(reports, network, 10)),
        );
    }
}

/// Writes the CSV to `path`, creating or truncating it.
pub fn emit_csv(path: &Path, manifest: &RunManifest, result: &RunResult) -> Result<(), RunError> {
    std::fs::write(path, render_csv(manifest, result)).map_err(|source| RunError::Output {
        path: path.to_path_buf(),
        source,
    })
}
