//! Flag parsing and run orchestration for the `cnlcu` binary.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use cnlcu::estimator::{CriterionConfig, CriterionFamily};
use cnlcu::experiment::{
    emit_csv, execute, render_csv, seed_training, DatasetSource, IdxFlavour, Imbalance, RunError,
    RunManifest,
};
use cnlcu::noise::NoiseKind;
use cnlcu::trainer::TrainConfig;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetArg {
    Mnist,
    Fmnist,
    Blobs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    Symmetric,
    Asymmetric,
    Pairflip,
    Tridiagonal,
    Instance,
}

impl From<NoiseArg> for NoiseKind {
    fn from(arg: NoiseArg) -> Self {
        match arg {
            NoiseArg::Symmetric => NoiseKind::Symmetric,
            NoiseArg::Asymmetric => NoiseKind::Asymmetric,
            NoiseArg::Pairflip => NoiseKind::Pairflip,
            NoiseArg::Tridiagonal => NoiseKind::Tridiagonal,
            NoiseArg::Instance => NoiseKind::Instance,
        }
    }
}

fn parse_rate(s: &str) -> Result<f64, String> {
    let r: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..0.5).contains(&r) {
        Ok(r)
    } else {
        Err(format!("{r} is not in [0, 0.5); the transition matrix must stay diagonally dominant"))
    }
}

fn parse_criterion(s: &str) -> Result<CriterionFamily, String> {
    CriterionFamily::from_name(s).ok_or_else(|| {
        let names: Vec<&str> = CriterionFamily::ALL.iter().map(|f| f.name()).collect();
        format!("unknown criterion '{s}' (expected one of {})", names.join(", "))
    })
}

/// Parses `"a-b:f"` or `"a,b,c:f"` into minority classes and keep fraction.
pub fn parse_imbalance(s: &str) -> Result<Imbalance, String> {
    let (classes, fraction) = s
        .split_once(':')
        .ok_or_else(|| format!("expected CLASSES:FRACTION, got '{s}'"))?;
    let keep_fraction: f64 = fraction
        .trim()
        .parse()
        .map_err(|_| format!("bad keep fraction '{fraction}'"))?;
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(format!("keep fraction must lie in (0, 1], got {keep_fraction}"));
    }
    let mut out = Vec::new();
    for part in classes.split(',') {
        let part = part.trim();
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad class '{t}'"));
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("empty class range {a}-{b}"));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(Imbalance {
        classes: out,
        keep_fraction,
    })
}

#[derive(Debug, Parser)]
#[command(
    name = "cnlcu",
    version,
    about = "Train two co-teaching networks on noisy labels and write per-epoch metrics as CSV"
)]
pub struct Cli {
    #[arg(long, value_enum, default_value = "blobs")]
    pub dataset: DatasetArg,
    /// IDX image file (optionally gzipped); required for mnist and fmnist.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// IDX label file (optionally gzipped); required for mnist and fmnist.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "symmetric")]
    pub noise: NoiseArg,
    #[arg(long, default_value = "0.2", value_parser = parse_rate)]
    pub rate: f64,
    /// Fraction dropped per minibatch once warm-up ends; defaults to --rate.
    #[arg(long)]
    pub forget_rate: Option<f64>,
    #[arg(long, default_value = "cnlcu-s", value_parser = parse_criterion)]
    pub criterion: CriterionFamily,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// First epoch of the linear learning-rate decay (default: 40% of --epochs).
    #[arg(long)]
    pub lr_decay_start: Option<usize>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub tau_min: Option<f64>,
    /// Upper clamp for recorded losses (default: 2 ln k).
    #[arg(long)]
    pub loss_bound: Option<f64>,
    /// Loss history length (default: 5 soft, 12 hard, 1 current).
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub contamination: Option<f64>,
    /// Neighbour count for outlier ranking (default: floor(sqrt(t))).
    #[arg(long)]
    pub knn_k: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub tk: usize,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Shrink classes to a fraction of their size, e.g. "0-4:0.01".
    #[arg(long, value_parser = parse_imbalance)]
    pub imbalance: Option<Imbalance>,
    /// Grid-search sigma2 and tau_min on the noisy validation split first.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, default_value_t = 0.1)]
    pub validation_fraction: f64,
    /// Held-out clean test share for IDX datasets.
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[arg(long, default_value_t = 10)]
    pub blob_classes: usize,
    #[arg(long, default_value_t = 1000)]
    pub blob_per_class: usize,
    #[arg(long, default_value_t = 200)]
    pub blob_test_per_class: usize,
    #[arg(long, default_value_t = 20)]
    pub blob_dim: usize,
    #[arg(long, default_value_t = 0.15)]
    pub blob_spread: f64,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Usage(#[from] clap::Error),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("{0}")]
    Invalid(String),
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(e) if !e.use_stderr() => 0,
            CliError::Usage(_) | CliError::Invalid(_) => 2,
            CliError::Run(_) | CliError::Io(_) => 1,
        }
    }
}

/// A resolved manifest plus warnings about flags that had no effect.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub manifest: RunManifest,
    pub out: Option<PathBuf>,
    pub warnings: Vec<String>,
}

pub fn parse_args<I, T>(argv: I) -> Result<Parsed, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    resolve(cli)
}

fn resolve(cli: Cli) -> Result<Parsed, CliError> {
    let invalid = |msg: String| Err(CliError::Invalid(msg));
    let mut warnings = Vec::new();
    let dataset = match cli.dataset {
        DatasetArg::Blobs => {
            if cli.images.is_some() || cli.labels.is_some() {
                warnings.push("--images/--labels are ignored for --dataset blobs".into());
            }
            DatasetSource::Blobs {
                classes: cli.blob_classes,
                per_class: cli.blob_per_class,
                test_per_class: cli.blob_test_per_class,
                dim: cli.blob_dim,
                spread: cli.blob_spread,
            }
        }
        DatasetArg::Mnist | DatasetArg::Fmnist => {
            let (Some(images), Some(labels)) = (cli.images, cli.labels) else {
                return invalid("--images and --labels are required for IDX datasets".into());
            };
            let flavour = if cli.dataset == DatasetArg::Mnist {
                IdxFlavour::Mnist
            } else {
                IdxFlavour::Fmnist
            };
            DatasetSource::Idx {
                flavour,
                images,
                labels,
                test_fraction: cli.test_fraction,
            }
        }
    };
    let classes = match &dataset {
        DatasetSource::Blobs { classes, .. } => *classes,
        DatasetSource::Idx { .. } => 10,
    };

    let family = cli.criterion;
    let mut criterion = CriterionConfig::new(family, classes);
    if let Some(s) = cli.sigma2 {
        if family.uses_sigma2() {
            criterion.sigma2 = s;
        } else {
            warnings.push(format!("--sigma2 has no effect with criterion {family}; ignored"));
        }
    }
    if let Some(t) = cli.tau_min {
        if family.uses_tau_min() {
            criterion.tau_min = t;
        } else {
            warnings.push(format!("--tau-min has no effect with criterion {family}; ignored"));
        }
    }
    if let Some(c) = cli.contamination {
        if family.truncates() {
            criterion.contamination = c;
        } else {
            warnings.push(format!("--contamination has no effect with criterion {family}; ignored"));
        }
    }
    if let Some(k) = cli.knn_k {
        if family.truncates() {
            criterion.knn_k = Some(k);
        } else {
            warnings.push(format!("--knn-k has no effect with criterion {family}; ignored"));
        }
    }
    if let Some(l) = cli.loss_bound {
        criterion.loss_bound = l;
    }
    if let Some(w) = cli.window {
        criterion.window = w;
    }
    if cli.sweep && !family.uses_sigma2() && !family.uses_tau_min() {
        warnings.push(format!("--sweep has nothing to tune for criterion {family}"));
    }

    let forget_rate = cli.forget_rate.unwrap_or(cli.rate);
    let mut train = TrainConfig::new(criterion, cli.epochs, forget_rate, cli.seed);
    train.warmup = cli.tk;
    train.hidden = cli.hidden;
    train.optimizer.batch_size = cli.batch_size;
    train.optimizer.learning_rate = cli.lr;
    if let Some(start) = cli.lr_decay_start {
        train.optimizer.decay_start = Some(start);
    }
    seed_training(&mut train, cli.seed);
    if let Some(imb) = &cli.imbalance {
        if let Some(&c) = imb.classes.iter().find(|&&c| c >= classes) {
            return invalid(format!("--imbalance class {c} outside [0, {classes})"));
        }
        train.minority = imb.classes.clone();
    }
    train.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
    if !(cli.validation_fraction > 0.0 && cli.validation_fraction < 1.0) {
        return invalid(format!(
            "--validation-fraction must lie in (0, 1), got {}",
            cli.validation_fraction
        ));
    }

    let started_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    Ok(Parsed {
        manifest: RunManifest {
            dataset,
            validation_fraction: cli.validation_fraction,
            noise: cli.noise.into(),
            rate: cli.rate,
            imbalance: cli.imbalance,
            train,
            seed: cli.seed,
            sweep: cli.sweep,
            started_unix,
        },
        out: cli.out,
        warnings,
    })
}

/// Runs a parsed invocation, writing the CSV to `--out` or `stdout`.
pub fn run(parsed: &Parsed, stdout: &mut impl Write, stderr: &mut impl Write) -> Result<(), CliError> {
    for w in &parsed.warnings {
        writeln!(stderr, "warning: {w}")?;
    }
    writeln!(stderr, "started at unix time {}", parsed.manifest.started_unix)?;
    let result = execute(&parsed.manifest)?;
    match &parsed.out {
        Some(path) => emit_csv(path, &parsed.manifest, &result)?,
        None => stdout.write_all(render_csv(&parsed.manifest, &result).as_bytes())?,
    }
    Ok(())
}
