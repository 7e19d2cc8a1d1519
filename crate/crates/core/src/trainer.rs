//! Two-network co-training with criterion-driven selection per minibatch.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dataset::NoisyDataset;
use crate::estimator::{score, CriterionConfig, EstimatorError};
use crate::metrics::{selected_ratio, selection_precision, test_accuracy, SelectionLedger};
use crate::nn::{Mlp, NetError, OptimizerConfig};
use crate::tracker::{NetworkId, TrackerBank, TrackerError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error("invalid training configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Epochs over which the kept fraction ramps down (`T_k`).
    pub warmup: usize,
    /// Fraction eventually dropped from each minibatch; normally the noise
    /// rate.
    pub forget_rate: f64,
    pub criterion: CriterionConfig,
    pub optimizer: OptimizerConfig,
    pub hidden: usize,
    pub net_seeds: [u64; 2],
    pub shuffle_seed: u64,
    /// Classes counted by the selected-ratio column; empty for balanced data.
    pub minority: Vec<usize>,
}

impl TrainConfig {
    /// Defaults: `T_k = 10`, 64 hidden units, learning-rate decay from 40%
    /// of the run.
    pub fn new(criterion: CriterionConfig, epochs: usize, forget_rate: f64, seed: u64) -> Self {
        let optimizer = OptimizerConfig {
            decay_start: Some(default_decay_start(epochs)),
            ..OptimizerConfig::default()
        };
        Self {
            epochs,
            warmup: 10,
            forget_rate,
            criterion,
            optimizer,
            hidden: 64,
            net_seeds: [seed.wrapping_mul(2).wrapping_add(1), seed.wrapping_mul(2).wrapping_add(2)],
            shuffle_seed: seed ^ 0x5eed_5eed,
            minority: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |msg: String| Err(TrainError::Config(msg));
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.warmup == 0 {
            return fail("warm-up epochs must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.forget_rate) {
            return fail(format!("forget rate must lie in [0, 1), got {}", self.forget_rate));
        }
        if self.hidden == 0 || self.optimizer.batch_size == 0 {
            return fail("hidden width and batch size must be positive".into());
        }
        if !(self.optimizer.learning_rate > 0.0) {
            return fail(format!("learning rate must be positive, got {}", self.optimizer.learning_rate));
        }
        self.criterion.validate()?;
        Ok(())
    }
}

pub fn default_decay_start(epochs: usize) -> usize {
    (0.4 * epochs as f64).round() as usize
}

/// Kept fraction for 1-based epoch `epoch`.
pub fn r_schedule(epoch: usize, warmup: usize, forget_rate: f64) -> f64 {
    1.0 - (epoch as f64 / warmup as f64 * forget_rate).min(forget_rate)
}

/// `round(r * batch)`, at least one.
pub fn keep_count(r: f64, batch: usize) -> usize {
    ((r * batch as f64).round() as usize).clamp(1, batch.max(1))
}

/// Positions of the `keep` smallest scores, in ascending position order.
/// Equal scores go to the lower position.
pub fn select_batch(scores: &[f64], keep: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    order.truncate(keep);
    order.sort_unstable();
    order
}

/// Training indices in the order visited during 1-based `epoch`.
pub fn epoch_order(train: &[usize], shuffle_seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    rng.set_stream(epoch as u64);
    let mut order = train.to_vec();
    order.shuffle(&mut rng);
    order
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetEpochStats {
    pub selected_count: usize,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub selected_ratio: Option<f64>,
    pub selection_precision: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    pub r_t: f64,
    pub nets: [NetEpochStats; 2],
}

impl EpochReport {
    pub fn net(&self, network: NetworkId) -> &NetEpochStats {
        &self.nets[network.index()]
    }

    pub fn mean_test_accuracy(&self) -> f64 {
        (self.nets[0].test_accuracy + self.nets[1].test_accuracy) / 2.0
    }

    pub fn mean_val_accuracy(&self) -> f64 {
        (self.nets[0].val_accuracy + self.nets[1].val_accuracy) / 2.0
    }
}

/// Mutable state of one run.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub nets: [Mlp; 2],
    pub bank: TrackerBank,
    pub ledger: SelectionLedger,
}

impl TrainState {
    pub fn new(cfg: &TrainConfig, data: &NoisyDataset) -> Self {
        let net = |seed| Mlp::new(data.dim(), cfg.hidden, data.classes, seed);
        Self {
            nets: [net(cfg.net_seeds[0]), net(cfg.net_seeds[1])],
            bank: TrackerBank::new(data.len(), cfg.criterion.window, cfg.criterion.loss_bound),
            ledger: SelectionLedger::new(),
        }
    }
}

fn rows(features: &Array2<f64>, indices: &[usize]) -> Array2<f64> {
    features.select(Axis(0), indices)
}

/// Scores the batch for one network using its own histories and the
/// current losses, without recording anything.
fn batch_scores(
    bank: &TrackerBank,
    network: NetworkId,
    batch: &[usize],
    losses: &[f64],
    cfg: &CriterionConfig,
) -> Result<Vec<f64>, TrainError> {
    batch
        .iter()
        .zip(losses)
        .map(|(&example, &loss)| {
            let (window, n_t) = bank.preview(network, example, loss)?;
            let report = score(&window, n_t, cfg)?;
            // Current-loss criteria rank by the raw loss; clamping only
            // guards the window statistics.
            Ok(if cfg.family.estimates_current_loss() {
                loss - report.bound_term
            } else {
                report.score
            })
        })
        .collect()
}

/// One pass over the training split. `epoch` is 1-based.
pub fn train_epoch(
    state: &mut TrainState,
    data: &NoisyDataset,
    test: &NoisyDataset,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<EpochReport, TrainError> {
    let r_t = r_schedule(epoch, cfg.warmup, cfg.forget_rate);
    let lr = cfg.optimizer.learning_rate_at(epoch - 1, cfg.epochs);
    let order = epoch_order(&data.split.train, cfg.shuffle_seed, epoch);
    state.ledger.start_epoch();

    for batch in order.chunks(cfg.optimizer.batch_size) {
        let x = rows(&data.features, batch);
        let y: Vec<usize> = batch.iter().map(|&i| data.noisy_labels[i]).collect();
        let keep = keep_count(r_t, batch.len());

        let mut picks: [Vec<usize>; 2] = Default::default();
        for network in NetworkId::BOTH {
            let losses = state.nets[network.index()].forward_losses(x.view(), &y)?;
            let scores = batch_scores(&state.bank, network, batch, &losses, &cfg.criterion)?;
            let chosen = select_batch(&scores, keep);
            let mut flags = vec![false; batch.len()];
            for &p in &chosen {
                flags[p] = true;
            }
            for ((&example, &loss), &flag) in batch.iter().zip(&losses).zip(&flags) {
                state.bank.record(network, example, loss, flag)?;
            }
            picks[network.index()] = chosen;
        }

        // Each network trains on the examples its peer picked.
        for network in NetworkId::BOTH {
            let chosen = &picks[network.peer().index()];
            let xs = rows(&x, chosen);
            let ys: Vec<usize> = chosen.iter().map(|&p| y[p]).collect();
            state.nets[network.index()].backward_update(xs.view(), &ys, &cfg.optimizer, lr)?;
        }
        for network in NetworkId::BOTH {
            let examples = picks[network.index()].iter().map(|&p| batch[p]).collect();
            state.ledger.push_batch(network, examples);
        }
    }

    let e = state.ledger.len() - 1;
    let val_x = rows(&data.features, &data.split.validation);
    let val_y: Vec<usize> = data.split.validation.iter().map(|&i| data.noisy_labels[i]).collect();
    let mut nets: Vec<NetEpochStats> = Vec::with_capacity(2);
    for network in NetworkId::BOTH {
        let net = &state.nets[network.index()];
        let selected: Vec<usize> = state.ledger.selected(e, network).copied().collect();
        nets.push(NetEpochStats {
            selected_count: selected.len(),
            val_accuracy: test_accuracy(net, val_x.view(), &val_y)?,
            test_accuracy: test_accuracy(net, test.features.view(), &test.clean_labels)?,
            selected_ratio: if cfg.minority.is_empty() {
                None
            } else {
                selected_ratio(&selected, &data.noisy_labels, &cfg.minority)
            },
            selection_precision: selection_precision(&selected, &data.noisy_labels, &data.clean_labels),
        });
    }
    let second = nets.pop().expect("two networks");
    let first = nets.pop().expect("two networks");
    Ok(EpochReport {
        epoch,
        r_t,
        nets: [first, second],
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub reports: Vec<EpochReport>,
    /// Per network, the 0-based report index with the highest validation
    /// accuracy (earliest on ties).
    pub best: [usize; 2],
    pub state: TrainState,
}

impl TrainOutcome {
    pub fn last(&self) -> &EpochReport {
        self.reports.last().expect("at least one epoch")
    }

    pub fn best_val_accuracy(&self, network: NetworkId) -> f64 {
        self.reports[self.best[network.index()]].net(network).val_accuracy
    }

    /// Test accuracy averaged over both networks and the last `n` epochs.
    pub fn tail_mean_test_accuracy(&self, n: usize) -> f64 {
        let tail = &self.reports[self.reports.len().saturating_sub(n)..];
        tail.iter().map(EpochReport::mean_test_accuracy).sum::<f64>() / tail.len() as f64
    }
}

fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

pub fn run_training(
    cfg: &TrainConfig,
    data: &NoisyDataset,
    test: &NoisyDataset,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if data.split.train.is_empty() {
        return Err(TrainError::Config("training split is empty".into()));
    }
    if data.dim() != test.dim() || data.classes != test.classes {
        return Err(TrainError::Config(format!(
            "test set shape ({} features, {} classes) differs from training ({}, {})",
            test.dim(),
            test.classes,
            data.dim(),
            data.classes
        )));
    }
    let mut state = TrainState::new(cfg, data);
    let mut reports = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        reports.push(train_epoch(&mut state, data, test, cfg, epoch)?);
    }
    let best = NetworkId::BOTH.map(|n| argmax_first(reports.iter().map(|r| r.net(n).val_accuracy)));
    Ok(TrainOutcome {
        reports,
        best,
        state,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub sigma2: f64,
    pub tau_min: f64,
    /// Mean over both networks of the best validation accuracy.
    pub val_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub best: CriterionConfig,
    pub cells: Vec<SweepCell>,
}

/// Grid search over `sigma2 x tau_min` by noisy validation accuracy.
///
/// An axis the family does not use is collapsed to its smallest value, since
/// every cell along it would train identically. Ties prefer the smaller
/// `sigma2`, then the smaller `tau_min`.
pub fn sweep_hyperparameters(
    sigma2_grid: &[f64],
    tau_grid: &[f64],
    cfg: &TrainConfig,
    data: &NoisyDataset,
    test: &NoisyDataset,
) -> Result<SweepOutcome, TrainError> {
    if sigma2_grid.is_empty() || tau_grid.is_empty() {
        return Err(TrainError::Config("sweep grid is empty".into()));
    }
    let axis = |grid: &[f64], used: bool| {
        let mut values = grid.to_vec();
        values.sort_by(f64::total_cmp);
        values.dedup();
        if !used {
            values.truncate(1);
        }
        values
    };
    let family = cfg.criterion.family;
    let mut cells = Vec::new();
    let mut best: Option<(f64, CriterionConfig)> = None;
    for &sigma2 in &axis(sigma2_grid, family.uses_sigma2()) {
        for &tau_min in &axis(tau_grid, family.uses_tau_min()) {
            let mut run = cfg.clone();
            run.criterion.sigma2 = sigma2;
            run.criterion.tau_min = tau_min;
            let outcome = run_training(&run, data, test)?;
            let val = NetworkId::BOTH
                .iter()
                .map(|&n| outcome.best_val_accuracy(n))
                .sum::<f64>()
                / 2.0;
            cells.push(SweepCell {
                sigma2,
                tau_min,
                val_accuracy: val,
            });
            if best.as_ref().is_none_or(|(v, _)| val > *v) {
                best = Some((val, run.criterion));
            }
        }
    }
    Ok(SweepOutcome {
        best: best.expect("non-empty grid").1,
        cells,
    })
}
