//! Per-example loss histories for both co-trained networks.

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::estimator::LossWindow;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackerError {
    #[error("loss for example {example} is NaN")]
    NanLoss { example: usize },
    #[error("example {example} has no recorded loss")]
    Unseen { example: usize },
    #[error("example {example} is out of range for a bank of {len}")]
    OutOfRange { example: usize, len: usize },
}

/// One of the two co-trained networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NetworkId {
    First,
    Second,
}

impl NetworkId {
    pub const BOTH: [NetworkId; 2] = [NetworkId::First, NetworkId::Second];

    pub fn index(self) -> usize {
        match self {
            NetworkId::First => 0,
            NetworkId::Second => 1,
        }
    }

    pub fn peer(self) -> Self {
        match self {
            NetworkId::First => NetworkId::Second,
            NetworkId::Second => NetworkId::First,
        }
    }
}

impl fmt::Display for NetworkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index() + 1)
    }
}

/// Ring of the most recent losses of one example together with the rounds
/// in which it was selected.
#[derive(Debug, Clone, PartialEq)]
pub struct LossHistory {
    ring: VecDeque<(f64, bool)>,
    capacity: usize,
    selected: usize,
}

impl LossHistory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "history capacity must be at least 1");
        Self {
            ring: VecDeque::with_capacity(capacity),
            capacity,
            selected: 0,
        }
    }

    /// Number of resident rounds.
    pub fn t(&self) -> usize {
        self.ring.len()
    }

    /// Number of resident rounds in which the example was selected.
    pub fn n_t(&self) -> usize {
        self.selected
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends an already clamped loss, evicting the oldest round when full.
    pub fn push(&mut self, loss: f64, selected: bool) {
        if self.ring.len() == self.capacity {
            if let Some((_, true)) = self.ring.pop_front() {
                self.selected -= 1;
            }
        }
        self.ring.push_back((loss, selected));
        if selected {
            self.selected += 1;
        }
    }

    pub fn losses(&self) -> impl Iterator<Item = f64> + '_ {
        self.ring.iter().map(|&(loss, _)| loss)
    }

    pub fn flags(&self) -> impl Iterator<Item = bool> + '_ {
        self.ring.iter().map(|&(_, s)| s)
    }

    /// Window and selection count as they would look once `loss` is
    /// recorded, counting only rounds already decided.
    pub fn preview(&self, loss: f64) -> (Vec<f64>, usize) {
        let full = self.ring.len() == self.capacity;
        let skip = usize::from(full);
        let mut values: Vec<f64> = self.losses().skip(skip).collect();
        values.push(loss);
        let evicted_selected = full && self.ring.front().is_some_and(|&(_, s)| s);
        (values, self.selected - usize::from(evicted_selected))
    }
}

/// Loss histories of every training example under both networks.
#[derive(Debug, Clone)]
pub struct TrackerBank {
    banks: [Vec<LossHistory>; 2],
    window: usize,
    loss_bound: f64,
}

impl TrackerBank {
    pub fn new(examples: usize, window: usize, loss_bound: f64) -> Self {
        let bank = vec![LossHistory::new(window); examples];
        Self {
            banks: [bank.clone(), bank],
            window,
            loss_bound,
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn loss_bound(&self) -> f64 {
        self.loss_bound
    }

    pub fn len(&self) -> usize {
        self.banks[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.banks[0].is_empty()
    }

    /// Clamps a raw loss into `[0, loss_bound]`; NaN is rejected.
    pub fn clamp_loss(&self, example: usize, loss: f64) -> Result<f64, TrackerError> {
        if loss.is_nan() {
            return Err(TrackerError::NanLoss { example });
        }
        Ok(loss.clamp(0.0, self.loss_bound))
    }

    pub fn history(&self, network: NetworkId, example: usize) -> Result<&LossHistory, TrackerError> {
        let bank = &self.banks[network.index()];
        bank.get(example).ok_or(TrackerError::OutOfRange {
            example,
            len: bank.len(),
        })
    }

    pub fn record(
        &mut self,
        network: NetworkId,
        example: usize,
        loss: f64,
        selected: bool,
    ) -> Result<(), TrackerError> {
        let loss = self.clamp_loss(example, loss)?;
        let bank = &mut self.banks[network.index()];
        let len = bank.len();
        let history = bank
            .get_mut(example)
            .ok_or(TrackerError::OutOfRange { example, len })?;
        history.push(loss, selected);
        Ok(())
    }

    /// Copy of the resident losses (oldest first) and the selection count.
    pub fn snapshot(
        &self,
        network: NetworkId,
        example: usize,
    ) -> Result<(LossWindow, usize), TrackerError> {
        let history = self.history(network, example)?;
        if history.t() == 0 {
            return Err(TrackerError::Unseen { example });
        }
        let window = LossWindow::new(history.losses().collect())
            .expect("recorded losses are clamped and finite");
        Ok((window, history.n_t()))
    }

    /// Window including a not-yet-recorded loss, with the count of selected
    /// rounds that would remain resident.
    pub fn preview(
        &self,
        network: NetworkId,
        example: usize,
        loss: f64,
    ) -> Result<(LossWindow, usize), TrackerError> {
        let loss = self.clamp_loss(example, loss)?;
        let (values, n_t) = self.history(network, example)?.preview(loss);
        let window = LossWindow::new(values).expect("recorded losses are clamped and finite");
        Ok((window, n_t))
    }
}
