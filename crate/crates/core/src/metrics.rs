//! Accuracy, minority selected ratio and selection precision.

use std::ops::Range;

use ndarray::ArrayView2;

use crate::nn::{Mlp, NetError};
use crate::tracker::NetworkId;

/// Fraction of matching entries; `None` for empty input.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Option<f64> {
    assert_eq!(predictions.len(), labels.len(), "prediction/label length mismatch");
    if labels.is_empty() {
        return None;
    }
    let correct = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    Some(correct as f64 / labels.len() as f64)
}

/// Accuracy of `net` on `features`; an empty set scores 0.
pub fn test_accuracy(net: &Mlp, features: ArrayView2<f64>, labels: &[usize]) -> Result<f64, NetError> {
    let predictions = net.predict(features)?;
    Ok(accuracy(&predictions, labels).unwrap_or(0.0))
}

/// Fraction of `selected` examples whose noisy label is a minority class.
pub fn selected_ratio<'a>(
    selected: impl IntoIterator<Item = &'a usize>,
    noisy_labels: &[usize],
    minority: &[usize],
) -> Option<f64> {
    let (mut hits, mut total) = (0usize, 0usize);
    for &i in selected {
        total += 1;
        hits += usize::from(minority.contains(&noisy_labels[i]));
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

/// Fraction of `selected` examples whose noisy label is correct.
pub fn selection_precision<'a>(
    selected: impl IntoIterator<Item = &'a usize>,
    noisy_labels: &[usize],
    clean_labels: &[usize],
) -> Option<f64> {
    let (mut hits, mut total) = (0usize, 0usize);
    for &i in selected {
        total += 1;
        hits += usize::from(noisy_labels[i] == clean_labels[i]);
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

/// Selected example indices per epoch, network and minibatch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SelectionLedger {
    epochs: Vec<[Vec<Vec<usize>>; 2]>,
}

impl SelectionLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn start_epoch(&mut self) {
        self.epochs.push([Vec::new(), Vec::new()]);
    }

    /// Appends one minibatch selection to the current epoch.
    pub fn push_batch(&mut self, network: NetworkId, selected: Vec<usize>) {
        let epoch = self.epochs.last_mut().expect("start_epoch before push_batch");
        epoch[network.index()].push(selected);
    }

    /// Number of epochs recorded.
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// Per-batch selections of `network` in 0-based `epoch`.
    pub fn batches(&self, epoch: usize, network: NetworkId) -> &[Vec<usize>] {
        &self.epochs[epoch][network.index()]
    }

    /// All selections of `network` in `epoch`, in batch order.
    pub fn selected(&self, epoch: usize, network: NetworkId) -> impl Iterator<Item = &usize> {
        self.batches(epoch, network).iter().flatten()
    }

    /// Selections of the given networks over a range of 0-based epochs.
    pub fn range<'a>(
        &'a self,
        epochs: Range<usize>,
        networks: &'a [NetworkId],
    ) -> impl Iterator<Item = &'a usize> + 'a {
        epochs.flat_map(move |e| networks.iter().flat_map(move |&n| self.selected(e, n)))
    }

    pub fn max_index(&self) -> Option<usize> {
        self.epochs
            .iter()
            .flat_map(|e| e.iter().flatten().flatten())
            .copied()
            .max()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, Array1, Array2};

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 2, 3], &[0, 1, 2, 3]), Some(1.0));
        assert_eq!(accuracy(&[1, 1, 2, 3], &[0, 1, 2, 3]), Some(0.75));
        assert_eq!(accuracy(&[], &[]), None);
    }

    #[test]
    fn constant_predictor_on_balanced_set() {
        let classes = 10;
        let net = Mlp::from_parts(
            Array2::zeros((2, 3)),
            Array1::zeros(3),
            Array2::zeros((3, classes)),
            arr1(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        );
        let labels: Vec<usize> = (0..100).map(|i| i % classes).collect();
        let x = Array2::from_elem((100, 2), 0.5);
        assert_eq!(test_accuracy(&net, x.view(), &labels).unwrap(), 0.1);
    }

    #[test]
    fn ratio_examples() {
        let noisy: Vec<usize> = (0..40).map(|i| if i < 6 { 0 } else { 7 }).collect();
        let all: Vec<usize> = (0..40).collect();
        assert_eq!(selected_ratio(&all, &noisy, &[0, 1]), Some(0.15));
        assert_eq!(selected_ratio(&all[6..], &noisy, &[0, 1]), Some(0.0));
        assert_eq!(selected_ratio(&all[..6], &noisy, &[0, 1]), Some(1.0));
        assert_eq!(selected_ratio(&[], &noisy, &[0]), None);
    }

    #[test]
    fn precision_examples() {
        let clean = vec![0, 1, 2, 3];
        let noisy = vec![0, 2, 2, 0];
        assert_eq!(selection_precision(&[0, 1, 2, 3], &clean, &clean), Some(1.0));
        assert_eq!(selection_precision(&[0, 1, 2, 3], &noisy, &clean), Some(0.5));
        assert_eq!(selection_precision(&[0, 2], &noisy, &clean), Some(1.0));
        assert_eq!(selection_precision(&[], &noisy, &clean), None);
    }

    #[test]
    fn ledger_ranges() {
        let mut ledger = SelectionLedger::new();
        ledger.start_epoch();
        ledger.push_batch(NetworkId::First, vec![0, 1]);
        ledger.push_batch(NetworkId::First, vec![4]);
        ledger.push_batch(NetworkId::Second, vec![2]);
        ledger.start_epoch();
        ledger.push_batch(NetworkId::Second, vec![3, 5]);
        assert_eq!(ledger.len(), 2);
        assert_eq!(ledger.selected(0, NetworkId::First).count(), 3);
        let both = ledger.range(0..2, &NetworkId::BOTH).copied().collect::<Vec<_>>();
        assert_eq!(both, vec![0, 1, 4, 2, 3, 5]);
        assert_eq!(ledger.max_index(), Some(5));
    }
}
