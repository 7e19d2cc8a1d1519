//! Robust windowed-mean estimators for per-example training losses.
//!
//! A window of recent losses is summarised either by the plain mean, by a
//! soft-truncated mean (losses are passed through the influence function
//! `psi(x) = ln(1 + x + x^2/2)` before averaging), or by a hard-truncated
//! mean (the most isolated losses, ranked by 1-D k-nearest-neighbour
//! distance, are removed before averaging). The selection score subtracts a
//! confidence width that shrinks as an example is selected more often, so
//! rarely selected examples get a chance to be picked.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("influence function is only defined for non-negative input, got {0}")]
    NegativeInput(f64),
    #[error("loss window is empty")]
    EmptyWindow,
    #[error("loss window entry {index} is invalid: {value}")]
    InvalidLoss { index: usize, value: f64 },
    #[error("k-nearest-neighbour ranking needs k < t (k = {k}, t = {t})")]
    NeighbourCount { k: usize, t: usize },
    #[error("contamination must lie in [0, 1), got {0}")]
    Contamination(f64),
    #[error("deviation bound undefined: {0}")]
    BoundDomain(String),
    #[error("selection count n_t = {n_t} exceeds window length t = {t}")]
    SelectionCount { n_t: usize, t: usize },
    #[error("invalid criterion configuration: {0}")]
    Config(String),
}

/// Influence function used by the soft estimator.
///
/// Non-decreasing on `[0, inf)` with `0 <= psi(x) <= x`.
pub fn psi(x: f64) -> Result<f64, EstimatorError> {
    if x.is_nan() || x < 0.0 {
        return Err(EstimatorError::NegativeInput(x));
    }
    Ok(psi_unchecked(x))
}

#[inline]
fn psi_unchecked(x: f64) -> f64 {
    (x + 0.5 * x * x).ln_1p()
}

/// Recent losses of one example, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct LossWindow(Vec<f64>);

impl LossWindow {
    /// Every value must be finite and non-negative, and there must be at
    /// least one of them.
    pub fn new(values: Vec<f64>) -> Result<Self, EstimatorError> {
        if values.is_empty() {
            return Err(EstimatorError::EmptyWindow);
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(EstimatorError::InvalidLoss { index, value });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Most recently recorded loss.
    pub fn last(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub fn plain_mean(window: &LossWindow) -> f64 {
    window.0.iter().sum::<f64>() / window.len() as f64
}

/// Mean of the psi-transformed losses.
pub fn soft_mean(window: &LossWindow) -> f64 {
    window.0.iter().map(|&x| psi_unchecked(x)).sum::<f64>() / window.len() as f64
}

/// Default neighbour count for the outlier ranking: `max(1, floor(sqrt(t)))`.
pub fn default_knn_k(t: usize) -> usize {
    ((t as f64).sqrt().floor() as usize).max(1)
}

/// Distance from each value to its k-th nearest other value.
///
/// In one dimension the k nearest neighbours of a point form a contiguous run
/// around it in sorted order, so each distance costs O(k) after one sort.
pub fn knn_distances(values: &[f64], k: usize) -> Vec<f64> {
    let t = values.len();
    debug_assert!(k >= 1 && k < t);
    let mut sorted: Vec<(f64, usize)> = values.iter().copied().zip(0..).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut distances = vec![0.0; t];
    for (pos, &(value, original)) in sorted.iter().enumerate() {
        let (mut left, mut right) = (pos, pos + 1);
        let mut kth = 0.0;
        for _ in 0..k {
            let dl = (left > 0).then(|| value - sorted[left - 1].0);
            let dr = (right < t).then(|| sorted[right].0 - value);
            kth = match (dl, dr) {
                (Some(l), Some(r)) if l <= r => {
                    left -= 1;
                    l
                }
                (Some(_), Some(r)) | (None, Some(r)) => {
                    right += 1;
                    r
                }
                (Some(l), None) => {
                    left -= 1;
                    l
                }
                (None, None) => unreachable!("k < t guarantees a neighbour"),
            };
        }
        distances[original] = kth;
    }
    distances
}

/// Indices ordered from most to least outlying.
///
/// The outlier score is the k-th nearest neighbour distance. Equal scores
/// rank the larger loss first, then the smaller index.
pub fn knn_outlier_order(window: &LossWindow, k: usize) -> Result<Vec<usize>, EstimatorError> {
    let t = window.len();
    if k == 0 || k >= t {
        return Err(EstimatorError::NeighbourCount { k, t });
    }
    let values = window.values();
    let scores = knn_distances(values, k);
    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then(values[b].total_cmp(&values[a]))
            .then(a.cmp(&b))
    });
    Ok(order)
}

/// Number of points removed by hard truncation of a window of length `t`.
///
/// `min(ceil(contamination * t), t - 1)`, and nothing at all for `t < 3`.
pub fn removal_count(t: usize, contamination: f64) -> usize {
    if t < 3 {
        return 0;
    }
    // Guard against products like 0.1 * 30 = 3.0000000000000004.
    let raw = (contamination * t as f64 - 1e-9).ceil().max(0.0) as usize;
    raw.min(t - 1)
}

/// Drops the `t_o` most outlying losses, keeping the rest in recording order.
pub fn hard_truncate(
    window: &LossWindow,
    contamination: f64,
    k: usize,
) -> Result<(LossWindow, usize), EstimatorError> {
    if !(0.0..1.0).contains(&contamination) {
        return Err(EstimatorError::Contamination(contamination));
    }
    let t = window.len();
    let removed = removal_count(t, contamination);
    if removed == 0 {
        return Ok((window.clone(), 0));
    }
    let k = k.clamp(1, t - 1);
    let order = knn_outlier_order(window, k)?;
    let mut drop = vec![false; t];
    for &i in &order[..removed] {
        drop[i] = true;
    }
    let kept = window
        .values()
        .iter()
        .zip(&drop)
        .filter(|(_, &d)| !d)
        .map(|(&v, _)| v)
        .collect();
    Ok((LossWindow(kept), removed))
}

/// Mean of the window after hard truncation, with the number removed.
pub fn hard_mean(
    window: &LossWindow,
    contamination: f64,
    k: usize,
) -> Result<(f64, usize), EstimatorError> {
    let (kept, removed) = hard_truncate(window, contamination, k)?;
    Ok((plain_mean(&kept), removed))
}

/// Deviation bound for the soft estimator over `n` observations with
/// variance `sigma2`, holding with probability at least `1 - 2 eps`:
///
/// `sigma2 * (n + sigma2 * ln(1/eps) / n^2) / (n - sigma2)`
pub fn soft_deviation_bound(n: usize, sigma2: f64, eps: f64) -> Result<f64, EstimatorError> {
    if n == 0 || sigma2 <= 0.0 || sigma2 >= n as f64 {
        return Err(EstimatorError::BoundDomain(format!(
            "need 0 < sigma2 < n (sigma2 = {sigma2}, n = {n})"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(EstimatorError::BoundDomain(format!("eps must lie in (0, 1), got {eps}")));
    }
    let n = n as f64;
    Ok(sigma2 * (n + sigma2 * (1.0 / eps).ln() / (n * n)) / (n - sigma2))
}

/// Deviation bound for the hard estimator after removing `n_o` of `n`
/// observations bounded by `z` from a chain with mixing-time proxy
/// `tau_min`, holding with probability at least `1 - eps1 - eps2`.
pub fn hard_deviation_bound(
    n: usize,
    n_o: usize,
    z: f64,
    tau_min: f64,
    eps1: f64,
    eps2: f64,
) -> Result<f64, EstimatorError> {
    if n_o >= n {
        return Err(EstimatorError::BoundDomain(format!(
            "need n_o < n (n_o = {n_o}, n = {n})"
        )));
    }
    if !(z > 0.0) || tau_min < 0.0 {
        return Err(EstimatorError::BoundDomain(format!(
            "need z > 0 and tau_min >= 0 (z = {z}, tau_min = {tau_min})"
        )));
    }
    for eps in [eps1, eps2] {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(EstimatorError::BoundDomain(format!("eps must lie in (0, 1), got {eps}")));
        }
    }
    let nf = n as f64;
    let nof = n_o as f64;
    let main = 2.0 * z * (2.0 * tau_min * (2.0 / eps1).ln()).sqrt();
    let removal = 2.0 * z * nof / nf * (2.0 * tau_min * (2.0 * nf / eps2).ln()).sqrt();
    Ok((main + removal) / (nf - nof))
}

/// Which summary of the loss window drives selection, and whether the
/// exploration width is subtracted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CriterionFamily {
    /// Latest loss only: classic small-loss selection.
    CurrentLoss,
    /// Plain windowed mean, no exploration width.
    PlainMean,
    /// Soft-truncated mean minus the soft exploration width.
    CnlcuSoft,
    /// Hard-truncated mean minus the hard exploration width.
    CnlcuHard,
    SoftNoBound,
    HardNoBound,
    CurrentPlusSoftBound,
    CurrentPlusHardBound,
}

impl CriterionFamily {
    pub const ALL: [CriterionFamily; 8] = [
        CriterionFamily::CurrentLoss,
        CriterionFamily::PlainMean,
        CriterionFamily::CnlcuSoft,
        CriterionFamily::CnlcuHard,
        CriterionFamily::SoftNoBound,
        CriterionFamily::HardNoBound,
        CriterionFamily::CurrentPlusSoftBound,
        CriterionFamily::CurrentPlusHardBound,
    ];

    /// Short name used on the command line and in CSV manifests.
    pub fn name(self) -> &'static str {
        match self {
            CriterionFamily::CurrentLoss => "current",
            CriterionFamily::PlainMean => "mean",
            CriterionFamily::CnlcuSoft => "cnlcu-s",
            CriterionFamily::CnlcuHard => "cnlcu-h",
            CriterionFamily::SoftNoBound => "soft-nobound",
            CriterionFamily::HardNoBound => "hard-nobound",
            CriterionFamily::CurrentPlusSoftBound => "current-soft",
            CriterionFamily::CurrentPlusHardBound => "current-hard",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    /// Families whose estimate or width comes from the soft estimator.
    pub fn uses_sigma2(self) -> bool {
        matches!(
            self,
            CriterionFamily::CnlcuSoft | CriterionFamily::CurrentPlusSoftBound
        )
    }

    /// Families whose width comes from the hard estimator.
    pub fn uses_tau_min(self) -> bool {
        matches!(
            self,
            CriterionFamily::CnlcuHard | CriterionFamily::CurrentPlusHardBound
        )
    }

    /// Families that run hard truncation on the window.
    pub fn truncates(self) -> bool {
        matches!(
            self,
            CriterionFamily::CnlcuHard
                | CriterionFamily::HardNoBound
                | CriterionFamily::CurrentPlusHardBound
        )
    }

    /// Families whose estimate is the latest loss rather than a window
    /// statistic.
    pub fn estimates_current_loss(self) -> bool {
        matches!(
            self,
            CriterionFamily::CurrentLoss
                | CriterionFamily::CurrentPlusSoftBound
                | CriterionFamily::CurrentPlusHardBound
        )
    }

    /// Ring length used when none is given: 5 for the soft family, 12 for the
    /// hard family, 1 for current-loss selection.
    pub fn default_window(self) -> usize {
        match self {
            CriterionFamily::CurrentLoss => 1,
            CriterionFamily::PlainMean
            | CriterionFamily::CnlcuSoft
            | CriterionFamily::SoftNoBound
            | CriterionFamily::CurrentPlusSoftBound => 5,
            CriterionFamily::CnlcuHard
            | CriterionFamily::HardNoBound
            | CriterionFamily::CurrentPlusHardBound => 12,
        }
    }
}

impl fmt::Display for CriterionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionConfig {
    pub family: CriterionFamily,
    /// Variance proxy for the soft width; must be below 1.
    pub sigma2: f64,
    /// Mixing-time proxy for the hard width.
    pub tau_min: f64,
    /// Upper bound on recorded losses.
    pub loss_bound: f64,
    pub window: usize,
    /// Fraction of the window removed by hard truncation.
    pub contamination: f64,
    /// Neighbour count for the outlier ranking; `None` means `floor(sqrt(t))`.
    pub knn_k: Option<usize>,
}

impl CriterionConfig {
    /// Defaults for a `classes`-way problem: sigma2 = tau_min = 0.01, loss
    /// bound `2 ln(classes)`, contamination 0.1, family-specific window.
    pub fn new(family: CriterionFamily, classes: usize) -> Self {
        Self {
            family,
            sigma2: 1e-2,
            tau_min: 1e-2,
            loss_bound: 2.0 * (classes.max(2) as f64).ln(),
            window: family.default_window(),
            contamination: 0.1,
            knn_k: None,
        }
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        let bad = |msg: String| Err(EstimatorError::Config(msg));
        if !(self.sigma2 > 0.0 && self.sigma2 < 1.0) {
            return bad(format!("sigma2 must lie in (0, 1), got {}", self.sigma2));
        }
        if !(self.tau_min > 0.0 && self.tau_min.is_finite()) {
            return bad(format!("tau_min must be positive, got {}", self.tau_min));
        }
        if !(self.loss_bound > 0.0 && self.loss_bound.is_finite()) {
            return bad(format!("loss bound must be positive, got {}", self.loss_bound));
        }
        if self.window == 0 {
            return bad("window must be at least 1".into());
        }
        if !(0.0..=0.5).contains(&self.contamination) {
            return bad(format!(
                "contamination must lie in [0, 0.5], got {}",
                self.contamination
            ));
        }
        if self.knn_k == Some(0) {
            return bad("knn k must be at least 1".into());
        }
        Ok(())
    }

    fn knn_k_for(&self, t: usize) -> usize {
        self.knn_k.unwrap_or_else(|| default_knn_k(t))
    }
}

/// Score breakdown for one example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub estimate: f64,
    pub bound_term: f64,
    /// `estimate - bound_term`; lower scores are selected first.
    pub score: f64,
    pub t: usize,
    pub n_t_effective: usize,
    /// Losses removed by hard truncation (0 outside the hard family).
    pub t_o: usize,
}

/// Exploration width of the soft criterion.
pub fn soft_bound_term(t: usize, n_t: usize, sigma2: f64) -> f64 {
    let t = t as f64;
    let n_t = n_t as f64;
    sigma2 * (t + sigma2 * (2.0 * t).ln() / (t * t)) / (n_t - sigma2)
}

/// Exploration width of the hard criterion.
pub fn hard_bound_term(t: usize, t_o: usize, n_t: usize, tau_min: f64, loss_bound: f64) -> f64 {
    let tf = t as f64;
    let tof = t_o as f64;
    let scale = 2.0 * (2.0 * tau_min).sqrt() * loss_bound * (tf + std::f64::consts::SQRT_2 * tof)
        / ((tf - tof) * tf.sqrt());
    scale * ((4.0 * tf).ln() / n_t as f64).sqrt()
}

/// Selection score of one example from its loss window and the number of
/// rounds in that window in which it was selected.
///
/// `n_t = 0` is treated as 1, since the widths diverge at zero.
pub fn score(
    window: &LossWindow,
    n_t: usize,
    cfg: &CriterionConfig,
) -> Result<BoundReport, EstimatorError> {
    cfg.validate()?;
    let t = window.len();
    if n_t > t {
        return Err(EstimatorError::SelectionCount { n_t, t });
    }
    let n_eff = n_t.max(1);

    let (hard_estimate, t_o) = if cfg.family.truncates() {
        hard_mean(window, cfg.contamination, cfg.knn_k_for(t))?
    } else {
        (f64::NAN, 0)
    };
    let soft_width = || soft_bound_term(t, n_eff, cfg.sigma2);
    let hard_width = || hard_bound_term(t, t_o, n_eff, cfg.tau_min, cfg.loss_bound);

    let (estimate, bound_term) = match cfg.family {
        CriterionFamily::CurrentLoss => (window.last(), 0.0),
        CriterionFamily::PlainMean => (plain_mean(window), 0.0),
        CriterionFamily::CnlcuSoft => (soft_mean(window), soft_width()),
        CriterionFamily::CnlcuHard => (hard_estimate, hard_width()),
        CriterionFamily::SoftNoBound => (soft_mean(window), 0.0),
        CriterionFamily::HardNoBound => (hard_estimate, 0.0),
        CriterionFamily::CurrentPlusSoftBound => (window.last(), soft_width()),
        CriterionFamily::CurrentPlusHardBound => (window.last(), hard_width()),
    };
    Ok(BoundReport {
        estimate,
        bound_term,
        score: estimate - bound_term,
        t,
        n_t_effective: n_eff,
        t_o,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(values: &[f64]) -> LossWindow {
        LossWindow::new(values.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn psi_closed_forms() {
        assert_eq!(psi(0.0).unwrap(), 0.0);
        assert!(close(psi(2.0).unwrap(), 5f64.ln(), 1e-15));
        assert!(close(psi(10.0).unwrap(), 61f64.ln(), 1e-14));
        assert!(matches!(psi(-0.1), Err(EstimatorError::NegativeInput(_))));
        assert!(psi(f64::NAN).is_err());
    }

    #[test]
    fn window_rejects_bad_input() {
        assert_eq!(LossWindow::new(vec![]), Err(EstimatorError::EmptyWindow));
        assert!(matches!(
            LossWindow::new(vec![1.0, -0.5]),
            Err(EstimatorError::InvalidLoss { index: 1, .. })
        ));
        assert!(LossWindow::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn plain_mean_examples() {
        assert_eq!(plain_mean(&w(&[1.0, 1.0, 1.0])), 1.0);
        assert_eq!(plain_mean(&w(&[0.0, 2.0])), 1.0);
        assert_eq!(plain_mean(&w(&[1.0, 1.0, 1.0, 100.0])), 25.75);
    }

    #[test]
    fn soft_mean_examples() {
        assert_eq!(soft_mean(&w(&[0.0, 0.0, 0.0])), 0.0);
        assert!(close(soft_mean(&w(&[2.0, 2.0])), 5f64.ln(), 1e-15));
        // (3 ln 2.5 + ln 5101) / 4, evaluated at 30 digits
        assert!(close(
            soft_mean(&w(&[1.0, 1.0, 1.0, 100.0])),
            2.821_516_018_386_348,
            1e-12
        ));
    }

    #[test]
    fn knn_order_examples() {
        let window = w(&[1.0, 1.1, 0.9, 1.05, 0.95, 10.0]);
        assert_eq!(knn_outlier_order(&window, 2).unwrap()[0], 5);

        let constant = w(&[3.0; 4]);
        for k in 1..4 {
            // all scores and values tie, so index order decides
            assert_eq!(knn_outlier_order(&constant, k).unwrap(), vec![0, 1, 2, 3]);
        }

        assert_eq!(knn_outlier_order(&w(&[0.0, 10.0]), 1).unwrap(), vec![1, 0]);
        assert_eq!(
            knn_outlier_order(&w(&[0.0, 10.0]), 2),
            Err(EstimatorError::NeighbourCount { k: 2, t: 2 })
        );
    }

    #[test]
    fn hard_truncation_examples() {
        let window = w(&[1.0, 1.1, 0.9, 1.05, 0.95, 10.0]);
        let (kept, t_o) = hard_truncate(&window, 0.1, 2).unwrap();
        assert_eq!(kept.values(), &[1.0, 1.1, 0.9, 1.05, 0.95]);
        assert_eq!(t_o, 1);
        let (mean, t_o) = hard_mean(&window, 0.1, 2).unwrap();
        assert!(close(mean, 1.0, 1e-15));
        assert_eq!(t_o, 1);

        let (kept, t_o) = hard_truncate(&w(&[5.0, 5.0]), 0.1, 1).unwrap();
        assert_eq!((kept.values(), t_o), (&[5.0, 5.0][..], 0));

        let (kept, t_o) = hard_truncate(&window, 0.0, 2).unwrap();
        assert_eq!((kept, t_o), (window.clone(), 0));
        assert_eq!(hard_mean(&window, 0.0, 2).unwrap().0, plain_mean(&window));

        let (mean, t_o) = hard_mean(&w(&[0.7; 9]), 0.2, 3).unwrap();
        assert!(close(mean, 0.7, 1e-15));
        assert_eq!(t_o, 2);
        assert!(hard_truncate(&window, 1.0, 2).is_err());
    }

    #[test]
    fn removal_count_rule() {
        assert_eq!(removal_count(2, 0.4), 0);
        assert_eq!(removal_count(3, 0.1), 1);
        assert_eq!(removal_count(10, 0.1), 1);
        assert_eq!(removal_count(30, 0.1), 3);
        assert_eq!(removal_count(12, 0.1), 2);
        assert_eq!(removal_count(4, 0.99), 3);
        assert_eq!(removal_count(50, 0.0), 0);
    }

    #[test]
    fn deviation_bound_examples() {
        assert!(close(
            soft_deviation_bound(100, 0.01, 0.01).unwrap(),
            0.010_001_000_560_573_076,
            1e-15
        ));
        assert!(close(
            soft_deviation_bound(10, 0.01, 0.5).unwrap(),
            0.010_010_079_394_112_168,
            1e-15
        ));
        let mut prev = f64::INFINITY;
        for n in [2, 10, 100, 1_000, 100_000] {
            let v = soft_deviation_bound(n, 0.3, 0.05).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(close(prev, 0.3, 1e-5));
        assert!(soft_deviation_bound(1, 1.0, 0.1).is_err());

        assert!(close(
            hard_deviation_bound(100, 10, 1.0, 0.1, 0.05, 0.05).unwrap(),
            0.021_949_635_820_682_686,
            1e-15
        ));
        let zero_removed = hard_deviation_bound(50, 0, 2.0, 0.3, 0.1, 0.2).unwrap();
        let direct = 2.0 * 2.0 / 50.0 * (2.0 * 0.3 * (2.0f64 / 0.1).ln()).sqrt();
        assert!(close(zero_removed, direct, 1e-15));
        assert_eq!(hard_deviation_bound(50, 5, 1.0, 0.0, 0.1, 0.1).unwrap(), 0.0);
        assert!(hard_deviation_bound(10, 10, 1.0, 0.1, 0.1, 0.1).is_err());
    }

    #[test]
    fn score_bound_terms() {
        let mut cfg = CriterionConfig::new(CriterionFamily::CnlcuSoft, 10);
        let window = w(&[0.3; 10]);
        let report = score(&window, 5, &cfg).unwrap();
        assert!(close(report.bound_term, 0.020_040_680_507_469_650, 1e-15));
        assert_eq!(report.score, report.estimate - report.bound_term);

        // t = 12 with exactly one removal: contamination 1/12.
        cfg.family = CriterionFamily::CnlcuHard;
        cfg.tau_min = 0.01;
        cfg.loss_bound = 10.0;
        cfg.contamination = 1.0 / 12.0;
        let window = w(&[1.0, 1.1, 0.9, 1.05, 0.95, 1.02, 0.98, 1.01, 0.99, 1.03, 0.97, 6.0]);
        let report = score(&window, 6, &cfg).unwrap();
        assert_eq!(report.t_o, 1);
        assert!(close(report.bound_term, 0.799_786_626_117_579_5, 1e-12));
        assert!(close(report.estimate, 1.0, 1e-12));
    }

    #[test]
    fn score_family_semantics() {
        let window = w(&[0.2, 0.4, 3.0, 0.3, 0.5]);
        let base = CriterionConfig::new(CriterionFamily::CurrentLoss, 10);
        let run = |family| {
            let cfg = CriterionConfig { family, window: 5, ..base.clone() };
            score(&window, 2, &cfg).unwrap()
        };
        let current = run(CriterionFamily::CurrentLoss);
        assert_eq!((current.estimate, current.bound_term), (0.5, 0.0));
        assert_eq!(run(CriterionFamily::PlainMean).estimate, plain_mean(&window));
        let soft = run(CriterionFamily::CnlcuSoft);
        assert_eq!(soft.estimate, soft_mean(&window));
        assert_eq!(soft.bound_term, soft_bound_term(5, 2, 0.01));
        assert_eq!(run(CriterionFamily::SoftNoBound).bound_term, 0.0);
        assert_eq!(run(CriterionFamily::SoftNoBound).estimate, soft.estimate);
        let cs = run(CriterionFamily::CurrentPlusSoftBound);
        assert_eq!((cs.estimate, cs.bound_term), (0.5, soft.bound_term));

        let hard = run(CriterionFamily::CnlcuHard);
        assert_eq!(hard.t_o, 1);
        assert!(close(hard.estimate, 0.35, 1e-15));
        let hnb = run(CriterionFamily::HardNoBound);
        assert_eq!((hnb.estimate, hnb.bound_term), (hard.estimate, 0.0));
        let ch = run(CriterionFamily::CurrentPlusHardBound);
        assert_eq!((ch.estimate, ch.bound_term), (0.5, hard.bound_term));
        assert_eq!(current.t_o, 0);
    }

    #[test]
    fn score_floors_selection_count() {
        let cfg = CriterionConfig::new(CriterionFamily::CnlcuSoft, 10);
        let window = w(&[0.4, 0.6]);
        let zero = score(&window, 0, &cfg).unwrap();
        let one = score(&window, 1, &cfg).unwrap();
        assert_eq!(zero.n_t_effective, 1);
        assert_eq!(zero, one);
        assert_eq!(
            score(&window, 3, &cfg),
            Err(EstimatorError::SelectionCount { n_t: 3, t: 2 })
        );
    }

    #[test]
    fn zero_window_scores_non_positive() {
        for family in CriterionFamily::ALL {
            let cfg = CriterionConfig::new(family, 10);
            for t in 1..=12 {
                let report = score(&w(&vec![0.0; t]), t, &cfg).unwrap();
                assert_eq!(report.estimate, 0.0);
                assert!(report.score <= 0.0, "{family} t={t}");
            }
        }
    }

    #[test]
    fn config_validation() {
        let good = CriterionConfig::new(CriterionFamily::CnlcuSoft, 10);
        assert!(good.validate().is_ok());
        for bad in [
            CriterionConfig { sigma2: 1.0, ..good.clone() },
            CriterionConfig { sigma2: 0.0, ..good.clone() },
            CriterionConfig { tau_min: 0.0, ..good.clone() },
            CriterionConfig { loss_bound: -1.0, ..good.clone() },
            CriterionConfig { window: 0, ..good.clone() },
            CriterionConfig { contamination: 0.6, ..good.clone() },
            CriterionConfig { knn_k: Some(0), ..good.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(EstimatorError::Config(_))));
            assert!(score(&w(&[1.0]), 1, &bad).is_err());
        }
    }

    #[test]
    fn family_names_round_trip() {
        for family in CriterionFamily::ALL {
            assert_eq!(CriterionFamily::from_name(family.name()), Some(family));
        }
        assert_eq!(CriterionFamily::from_name("nope"), None);
    }
}
