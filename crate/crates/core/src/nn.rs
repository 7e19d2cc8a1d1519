//! Two-layer perceptron (`d -> h -> k`, leaky ReLU) with softmax
//! cross-entropy and an Adam optimiser.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("feature dimension {found} does not match network input {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("{rows} feature rows but {labels} labels")]
    BatchShape { rows: usize, labels: usize },
    #[error("label {label} outside [0, {classes})")]
    Label { label: usize, classes: usize },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("gradient contains NaN")]
    NanGradient,
    #[error("parameter vector has length {found}, expected {expected}")]
    ParameterCount { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    /// First epoch (0-based) of the linear decay to zero; `None` keeps the
    /// rate constant.
    pub decay_start: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            decay_start: None,
        }
    }
}

impl OptimizerConfig {
    /// Learning rate for 0-based `epoch` of `total` epochs: constant before
    /// `decay_start`, then `lr * (total - epoch) / (total - decay_start)`.
    pub fn learning_rate_at(&self, epoch: usize, total: usize) -> f64 {
        match self.decay_start {
            Some(start) if epoch >= start && total > start => {
                self.learning_rate * (total.saturating_sub(epoch)) as f64 / (total - start) as f64
            }
            _ => self.learning_rate,
        }
    }
}

/// Parameters and Adam moments of one network.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
    moments: [Moments; 2],
    step: u64,
}

#[derive(Debug, Clone, PartialEq)]
struct Moments {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
}

impl Moments {
    fn zeros(d: usize, h: usize, k: usize) -> Self {
        Self {
            w1: Array2::zeros((d, h)),
            b1: Array1::zeros(h),
            w2: Array2::zeros((h, k)),
            b2: Array1::zeros(k),
        }
    }
}

/// Gradient of the mean batch loss, laid out like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(self.w2.iter())
            .chain(&self.b2)
            .copied()
            .collect()
    }
}

fn leaky(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        LEAKY_SLOPE * z
    }
}

fn leaky_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

struct Forward {
    pre: Array2<f64>,
    hidden: Array2<f64>,
    logits: Array2<f64>,
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(inputs: usize, hidden: usize, classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut glorot = |fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-limit..limit))
        };
        let w1 = glorot(inputs, hidden);
        let w2 = glorot(hidden, classes);
        Self::from_parts(w1, Array1::zeros(hidden), w2, Array1::zeros(classes))
    }

    /// Builds a network from explicit parameters (`w1: d x h`, `w2: h x k`).
    pub fn from_parts(w1: Array2<f64>, b1: Array1<f64>, w2: Array2<f64>, b2: Array1<f64>) -> Self {
        let (d, h) = w1.dim();
        let k = w2.ncols();
        assert_eq!(b1.len(), h);
        assert_eq!(w2.nrows(), h);
        assert_eq!(b2.len(), k);
        Self {
            w1,
            b1,
            w2,
            b2,
            moments: [Moments::zeros(d, h, k), Moments::zeros(d, h, k)],
            step: 0,
        }
    }

    pub fn inputs(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.ncols()
    }

    pub fn classes(&self) -> usize {
        self.w2.ncols()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn parameter_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Parameters in the order `w1` (row-major), `b1`, `w2`, `b2`.
    pub fn parameters(&self) -> Vec<f64> {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(self.w2.iter())
            .chain(&self.b2)
            .copied()
            .collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<(), NetError> {
        if params.len() != self.parameter_count() {
            return Err(NetError::ParameterCount {
                expected: self.parameter_count(),
                found: params.len(),
            });
        }
        let mut it = params.iter().copied();
        for p in self
            .w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
        {
            *p = it.next().expect("length checked");
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.parameters().iter().all(|p| p.is_finite())
    }

    fn check_inputs(&self, x: &ArrayView2<f64>) -> Result<(), NetError> {
        if x.ncols() != self.inputs() {
            return Err(NetError::Dimension {
                expected: self.inputs(),
                found: x.ncols(),
            });
        }
        Ok(())
    }

    fn check_labels(&self, x: &ArrayView2<f64>, labels: &[usize]) -> Result<(), NetError> {
        self.check_inputs(x)?;
        if x.nrows() != labels.len() {
            return Err(NetError::BatchShape {
                rows: x.nrows(),
                labels: labels.len(),
            });
        }
        let k = self.classes();
        if let Some(&label) = labels.iter().find(|&&y| y >= k) {
            return Err(NetError::Label { label, classes: k });
        }
        Ok(())
    }

    fn forward(&self, x: &ArrayView2<f64>) -> Forward {
        let pre = x.dot(&self.w1) + &self.b1;
        let hidden = pre.mapv(leaky);
        let logits = hidden.dot(&self.w2) + &self.b2;
        Forward { pre, hidden, logits }
    }

    pub fn logits(&self, x: ArrayView2<f64>) -> Result<Array2<f64>, NetError> {
        self.check_inputs(&x)?;
        Ok(self.forward(&x).logits)
    }

    /// Softmax cross-entropy of each row against its label.
    pub fn forward_losses(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<Vec<f64>, NetError> {
        self.check_labels(&x, labels)?;
        let logits = self.forward(&x).logits;
        Ok(cross_entropy_rows(&logits, labels))
    }

    /// Mean batch loss and its gradient.
    pub fn gradients(
        &self,
        x: ArrayView2<f64>,
        labels: &[usize],
    ) -> Result<(f64, Gradients), NetError> {
        self.check_labels(&x, labels)?;
        if labels.is_empty() {
            return Err(NetError::EmptyBatch);
        }
        let n = labels.len() as f64;
        let fwd = self.forward(&x);
        let losses = cross_entropy_rows(&fwd.logits, labels);
        let loss = losses.iter().sum::<f64>() / n;

        // d loss / d logits = (softmax - onehot) / n
        let mut delta = fwd.logits;
        for (mut row, &y) in delta.rows_mut().into_iter().zip(labels) {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            row.mapv_inplace(|v| (v - max).exp());
            let total = row.sum();
            row.mapv_inplace(|v| v / total);
            row[y] -= 1.0;
            row.mapv_inplace(|v| v / n);
        }
        let w2 = fwd.hidden.t().dot(&delta);
        let b2 = delta.sum_axis(Axis(0));
        let mut back = delta.dot(&self.w2.t());
        Zip::from(&mut back).and(&fwd.pre).for_each(|g, &z| *g *= leaky_grad(z));
        let w1 = x.t().dot(&back);
        let b1 = back.sum_axis(Axis(0));
        Ok((loss, Gradients { w1, b1, w2, b2 }))
    }

    /// One Adam step on the mean loss of the batch. Returns the loss before
    /// the step.
    pub fn backward_update(
        &mut self,
        x: ArrayView2<f64>,
        labels: &[usize],
        opt: &OptimizerConfig,
        learning_rate: f64,
    ) -> Result<f64, NetError> {
        let (loss, grads) = self.gradients(x, labels)?;
        if grads.flatten().iter().any(|g| g.is_nan()) {
            return Err(NetError::NanGradient);
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - opt.beta1.powi(t);
        let c2 = 1.0 - opt.beta2.powi(t);
        let (b1, b2, eps) = (opt.beta1, opt.beta2, opt.epsilon);
        let [m, v] = &mut self.moments;
        macro_rules! adam {
            ($field:ident) => {
                Zip::from(&mut self.$field)
                    .and(&mut m.$field)
                    .and(&mut v.$field)
                    .and(&grads.$field)
                    .for_each(|p, m, v, &g| {
                        *m = b1 * *m + (1.0 - b1) * g;
                        *v = b2 * *v + (1.0 - b2) * g * g;
                        *p -= learning_rate * (*m / c1) / ((*v / c2).sqrt() + eps);
                    });
            };
        }
        adam!(w1);
        adam!(b1);
        adam!(w2);
        adam!(b2);
        Ok(loss)
    }

    /// Arg-max class per row, ties to the lowest index.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>, NetError> {
        Ok(argmax_rows(&self.logits(x)?))
    }
}

pub fn argmax_rows(logits: &Array2<f64>) -> Vec<usize> {
    logits
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Numerically stable `logsumexp(z) - z[y]` per row, floored at zero.
pub fn cross_entropy_rows(logits: &Array2<f64>, labels: &[usize]) -> Vec<f64> {
    logits
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(row, &y)| {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
            (lse - row[y]).max(0.0)
        })
        .collect()
}
