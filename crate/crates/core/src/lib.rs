//! Uncertainty-aware sample selection for training two networks on data
//! with noisy labels.

pub mod dataset;
pub mod estimator;
pub mod experiment;
pub mod metrics;
pub mod nn;
pub mod noise;
pub mod tracker;
pub mod trainer;
