//! Learned density estimation from k-nearest-neighbor distance features.
//!
//! The estimator slides a shared MLP over the sorted distances from each
//! query point to its `k` nearest sample points, and is trained once per
//! domain dimensionality on synthetic densities with exact ground truth.
//! The crate bundles everything needed to reproduce that pipeline at desk
//! scale:
//!
//! - [`synthpdf`] — random ground-truth densities, normalization, rejection
//!   sampling and dataset generation;
//! - [`analytic`] — closed-form test distributions with exact sampling;
//! - [`neighbors`] — exact k-NN distance features (kd-tree plus a brute-force
//!   oracle);
//! - [`nn`] — the MLP estimator: batch-norm/ReLU stack, Adam training,
//!   ensemble selection and 1D spline post-smoothing;
//! - [`baselines`] — Gaussian KDE with Silverman's bandwidth rule;
//! - [`metrics`] — MSE, Monte-Carlo KL divergence, two-sample KS test and
//!   report plumbing.

pub mod analytic;
pub mod baselines;
pub mod error;
pub mod metrics;
pub mod neighbors;
pub mod nn;
pub mod rng;
pub mod synthpdf;

pub use error::{Error, Result};
pub use synthpdf::{AxisScale, SampleSet};
