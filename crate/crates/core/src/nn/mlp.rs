//! The estimator network: a stack of affine layers with batch normalization
//! and ReLU, applied as a shared kernel over per-query distance features.
//!
//! Forward and reverse passes are hand-rolled so training is deterministic
//! and the gradients can be validated against finite differences.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

/// How raw k-NN distances are turned into network inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureScale {
    /// Distances as returned by the neighbor search.
    Raw,
    /// Distances multiplied by `n^(1/d)` (`n` = indexed sample size).
    ///
    /// The local distance profile at density `p` depends on the sample only
    /// through `n·p·r^d`, so without this factor a model trained at one
    /// sample size cannot transfer to another.
    SampleSizeScaled,
}

/// Architecture of the estimator MLP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// Input feature count: the neighbor count `k`.
    pub k: usize,
    pub hidden_widths: Vec<usize>,
    /// Batch normalization after every layer but the last.
    pub batch_norm: bool,
    pub feature_scale: FeatureScale,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            k: 128,
            hidden_widths: vec![128, 256, 512, 256, 128, 64, 32, 16, 8],
            batch_norm: true,
            feature_scale: FeatureScale::SampleSizeScaled,
        }
    }
}

impl MlpConfig {
    /// Layer input/output widths, from the feature count down to the scalar
    /// density output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_widths.len() + 1);
        let mut prev = self.k;
        for &w in &self.hidden_widths {
            dims.push((prev, w));
            prev = w;
        }
        dims.push((prev, 1));
        dims
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct Dense {
    pub w: Array2<f64>, // in × out
    pub b: Array1<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub(crate) struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

/// Bookkeeping from training, stored alongside the parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs: usize,
    pub ensemble_size: usize,
    pub selected_member: usize,
    pub selected_epoch: usize,
    pub validation_mse: f64,
    #[serde(default)]
    pub curves: Vec<CurvePoint>,
}

/// One training-curve sample: losses after an epoch of one ensemble member.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub member: usize,
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mse: f64,
}

/// The serializable estimator state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub config: MlpConfig,
    pub(crate) dense: Vec<Dense>,
    pub(crate) bn: Vec<BatchNorm>,
    pub train_meta: TrainMeta,
}

/// Whether batch normalization uses batch statistics (training) or the
/// stored running statistics (inference / frozen gradient checks).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnMode {
    Batch,
    Frozen,
}

struct LayerCache {
    /// Input to the affine layer.
    x: Array2<f64>,
    /// Normalized activations (batch-norm layers only).
    xhat: Option<Array2<f64>>,
    inv_std: Option<Vec<f64>>,
    /// Post-ReLU output; `> 0` doubles as the ReLU mask.
    act: Array2<f64>,
}

pub struct TrainCache {
    layers: Vec<LayerCache>,
}

/// Parameter gradients, in the same order as [`MlpModel::param_slices_mut`].
pub struct Gradients {
    pub(crate) dense: Vec<(Array2<f64>, Array1<f64>)>,
    pub(crate) bn: Vec<(Array1<f64>, Array1<f64>)>,
}

impl Gradients {
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for (w, b) in &self.dense {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        for (g, b) in &self.bn {
            out.push(g.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        out
    }
}

impl MlpModel {
    /// He-style initialization: weights `N(0, 2/fan_in)`, biases zero,
    /// batch-norm scale one / shift zero, running stats at the identity.
    pub fn init<R: Rng + ?Sized>(config: MlpConfig, rng: &mut R) -> MlpModel {
        let mut dense = Vec::new();
        for (fan_in, fan_out) in config.layer_dims() {
            let std = (2.0 / fan_in as f64).sqrt();
            let w = Array2::from_shape_fn((fan_in, fan_out), |_| {
                let z: f64 = rng.sample(StandardNormal);
                z * std
            });
            dense.push(Dense {
                w,
                b: Array1::zeros(fan_out),
            });
        }
        let bn = if config.batch_norm {
            config
                .hidden_widths
                .iter()
                .map(|&w| BatchNorm {
                    gamma: Array1::ones(w),
                    beta: Array1::zeros(w),
                    running_mean: Array1::zeros(w),
                    running_var: Array1::ones(w),
                })
                .collect()
        } else {
            Vec::new()
        };
        MlpModel {
            config,
            dense,
            bn,
            train_meta: TrainMeta::default(),
        }
    }

    pub fn n_layers(&self) -> usize {
        self.dense.len()
    }

    /// All parameters are finite (sanity check for loaded models).
    pub fn is_finite(&self) -> bool {
        self.dense
            .iter()
            .all(|d| d.w.iter().all(|v| v.is_finite()) && d.b.iter().all(|v| v.is_finite()))
            && self.bn.iter().all(|b| {
                b.gamma.iter().all(|v| v.is_finite())
                    && b.beta.iter().all(|v| v.is_finite())
                    && b.running_mean.iter().all(|v| v.is_finite())
                    && b.running_var.iter().all(|v| v.is_finite())
            })
    }

    /// Mutable flat views of every parameter tensor, in optimizer order:
    /// per layer `w, b`, then per batch-norm layer `γ, β`.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for d in &mut self.dense {
            out.push(d.w.as_slice_mut().expect("standard layout"));
            out.push(d.b.as_slice_mut().expect("standard layout"));
        }
        for b in &mut self.bn {
            out.push(b.gamma.as_slice_mut().expect("standard layout"));
            out.push(b.beta.as_slice_mut().expect("standard layout"));
        }
        out
    }

    fn affine(&self, layer: usize, x: &Array2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.dense[layer].w);
        for mut row in z.rows_mut() {
            row += &self.dense[layer].b;
        }
        z
    }

    /// Inference-mode forward: pure, deterministic, non-negative output.
    pub fn infer(&self, features: &Array2<f64>) -> Result<Vec<f64>> {
        if features.ncols() != self.config.k {
            return Err(Error::ShapeMismatch {
                expected: self.config.k,
                got: features.ncols(),
            });
        }
        let n_layers = self.dense.len();
        let mut a = features.to_owned();
        for l in 0..n_layers {
            let mut z = self.affine(l, &a);
            if l + 1 < n_layers {
                if self.config.batch_norm {
                    bn_forward_frozen(&mut z, &self.bn[l]);
                }
            }
            z.mapv_inplace(|v| v.max(0.0));
            a = z;
        }
        Ok(a.column(0).to_vec())
    }

    /// Forward pass that records everything the reverse pass needs.
    ///
    /// `BnMode::Batch` normalizes with batch statistics and folds them into
    /// the running statistics (momentum 0.9); it requires at least two rows.
    pub fn forward_cached(
        &mut self,
        features: &Array2<f64>,
        mode: BnMode,
    ) -> Result<(Vec<f64>, TrainCache)> {
        if features.ncols() != self.config.k {
            return Err(Error::ShapeMismatch {
                expected: self.config.k,
                got: features.ncols(),
            });
        }
        if mode == BnMode::Batch && self.config.batch_norm && features.nrows() < 2 {
            return Err(Error::ShapeMismatch {
                expected: 2,
                got: features.nrows(),
            });
        }
        let n_layers = self.dense.len();
        let mut layers = Vec::with_capacity(n_layers);
        let mut a = features.to_owned();
        for l in 0..n_layers {
            let x = a;
            let mut z = self.affine(l, &x);
            let (xhat, inv_std) = if l + 1 < n_layers && self.config.batch_norm {
                match mode {
                    BnMode::Batch => {
                        let (xhat, inv_std) = bn_forward_batch(&mut z, &mut self.bn[l]);
                        (Some(xhat), Some(inv_std))
                    }
                    BnMode::Frozen => {
                        let xhat = bn_forward_frozen_cached(&mut z, &self.bn[l]);
                        (Some(xhat), None)
                    }
                }
            } else {
                (None, None)
            };
            z.mapv_inplace(|v| v.max(0.0));
            layers.push(LayerCache {
                x,
                xhat,
                inv_std,
                act: z.clone(),
            });
            a = z;
        }
        let out = a.column(0).to_vec();
        Ok((out, TrainCache { layers }))
    }

    /// Mean-squared-error loss and gradients of every parameter.
    pub fn loss_and_gradients(
        &mut self,
        features: &Array2<f64>,
        targets: &[f64],
        mode: BnMode,
    ) -> Result<(f64, Gradients)> {
        let m = features.nrows();
        if targets.len() != m {
            return Err(Error::LengthMismatch {
                left: m,
                right: targets.len(),
            });
        }
        let (out, cache) = self.forward_cached(features, mode)?;
        let mf = m as f64;
        let loss = out
            .iter()
            .zip(targets)
            .map(|(y, t)| (y - t) * (y - t))
            .sum::<f64>()
            / mf;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: 0, batch: 0 });
        }
        let d_out: Vec<f64> = out
            .iter()
            .zip(targets)
            .map(|(y, t)| 2.0 * (y - t) / mf)
            .collect();
        let grads = self.backward(&cache, &d_out, mode);
        Ok((loss, grads))
    }

    fn backward(&self, cache: &TrainCache, d_out: &[f64], mode: BnMode) -> Gradients {
        let n_layers = self.dense.len();
        let mut g_dense: Vec<(Array2<f64>, Array1<f64>)> = Vec::with_capacity(n_layers);
        let mut g_bn: Vec<(Array1<f64>, Array1<f64>)> = self
            .bn
            .iter()
            .map(|b| (Array1::zeros(b.gamma.len()), Array1::zeros(b.beta.len())))
            .collect();
        // Upstream gradient flowing into the layer output.
        let m = cache.layers[0].x.nrows();
        let mut d_act = Array2::from_shape_fn((m, 1), |(i, _)| d_out[i]);
        for l in (0..n_layers).rev() {
            let lc = &cache.layers[l];
            // Through ReLU: zero wherever the activation was clamped.
            let mut dz = d_act;
            dz.zip_mut_with(&lc.act, |g, &a| {
                if a <= 0.0 {
                    *g = 0.0;
                }
            });
            // Through batch norm on hidden layers.
            if l + 1 < n_layers && self.config.batch_norm {
                let bn = &self.bn[l];
                let xhat = lc.xhat.as_ref().expect("bn cache");
                let (dgamma, dbeta, dz_new) = match mode {
                    BnMode::Batch => {
                        bn_backward_batch(&dz, xhat, lc.inv_std.as_ref().expect("bn cache"), bn)
                    }
                    BnMode::Frozen => bn_backward_frozen(&dz, xhat, bn),
                };
                g_bn[l] = (dgamma, dbeta);
                dz = dz_new;
            }
            // Through the affine layer. The transposed product may come out
            // in column-major order; the optimizer wants flat row-major.
            let dw = lc.x.t().dot(&dz).as_standard_layout().into_owned();
            let db = dz.sum_axis(ndarray::Axis(0));
            d_act = dz.dot(&self.dense[l].w.t());
            g_dense.push((dw, db));
        }
        g_dense.reverse();
        Gradients {
            dense: g_dense,
            bn: g_bn,
        }
    }
}

/// Batch-statistics normalization, updating running statistics in place.
/// Returns the normalized activations and per-column `1/√(var+ε)`.
fn bn_forward_batch(z: &mut Array2<f64>, bn: &mut BatchNorm) -> (Array2<f64>, Vec<f64>) {
    let (m, w) = (z.nrows(), z.ncols());
    let mf = m as f64;
    let mut mean = vec![0.0f64; w];
    for row in z.rows() {
        for (j, &v) in row.iter().enumerate() {
            mean[j] += v;
        }
    }
    for v in &mut mean {
        *v /= mf;
    }
    let mut var = vec![0.0f64; w];
    for row in z.rows() {
        for (j, &v) in row.iter().enumerate() {
            let d = v - mean[j];
            var[j] += d * d;
        }
    }
    for v in &mut var {
        *v /= mf;
    }
    let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + BN_EPS).sqrt()).collect();
    let mut xhat = Array2::zeros((m, w));
    for (mut zr, mut xr) in z.rows_mut().into_iter().zip(xhat.rows_mut()) {
        for j in 0..w {
            let h = (zr[j] - mean[j]) * inv_std[j];
            xr[j] = h;
            zr[j] = bn.gamma[j] * h + bn.beta[j];
        }
    }
    for j in 0..w {
        bn.running_mean[j] = BN_MOMENTUM * bn.running_mean[j] + (1.0 - BN_MOMENTUM) * mean[j];
        bn.running_var[j] = BN_MOMENTUM * bn.running_var[j] + (1.0 - BN_MOMENTUM) * var[j];
    }
    (xhat, inv_std)
}

/// Running-statistics normalization (inference), in place.
fn bn_forward_frozen(z: &mut Array2<f64>, bn: &BatchNorm) {
    let w = z.ncols();
    let inv_std: Vec<f64> = bn
        .running_var
        .iter()
        .map(|&v| 1.0 / (v + BN_EPS).sqrt())
        .collect();
    for mut row in z.rows_mut() {
        for j in 0..w {
            row[j] = bn.gamma[j] * (row[j] - bn.running_mean[j]) * inv_std[j] + bn.beta[j];
        }
    }
}

fn bn_forward_frozen_cached(z: &mut Array2<f64>, bn: &BatchNorm) -> Array2<f64> {
    let (m, w) = (z.nrows(), z.ncols());
    let inv_std: Vec<f64> = bn
        .running_var
        .iter()
        .map(|&v| 1.0 / (v + BN_EPS).sqrt())
        .collect();
    let mut xhat = Array2::zeros((m, w));
    for (mut zr, mut xr) in z.rows_mut().into_iter().zip(xhat.rows_mut()) {
        for j in 0..w {
            let h = (zr[j] - bn.running_mean[j]) * inv_std[j];
            xr[j] = h;
            zr[j] = bn.gamma[j] * h + bn.beta[j];
        }
    }
    xhat
}

/// Reverse pass through batch-statistics normalization.
fn bn_backward_batch(
    dy: &Array2<f64>,
    xhat: &Array2<f64>,
    inv_std: &[f64],
    bn: &BatchNorm,
) -> (Array1<f64>, Array1<f64>, Array2<f64>) {
    let (m, w) = (dy.nrows(), dy.ncols());
    let mf = m as f64;
    let mut dgamma = vec![0.0f64; w];
    let mut dbeta = vec![0.0f64; w];
    for (dr, xr) in dy.rows().into_iter().zip(xhat.rows()) {
        for j in 0..w {
            dgamma[j] += dr[j] * xr[j];
            dbeta[j] += dr[j];
        }
    }
    let mut dx = Array2::zeros((m, w));
    for ((dr, xr), mut or) in dy
        .rows()
        .into_iter()
        .zip(xhat.rows())
        .zip(dx.rows_mut())
    {
        for j in 0..w {
            // Mean and variance both depend on every row of the batch.
            or[j] = bn.gamma[j] * inv_std[j] / mf
                * (mf * dr[j] - dbeta[j] - xr[j] * dgamma[j]);
        }
    }
    (Array1::from(dgamma), Array1::from(dbeta), dx)
}

/// Reverse pass through frozen-statistics normalization (a fixed affine map).
fn bn_backward_frozen(
    dy: &Array2<f64>,
    xhat: &Array2<f64>,
    bn: &BatchNorm,
) -> (Array1<f64>, Array1<f64>, Array2<f64>) {
    let (m, w) = (dy.nrows(), dy.ncols());
    let inv_std: Vec<f64> = bn
        .running_var
        .iter()
        .map(|&v| 1.0 / (v + BN_EPS).sqrt())
        .collect();
    let mut dgamma = vec![0.0f64; w];
    let mut dbeta = vec![0.0f64; w];
    for (dr, xr) in dy.rows().into_iter().zip(xhat.rows()) {
        for j in 0..w {
            dgamma[j] += dr[j] * xr[j];
            dbeta[j] += dr[j];
        }
    }
    let mut dx = Array2::zeros((m, w));
    for (dr, mut or) in dy.rows().into_iter().zip(dx.rows_mut()) {
        for j in 0..w {
            or[j] = dr[j] * bn.gamma[j] * inv_std[j];
        }
    }
    (Array1::from(dgamma), Array1::from(dbeta), dx)
}
