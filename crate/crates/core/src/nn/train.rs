//! Training: Adam over shuffled mini-batches with exponential learning-rate
//! decay, validation-driven checkpointing, and best-of-ensemble selection.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::adam::{adam_step, AdamHyper, AdamState};
use crate::nn::mlp::{BnMode, CurvePoint, MlpConfig, MlpModel, TrainMeta};
use crate::nn::pipeline::feature_rows_with_jacobian;
use crate::synthpdf::SampleSet;

/// Optimization settings.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr0: f64,
    pub adam: AdamHyper,
    /// Learning-rate multiplier applied each epoch.
    pub lr_decay: f64,
    /// Feature rows per optimizer step, drawn across all training PDFs.
    pub batch_size: usize,
    pub epochs: usize,
    /// Identically configured models trained from independent seeds; the
    /// checkpoint with the lowest validation MSE wins.
    pub ensemble_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 1e-3,
            adam: AdamHyper::default(),
            lr_decay: 0.95,
            batch_size: 1024,
            epochs: 100,
            ensemble_size: 5,
            seed: 0,
        }
    }
}

/// Pooled feature rows and targets with a train/validation row split.
#[derive(Clone, Debug)]
pub struct TrainingData {
    pub features: Array2<f64>,
    pub targets: Vec<f64>,
    pub train_rows: Vec<usize>,
    pub val_rows: Vec<usize>,
}

impl TrainingData {
    /// Featurize every sample set against itself and pool the rows.
    ///
    /// Samples with index `>= val_from` form the validation split. Targets
    /// are the stored ground-truth densities rescaled into the per-sample
    /// unit-box coordinates the features are computed in.
    pub fn from_samples(
        samples: &[SampleSet],
        val_from: usize,
        config: &MlpConfig,
    ) -> Result<TrainingData> {
        assert!(val_from <= samples.len());
        let k = config.k;
        let total: usize = samples.iter().map(|s| s.n()).sum();
        let mut features = Array2::zeros((total, k));
        let mut targets = Vec::with_capacity(total);
        let mut train_rows = Vec::new();
        let mut val_rows = Vec::new();
        let mut row = 0usize;
        for (si, sample) in samples.iter().enumerate() {
            let truth = sample.density_truth.as_ref().ok_or_else(|| {
                Error::Format(format!("sample {si} carries no ground-truth densities"))
            })?;
            let (rows, jacobian) =
                feature_rows_with_jacobian(sample, sample, k, config.feature_scale)?;
            for i in 0..sample.n() {
                features.row_mut(row).assign(&rows.row(i));
                targets.push(truth[i] * jacobian);
                if si < val_from {
                    train_rows.push(row);
                } else {
                    val_rows.push(row);
                }
                row += 1;
            }
        }
        Ok(TrainingData {
            features,
            targets,
            train_rows,
            val_rows,
        })
    }
}

/// Forward in bounded-size chunks to keep activation memory flat.
pub fn infer_in_chunks(model: &MlpModel, features: &Array2<f64>) -> Result<Vec<f64>> {
    const CHUNK: usize = 8192;
    let mut out = Vec::with_capacity(features.nrows());
    let mut start = 0;
    while start < features.nrows() {
        let end = (start + CHUNK).min(features.nrows());
        let block = features.slice(ndarray::s![start..end, ..]).to_owned();
        out.extend(model.infer(&block)?);
        start = end;
    }
    Ok(out)
}

fn gather_rows(features: &Array2<f64>, targets: &[f64], rows: &[usize]) -> (Array2<f64>, Vec<f64>) {
    let k = features.ncols();
    let mut x = Array2::zeros((rows.len(), k));
    let mut t = Vec::with_capacity(rows.len());
    for (i, &r) in rows.iter().enumerate() {
        x.row_mut(i).assign(&features.row(r));
        t.push(targets[r]);
    }
    (x, t)
}

struct MemberOutcome {
    best: Option<(f64, usize, MlpModel)>,
    curve: Vec<CurvePoint>,
}

fn train_member(
    member: usize,
    data: &TrainingData,
    val_x: &Array2<f64>,
    val_t: &[f64],
    cfg: &TrainConfig,
    mlp_cfg: &MlpConfig,
) -> Result<MemberOutcome> {
    let mut rng = crate::rng::child_rng(cfg.seed, member as u64, 0);
    let mut model = MlpModel::init(mlp_cfg.clone(), &mut rng);
    let lengths: Vec<usize> = model.param_slices_mut().iter().map(|s| s.len()).collect();
    let mut state = AdamState::new(&lengths);
    let mut order = data.train_rows.clone();
    let mut best: Option<(f64, usize, MlpModel)> = None;
    let mut curve = Vec::with_capacity(cfg.epochs);
    'epochs: for epoch in 0..cfg.epochs {
        let lr = cfg.lr0 * cfg.lr_decay.powi(epoch as i32);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue; // batch statistics need at least two rows
            }
            let (x, t) = gather_rows(&data.features, &data.targets, chunk);
            let (loss, grads) = match model.loss_and_gradients(&x, &t, BnMode::Batch) {
                Ok(v) => v,
                Err(Error::NonFiniteLoss { .. }) => break 'epochs, // member diverged
                Err(e) => return Err(e),
            };
            adam_step(
                &mut model.param_slices_mut(),
                &grads.slices(),
                &mut state,
                lr,
                &cfg.adam,
            );
            loss_sum += loss;
            batches += 1;
        }
        let val_est = infer_in_chunks(&model, val_x)?;
        let val_mse = val_est
            .iter()
            .zip(val_t)
            .map(|(e, t)| (e - t) * (e - t))
            .sum::<f64>()
            / val_t.len() as f64;
        curve.push(CurvePoint {
            member,
            epoch,
            train_loss: if batches > 0 { loss_sum / batches as f64 } else { f64::NAN },
            val_mse,
        });
        if val_mse.is_finite() && best.as_ref().is_none_or(|(b, _, _)| val_mse < *b) {
            best = Some((val_mse, epoch, model.clone()));
        }
    }
    Ok(MemberOutcome { best, curve })
}

/// Train the ensemble and return the checkpoint with the lowest validation
/// MSE across all `(member, epoch)` pairs.
///
/// Members train in parallel from independent seeded initializations;
/// divergent members keep their earlier checkpoints. The error is
/// `AllDiverged` only if no member ever produced a finite validation score.
pub fn train(data: &TrainingData, cfg: &TrainConfig, mlp_cfg: &MlpConfig) -> Result<MlpModel> {
    if data.train_rows.is_empty() || data.val_rows.is_empty() {
        return Err(Error::Format(
            "training requires non-empty train and validation splits".into(),
        ));
    }
    assert!(cfg.ensemble_size >= 1);
    let (val_x, val_t) = gather_rows(&data.features, &data.targets, &data.val_rows);
    let outcomes: Vec<MemberOutcome> = (0..cfg.ensemble_size)
        .into_par_iter()
        .map(|m| train_member(m, data, &val_x, &val_t, cfg, mlp_cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut curves = Vec::new();
    let mut selected: Option<(f64, usize, usize, MlpModel)> = None;
    for (member, outcome) in outcomes.into_iter().enumerate() {
        curves.extend(outcome.curve);
        if let Some((val, epoch, model)) = outcome.best {
            if selected.as_ref().is_none_or(|(b, _, _, _)| val < *b) {
                selected = Some((val, member, epoch, model));
            }
        }
    }
    let Some((val, member, epoch, mut model)) = selected else {
        return Err(Error::AllDiverged {
            members: cfg.ensemble_size,
        });
    };
    model.train_meta = TrainMeta {
        seed: cfg.seed,
        epochs: cfg.epochs,
        ensemble_size: cfg.ensemble_size,
        selected_member: member,
        selected_epoch: epoch,
        validation_mse: val,
        curves,
    };
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::FeatureScale;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn toy_data(n: usize, k: usize, target: impl Fn(&[f64]) -> f64) -> TrainingData {
        let mut rng = stream_rng(130, 0);
        let features = Array2::from_shape_fn((n, k), |_| rng.gen::<f64>() * 2.0);
        let targets: Vec<f64> = (0..n)
            .map(|i| target(features.row(i).as_slice().unwrap()))
            .collect();
        let split = n * 3 / 4;
        TrainingData {
            features,
            targets,
            train_rows: (0..split).collect(),
            val_rows: (split..n).collect(),
        }
    }

    fn toy_mlp(k: usize) -> MlpConfig {
        MlpConfig {
            k,
            hidden_widths: vec![8, 8],
            batch_norm: true,
            feature_scale: FeatureScale::Raw,
        }
    }

    fn toy_cfg(epochs: usize, ensemble: usize) -> TrainConfig {
        TrainConfig {
            lr0: 2e-2,
            lr_decay: 1.0,
            batch_size: 32,
            epochs,
            ensemble_size: ensemble,
            seed: 42,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn fits_a_constant_target() {
        let c = 2.0;
        let data = toy_data(512, 4, |_| c);
        let model = train(&data, &toy_cfg(20, 1), &toy_mlp(4)).unwrap();
        assert!(
            model.train_meta.validation_mse < 1e-3 * c * c,
            "val mse = {}",
            model.train_meta.validation_mse
        );
    }

    #[test]
    fn selection_is_min_over_all_checkpoints() {
        let data = toy_data(256, 3, |r| r[0] + 0.5);
        let model = train(&data, &toy_cfg(8, 2), &toy_mlp(3)).unwrap();
        let min_curve = model
            .train_meta
            .curves
            .iter()
            .map(|c| c.val_mse)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(model.train_meta.validation_mse, min_curve);
        assert_eq!(model.train_meta.curves.len(), 2 * 8);
    }

    #[test]
    fn bigger_ensemble_never_selects_worse() {
        let data = toy_data(256, 3, |r| (r[0] - r[1]).abs());
        let one = train(&data, &toy_cfg(6, 1), &toy_mlp(3)).unwrap();
        let five = train(&data, &toy_cfg(6, 5), &toy_mlp(3)).unwrap();
        assert!(five.train_meta.validation_mse <= one.train_meta.validation_mse);
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy_data(200, 3, |r| r[0] * r[1]);
        let a = train(&data, &toy_cfg(5, 2), &toy_mlp(3)).unwrap();
        let b = train(&data, &toy_cfg(5, 2), &toy_mlp(3)).unwrap();
        assert_eq!(a, b);
    }
}
