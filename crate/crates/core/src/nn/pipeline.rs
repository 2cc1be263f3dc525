//! The estimation pipeline: unit-range scaling, k-NN featurization, network
//! inference and the Jacobian rescale back to the caller's coordinates.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::neighbors::{build_index, knn_distances};
use crate::nn::mlp::{FeatureScale, MlpModel};
use crate::nn::smooth::smooth_1d_with_coeff;
use crate::nn::train::infer_in_chunks;
use crate::synthpdf::SampleSet;

/// Per-axis affine map onto the sample's bounding box.
struct UnitBox {
    offsets: Vec<f64>,
    widths: Vec<f64>,
}

impl UnitBox {
    fn from_sample(sample: &SampleSet) -> UnitBox {
        let bb = sample.bounding_box();
        let offsets: Vec<f64> = bb.iter().map(|&(lo, _)| lo).collect();
        // A zero-spread axis cannot be rescaled; leave it untouched.
        let widths: Vec<f64> = bb
            .iter()
            .map(|&(lo, hi)| if hi > lo { hi - lo } else { 1.0 })
            .collect();
        UnitBox { offsets, widths }
    }

    fn jacobian(&self) -> f64 {
        self.widths.iter().product()
    }

    fn apply(&self, set: &SampleSet) -> SampleSet {
        let dim = set.dim();
        let mut pts = set.points().to_vec();
        for row in pts.chunks_exact_mut(dim) {
            for (d, x) in row.iter_mut().enumerate() {
                *x = (*x - self.offsets[d]) / self.widths[d];
            }
        }
        SampleSet::from_rows(dim, pts)
    }
}

/// Feature rows for `queries` against `sample`: unit-box scaling, exact k-NN
/// distances, and (by default) the `n^(1/d)` sample-size factor that makes
/// the distance profile of a given density independent of `n`.
///
/// Returns the rows and the Jacobian of the unit-box map, by which densities
/// in the sample's coordinates are multiplied to become unit-box densities.
pub(crate) fn feature_rows_with_jacobian(
    sample: &SampleSet,
    queries: &SampleSet,
    k: usize,
    scale: FeatureScale,
) -> Result<(Array2<f64>, f64)> {
    if queries.dim() != sample.dim() {
        return Err(Error::ShapeMismatch {
            expected: sample.dim(),
            got: queries.dim(),
        });
    }
    let unit = UnitBox::from_sample(sample);
    let unit_sample = unit.apply(sample);
    let unit_queries = if std::ptr::eq(sample, queries) {
        unit_sample.clone()
    } else {
        unit.apply(queries)
    };
    let index = build_index(&unit_sample);
    let fm = knn_distances(&index, &unit_queries, k)?;
    let factor = match scale {
        FeatureScale::Raw => 1.0,
        FeatureScale::SampleSizeScaled => (sample.n() as f64).powf(1.0 / sample.dim() as f64),
    };
    let m = fm.n_rows();
    let mut rows = Array2::zeros((m, k));
    for i in 0..m {
        for (j, &d) in fm.row(i).iter().enumerate() {
            rows[[i, j]] = d * factor;
        }
    }
    Ok((rows, unit.jacobian()))
}

/// Post-processing options for [`estimate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateOptions {
    /// Apply the adaptive spline smoothing to 1D estimates.
    pub smooth: bool,
    /// Residual-budget coefficient of the smoother.
    pub smooth_coeff: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            smooth: true,
            smooth_coeff: crate::nn::smooth::SMOOTH_BUDGET_COEFF,
        }
    }
}

/// Density estimates in the original coordinates of the sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimates {
    pub raw: Vec<f64>,
    /// Present only for 1D queries with smoothing enabled.
    pub smoothed: Option<Vec<f64>>,
}

/// Estimate the density at every query point.
///
/// Pipeline: scale sample and queries onto the sample's unit bounding box,
/// compute k-NN distance features, run the network in inference mode, then
/// undo the unit-box and stored-coordinate Jacobians so the result refers to
/// the sample's original coordinates. Queries must be given in the same
/// coordinates as the sample; pass the sample itself for self-estimation.
pub fn estimate(
    model: &MlpModel,
    sample: &SampleSet,
    queries: &SampleSet,
    opts: &EstimateOptions,
) -> Result<Estimates> {
    let (rows, unit_jacobian) =
        feature_rows_with_jacobian(sample, queries, model.config.k, model.config.feature_scale)?;
    let unit_estimates = infer_in_chunks(model, &rows)?;
    // Unit-box density -> stored coordinates -> original coordinates.
    let back = 1.0 / (unit_jacobian * sample.scale_jacobian());
    let raw: Vec<f64> = unit_estimates.iter().map(|p| p * back).collect();
    let smoothed = if sample.dim() == 1 && opts.smooth {
        let xs: Vec<f64> = queries
            .iter_points()
            .map(|p| queries.scale[0].offset + p[0] * queries.scale[0].width)
            .collect();
        Some(smooth_1d_with_coeff(&xs, &raw, opts.smooth_coeff))
    } else {
        None
    };
    Ok(Estimates { raw, smoothed })
}
