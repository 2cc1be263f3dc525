//! Reference estimator: product-Gaussian kernel density estimation with
//! Silverman's rule-of-thumb bandwidth.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::synthpdf::SampleSet;

const SQRT_2PI: f64 = 2.5066282746310002;

/// Silverman's multivariate factor `(4 / ((d+2) n))^(1/(d+4))`.
pub fn silverman_factor(dim: usize, n: usize) -> f64 {
    (4.0 / ((dim as f64 + 2.0) * n as f64)).powf(1.0 / (dim as f64 + 4.0))
}

/// Per-axis rule-of-thumb bandwidths `h_j = σ_j · silverman_factor(d, n)`.
///
/// `σ_j` is the per-axis sample standard deviation (ddof = 1).
pub fn silverman_bandwidth(sample: &SampleSet) -> Result<Vec<f64>> {
    let n = sample.n();
    let d = sample.dim();
    if n < 2 {
        return Err(Error::DegenerateSample {
            reason: format!("need at least 2 points, got {n}"),
        });
    }
    let factor = silverman_factor(d, n);
    let mut means = vec![0.0f64; d];
    for p in sample.iter_points() {
        for (j, &x) in p.iter().enumerate() {
            means[j] += x;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut vars = vec![0.0f64; d];
    for p in sample.iter_points() {
        for (j, &x) in p.iter().enumerate() {
            let dx = x - means[j];
            vars[j] += dx * dx;
        }
    }
    let mut h = Vec::with_capacity(d);
    for (j, v) in vars.into_iter().enumerate() {
        let sigma = (v / (n as f64 - 1.0)).sqrt();
        if sigma == 0.0 {
            return Err(Error::DegenerateSample {
                reason: format!("axis {j} has zero spread"),
            });
        }
        h.push(sigma * factor);
    }
    Ok(h)
}

/// Gaussian KDE over a fixed sample with per-axis bandwidths.
#[derive(Clone, Debug)]
pub struct KdeEstimator {
    sample: SampleSet,
    bandwidth: Vec<f64>,
}

impl KdeEstimator {
    /// KDE with Silverman bandwidths.
    pub fn from_sample(sample: SampleSet) -> Result<KdeEstimator> {
        let bandwidth = silverman_bandwidth(&sample)?;
        Ok(KdeEstimator { sample, bandwidth })
    }

    pub fn with_bandwidth(sample: SampleSet, bandwidth: Vec<f64>) -> Result<KdeEstimator> {
        if bandwidth.len() != sample.dim() || bandwidth.iter().any(|&h| h <= 0.0) {
            return Err(Error::DegenerateSample {
                reason: "bandwidths must be positive, one per axis".into(),
            });
        }
        Ok(KdeEstimator { sample, bandwidth })
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn sample(&self) -> &SampleSet {
        &self.sample
    }

    /// Exact product-kernel density at one point:
    /// `p̂(x) = (1/n) Σ_i Π_j φ((x_j − x_{i,j})/h_j)/h_j`.
    pub fn estimate_at(&self, point: &[f64]) -> f64 {
        let d = self.sample.dim();
        debug_assert_eq!(point.len(), d);
        let norm: f64 =
            self.bandwidth.iter().product::<f64>() * SQRT_2PI.powi(d as i32) * self.sample.n() as f64;
        let mut acc = 0.0;
        for p in self.sample.iter_points() {
            let mut e = 0.0;
            for j in 0..d {
                let z = (point[j] - p[j]) / self.bandwidth[j];
                e += z * z;
            }
            acc += (-0.5 * e).exp();
        }
        acc / norm
    }

    /// Densities at every query point (exact summation, parallel over
    /// queries).
    pub fn estimate(&self, queries: &SampleSet) -> Vec<f64> {
        assert_eq!(queries.dim(), self.sample.dim(), "dimension mismatch");
        (0..queries.n())
            .into_par_iter()
            .map(|i| self.estimate_at(queries.point(i)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn factor_matches_closed_form() {
        let f = silverman_factor(1, 10_000);
        assert!((f - 0.1678756654970775).abs() < 1e-12);
    }

    #[test]
    fn unit_sigma_sample_gives_tabulated_h() {
        // Alternating ±1 has sample sd sqrt(n/(n-1)) ≈ 1.
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let h = silverman_bandwidth(&SampleSet::from_rows(1, xs)).unwrap();
        assert!((h[0] - 0.16787).abs() < 1e-4, "h = {}", h[0]);
    }

    #[test]
    fn degenerate_samples_are_rejected() {
        let one = SampleSet::from_rows(1, vec![0.5]);
        assert!(matches!(
            silverman_bandwidth(&one),
            Err(Error::DegenerateSample { .. })
        ));
        let flat = SampleSet::from_rows(1, vec![0.5; 10]);
        assert!(matches!(
            silverman_bandwidth(&flat),
            Err(Error::DegenerateSample { .. })
        ));
    }

    #[test]
    fn bandwidth_scales_with_data() {
        let mut rng = stream_rng(61, 0);
        let xs: Vec<f64> = (0..500).map(|_| rng.gen::<f64>()).collect();
        let h1 = silverman_bandwidth(&SampleSet::from_rows(1, xs.clone())).unwrap();
        let scaled: Vec<f64> = xs.iter().map(|x| 4.0 * x).collect();
        let h2 = silverman_bandwidth(&SampleSet::from_rows(1, scaled)).unwrap();
        assert!((h2[0] - 4.0 * h1[0]).abs() < 1e-12);
    }

    #[test]
    fn single_kernel_peak_value() {
        let h = 0.3;
        let kde =
            KdeEstimator::with_bandwidth(SampleSet::from_rows(1, vec![2.0]), vec![h]).unwrap();
        let expect = 1.0 / (h * SQRT_2PI);
        assert!((kde.estimate_at(&[2.0]) - expect).abs() < 1e-12);
    }

    #[test]
    fn kde_mass_is_one_in_1d() {
        let mut rng = stream_rng(62, 0);
        let xs: Vec<f64> = (0..200).map(|_| rng.gen::<f64>() * 3.0).collect();
        let kde = KdeEstimator::from_sample(SampleSet::from_rows(1, xs.clone())).unwrap();
        let h = kde.bandwidth()[0];
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min) - 6.0 * h;
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 6.0 * h;
        let n = 20_000;
        let step = (hi - lo) / (n - 1) as f64;
        let mut mass = 0.5 * (kde.estimate_at(&[lo]) + kde.estimate_at(&[hi]));
        for i in 1..n - 1 {
            mass += kde.estimate_at(&[lo + i as f64 * step]);
        }
        mass *= step;
        assert!((mass - 1.0).abs() < 1e-3, "mass = {mass}");
    }

    #[test]
    fn kde_is_positive_everywhere() {
        let kde =
            KdeEstimator::with_bandwidth(SampleSet::from_rows(1, vec![0.0]), vec![0.1]).unwrap();
        assert!(kde.estimate_at(&[100.0]) >= 0.0);
        assert!(kde.estimate_at(&[3.0]) > 0.0);
    }

    #[test]
    fn concatenation_is_weighted_average_at_matched_bandwidth() {
        let mut rng = stream_rng(63, 0);
        let a: Vec<f64> = (0..80).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = (0..40).map(|_| 2.0 + rng.gen::<f64>()).collect();
        let h = vec![0.25];
        let mut all = a.clone();
        all.extend_from_slice(&b);
        let kde_a = KdeEstimator::with_bandwidth(SampleSet::from_rows(1, a), h.clone()).unwrap();
        let kde_b = KdeEstimator::with_bandwidth(SampleSet::from_rows(1, b), h.clone()).unwrap();
        let kde_all = KdeEstimator::with_bandwidth(SampleSet::from_rows(1, all), h).unwrap();
        for q in [0.0, 0.7, 1.9, 2.5] {
            let merged = kde_all.estimate_at(&[q]);
            let avg = (80.0 * kde_a.estimate_at(&[q]) + 40.0 * kde_b.estimate_at(&[q])) / 120.0;
            assert!((merged - avg).abs() < 1e-12);
        }
    }
}
