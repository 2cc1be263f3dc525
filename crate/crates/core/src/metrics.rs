//! Scoring of density estimates: MSE against ground truth, Monte-Carlo KL
//! divergence, the two-sample Kolmogorov–Smirnov test, and report records.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::silverman_factor;
use crate::error::{Error, Result};

/// Clamp applied to zero density estimates inside the KL sum.
pub const KL_EPSILON: f64 = 1e-12;

/// Mean squared error `(1/n) Σ (truth_i − estimate_i)²`.
pub fn mse(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: estimate.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = truth.len() as f64;
    Ok(truth
        .iter()
        .zip(estimate)
        .map(|(t, e)| (t - e) * (t - e))
        .sum::<f64>()
        / n)
}

/// Monte-Carlo estimate of `D_KL(p ‖ p̂)` over points drawn from `p`:
/// `(1/n) Σ log(truth_i / max(estimate_i, ε))`.
///
/// Slightly negative values are legal (it is an MC estimate); exact-zero
/// estimates are clamped at `ε` and show up as a large positive penalty.
pub fn kl_mc(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    kl_mc_with_eps(truth, estimate, KL_EPSILON)
}

pub fn kl_mc_with_eps(truth: &[f64], estimate: &[f64], eps: f64) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: estimate.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = truth.len() as f64;
    Ok(truth
        .iter()
        .zip(estimate)
        .map(|(&t, &e)| (t / e.max(eps)).ln())
        .sum::<f64>()
        / n)
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{j≥1} (−1)^{j−1} e^{−2j²λ²}`, truncated at 100 terms.
///
/// The alternating series only converges for λ away from zero; when it fails
/// to settle the probability is 1 for any practical purpose.
fn kolmogorov_q(lambda: f64) -> f64 {
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut prev = f64::INFINITY;
    for j in 1..=100u32 {
        let jj = j as f64;
        let term = 2.0 * (-2.0 * jj * jj * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 || term <= 1e-10 * prev {
            return sum.clamp(0.0, 1.0);
        }
        sign = -sign;
        prev = term;
    }
    1.0
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
///
/// `D` is the supremum of the empirical CDF difference over the pooled order
/// statistics; the p-value uses the effective size `n₁n₂/(n₁+n₂)` with the
/// standard small-sample correction `λ = (√n_e + 0.12 + 0.11/√n_e)·D`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let (n1, n2) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n1 && j < n2 {
        let x = xs[i].min(ys[j]);
        while i < n1 && xs[i] == x {
            i += 1;
        }
        while j < n2 && ys[j] == x {
            j += 1;
        }
        let diff = (i as f64 / n1 as f64 - j as f64 / n2 as f64).abs();
        d = d.max(diff);
    }
    let ne = (n1 as f64 * n2 as f64) / (n1 + n2) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let p = if d == 0.0 { 1.0 } else { kolmogorov_q(lambda) };
    Ok((d, p))
}

/// One-sample Kolmogorov–Smirnov statistic against a CDF.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    Ok(xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            ((i + 1) as f64 / n - c).abs().max((c - i as f64 / n).abs())
        })
        .fold(0.0, f64::max))
}

/// Number of grid nodes used when inverting a 1D estimate into a sampler.
pub const ESTIMATE_GRID: usize = 2048;

/// Draw `n` points from a 1D density estimate.
///
/// The estimator is evaluated on a 2048-node uniform grid spanning the input
/// sample padded by three Silverman bandwidths, negatives are clamped to
/// zero, and the piecewise-linear CDF through the node masses is inverted.
pub fn sample_from_estimate_1d<R: Rng + ?Sized>(
    estimate: impl Fn(f64) -> f64,
    base_sample: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if base_sample.len() < 2 {
        return Err(Error::EmptySample);
    }
    let m = base_sample.len() as f64;
    let mean = base_sample.iter().sum::<f64>() / m;
    let var = base_sample.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0);
    let h = var.sqrt() * silverman_factor(1, base_sample.len());
    let lo = base_sample.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = base_sample.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let step = (hi - lo) / (ESTIMATE_GRID - 1) as f64;
    let density: Vec<f64> = (0..ESTIMATE_GRID)
        .map(|i| estimate(lo + i as f64 * step).max(0.0))
        .collect();
    // Cumulative trapezoid masses at the nodes.
    let mut cdf = vec![0.0f64; ESTIMATE_GRID];
    for i in 1..ESTIMATE_GRID {
        cdf[i] = cdf[i - 1] + 0.5 * (density[i - 1] + density[i]) * step;
    }
    let total = cdf[ESTIMATE_GRID - 1];
    if !(total > 0.0) {
        return Err(Error::AllZero);
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let t = rng.gen::<f64>() * total;
        // First node with cdf >= t bounds the segment to invert.
        let hi_idx = cdf.partition_point(|&c| c < t).clamp(1, ESTIMATE_GRID - 1);
        let lo_idx = hi_idx - 1;
        let seg = cdf[hi_idx] - cdf[lo_idx];
        let frac = if seg > 0.0 { (t - cdf[lo_idx]) / seg } else { 0.5 };
        out.push(lo + (lo_idx as f64 + frac) * step);
    }
    Ok(out)
}

/// One evaluation-run record; mirrors the CSV/JSON report row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub estimator: String,
    pub distribution: String,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub mse: f64,
    pub kl: f64,
    /// Two-sample KS p-value; absent above one dimension.
    pub ks_p: Option<f64>,
    pub wall_time_s: f64,
}

pub const REPORT_CSV_HEADER: &str = "estimator,distribution,n,d,seed,mse,kl,ks_p,time_s";

impl EvalReport {
    pub fn csv_row(&self) -> String {
        let ks = self
            .ks_p
            .map(|p| format!("{p:.6e}"))
            .unwrap_or_default();
        format!(
            "{},{},{},{},{},{:.6e},{:.6e},{},{:.3e}",
            self.estimator,
            self.distribution,
            self.n,
            self.d,
            self.seed,
            self.mse,
            self.kl,
            ks,
            self.wall_time_s
        )
    }
}

/// Write a full report CSV (header plus one row per run).
pub fn write_report_csv<W: Write>(out: &mut W, reports: &[EvalReport]) -> Result<()> {
    writeln!(out, "{REPORT_CSV_HEADER}")?;
    for r in reports {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn mse_basics() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5);
        assert!(matches!(
            mse(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn kl_basics() {
        assert_eq!(kl_mc(&[0.3, 2.0], &[0.3, 2.0]).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert!((kl_mc(&[1.0], &[e]).unwrap() + 1.0).abs() < 1e-12);
        // Zero estimate hits the clamp.
        let penalized = kl_mc(&[1.0], &[0.0]).unwrap();
        assert!((penalized - (1.0 / KL_EPSILON).ln()).abs() < 1e-9);
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let (d, p) = ks_two_sample(&a, &a).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(p, 1.0);

        let b: Vec<f64> = (0..100).map(|i| 10.0 + i as f64 / 100.0).collect();
        let (d, p) = ks_two_sample(&a, &b).unwrap();
        assert_eq!(d, 1.0);
        assert!(p < 1e-10, "p = {p}");
    }

    #[test]
    fn ks_p_monotone_in_d() {
        // Larger D at fixed sizes must not increase p.
        let ne = 500.0f64;
        let lam = |d: f64| (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
        let mut prev = 1.0;
        for i in 1..=40 {
            let p = kolmogorov_q(lam(i as f64 * 0.025));
            assert!(p <= prev + 1e-12);
            prev = p;
        }
    }

    #[test]
    fn ks_matches_quadratic_oracle() {
        let mut rng = stream_rng(70, 0);
        for _ in 0..50 {
            let n1 = rng.gen_range(2..40);
            let n2 = rng.gen_range(2..40);
            // Coarse values force plenty of ties across the two samples.
            let a: Vec<f64> = (0..n1).map(|_| (rng.gen::<f64>() * 8.0).round()).collect();
            let b: Vec<f64> = (0..n2).map(|_| (rng.gen::<f64>() * 8.0).round()).collect();
            let (d, _) = ks_two_sample(&a, &b).unwrap();
            let mut oracle: f64 = 0.0;
            for v in a.iter().chain(&b) {
                let fa = a.iter().filter(|&&x| x <= *v).count() as f64 / n1 as f64;
                let fb = b.iter().filter(|&&x| x <= *v).count() as f64 / n2 as f64;
                oracle = oracle.max((fa - fb).abs());
            }
            assert!((d - oracle).abs() < 1e-12, "d={d}, oracle={oracle}");
        }
    }

    #[test]
    fn ks_level_property_smoke() {
        let mut low = 0;
        for trial in 0..20 {
            let mut rng = stream_rng(71, trial);
            let a: Vec<f64> = (0..500).map(|_| rng.gen::<f64>()).collect();
            let b: Vec<f64> = (0..500).map(|_| rng.gen::<f64>()).collect();
            let (_, p) = ks_two_sample(&a, &b).unwrap();
            if p <= 0.01 {
                low += 1;
            }
        }
        assert!(low <= 2, "{low}/20 rejections at the 1% level");
    }

    #[test]
    fn inverse_sampler_follows_uniform_estimate() {
        let mut rng = stream_rng(72, 0);
        let base: Vec<f64> = (0..1000).map(|_| rng.gen::<f64>()).collect();
        let xs =
            sample_from_estimate_1d(|x| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 }, &base, 10_000, &mut rng)
                .unwrap();
        let d = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(d < 1.6276 / 100.0, "KS D = {d}");
    }

    #[test]
    fn inverse_sampler_concentrates_on_spike() {
        let mut rng = stream_rng(73, 0);
        let base = vec![0.0, 1.0];
        let spike = 0.51234;
        let width = 0.003;
        let xs = sample_from_estimate_1d(
            |x| if (x - spike).abs() < width { 1.0 } else { 0.0 },
            &base,
            2000,
            &mut rng,
        )
        .unwrap();
        for x in xs {
            assert!((x - spike).abs() < width + 0.01);
        }
    }

    #[test]
    fn inverse_sampler_edge_cases() {
        let mut rng = stream_rng(74, 0);
        let base = vec![0.0, 1.0];
        assert!(sample_from_estimate_1d(|_| 1.0, &base, 0, &mut rng)
            .unwrap()
            .is_empty());
        assert!(matches!(
            sample_from_estimate_1d(|_| 0.0, &base, 5, &mut rng),
            Err(Error::AllZero)
        ));
    }

    #[test]
    fn report_round_trips() {
        let r = EvalReport {
            estimator: "kde".into(),
            distribution: "gamma".into(),
            n: 5000,
            d: 1,
            seed: 3,
            mse: 1.25e4,
            kl: 0.88,
            ks_p: Some(0.02),
            wall_time_s: 0.5,
        };
        let json = serde_json::to_string(&r).unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(r, back);
        let row = r.csv_row();
        assert!(row.starts_with("kde,gamma,5000,1,3,"));
        let mut buf = Vec::new();
        write_report_csv(&mut buf, std::slice::from_ref(&r)).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with(REPORT_CSV_HEADER));
    }
}
