//! Closed-form 1D test distributions with exact density evaluation, exact
//! CDFs and exact (non-rejection) sampling.
//!
//! The set covers a singularity (gamma), multimodality with soft tails (sum
//! of two Gaussians), sharp localized peaks (five fingers), heavy tails
//! (Cauchy), discontinuities with heavy edges, and nine local-shape probes
//! that each have a designated query point `t` with density exactly 1.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::synthpdf::SampleSet;

const SQRT_2PI: f64 = 2.5066282746310002;

fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * SQRT_2PI)
}

fn normal_cdf(x: f64, mu: f64, sigma: f64) -> f64 {
    0.5 * (1.0 + libm::erf((x - mu) / (sigma * std::f64::consts::SQRT_2)))
}

/// Five-fingers peak locations `(2k-1)/10`.
const FINGER_CENTERS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
const FINGER_SIGMA: f64 = 0.01;
const FINGER_WEIGHT: f64 = 0.5;

/// Half-width parameter of local-shape row 9, chosen so the slice of
/// `sin(x) + 2` around `3π/2` carries unit mass.
pub const LOCAL_SHAPE_9_ALPHA: f64 = 6.52326761054738;

/// Gaussian width of local-shape row 6; the peak value is exactly 1.
pub const LOCAL_SHAPE_6_SIGMA: f64 = 0.3989422804014327; // 1/√(2π)
pub const LOCAL_SHAPE_6_MU: f64 = 15.0;

/// A closed-form test distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalyticPdf {
    /// `e^{-x} / √(πx)`: gamma with a singularity at the origin.
    Gamma,
    /// `0.7·N(5, 3) + 0.3·N(0, 1/2)`: soft-tailed bimodal mixture.
    TwoGaussians,
    /// Five sharp Gaussian peaks over a uniform floor on `[0, 1]`.
    FiveFingers,
    /// `b / (π(x² + b²))`: heavy tails.
    Cauchy { scale: f64 },
    /// Piecewise-constant density on `[0, 1]` with jumps and heavy edges.
    Discontinuous,
    /// One of the nine local-shape probes, `index ∈ 1..=9`.
    LocalShape { index: u8 },
}

impl AnalyticPdf {
    /// Parse the CLI name: `gamma`, `two-gaussians`, `five-fingers`,
    /// `cauchy:b=<float>`, `discontinuous`, `local-shape:<1..9>`.
    pub fn parse(name: &str) -> Result<AnalyticPdf> {
        match name {
            "gamma" => Ok(AnalyticPdf::Gamma),
            "two-gaussians" => Ok(AnalyticPdf::TwoGaussians),
            "five-fingers" => Ok(AnalyticPdf::FiveFingers),
            "cauchy" => Ok(AnalyticPdf::Cauchy { scale: 1.0 }),
            "discontinuous" => Ok(AnalyticPdf::Discontinuous),
            other => {
                if let Some(rest) = other.strip_prefix("cauchy:b=") {
                    let scale: f64 = rest
                        .parse()
                        .map_err(|_| Error::Format(format!("bad cauchy scale `{rest}`")))?;
                    if scale <= 0.0 {
                        return Err(Error::Format("cauchy scale must be positive".into()));
                    }
                    Ok(AnalyticPdf::Cauchy { scale })
                } else if let Some(rest) = other.strip_prefix("local-shape:") {
                    let index: u8 = rest
                        .parse()
                        .map_err(|_| Error::Format(format!("bad local-shape index `{rest}`")))?;
                    if !(1..=9).contains(&index) {
                        return Err(Error::Format("local-shape index must be 1..9".into()));
                    }
                    Ok(AnalyticPdf::LocalShape { index })
                } else {
                    Err(Error::Format(format!("unknown distribution `{name}`")))
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            AnalyticPdf::Gamma => "gamma".into(),
            AnalyticPdf::TwoGaussians => "two-gaussians".into(),
            AnalyticPdf::FiveFingers => "five-fingers".into(),
            AnalyticPdf::Cauchy { scale } => format!("cauchy:b={scale}"),
            AnalyticPdf::Discontinuous => "discontinuous".into(),
            AnalyticPdf::LocalShape { index } => format!("local-shape:{index}"),
        }
    }

    /// Support interval used by quadrature checks; heavy tails are truncated
    /// far enough out that the lost mass is negligible.
    pub fn support(&self) -> (f64, f64) {
        match self {
            AnalyticPdf::Gamma => (0.0, 60.0),
            AnalyticPdf::TwoGaussians => (-30.0, 40.0),
            AnalyticPdf::FiveFingers => (0.0, 1.0),
            AnalyticPdf::Cauchy { scale } => (-1e6 * scale, 1e6 * scale),
            AnalyticPdf::Discontinuous => (0.0, 1.0),
            AnalyticPdf::LocalShape { index } => local_shape_support(*index),
        }
    }

    /// Exact density. Points outside the support return 0; the gamma
    /// singularity reports `+∞` at exactly 0.
    pub fn density(&self, x: f64) -> f64 {
        match self {
            AnalyticPdf::Gamma => {
                if x < 0.0 {
                    0.0
                } else if x == 0.0 {
                    f64::INFINITY
                } else {
                    (-x).exp() / (PI * x).sqrt()
                }
            }
            AnalyticPdf::TwoGaussians => {
                0.7 * normal_pdf(x, 5.0, 3.0) + 0.3 * normal_pdf(x, 0.0, 0.5)
            }
            AnalyticPdf::FiveFingers => {
                if !(0.0..=1.0).contains(&x) {
                    return 0.0;
                }
                let peaks: f64 = FINGER_CENTERS
                    .iter()
                    .map(|&mu| normal_pdf(x, mu, FINGER_SIGMA) / 5.0)
                    .sum();
                FINGER_WEIGHT * peaks + (1.0 - FINGER_WEIGHT)
            }
            AnalyticPdf::Cauchy { scale } => scale / (PI * (x * x + scale * scale)),
            AnalyticPdf::Discontinuous => {
                if !(0.0..=1.0).contains(&x) {
                    0.0
                } else if x < 0.3 || x > 0.8 {
                    0.8
                } else if x > 0.4 && x < 0.5 {
                    1.0
                } else {
                    1.25
                }
            }
            AnalyticPdf::LocalShape { index } => local_shape_density(*index, x),
        }
    }

    /// Exact CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            AnalyticPdf::Gamma => {
                // Gamma(1/2, 1): F(x) = erf(√x).
                if x <= 0.0 {
                    0.0
                } else {
                    libm::erf(x.sqrt())
                }
            }
            AnalyticPdf::TwoGaussians => {
                0.7 * normal_cdf(x, 5.0, 3.0) + 0.3 * normal_cdf(x, 0.0, 0.5)
            }
            AnalyticPdf::FiveFingers => {
                let x = x.clamp(0.0, 1.0);
                let peaks: f64 = FINGER_CENTERS
                    .iter()
                    .map(|&mu| (normal_cdf(x, mu, FINGER_SIGMA) - normal_cdf(0.0, mu, FINGER_SIGMA)) / 5.0)
                    .sum();
                FINGER_WEIGHT * peaks + (1.0 - FINGER_WEIGHT) * x
            }
            AnalyticPdf::Cauchy { scale } => 0.5 + (x / scale).atan() / PI,
            AnalyticPdf::Discontinuous => {
                let x = x.clamp(0.0, 1.0);
                if x < 0.3 {
                    0.8 * x
                } else if x <= 0.4 {
                    0.24 + 1.25 * (x - 0.3)
                } else if x < 0.5 {
                    0.365 + 1.0 * (x - 0.4)
                } else if x <= 0.8 {
                    0.465 + 1.25 * (x - 0.5)
                } else {
                    0.84 + 0.8 * (x - 0.8)
                }
            }
            AnalyticPdf::LocalShape { index } => local_shape_cdf(*index, x),
        }
    }

    /// Draw `n` points exactly (no rejection).
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> SampleSet {
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            xs.push(self.draw(rng));
        }
        let truth = xs.iter().map(|&x| self.density(x)).collect();
        let mut set = SampleSet::from_rows(1, xs);
        set.density_truth = Some(truth);
        set
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            AnalyticPdf::Gamma => {
                // Gamma(1/2, 1) is Z²/2 for standard normal Z; never emits 0.
                loop {
                    let z: f64 = rng.sample(StandardNormal);
                    let x = 0.5 * z * z;
                    if x > 0.0 {
                        return x;
                    }
                }
            }
            AnalyticPdf::TwoGaussians => {
                let z: f64 = rng.sample(StandardNormal);
                if rng.gen::<f64>() < 0.7 {
                    5.0 + 3.0 * z
                } else {
                    0.5 * z
                }
            }
            AnalyticPdf::FiveFingers => loop {
                let x = if rng.gen::<f64>() < FINGER_WEIGHT {
                    let c = FINGER_CENTERS[rng.gen_range(0..5)];
                    let z: f64 = rng.sample(StandardNormal);
                    c + FINGER_SIGMA * z
                } else {
                    rng.gen::<f64>()
                };
                if (0.0..=1.0).contains(&x) {
                    return x;
                }
            },
            AnalyticPdf::Cauchy { scale } => {
                let u: f64 = rng.gen();
                scale * (PI * (u - 0.5)).tan()
            }
            AnalyticPdf::Discontinuous => {
                // Piecewise-linear inverse CDF over the five constant pieces.
                let u: f64 = rng.gen();
                if u < 0.24 {
                    u / 0.8
                } else if u < 0.365 {
                    0.3 + (u - 0.24) / 1.25
                } else if u < 0.465 {
                    0.4 + (u - 0.365)
                } else if u < 0.84 {
                    0.5 + (u - 0.465) / 1.25
                } else {
                    0.8 + (u - 0.84) / 0.8
                }
            }
            AnalyticPdf::LocalShape { index } => local_shape_draw(*index, rng),
        }
    }
}

fn local_shape_support(index: u8) -> (f64, f64) {
    match index {
        1 => (0.5, 1.5),
        2 => (0.0, 2.0),
        3 => (0.0, 1.0),
        4 => (0.0, PI / 2.0),
        5 => (PI / 3.0, 2.0 * PI / 3.0),
        6 => (0.0, 30.0),
        7 => (0.0, 3f64.cbrt()),
        8 => (0.0, 9f64.cbrt()),
        9 => (
            1.5 * PI - PI / LOCAL_SHAPE_9_ALPHA,
            1.5 * PI + PI / LOCAL_SHAPE_9_ALPHA,
        ),
        _ => panic!("local-shape index out of range"),
    }
}

fn local_shape_density(index: u8, x: f64) -> f64 {
    let (lo, hi) = local_shape_support(index);
    // Supports are closed so the designated query points on boundaries
    // evaluate to their formula value.
    if x < lo || x > hi {
        return 0.0;
    }
    match index {
        1 => 1.0,
        2 => x / 2.0,
        3 => 2.0 * x,
        4 | 5 => x.sin(),
        6 => {
            let z = (x - LOCAL_SHAPE_6_MU) / LOCAL_SHAPE_6_SIGMA;
            (-0.5 * z * z).exp()
        }
        7 => x * x,
        8 => x * x / 3.0,
        9 => x.sin() + 2.0,
        _ => unreachable!(),
    }
}

fn local_shape_cdf(index: u8, x: f64) -> f64 {
    let (lo, hi) = local_shape_support(index);
    if x <= lo {
        return 0.0;
    }
    if x >= hi {
        return 1.0;
    }
    match index {
        1 => x - 0.5,
        2 => x * x / 4.0,
        3 => x * x,
        4 => 1.0 - x.cos(),
        5 => 0.5 - x.cos(),
        6 => {
            // The scaled Gaussian integrates to σ√(2π) = 1 over the support.
            normal_cdf(x, LOCAL_SHAPE_6_MU, LOCAL_SHAPE_6_SIGMA)
                - normal_cdf(lo, LOCAL_SHAPE_6_MU, LOCAL_SHAPE_6_SIGMA)
        }
        7 => x * x * x / 3.0,
        8 => x * x * x / 9.0,
        9 => (lo.cos() - x.cos()) + 2.0 * (x - lo),
        _ => unreachable!(),
    }
}

fn local_shape_draw<R: Rng + ?Sized>(index: u8, rng: &mut R) -> f64 {
    let (lo, hi) = local_shape_support(index);
    let u: f64 = rng.gen();
    match index {
        1 => lo + u,
        2 => 2.0 * u.sqrt(),
        3 => u.sqrt(),
        4 => (1.0 - u).acos(),
        5 => (0.5 - u).acos(),
        6 => loop {
            let z: f64 = rng.sample(StandardNormal);
            let x = LOCAL_SHAPE_6_MU + LOCAL_SHAPE_6_SIGMA * z;
            if (lo..=hi).contains(&x) {
                return x;
            }
        },
        7 => (3.0 * u).cbrt(),
        8 => (9.0 * u).cbrt(),
        9 => {
            // Invert F(x) = cos(lo) - cos(x) + 2(x - lo) by bisection; the
            // density is at least 1 on the slice so F is strictly increasing.
            let (mut a, mut b) = (lo, hi);
            while b - a > 1e-10 {
                let mid = 0.5 * (a + b);
                if local_shape_cdf(9, mid) < u {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            0.5 * (a + b)
        }
        _ => panic!("local-shape index out of range"),
    }
}

/// The local-shape probe with its designated query point `t`, where the
/// density is exactly 1.
pub fn local_shape_query(index: u8) -> (AnalyticPdf, f64) {
    assert!((1..=9).contains(&index), "local-shape index must be 1..9");
    let t = match index {
        1 => 1.0,
        2 => 2.0,
        3 => 0.5,
        4 => PI / 2.0,
        5 => PI / 2.0,
        6 => LOCAL_SHAPE_6_MU,
        7 => 1.0,
        8 => 3f64.sqrt(),
        9 => 1.5 * PI,
        _ => unreachable!(),
    };
    (AnalyticPdf::LocalShape { index }, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn quad_mass(pdf: &AnalyticPdf, n: usize) -> f64 {
        let (lo, hi) = pdf.support();
        let h = (hi - lo) / (n - 1) as f64;
        let f = |x: f64| {
            let v = pdf.density(x);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        let mut acc = 0.5 * (f(lo) + f(hi));
        for i in 1..n - 1 {
            acc += f(lo + i as f64 * h);
        }
        acc * h
    }

    #[test]
    fn gamma_point_values() {
        let g = AnalyticPdf::Gamma;
        assert!((g.density(1.0) - 0.2075537487102974).abs() < 1e-12);
        assert!(g.density(0.0).is_infinite());
        assert_eq!(g.density(-1.0), 0.0);
    }

    #[test]
    fn five_fingers_peak_value() {
        let f = AnalyticPdf::FiveFingers;
        assert!((f.density(0.1) - 4.4894228).abs() < 1e-4);
    }

    #[test]
    fn discontinuous_total_mass_exact() {
        // 0.8·0.5 + 1·0.1 + 1.25·0.4 = 1.
        let d = AnalyticPdf::Discontinuous;
        assert!((d.cdf(1.0) - 1.0).abs() < 1e-15);
        assert_eq!(d.density(0.45), 1.0);
        assert_eq!(d.density(0.35), 1.25);
        assert_eq!(d.density(0.9), 0.8);
    }

    fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / (n - 1) as f64;
        let mut acc = 0.5 * (f(lo) + f(hi));
        for i in 1..n - 1 {
            acc += f(lo + i as f64 * h);
        }
        acc * h
    }

    #[test]
    fn masses_integrate_to_one() {
        // The singularity of gamma is removed by substituting x = t², which
        // turns the integrand into the smooth 2·density(t²)·t. Start a hair
        // above zero where density(0) = ∞ would give 0·∞; the skipped mass
        // is ~1.1e-9.
        let g = AnalyticPdf::Gamma;
        let mass = trapezoid(|t| 2.0 * t * g.density(t * t), 1e-9, 60f64.sqrt(), 200_001);
        assert!((mass - 1.0).abs() < 1e-6, "gamma mass = {mass}");

        // Cauchy: substitute x = b·sinh(u) on ±1e6·b, add the analytic tail.
        let b = 1.0;
        let c = AnalyticPdf::Cauchy { scale: b };
        let umax = (1e6f64).asinh();
        let inner = trapezoid(
            |u| c.density(b * u.sinh()) * b * u.cosh(),
            -umax,
            umax,
            400_001,
        );
        let tails = 2.0 * (0.5 - (1e6f64).atan() / PI);
        assert!((inner + tails - 1.0).abs() < 1e-6, "cauchy mass = {inner}");

        // Discontinuous: integrate each constant piece exactly.
        let d = AnalyticPdf::Discontinuous;
        let cuts = [0.0, 0.3, 0.4, 0.5, 0.8, 1.0];
        let mass: f64 = cuts
            .windows(2)
            .map(|w| d.density(0.5 * (w[0] + w[1])) * (w[1] - w[0]))
            .sum();
        assert!((mass - 1.0).abs() < 1e-12, "discontinuous mass = {mass}");

        // Smooth shapes by plain fine-grid trapezoid on their supports.
        let mut smooth: Vec<AnalyticPdf> = vec![AnalyticPdf::TwoGaussians, AnalyticPdf::FiveFingers];
        smooth.extend((1..=9).map(|index| AnalyticPdf::LocalShape { index }));
        for pdf in smooth {
            let mass = quad_mass(&pdf, 1_000_001);
            assert!((mass - 1.0).abs() < 1e-6, "{}: mass = {mass}", pdf.name());
        }
    }

    #[test]
    fn local_shape_query_density_is_one() {
        for index in 1..=9 {
            let (pdf, t) = local_shape_query(index);
            assert!(
                (pdf.density(t) - 1.0).abs() < 1e-12,
                "shape {index} at t={t}: {}",
                pdf.density(t)
            );
        }
    }

    #[test]
    fn sampling_laws_match_cdfs() {
        // One-sample KS at n=10⁴ against each exact CDF, 1% critical value.
        let crit = 1.6276 / (10_000f64).sqrt();
        let all: Vec<AnalyticPdf> = vec![
            AnalyticPdf::Gamma,
            AnalyticPdf::TwoGaussians,
            AnalyticPdf::FiveFingers,
            AnalyticPdf::Cauchy { scale: 1.0 },
            AnalyticPdf::Discontinuous,
        ]
        .into_iter()
        .chain((1..=9).map(|index| AnalyticPdf::LocalShape { index }))
        .collect();
        for (i, pdf) in all.iter().enumerate() {
            let mut fails = 0;
            for rep in 0..5 {
                let set = pdf.sample(10_000, &mut stream_rng(800 + i as u64, rep));
                let mut xs: Vec<f64> = set.iter_points().map(|p| p[0]).collect();
                xs.sort_by(f64::total_cmp);
                let n = xs.len() as f64;
                let d = xs
                    .iter()
                    .enumerate()
                    .map(|(j, &x)| {
                        let c = pdf.cdf(x);
                        ((j + 1) as f64 / n - c).abs().max((c - j as f64 / n).abs())
                    })
                    .fold(0.0, f64::max);
                if d >= crit {
                    fails += 1;
                }
            }
            assert!(fails <= 1, "{}: {fails}/5 KS failures", pdf.name());
        }
    }

    #[test]
    fn sample_moments() {
        let mut rng = stream_rng(801, 0);
        let g = AnalyticPdf::Gamma.sample(100_000, &mut rng);
        let mean: f64 = g.points().iter().sum::<f64>() / g.n() as f64;
        assert!((0.48..0.52).contains(&mean), "gamma mean {mean}");

        let c = AnalyticPdf::Cauchy { scale: 1.0 }.sample(100_000, &mut rng);
        let mut xs: Vec<f64> = c.points().to_vec();
        xs.sort_by(f64::total_cmp);
        let median = xs[xs.len() / 2];
        assert!(median.abs() < 0.02, "cauchy median {median}");

        let d = AnalyticPdf::Discontinuous.sample(100_000, &mut rng);
        let in_valley = d
            .points()
            .iter()
            .filter(|&&x| x > 0.4 && x < 0.5)
            .count() as f64
            / 100_000.0;
        assert!((in_valley - 0.1).abs() < 0.004, "valley mass {in_valley}");
    }

    #[test]
    fn names_round_trip() {
        for name in [
            "gamma",
            "two-gaussians",
            "five-fingers",
            "cauchy:b=2.5",
            "discontinuous",
            "local-shape:7",
        ] {
            let pdf = AnalyticPdf::parse(name).unwrap();
            assert_eq!(pdf.name(), name);
        }
        assert!(AnalyticPdf::parse("local-shape:0").is_err());
        assert!(AnalyticPdf::parse("nope").is_err());
    }
}
