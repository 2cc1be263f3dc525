//! Point samples and the rejection sampler.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthpdf::normalize::{grid_points_per_axis, SyntheticPdf};

/// Affine map from stored coordinates to original coordinates:
/// `x_original = offset + x_stored * width`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisScale {
    pub offset: f64,
    pub width: f64,
}

impl AxisScale {
    pub const IDENTITY: AxisScale = AxisScale {
        offset: 0.0,
        width: 1.0,
    };
}

/// `n` points in `d` dimensions with scaling metadata and, when known, the
/// ground-truth density at each point (in stored coordinates).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    dim: usize,
    /// Row-major `n × dim` coordinates.
    points: Vec<f64>,
    /// Per-axis map from stored to original coordinates.
    pub scale: Vec<AxisScale>,
    pub density_truth: Option<Vec<f64>>,
}

impl SampleSet {
    /// Points in their own (original) coordinates, identity scale.
    pub fn from_rows(dim: usize, points: Vec<f64>) -> SampleSet {
        assert!(dim > 0 && points.len() % dim == 0);
        SampleSet {
            dim,
            points,
            scale: vec![AxisScale::IDENTITY; dim],
            density_truth: None,
        }
    }

    pub fn from_scaled_rows(
        dim: usize,
        points: Vec<f64>,
        scale: Vec<AxisScale>,
        density_truth: Option<Vec<f64>>,
    ) -> SampleSet {
        assert!(dim > 0 && points.len() % dim == 0);
        assert_eq!(scale.len(), dim);
        if let Some(t) = &density_truth {
            assert_eq!(t.len(), points.len() / dim);
        }
        SampleSet {
            dim,
            points,
            scale,
            density_truth,
        }
    }

    pub fn n(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    /// Volume factor of the stored-to-original map.
    pub fn scale_jacobian(&self) -> f64 {
        self.scale.iter().map(|s| s.width).product()
    }

    /// Per-axis `(min, max)` over the stored points.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        let mut bb = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for p in self.iter_points() {
            for (d, &x) in p.iter().enumerate() {
                bb[d].0 = bb[d].0.min(x);
                bb[d].1 = bb[d].1.max(x);
            }
        }
        bb
    }
}

/// Safety factor applied on top of the observed density maximum.
pub const ENVELOPE_SAFETY: f64 = 1.2;

/// Uniform probes used to seed the envelope when no grid is affordable.
pub const ENVELOPE_PROBES: usize = 100_000;

const ACCEPTANCE_FLOOR: f64 = 1e-4;
const ACCEPTANCE_CHECK_AFTER: u64 = 1_000_000;

/// Diagnostics of one rejection-sampling run.
#[derive(Clone, Copy, Debug)]
pub struct RejectionStats {
    pub proposals: u64,
    pub accepted: u64,
    /// Final envelope constant `M` (density scale).
    pub envelope: f64,
    /// Envelope re-estimations triggered by observed densities above `M`.
    pub restarts: u32,
}

impl RejectionStats {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.proposals as f64
    }
}

/// Density maximum over the normalization grid (`d <= 3`) or over uniform
/// probes (`d > 3`); the starting point for the envelope constant.
pub fn density_max_estimate<R: Rng + ?Sized>(pdf: &SyntheticPdf, rng: &mut R) -> f64 {
    let dim = pdf.dim();
    if dim <= 3 {
        let points = grid_points_per_axis(dim);
        let steps: Vec<f64> = pdf
            .domain
            .iter()
            .map(|iv| iv.width() / (points - 1) as f64)
            .collect();
        let mut idx = vec![0usize; dim];
        let mut point = vec![0.0f64; dim];
        let mut max = f64::NEG_INFINITY;
        loop {
            for d in 0..dim {
                point[d] = pdf.domain[d].a + idx[d] as f64 * steps[d];
            }
            max = max.max(pdf.density(&point));
            let mut d = 0;
            loop {
                idx[d] += 1;
                if idx[d] < points {
                    break;
                }
                idx[d] = 0;
                d += 1;
                if d == dim {
                    return max;
                }
            }
        }
    } else {
        let mut point = vec![0.0f64; dim];
        let mut max = f64::NEG_INFINITY;
        for _ in 0..ENVELOPE_PROBES {
            for (d, iv) in pdf.domain.iter().enumerate() {
                point[d] = iv.a + rng.gen::<f64>() * iv.width();
            }
            max = max.max(pdf.density(&point));
        }
        max
    }
}

/// Draw exactly `n` i.i.d. points from the density, scaled to unit range.
///
/// Proposals are uniform over the domain box under the envelope
/// `M = 1.2 × (estimated density maximum)`. Observing a density above `M`
/// re-estimates the envelope from that value and restarts the draw loop, so
/// the output is exact under the final envelope. The result stores unit-range
/// coordinates, the per-axis scale back to the domain box, and the
/// ground-truth density at every point in unit-range coordinates.
pub fn rejection_sample<R: Rng + ?Sized>(
    pdf: &SyntheticPdf,
    n: usize,
    rng: &mut R,
) -> Result<SampleSet> {
    rejection_sample_with_stats(pdf, n, rng).map(|(s, _)| s)
}

/// As [`rejection_sample`], also returning run diagnostics.
pub fn rejection_sample_with_stats<R: Rng + ?Sized>(
    pdf: &SyntheticPdf,
    n: usize,
    rng: &mut R,
) -> Result<(SampleSet, RejectionStats)> {
    assert!(n >= 1, "must request at least one point");
    let dim = pdf.dim();
    let mut envelope = ENVELOPE_SAFETY * density_max_estimate(pdf, rng);
    let mut accepted_points: Vec<f64> = Vec::with_capacity(n * dim);
    let mut accepted_density: Vec<f64> = Vec::with_capacity(n);
    let mut proposals: u64 = 0;
    let mut restarts: u32 = 0;
    let mut point = vec![0.0f64; dim];
    loop {
        for (d, iv) in pdf.domain.iter().enumerate() {
            point[d] = iv.a + rng.gen::<f64>() * iv.width();
        }
        let u: f64 = rng.gen();
        proposals += 1;
        let dens = pdf.density(&point);
        if dens > envelope {
            // The envelope was too small; restart so all kept points are
            // drawn under the corrected bound.
            envelope = ENVELOPE_SAFETY * dens;
            accepted_points.clear();
            accepted_density.clear();
            proposals = 0;
            restarts += 1;
            continue;
        }
        if u * envelope < dens {
            accepted_points.extend_from_slice(&point);
            accepted_density.push(dens);
            if accepted_density.len() == n {
                break;
            }
        }
        if proposals >= ACCEPTANCE_CHECK_AFTER {
            let rate = accepted_density.len() as f64 / proposals as f64;
            if rate < ACCEPTANCE_FLOOR {
                return Err(Error::LowAcceptance { rate, proposals });
            }
        }
    }
    let stats = RejectionStats {
        proposals,
        accepted: accepted_density.len() as u64,
        envelope,
        restarts,
    };
    // Scale to unit range; densities pick up the box volume as Jacobian.
    let jacobian: f64 = pdf.volume();
    let scale: Vec<AxisScale> = pdf
        .domain
        .iter()
        .map(|iv| AxisScale {
            offset: iv.a,
            width: iv.width(),
        })
        .collect();
    for (d, iv) in pdf.domain.iter().enumerate() {
        let w = iv.width();
        for row in 0..n {
            let v = &mut accepted_points[row * dim + d];
            *v = (*v - iv.a) / w;
        }
    }
    for dens in &mut accepted_density {
        *dens *= jacobian;
    }
    Ok((
        SampleSet::from_scaled_rows(dim, accepted_points, scale, Some(accepted_density)),
        stats,
    ))
}
