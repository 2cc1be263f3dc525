//! Normalization of expression trees into proper densities.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthpdf::expr::{ExprNode, FunctionExpr};

/// Per-axis closed interval `[a, b]` of the generation domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.b - self.a
    }
}

/// How the normalization constant was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZMethod {
    GridQuadrature,
    MonteCarlo,
}

/// A normalized synthetic density with an exact evaluation oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPdf {
    pub expr: FunctionExpr,
    pub domain: Vec<Interval>,
    /// Normalization constant `Z = ∫ expr` over the domain box.
    pub z: f64,
    pub z_method: ZMethod,
    /// Estimated relative error of `z` (Richardson for quadrature, standard
    /// error for Monte Carlo).
    pub z_rel_error: f64,
}

impl SyntheticPdf {
    /// Density value at a point of the domain box.
    pub fn density(&self, point: &[f64]) -> f64 {
        self.expr.eval(point) / self.z
    }

    pub fn dim(&self) -> usize {
        self.expr.dim
    }

    /// Volume of the domain box.
    pub fn volume(&self) -> f64 {
        self.domain.iter().map(Interval::width).product()
    }
}

/// Grid resolutions per axis for the quadrature paths.
pub fn grid_points_per_axis(dim: usize) -> usize {
    match dim {
        1 => 4096,
        2 => 512,
        _ => 128,
    }
}

/// Composite trapezoid rule for `f` sampled on an inclusive uniform grid.
fn trapezoid_1d(f: impl Fn(f64) -> f64, iv: Interval, points: usize) -> f64 {
    let h = iv.width() / (points - 1) as f64;
    let mut acc = 0.5 * (f(iv.a) + f(iv.b));
    for i in 1..points - 1 {
        acc += f(iv.a + i as f64 * h);
    }
    acc * h
}

/// Tensor-product trapezoid rule over a `dim`-dimensional box.
fn trapezoid_nd(expr: &FunctionExpr, domain: &[Interval], points: usize) -> f64 {
    let dim = domain.len();
    let steps: Vec<f64> = domain.iter().map(|iv| iv.width() / (points - 1) as f64).collect();
    let mut idx = vec![0usize; dim];
    let mut point = vec![0.0f64; dim];
    let mut acc = 0.0;
    loop {
        let mut w = 1.0;
        for d in 0..dim {
            point[d] = domain[d].a + idx[d] as f64 * steps[d];
            if idx[d] == 0 || idx[d] == points - 1 {
                w *= 0.5;
            }
        }
        acc += w * expr.eval(&point);
        // Odometer increment over the grid indices.
        let mut d = 0;
        loop {
            idx[d] += 1;
            if idx[d] < points {
                break;
            }
            idx[d] = 0;
            d += 1;
            if d == dim {
                let cell: f64 = steps.iter().product();
                return acc * cell;
            }
        }
    }
}

fn quadrature_z(expr: &FunctionExpr, domain: &[Interval]) -> (f64, f64) {
    let fine = grid_points_per_axis(expr.dim);
    let coarse = fine / 2;
    let (z_fine, z_coarse) = if expr.dim == 1 {
        (
            trapezoid_1d(|x| expr.eval(&[x]), domain[0], fine),
            trapezoid_1d(|x| expr.eval(&[x]), domain[0], coarse),
        )
    } else {
        (
            trapezoid_nd(expr, domain, fine),
            trapezoid_nd(expr, domain, coarse),
        )
    };
    let rel = if z_fine != 0.0 {
        ((z_coarse - z_fine) / (3.0 * z_fine)).abs()
    } else {
        f64::INFINITY
    };
    (z_fine, rel.max(f64::EPSILON))
}

/// Separable fast path: product of per-axis 1D integrals, times the widths of
/// axes the expression never reads.
fn separable_z(factors: &[(usize, &ExprNode)], domain: &[Interval]) -> (f64, f64) {
    let fine = 4096;
    let mut z = 1.0;
    let mut rel = 0.0;
    let mut used = vec![false; domain.len()];
    for &(axis, node) in factors {
        used[axis] = true;
        let iv = domain[axis];
        let zf = trapezoid_1d(|x| node.eval_single_axis(x), iv, fine);
        let zc = trapezoid_1d(|x| node.eval_single_axis(x), iv, fine / 2);
        z *= zf;
        if zf != 0.0 {
            rel += ((zc - zf) / (3.0 * zf)).abs();
        } else {
            rel = f64::INFINITY;
        }
    }
    for (axis, iv) in domain.iter().enumerate() {
        if !used[axis] {
            z *= iv.width();
        }
    }
    (z, rel.max(f64::EPSILON))
}

/// Number of uniform probes for the Monte Carlo path (`d > 3`).
pub const MC_PROBES: usize = 1_000_000;

fn monte_carlo_z<R: Rng + ?Sized>(
    expr: &FunctionExpr,
    domain: &[Interval],
    rng: &mut R,
) -> (f64, f64) {
    let volume: f64 = domain.iter().map(Interval::width).product();
    let mut point = vec![0.0f64; domain.len()];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..MC_PROBES {
        for (d, iv) in domain.iter().enumerate() {
            point[d] = iv.a + rng.gen::<f64>() * iv.width();
        }
        let v = expr.eval(&point);
        sum += v;
        sum_sq += v * v;
    }
    let n = MC_PROBES as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    let rel = if mean != 0.0 {
        (var.sqrt() / n.sqrt()) / mean.abs()
    } else {
        f64::INFINITY
    };
    (volume * mean, rel)
}

/// Compute the normalization constant and wrap the expression as a density.
///
/// Separable multiply-only trees use the product of per-axis 1D integrals;
/// otherwise a full grid is used for `d <= 3` and Monte Carlo above. The RNG
/// is consumed only on the Monte Carlo path.
pub fn normalize<R: Rng + ?Sized>(
    expr: FunctionExpr,
    domain: Vec<Interval>,
    rng: &mut R,
) -> Result<SyntheticPdf> {
    assert_eq!(expr.dim, domain.len(), "domain arity must match expression");
    let (z, z_rel_error, z_method) = if let Some(factors) = expr.separable_factors() {
        let (z, rel) = separable_z(&factors, &domain);
        (z, rel, ZMethod::GridQuadrature)
    } else if expr.dim <= 3 {
        let (z, rel) = quadrature_z(&expr, &domain);
        (z, rel, ZMethod::GridQuadrature)
    } else {
        let (z, rel) = monte_carlo_z(&expr, &domain, rng);
        (z, rel, ZMethod::MonteCarlo)
    };
    if !z.is_finite() || z <= 1e-300 {
        return Err(Error::DegeneratePdf { z });
    }
    Ok(SyntheticPdf {
        expr,
        domain,
        z,
        z_method,
        z_rel_error,
    })
}
