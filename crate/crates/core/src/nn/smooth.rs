//! Adaptive cubic smoothing spline for 1D estimates.
//!
//! A natural cubic smoothing spline minimizes `∫ f''²` among all functions
//! with `Σ (y_i − f(x_i))² ≤ s_f`; the roughness weight λ is found by
//! bisection so the residual budget is met exactly. The budget is adaptive:
//! `s_f = coeff · m · Var(y)`, so noisier estimates get smoothed harder.

/// Fraction of the total estimate variance granted as residual budget.
pub const SMOOTH_BUDGET_COEFF: f64 = 0.05;

/// Smooth raw 1D estimates at their query positions, with the default
/// adaptive budget. Output is clamped at zero and aligned with the input
/// order; fewer than four distinct positions pass through unchanged.
pub fn smooth_1d(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    smooth_1d_with_coeff(xs, ys, SMOOTH_BUDGET_COEFF)
}

pub fn smooth_1d_with_coeff(xs: &[f64], ys: &[f64], coeff: f64) -> Vec<f64> {
    assert_eq!(xs.len(), ys.len());
    let m = xs.len();
    let clamp = |v: f64| v.max(0.0);
    if m == 0 {
        return Vec::new();
    }
    let mean = ys.iter().sum::<f64>() / m as f64;
    let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / m as f64;
    let budget = coeff * m as f64 * var;
    if budget <= 0.0 {
        return ys.iter().map(|&y| clamp(y)).collect();
    }

    // Collapse duplicate positions; each knot carries the mean of its ys.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut knots: Vec<f64> = Vec::with_capacity(m);
    let mut group_of = vec![0usize; m];
    for &i in &order {
        if knots.last() != Some(&xs[i]) {
            knots.push(xs[i]);
        }
        group_of[i] = knots.len() - 1;
    }
    let nu = knots.len();
    let mut values = vec![0.0f64; nu];
    let mut counts = vec![0usize; nu];
    for i in 0..m {
        values[group_of[i]] += ys[i];
        counts[group_of[i]] += 1;
    }
    for (v, &c) in values.iter_mut().zip(&counts) {
        *v /= c as f64;
    }
    if nu < 4 {
        return ys.iter().map(|&y| clamp(y)).collect();
    }

    // Maximum smoothing is the least-squares line; if it already fits inside
    // the budget there is nothing to search for.
    let (line, line_rss) = least_squares_line(&knots, &values, &counts);
    if line_rss <= budget {
        return (0..m).map(|i| clamp(line[group_of[i]])).collect();
    }

    let fitted = reinsch_fit(&knots, &values, budget);
    (0..m).map(|i| clamp(fitted[group_of[i]])).collect()
}

fn least_squares_line(xs: &[f64], ys: &[f64], counts: &[usize]) -> (Vec<f64>, f64) {
    let mut sw = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((&x, &y), &c) in xs.iter().zip(ys).zip(counts) {
        let w = c as f64;
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    let (alpha, beta) = if det.abs() < 1e-300 {
        (sy / sw, 0.0)
    } else {
        ((sy * sxx - sx * sxy) / det, (sw * sxy - sx * sy) / det)
    };
    let line: Vec<f64> = xs.iter().map(|&x| alpha + beta * x).collect();
    let rss = line
        .iter()
        .zip(ys)
        .zip(counts)
        .map(|((f, y), &c)| c as f64 * (y - f) * (y - f))
        .sum();
    (line, rss)
}

/// Natural cubic smoothing spline values at the knots for the λ whose
/// residual sum meets the budget (Reinsch's formulation).
fn reinsch_fit(x: &[f64], y: &[f64], budget: f64) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let e: Vec<f64> = h.iter().map(|&hi| 1.0 / hi).collect();
    // Second divided differences Qᵀy.
    let nu = n - 2;
    let qty: Vec<f64> = (0..nu)
        .map(|j| (y[j + 2] - y[j + 1]) * e[j + 1] - (y[j + 1] - y[j]) * e[j])
        .collect();

    let fit_for = |lambda: f64, out: &mut Vec<f64>| -> f64 {
        // A = T + λ QᵀQ, pentadiagonal SPD.
        let mut a0 = vec![0.0f64; nu];
        let mut a1 = vec![0.0f64; nu.saturating_sub(1)];
        let mut a2 = vec![0.0f64; nu.saturating_sub(2)];
        for j in 0..nu {
            let t_jj = (h[j] + h[j + 1]) / 3.0;
            let q_jj = e[j] * e[j] + (e[j] + e[j + 1]) * (e[j] + e[j + 1]) + e[j + 1] * e[j + 1];
            a0[j] = t_jj + lambda * q_jj;
            if j + 1 < nu {
                let t_off = h[j + 1] / 6.0;
                let q_off = -e[j + 1] * (e[j] + 2.0 * e[j + 1] + e[j + 2]);
                a1[j] = t_off + lambda * q_off;
            }
            if j + 2 < nu {
                a2[j] = lambda * e[j + 1] * e[j + 2];
            }
        }
        // Banded LDLᵀ.
        let mut d = vec![0.0f64; nu];
        let mut l1 = vec![0.0f64; nu];
        let mut l2 = vec![0.0f64; nu];
        for i in 0..nu {
            let mut di = a0[i];
            if i >= 1 {
                di -= l1[i - 1] * l1[i - 1] * d[i - 1];
            }
            if i >= 2 {
                di -= l2[i - 2] * l2[i - 2] * d[i - 2];
            }
            d[i] = di;
            if i + 1 < nu {
                let mut v = a1[i];
                if i >= 1 {
                    v -= l1[i - 1] * l2[i - 1] * d[i - 1];
                }
                l1[i] = v / di;
            }
            if i + 2 < nu {
                l2[i] = a2[i] / di;
            }
        }
        // Solve A c = Qᵀy.
        let mut c = vec![0.0f64; nu];
        for i in 0..nu {
            let mut v = qty[i];
            if i >= 1 {
                v -= l1[i - 1] * c[i - 1];
            }
            if i >= 2 {
                v -= l2[i - 2] * c[i - 2];
            }
            c[i] = v;
        }
        for i in 0..nu {
            c[i] /= d[i];
        }
        for i in (0..nu).rev() {
            if i + 1 < nu {
                c[i] -= l1[i] * c[i + 1];
            }
            if i + 2 < nu {
                c[i] -= l2[i] * c[i + 2];
            }
        }
        // Residual direction Qc and the fitted values a = y − λ Qc.
        let mut qc = vec![0.0f64; n];
        for j in 0..nu {
            qc[j] += e[j] * c[j];
            qc[j + 1] -= (e[j] + e[j + 1]) * c[j];
            qc[j + 2] += e[j + 1] * c[j];
        }
        out.clear();
        out.extend(y.iter().zip(&qc).map(|(&yi, &qi)| yi - lambda * qi));
        lambda * lambda * qc.iter().map(|q| q * q).sum::<f64>()
    };

    let mut fitted = Vec::with_capacity(n);
    // Exponential search for an upper bracket, then bisection on λ.
    let mut lo = 0.0f64;
    let mut hi = 1e-9;
    loop {
        let rss = fit_for(hi, &mut fitted);
        if rss >= budget || hi > 1e30 {
            break;
        }
        lo = hi;
        hi *= 16.0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let rss = fit_for(mid, &mut fitted);
        if rss < budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) < 1e-12 * hi.max(1.0) {
            break;
        }
    }
    fit_for(0.5 * (lo + hi), &mut fitted);
    fitted
}
