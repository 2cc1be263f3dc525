//! Adam optimizer with bias correction.

/// Adam moment hyperparameters (the conventional defaults).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates, one flat buffer per parameter tensor.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Zero-initialized state matching the given tensor lengths.
    pub fn new(lengths: &[usize]) -> AdamState {
        AdamState {
            step: 0,
            m: lengths.iter().map(|&l| vec![0.0; l]).collect(),
            v: lengths.iter().map(|&l| vec![0.0; l]).collect(),
        }
    }
}

/// One Adam update over matched parameter/gradient slices.
///
/// Order per element: update `m` and `v`, bias-correct, then apply
/// `θ ← θ − lr·m̂/(√v̂ + ε)`.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdamState,
    lr: f64,
    hp: &AdamHyper,
) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), state.m.len());
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - hp.beta1.powi(t);
    let bc2 = 1.0 - hp.beta2.powi(t);
    for ((theta, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        assert_eq!(theta.len(), g.len());
        for i in 0..theta.len() {
            m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
            v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + hp.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut theta = vec![1.0, -2.0, 0.5];
        let grads = vec![0.0; 3];
        let mut state = AdamState::new(&[3]);
        adam_step(
            &mut [&mut theta],
            &[&grads],
            &mut state,
            1e-3,
            &AdamHyper::default(),
        );
        assert_eq!(theta, vec![1.0, -2.0, 0.5]);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With g = 1, m̂ = v̂ = 1, so Δθ = −lr/(1 + ε) ≈ −lr.
        let lr = 0.05;
        let mut theta = vec![0.0];
        let mut state = AdamState::new(&[1]);
        adam_step(
            &mut [&mut theta],
            &[&[1.0][..]],
            &mut state,
            lr,
            &AdamHyper::default(),
        );
        assert!((theta[0] + lr).abs() < 1e-6 * lr, "Δθ = {}", theta[0]);
    }

    #[test]
    fn constant_gradient_converges_to_lr_steps() {
        // m̂/√v̂ → 1 for a constant gradient, so |Δθ| approaches lr with
        // sign opposite the gradient.
        let lr = 1e-2;
        let g = -3.7;
        let mut theta = vec![0.0];
        let mut state = AdamState::new(&[1]);
        let mut prev = theta[0];
        let mut last_delta = 0.0;
        for _ in 0..500 {
            adam_step(
                &mut [&mut theta],
                &[&[g][..]],
                &mut state,
                lr,
                &AdamHyper::default(),
            );
            last_delta = theta[0] - prev;
            prev = theta[0];
        }
        assert!(last_delta > 0.0, "step sign must oppose the gradient");
        assert!((last_delta - lr).abs() < 0.01 * lr, "Δθ = {last_delta}");
    }
}
