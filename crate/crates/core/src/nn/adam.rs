//! Adam optimizer with a staircase learning-rate decay.

use super::Scalar;

#[derive(Clone, Copy, Debug)]
pub struct AdamConfig {
    pub lr0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Staircase factor applied every `decay_every` completed steps.
    pub decay: f64,
    pub decay_every: u64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr0: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            decay: 0.95,
            decay_every: 2000,
        }
    }
}

/// First/second-moment accumulators plus the number of completed steps.
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            step: 0,
        }
    }
}

/// Staircase schedule: `lr0 * decay^floor(step / decay_every)`, evaluated at
/// the number of completed steps (so the first `decay_every` steps all use
/// `lr0`).
pub fn learning_rate(cfg: &AdamConfig, step: u64) -> f64 {
    cfg.lr0 * cfg.decay.powi((step / cfg.decay_every) as i32)
}

/// One Adam update of `theta` given gradient `grad`; bias correction uses the
/// 1-based step index.
pub fn adam_step<T: Scalar>(
    cfg: &AdamConfig,
    state: &mut AdamState<T>,
    theta: &mut [T],
    grad: &[T],
) {
    assert_eq!(theta.len(), grad.len());
    assert_eq!(theta.len(), state.m.len());
    let lr = learning_rate(cfg, state.step);
    let t = state.step + 1;
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let one = T::one();
    let c1 = T::from_f64(1.0 - cfg.beta1.powi(t as i32));
    let c2 = T::from_f64(1.0 - cfg.beta2.powi(t as i32));
    let lr_t = T::from_f64(lr);
    let eps = T::from_f64(cfg.eps);
    for i in 0..theta.len() {
        let g = grad[i];
        state.m[i] = b1 * state.m[i] + (one - b1) * g;
        state.v[i] = b2 * state.v[i] + (one - b2) * g * g;
        let mhat = state.m[i] / c1;
        let vhat = state.v[i] / c2;
        theta[i] -= lr_t * mhat / (vhat.sqrt() + eps);
    }
    state.step = t;
}
