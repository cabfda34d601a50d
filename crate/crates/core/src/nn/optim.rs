//! Adaptive-moment optimizer with bias correction.

use std::collections::BTreeMap;

use super::tensor::ParamVisit;

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Per-element first/second moment update with bias correction.
pub fn adam_update(
    value: &mut [f64],
    grad: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    cfg: &AdamConfig,
) {
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..value.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        let mhat = m[i] / bc1;
        let vhat = v[i] / bc2;
        value[i] -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
    }
}

/// Optimizer state keyed by parameter name, built lazily on first step.
#[derive(Debug, Default)]
pub struct Adam {
    pub cfg: AdamConfig,
    t: u64,
    state: BTreeMap<String, (Vec<f64>, Vec<f64>)>,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Adam { cfg, t: 0, state: BTreeMap::new() }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update over every parameter of `model` using its accumulated
    /// gradients. Gradients are not cleared here.
    pub fn step<M: ParamVisit + ?Sized>(&mut self, model: &mut M) {
        self.t += 1;
        let t = self.t;
        let cfg = self.cfg;
        let state = &mut self.state;
        model.visit_params("", &mut |name, value, grad| {
            let entry = state
                .entry(name.to_string())
                .or_insert_with(|| (vec![0.0; value.numel()], vec![0.0; value.numel()]));
            adam_update(value.data_mut(), grad.data(), &mut entry.0, &mut entry.1, t, &cfg);
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let cfg = AdamConfig::default();
        let mut value = vec![1.5, -0.25];
        let mut m = vec![0.0; 2];
        let mut v = vec![0.0; 2];
        adam_update(&mut value, &[0.0, 0.0], &mut m, &mut v, 1, &cfg);
        assert_eq!(value, vec![1.5, -0.25]);
    }

    #[test]
    fn one_step_on_quadratic_decreases_it() {
        let cfg = AdamConfig::default();
        let mut w = vec![1.0];
        let mut m = vec![0.0];
        let mut v = vec![0.0];
        let f = |w: f64| w * w;
        let before = f(w[0]);
        let grad = [2.0 * w[0]];
        adam_update(&mut w, &grad, &mut m, &mut v, 1, &cfg);
        assert!(f(w[0]) < before);
    }
}
