use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update at step `t >= 1`, in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    cfg: &AdamConfig,
    lr: f64,
    t: u64,
) {
    debug_assert!(t >= 1);
    debug_assert!(params.len() == grads.len() && m.len() == grads.len() && v.len() == grads.len());
    let c1 = 1.0 - cfg.beta1.powi(t as i32);
    let c2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(params: usize, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![0.0; params],
            v: vec![0.0; params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Step with the configured learning rate.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        let lr = self.config.lr;
        self.step_with_lr(params, grads, lr);
    }

    pub fn step_with_lr(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        adam_step(
            params,
            grads,
            &mut self.m,
            &mut self.v,
            &self.config,
            lr,
            self.t,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = vec![1.0, -2.0, 0.5];
        let mut opt = Adam::new(3, AdamConfig::default());
        for _ in 0..10 {
            opt.step(&mut p, &[0.0; 3]);
        }
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn constant_gradient_steps_approach_lr() {
        let cfg = AdamConfig::default();
        let mut opt = Adam::new(2, cfg);
        let mut p = vec![0.0, 0.0];
        let grads = [0.37, -2.5];
        let mut last = p.clone();
        for _ in 0..5000 {
            last.clone_from(&p);
            opt.step(&mut p, &grads);
        }
        // m_hat = g and v_hat = g^2 exactly under bias correction
        for i in 0..2 {
            let step = p[i] - last[i];
            assert!(
                (step + cfg.lr * grads[i].signum()).abs() < 1e-3 * cfg.lr,
                "{step}"
            );
        }
    }

    #[test]
    fn default_learning_rate() {
        assert_eq!(AdamConfig::default().lr, 3e-4);
    }
}
