//! AMSGrad: Adam with a running maximum of the second-moment estimate.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmsGradConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AmsGradConfig {
    fn default() -> Self {
        AmsGradConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AmsGrad {
    config: AmsGradConfig,
    first: Vec<f64>,
    second: Vec<f64>,
    second_max: Vec<f64>,
    step: u64,
}

impl AmsGrad {
    pub fn new(config: AmsGradConfig, num_params: usize) -> Self {
        AmsGrad {
            config,
            first: vec![0.0; num_params],
            second: vec![0.0; num_params],
            second_max: vec![0.0; num_params],
            step: 0,
        }
    }

    pub fn config(&self) -> AmsGradConfig {
        self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn second_moment_max(&self) -> &[f64] {
        &self.second_max
    }

    /// One update with bias-corrected moments; the denominator uses the
    /// largest second moment seen so far for each coordinate.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.first.len(), "parameter count mismatch");
        assert_eq!(grads.len(), self.first.len(), "gradient count mismatch");
        self.step += 1;
        let AmsGradConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = (1.0 - beta2.powi(t)).sqrt();
        let step_size = learning_rate / c1;
        for i in 0..params.len() {
            let g = grads[i];
            self.first[i] = beta1 * self.first[i] + (1.0 - beta1) * g;
            self.second[i] = beta2 * self.second[i] + (1.0 - beta2) * g * g;
            if self.second[i] > self.second_max[i] {
                self.second_max[i] = self.second[i];
            }
            let denom = self.second_max[i].sqrt() / c2 + epsilon;
            params[i] -= step_size * self.first[i] / denom;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut opt = AmsGrad::new(AmsGradConfig::default(), 3);
        let mut p = vec![0.5, -1.0, 2.0];
        opt.step(&mut p, &[0.0; 3]);
        assert_eq!(p, vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn first_step_closed_form() {
        // m_hat = g and sqrt(v_hat) = |g| after one step from zero state,
        // so the update is -lr * g / (|g| + eps).
        let cfg = AmsGradConfig::default();
        let g = [0.3, -2.0, 1e-3];
        let mut p = vec![0.0; 3];
        AmsGrad::new(cfg, 3).step(&mut p, &g);
        for (pi, gi) in p.iter().zip(&g) {
            let expected = -cfg.learning_rate * gi / (gi.abs() + cfg.epsilon);
            assert!((pi - expected).abs() < 1e-15, "{pi} vs {expected}");
            assert_eq!(pi.signum(), -gi.signum());
        }
    }

    #[test]
    fn constant_gradient_approaches_learning_rate_and_max_is_monotone() {
        let cfg = AmsGradConfig::default();
        let mut opt = AmsGrad::new(cfg, 1);
        let mut p = vec![0.0];
        let mut prev_max = 0.0;
        for _ in 0..2000 {
            let before = p[0];
            opt.step(&mut p, &[0.25]);
            let delta = before - p[0];
            assert!(delta > 0.0 && delta <= cfg.learning_rate * 1.0001);
            assert!(opt.second_moment_max()[0] >= prev_max);
            prev_max = opt.second_moment_max()[0];
        }
        let before = p[0];
        opt.step(&mut p, &[0.25]);
        assert!(((before - p[0]) - cfg.learning_rate).abs() < 1e-5);
    }

    #[test]
    fn max_second_moment_survives_small_gradients() {
        let mut opt = AmsGrad::new(AmsGradConfig::default(), 1);
        let mut p = vec![0.0];
        opt.step(&mut p, &[10.0]);
        let peak = opt.second_moment_max()[0];
        for _ in 0..50 {
            opt.step(&mut p, &[0.01]);
            assert!(opt.second_moment_max()[0] >= peak);
        }
    }
}
