//! Adam and the cosine-annealing-with-warm-restarts learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Adam constants; the learning rate itself comes from the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Bias-corrected Adam state for a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(config: AdamConfig, parameter_count: usize) -> Self {
        Self { config, m: vec![0.0; parameter_count], v: vec![0.0; parameter_count], step: 0 }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Structural(format!(
                "Adam state holds {} parameters, got {} parameters and {} gradients",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        let AdamConfig { beta1, beta2, epsilon } = self.config;
        self.step += 1;
        let c1 = 1.0 - beta1.powi(self.step);
        let c2 = 1.0 - beta2.powi(self.step);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// Cosine annealing with warm restarts: cycles of `T_0, T_0 T_mult, ...`
/// epochs, each decaying from `lr_base` to `lr_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CawrSchedule {
    pub lr_base: f64,
    pub lr_min: f64,
    pub t0: usize,
    pub t_mult: usize,
}

impl Default for CawrSchedule {
    fn default() -> Self {
        Self { lr_base: 1e-3, lr_min: 1e-6, t0: 50, t_mult: 2 }
    }
}

impl CawrSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.t0 == 0 || self.t_mult == 0 {
            return Err(Error::domain("scheduler T0 and T_mult must be at least 1"));
        }
        if !(self.lr_base > 0.0 && self.lr_min >= 0.0 && self.lr_min <= self.lr_base) {
            return Err(Error::domain(format!(
                "scheduler needs 0 <= lr_min <= lr_base with lr_base > 0, got lr_min {} and lr_base {}",
                self.lr_min, self.lr_base
            )));
        }
        Ok(())
    }

    /// Learning rate after `elapsed` (possibly fractional) epochs since the start.
    pub fn lr_at(&self, elapsed: f64) -> f64 {
        let mut t_cur = elapsed.max(0.0);
        let mut t_i = self.t0 as f64;
        while t_cur >= t_i {
            t_cur -= t_i;
            t_i *= self.t_mult as f64;
        }
        self.lr_min + (self.lr_base - self.lr_min) * (1.0 + (std::f64::consts::PI * t_cur / t_i).cos()) / 2.0
    }

    /// Learning rate for the 1-based `epoch`.
    pub fn lr(&self, epoch: usize) -> f64 {
        self.lr_at(epoch.saturating_sub(1) as f64)
    }
}

/// Learning rate for the 1-based `epoch` under `schedule`.
pub fn cawr_lr(epoch: usize, schedule: &CawrSchedule) -> f64 {
    schedule.lr(epoch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_the_learning_rate_against_the_gradient_sign() {
        let mut adam = Adam::new(AdamConfig::default(), 3);
        let mut p = vec![1.0, 1.0, 1.0];
        adam.step(&mut p, &[0.3, -2.0, 20.0], 1e-3).unwrap();
        assert!((p[0] - (1.0 - 1e-3)).abs() < 1e-10);
        assert!((p[1] - (1.0 + 1e-3)).abs() < 1e-10);
        assert!((p[2] - (1.0 - 1e-3)).abs() < 1e-10);
        // Scale invariance on the first step: g and 10 g move equally.
        let mut adam = Adam::new(AdamConfig::default(), 2);
        let mut q = vec![0.0, 0.0];
        adam.step(&mut q, &[0.7, 7.0], 0.01).unwrap();
        // Equal up to the epsilon term, which is of order lr * eps / |g|.
        assert!((q[0] - q[1]).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut adam = Adam::new(AdamConfig::default(), 2);
        let mut p = vec![0.25, -4.0];
        for _ in 0..100 {
            adam.step(&mut p, &[0.0, 0.0], 1e-2).unwrap();
        }
        assert_eq!(p, vec![0.25, -4.0]);
    }

    #[test]
    fn schedule_hits_base_min_and_midpoint() {
        let s = CawrSchedule::default();
        assert_eq!(s.lr(1), s.lr_base);
        assert_eq!(s.lr(51), s.lr_base);
        assert_eq!(s.lr(151), s.lr_base);
        assert!((s.lr(26) - (s.lr_base + s.lr_min) / 2.0).abs() < 1e-15);
        assert!((s.lr(101) - (s.lr_base + s.lr_min) / 2.0).abs() < 1e-15);
        assert!((s.lr_at(50.0 - 1e-9) - s.lr_min).abs() < 1e-15);
        for e in 1..400 {
            let lr = cawr_lr(e, &s);
            assert!(lr >= s.lr_min && lr <= s.lr_base);
        }
    }
}
