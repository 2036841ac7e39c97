//! ADAM optimiser and the learning-rate schedule used for training.

use crate::error::{invalid_arg, Result};

use super::layers::Param;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment estimates, one vector per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &[&Param], config: AdamConfig) -> Self {
        Self {
            config,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            step: 0,
        }
    }
}

/// One bias-corrected ADAM update of `params` in place.
pub fn adam_step(params: &mut [&mut Param], grads: &[Vec<f64>], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(invalid_arg(format!("{} parameter tensors, {} gradients, {} optimiser slots", params.len(), grads.len(), state.m.len())));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() || p.len() != state.m[i].len() {
            return Err(invalid_arg(format!("tensor {i}: parameter has {} values, gradient {}", p.len(), g.len())));
        }
    }
    if !(lr.is_finite() && lr >= 0.0) {
        return Err(invalid_arg(format!("learning rate must be finite and non-negative, got {lr}")));
    }
    state.step += 1;
    let AdamConfig { beta1, beta2, eps } = state.config;
    let c1 = 1.0 - beta1.powi(state.step as i32);
    let c2 = 1.0 - beta2.powi(state.step as i32);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for j in 0..g.len() {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
            let mh = m[j] / c1;
            let vh = v[j] / c2;
            p.value[j] -= lr * mh / (vh.sqrt() + eps);
        }
    }
    Ok(())
}

/// Constant learning rate for `flat_epochs`, then a linear decay that reaches
/// `base * final_factor` at `end_epoch` and stays there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub base: f64,
    pub flat_epochs: usize,
    pub end_epoch: usize,
    pub final_factor: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self { base: 0.001, flat_epochs: 50, end_epoch: 100, final_factor: 0.01 }
    }
}

impl LrSchedule {
    /// Learning rate for the 1-based `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if epoch <= self.flat_epochs || self.end_epoch <= self.flat_epochs {
            return self.base;
        }
        let frac = ((epoch - self.flat_epochs) as f64 / (self.end_epoch - self.flat_epochs) as f64).min(1.0);
        self.base * (1.0 - frac * (1.0 - self.final_factor))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_points() {
        let s = LrSchedule::default();
        assert_eq!(s.lr_at(0), 0.001);
        assert_eq!(s.lr_at(50), 0.001);
        assert!((s.lr_at(75) - 0.001 * (1.0 - 0.5 * 0.99)).abs() < 1e-15);
        assert!((s.lr_at(100) - 1e-5).abs() < 1e-15);
        assert!((s.lr_at(150) - 1e-5).abs() < 1e-15);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // With bias correction the first update is lr * sign(g) (up to eps).
        let mut p = Param::filled(&[3], 1.0);
        let mut st = AdamState::new(&[&p], AdamConfig::default());
        let g = vec![vec![0.5, -2.0, 0.0]];
        adam_step(&mut [&mut p], &g, &mut st, 0.1).unwrap();
        assert!((p.value[0] - 0.9).abs() < 1e-6);
        assert!((p.value[1] - 1.1).abs() < 1e-6);
        assert_eq!(p.value[2], 1.0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = Param::filled(&[3], 1.0);
        let mut st = AdamState::new(&[&p], AdamConfig::default());
        assert!(adam_step(&mut [&mut p], &[vec![0.0; 2]], &mut st, 0.1).is_err());
        assert!(adam_step(&mut [&mut p], &[], &mut st, 0.1).is_err());
    }
}
