use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }
}

/// Bias-corrected Adam update in place.
pub fn adam_step(value: &mut [f64], grad: &[f64], state: &mut AdamState, cfg: &AdamConfig) {
    state.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
    for (((x, &g), m), v) in value.iter_mut().zip(grad).zip(&mut state.m).zip(&mut state.v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *x -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_identity() {
        let mut x = vec![0.3, -1.2, 4.0];
        let before = x.clone();
        let mut st = AdamState::new(3);
        for _ in 0..10 {
            adam_step(&mut x, &[0.0; 3], &mut st, &AdamConfig::default());
        }
        assert_eq!(x, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m_hat = 1, v_hat = 1 at t = 1
        let mut x = vec![0.0];
        let mut st = AdamState::new(1);
        let cfg = AdamConfig { lr: 0.1, ..AdamConfig::default() };
        adam_step(&mut x, &[1.0], &mut st, &cfg);
        assert!((x[0] + 0.1).abs() < 1e-8, "{}", x[0]);
    }

    #[test]
    fn constant_gradient_moves_against_sign() {
        let mut x = vec![0.0, 0.0];
        let mut st = AdamState::new(2);
        for _ in 0..50 {
            adam_step(&mut x, &[2.5, -0.4], &mut st, &AdamConfig::default());
        }
        assert!(x[0] < 0.0 && x[1] > 0.0);
    }
}
