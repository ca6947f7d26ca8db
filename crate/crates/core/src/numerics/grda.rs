//! Generalized regularized dual averaging for gate parameters.
//!
//! Each step solves
//!
//! ```text
//! alpha_{t+1} = argmin_a  a . (-alpha_0 + lr * sum_i grad_i) + g(t) |a|_1 + 0.5 |a|^2
//! g(t)        = c * lr^(1/2) * (t * lr)^mu
//! ```
//!
//! which separates per coordinate into a soft threshold of
//! `alpha_0 - lr * sum_i grad_i` at level `g(t)`. Coordinates whose dual
//! average falls inside the threshold are exactly zero.

use serde::{Deserialize, Serialize};

use crate::{AimError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrdaConfig {
    pub lr: f64,
    pub c: f64,
    pub mu: f64,
}

impl Default for GrdaConfig {
    fn default() -> Self {
        Self { lr: 0.01, c: 0.05, mu: 0.6 }
    }
}

impl GrdaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(AimError::Config(format!("grda learning rate must be positive, got {}", self.lr)));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(AimError::Config(format!("grda c must be non-negative, got {}", self.c)));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(AimError::Config(format!("grda mu must lie in (0,1), got {}", self.mu)));
        }
        Ok(())
    }
}

/// Initial values, the running `lr * sum(grad)` and the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrdaState {
    pub alpha0: Vec<f64>,
    pub accumulator: Vec<f64>,
    pub t: u64,
}

impl GrdaState {
    pub fn new(alpha0: Vec<f64>) -> Self {
        let n = alpha0.len();
        Self { alpha0, accumulator: vec![0.0; n], t: 0 }
    }
}

/// The L1 level `g(t, lr)`.
pub fn grda_threshold(t: u64, cfg: &GrdaConfig) -> f64 {
    cfg.c * cfg.lr.sqrt() * (t as f64 * cfg.lr).powf(cfg.mu)
}

#[inline]
pub fn soft_threshold(v: f64, level: f64) -> f64 {
    if v > level {
        v - level
    } else if v < -level {
        v + level
    } else {
        0.0
    }
}

/// One GRDA step; returns the new gate values. The state is left untouched
/// when the gradient is not finite or mis-shaped.
pub fn grda_step(state: &mut GrdaState, grad: &[f64], cfg: &GrdaConfig) -> Result<Vec<f64>> {
    if grad.len() != state.alpha0.len() {
        return Err(AimError::Shape(format!(
            "grda gradient has {} values, state has {}",
            grad.len(),
            state.alpha0.len()
        )));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(AimError::NonFinite("grda".into()));
    }
    for (acc, &g) in state.accumulator.iter_mut().zip(grad) {
        *acc += cfg.lr * g;
    }
    let level = grda_threshold(state.t, cfg);
    let out = state
        .alpha0
        .iter()
        .zip(&state.accumulator)
        .map(|(&a0, &acc)| soft_threshold(a0 - acc, level))
        .collect();
    state.t += 1;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn no_shrinkage_when_c_is_zero() {
        let cfg = GrdaConfig { lr: 0.1, c: 0.0, mu: 0.6 };
        let mut st = GrdaState::new(vec![0.5, -0.25]);
        let mut out = Vec::new();
        for _ in 0..5 {
            out = grda_step(&mut st, &[1.0, -2.0], &cfg).unwrap();
        }
        assert!((out[0] - (0.5 - 0.5)).abs() < 1e-12);
        assert!((out[1] - (-0.25 + 1.0)).abs() < 1e-12);
        assert_eq!(st.t, 5);
    }

    #[test]
    fn zero_start_zero_gradient_stays_zero() {
        let cfg = GrdaConfig::default();
        let mut st = GrdaState::new(vec![0.0; 4]);
        for _ in 0..100 {
            assert_eq!(grda_step(&mut st, &[0.0; 4], &cfg).unwrap(), vec![0.0; 4]);
        }
    }

    #[test]
    fn scalar_soft_threshold_values() {
        assert!((soft_threshold(0.3, 0.1) - 0.2).abs() < 1e-15);
        assert_eq!(soft_threshold(-0.05, 0.1), 0.0);
    }

    #[test]
    fn threshold_is_zero_at_first_step() {
        assert_eq!(grda_threshold(0, &GrdaConfig::default()), 0.0);
        let cfg = GrdaConfig { lr: 0.01, c: 0.05, mu: 0.6 };
        let expected = 0.05 * 0.1 * (0.01f64 * 100.0).powf(0.6);
        assert!((grda_threshold(100, &cfg) - expected).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_gradients() {
        let mut st = GrdaState::new(vec![1.0, 1.0]);
        let before = st.clone();
        assert!(grda_step(&mut st, &[f64::NAN, 0.0], &GrdaConfig::default()).is_err());
        assert!(grda_step(&mut st, &[0.0], &GrdaConfig::default()).is_err());
        assert_eq!(st, before);
    }

    proptest! {
        #[test]
        fn inside_threshold_is_exactly_zero(v in -5.0f64..5.0, g in 0.0f64..5.0) {
            let out = soft_threshold(v, g);
            if v.abs() <= g {
                prop_assert_eq!(out, 0.0);
            } else {
                prop_assert_eq!(out.signum(), v.signum());
            }
        }
    }
}
