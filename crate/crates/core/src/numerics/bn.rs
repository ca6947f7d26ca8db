//! Batch normalization with scale fixed to 1 and shift fixed to 0.
//!
//! Train mode normalizes with the batch mean and the population (biased)
//! batch variance, then folds those into exponential running statistics.
//! Eval mode normalizes with the running statistics.

use serde::{Deserialize, Serialize};

use crate::{AimError, Result};

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BnMode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub batch_mean: f64,
    pub batch_std: f64,
    pub running_mean: f64,
    pub running_var: f64,
    pub eps: f64,
    pub momentum: f64,
}

impl Default for BatchNorm {
    fn default() -> Self {
        Self::new(BN_EPSILON, BN_MOMENTUM)
    }
}

/// Normalized outputs plus what the backward pass needs.
#[derive(Debug, Clone, PartialEq)]
pub struct BnCache {
    pub out: Vec<f64>,
    pub mean: f64,
    pub var: f64,
    pub inv_std: f64,
    pub mode: BnMode,
}

impl BatchNorm {
    pub fn new(eps: f64, momentum: f64) -> Self {
        Self { batch_mean: 0.0, batch_std: 1.0, running_mean: 0.0, running_var: 1.0, eps, momentum }
    }

    pub fn forward(&self, x: &[f64], mode: BnMode) -> Result<BnCache> {
        let (mean, var) = match mode {
            BnMode::Train => {
                if x.len() < 2 {
                    return Err(AimError::BatchTooSmall(x.len()));
                }
                let n = x.len() as f64;
                let mean = x.iter().sum::<f64>() / n;
                let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                (mean, var)
            }
            BnMode::Eval => (self.running_mean, self.running_var),
        };
        let inv_std = 1.0 / (var + self.eps).sqrt();
        let out = x.iter().map(|v| (v - mean) * inv_std).collect();
        Ok(BnCache { out, mean, var, inv_std, mode })
    }

    /// Folds one batch's statistics into the running estimates.
    pub fn update(&mut self, cache: &BnCache) {
        if cache.mode != BnMode::Train {
            return;
        }
        self.batch_mean = cache.mean;
        self.batch_std = cache.var.sqrt();
        self.running_mean = self.momentum * self.running_mean + (1.0 - self.momentum) * cache.mean;
        self.running_var = self.momentum * self.running_var + (1.0 - self.momentum) * cache.var;
    }

    /// Gradient with respect to the inputs given the output cotangent.
    pub fn backward(cache: &BnCache, dout: &[f64]) -> Vec<f64> {
        match cache.mode {
            BnMode::Eval => dout.iter().map(|d| d * cache.inv_std).collect(),
            BnMode::Train => {
                let n = dout.len() as f64;
                let mean_d = dout.iter().sum::<f64>() / n;
                let mean_dx = dout.iter().zip(&cache.out).map(|(d, xh)| d * xh).sum::<f64>() / n;
                dout.iter()
                    .zip(&cache.out)
                    .map(|(d, xh)| cache.inv_std * (d - mean_d - xh * mean_dx))
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalizes_small_batch() {
        let bn = BatchNorm::default();
        let c = bn.forward(&[1.0, 2.0, 3.0], BnMode::Train).unwrap();
        // mean 2, population variance 2/3
        let s = 1.0 / (2.0f64 / 3.0 + 1e-5).sqrt();
        let expected = [-s, 0.0, s];
        for (o, e) in c.out.iter().zip(expected) {
            assert!((o - e).abs() < 1e-12);
        }
        assert!((c.out[2] - 1.22474).abs() < 1e-5);
    }

    #[test]
    fn constant_batch_is_zero() {
        let c = BatchNorm::default().forward(&[5.0, 5.0, 5.0], BnMode::Train).unwrap();
        assert_eq!(c.out, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn eval_with_unit_running_stats_is_near_identity() {
        let bn = BatchNorm::default();
        let c = bn.forward(&[0.5, -2.0], BnMode::Eval).unwrap();
        assert!((c.out[0] - 0.5).abs() < 1e-5 && (c.out[1] + 2.0).abs() < 2e-5);
    }

    #[test]
    fn train_needs_two_values() {
        assert!(matches!(
            BatchNorm::default().forward(&[1.0], BnMode::Train),
            Err(AimError::BatchTooSmall(1))
        ));
        assert!(BatchNorm::default().forward(&[1.0], BnMode::Eval).is_ok());
    }

    #[test]
    fn running_stats_follow_momentum() {
        let mut bn = BatchNorm::default();
        let c = bn.forward(&[1.0, 3.0], BnMode::Train).unwrap();
        bn.update(&c);
        assert!((bn.running_mean - 0.2).abs() < 1e-12);
        assert!((bn.running_var - (0.9 + 0.1 * 1.0)).abs() < 1e-12);
        assert!((bn.batch_mean - 2.0).abs() < 1e-12);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let x = [0.3, -1.1, 2.0, 0.7, 1.5];
        let w = [0.2, -0.5, 1.0, 0.4, -0.9];
        let bn = BatchNorm::default();
        for mode in [BnMode::Train, BnMode::Eval] {
            let c = bn.forward(&x, mode).unwrap();
            let dx = BatchNorm::backward(&c, &w);
            let f = |x: &[f64]| -> f64 {
                bn.forward(x, mode).unwrap().out.iter().zip(&w).map(|(a, b)| a * b).sum()
            };
            for i in 0..x.len() {
                let h = 1e-5;
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let fd = (f(&xp) - f(&xm)) / (2.0 * h);
                assert!((fd - dx[i]).abs() <= 1e-4 * fd.abs().max(dx[i].abs()).max(1e-6));
            }
        }
    }

    proptest! {
        #[test]
        fn train_output_has_zero_mean_unit_variance(
            xs in prop::collection::vec(-100.0f64..100.0, 2..64)
        ) {
            let c = BatchNorm::default().forward(&xs, BnMode::Train).unwrap();
            let n = xs.len() as f64;
            let m = c.out.iter().sum::<f64>() / n;
            let v = c.out.iter().map(|o| (o - m) * (o - m)).sum::<f64>() / n;
            prop_assert!(m.abs() < 1e-10);
            prop_assert!(v <= 1.0 + 1e-12);
            let expected = c.var / (c.var + BN_EPSILON);
            prop_assert!((v - expected).abs() < 1e-9);
            if c.var >= 10.0 {
                prop_assert!(v >= 1.0 - 1e-6);
            }
        }
    }
}
