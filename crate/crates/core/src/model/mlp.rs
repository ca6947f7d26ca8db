use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::numerics::{ops, OptimizerTag, ParamId, ParameterStore, Tensor};
use crate::Result;

/// Fully connected relu layers ending in one linear output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub input_width: usize,
    pub layers: Vec<(ParamId, ParamId)>,
    widths: Vec<usize>,
}

/// Per-instance activations, input included.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpCache {
    pub activations: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn new(
        store: &mut ParameterStore,
        input_width: usize,
        hidden: &[usize],
        rng: &mut impl Rng,
    ) -> Self {
        let mut widths = vec![input_width];
        widths.extend_from_slice(hidden);
        widths.push(1);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for (l, pair) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            // Glorot uniform
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..=limit)).collect();
            let w = store.register(
                format!("mlp.{l}.weight"),
                Tensor::from_vec(&[fan_out, fan_in], w).expect("sized above"),
                OptimizerTag::Adam,
            );
            let b = store.register(format!("mlp.{l}.bias"), Tensor::zeros(&[fan_out]), OptimizerTag::Adam);
            layers.push((w, b));
        }
        Self { input_width, layers, widths }
    }

    pub fn forward(&self, store: &ParameterStore, input: Vec<f64>) -> Result<(f64, MlpCache)> {
        let mut activations = vec![input];
        let last = self.layers.len() - 1;
        for (l, &(w, b)) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; self.widths[l + 1]];
            ops::linear(store.value(w), store.value(b), &activations[l], &mut out)?;
            if l < last {
                ops::relu(&mut out);
            }
            activations.push(out);
        }
        let y = activations[self.layers.len()][0];
        Ok((y, MlpCache { activations }))
    }

    /// Accumulates weight gradients and returns the gradient of the input.
    pub fn backward(&self, store: &mut ParameterStore, cache: &MlpCache, dout: f64) -> Result<Vec<f64>> {
        let mut dy = vec![dout];
        for l in (0..self.layers.len()).rev() {
            let (w, b) = self.layers[l];
            let x = &cache.activations[l];
            let mut dx = vec![0.0; x.len()];
            let mut db = vec![0.0; dy.len()];
            {
                let (w_val, w_grad) = store.value_and_grad_mut(w);
                ops::linear_backward(w_val, x, &dy, w_grad, &mut db, &mut dx)?;
            }
            for (g, d) in store.grad_mut(b).iter_mut().zip(&db) {
                *g += d;
            }
            if l > 0 {
                ops::relu_backward(&cache.activations[l], &mut dx);
            }
            dy = dx;
        }
        Ok(dy)
    }

    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|p| p[0] * p[1] + p[1]).sum()
    }
}
