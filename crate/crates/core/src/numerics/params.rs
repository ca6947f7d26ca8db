use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::grda::{grda_step, GrdaConfig, GrdaState};
use super::tensor::Tensor;
use crate::{AimError, Result};

/// Which optimizer owns a parameter. Fixed at registration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerTag {
    Adam,
    Grda,
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    #[serde(skip_serializing, default)]
    grad: Option<Tensor>,
    tag: OptimizerTag,
    adam: Option<AdamState>,
    grda: Option<GrdaState>,
}

impl Parameter {
    pub fn tag(&self) -> OptimizerTag {
        self.tag
    }

    pub fn grad(&self) -> &[f64] {
        self.grad.as_ref().map(Tensor::as_slice).unwrap_or(&[])
    }

    pub fn grda_state(&self) -> Option<&GrdaState> {
        self.grda.as_ref()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub adam: AdamConfig,
    pub grda: GrdaConfig,
}

/// Named parameters with gradient buffers and per-parameter optimizer state.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParameterStore {
    params: Vec<Parameter>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, value: Tensor, tag: OptimizerTag) -> ParamId {
        let n = value.len();
        let grad = Some(Tensor::zeros(value.shape()));
        let (adam, grda) = match tag {
            OptimizerTag::Adam => (Some(AdamState::new(n)), None),
            OptimizerTag::Grda => (None, Some(GrdaState::new(value.as_slice().to_vec()))),
            OptimizerTag::Frozen => (None, None),
        };
        self.params.push(Parameter { name: name.into(), value, grad, tag, adam, grda });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        self.params[id.0].value.as_slice()
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [f64] {
        self.params[id.0].value.as_mut_slice()
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        self.params[id.0].grad()
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut [f64] {
        let p = &mut self.params[id.0];
        p.grad.get_or_insert_with(|| Tensor::zeros(p.value.shape())).as_mut_slice()
    }

    /// Value and gradient buffer of one parameter at once.
    pub fn value_and_grad_mut(&mut self, id: ParamId) -> (&[f64], &mut [f64]) {
        let p = &mut self.params[id.0];
        let grad = p.grad.get_or_insert_with(|| Tensor::zeros(p.value.shape())).as_mut_slice();
        (p.value.as_slice(), grad)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Number of scalar values held, optionally restricted to one optimizer.
    pub fn scalar_count(&self, tag: Option<OptimizerTag>) -> usize {
        self.params
            .iter()
            .filter(|p| tag.is_none_or(|t| p.tag == t))
            .map(|p| p.value.len())
            .sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            if let Some(g) = p.grad.as_mut() {
                g.fill(0.0);
            }
        }
    }

    /// Applies Adam or GRDA to every non-frozen parameter, then zeroes all
    /// gradients. Nothing is updated when any gradient is non-finite.
    pub fn step(&mut self, settings: &OptimizerSettings) -> Result<()> {
        if let Some(bad) = self
            .params
            .iter()
            .find(|p| p.tag != OptimizerTag::Frozen && p.grad.as_ref().is_some_and(|g| !g.all_finite()))
        {
            return Err(AimError::NonFinite(bad.name.clone()));
        }
        for p in &mut self.params {
            let Some(grad) = p.grad.as_ref() else { continue };
            match p.tag {
                OptimizerTag::Adam => {
                    let state = p.adam.get_or_insert_with(|| AdamState::new(p.value.len()));
                    adam_step(p.value.as_mut_slice(), grad.as_slice(), state, &settings.adam);
                }
                OptimizerTag::Grda => {
                    let state =
                        p.grda.get_or_insert_with(|| GrdaState::new(p.value.as_slice().to_vec()));
                    let next = grda_step(state, grad.as_slice(), &settings.grda)?;
                    p.value.as_mut_slice().copy_from_slice(&next);
                }
                OptimizerTag::Frozen => {}
            }
        }
        self.zero_grads();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grad_shape_follows_value() {
        let mut s = ParameterStore::new();
        let id = s.register("w", Tensor::zeros(&[2, 3]), OptimizerTag::Adam);
        assert_eq!(s.grad(id).len(), 6);
        assert_eq!(s.find("w"), Some(id));
    }

    #[test]
    fn step_dispatches_by_tag_and_zeroes_grads() {
        let mut s = ParameterStore::new();
        let a = s.register("a", Tensor::scalar(0.0), OptimizerTag::Adam);
        let g = s.register("g", Tensor::scalar(0.5), OptimizerTag::Grda);
        let f = s.register("f", Tensor::scalar(1.0), OptimizerTag::Frozen);
        for id in [a, g, f] {
            s.grad_mut(id)[0] = 1.0;
        }
        let settings = OptimizerSettings {
            adam: AdamConfig { lr: 0.1, ..Default::default() },
            grda: GrdaConfig { lr: 0.1, c: 0.0, mu: 0.5 },
        };
        s.step(&settings).unwrap();
        assert!((s.value(a)[0] + 0.1).abs() < 1e-6);
        assert!((s.value(g)[0] - 0.4).abs() < 1e-12);
        assert_eq!(s.value(f)[0], 1.0);
        assert!(s.iter().all(|(_, p)| p.grad().iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn non_finite_gradient_rejects_whole_step() {
        let mut s = ParameterStore::new();
        let a = s.register("a", Tensor::scalar(0.0), OptimizerTag::Adam);
        let b = s.register("b", Tensor::scalar(0.0), OptimizerTag::Adam);
        s.grad_mut(a)[0] = 1.0;
        s.grad_mut(b)[0] = f64::INFINITY;
        let err = s.step(&OptimizerSettings::default()).unwrap_err();
        assert!(matches!(err, AimError::NonFinite(ref n) if n == "b"));
        assert_eq!(s.value(a)[0], 0.0);
    }

    #[test]
    fn serde_round_trip_is_bit_exact() {
        let mut s = ParameterStore::new();
        let vals = vec![0.1, 1.0 / 3.0, -2.718281828459046e-7, 1e-300, 6.02214076e23];
        s.register("x", Tensor::from_vec(&[5], vals).unwrap(), OptimizerTag::Grda);
        let json = serde_json::to_string(&s).unwrap();
        let back: ParameterStore = serde_json::from_str(&json).unwrap();
        let id = ParamId(0);
        for (a, b) in s.value(id).iter().zip(back.value(id)) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(s.get(id).grda_state(), back.get(id).grda_state());
    }
}
