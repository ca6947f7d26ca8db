//! Dense numerics: tensors, the parameter store, optimizers, batch norm and
//! the small set of differentiable ops the models need.

mod adam;
mod bn;
mod grda;
pub mod ops;
mod params;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use bn::{BatchNorm, BnCache, BnMode, BN_EPSILON, BN_MOMENTUM};
pub use grda::{grda_step, grda_threshold, soft_threshold, GrdaConfig, GrdaState};
pub use params::{OptimizerSettings, OptimizerTag, ParamId, Parameter, ParameterStore};
pub use tensor::Tensor;
