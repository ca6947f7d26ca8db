//! Gated factorization models for click-through-rate prediction, with
//! differentiable search over feature interactions, interaction functions
//! and per-field embedding dimensions.
//!
//! The crate is organised bottom-up:
//!
//! * [`data`] loads multi-field categorical datasets and serves batches.
//! * [`numerics`] holds tensors, the parameter store, Adam, GRDA and the
//!   fixed-affine batch normalization unit.
//! * [`interactions`] implements the interaction functions and the
//!   candidate-pool combinatorics used to grow high-order interactions.
//! * [`model`] assembles the gated model with manual forward/backward passes.
//! * [`search`] runs the three-stage pipeline and builds the
//!   [`search::SearchArtifact`].
//! * [`eval`] provides AUC, log loss and the per-interaction statistics AUC.
//! * [`synth`] generates planted-interaction datasets with known ground truth.

pub mod data;
pub mod error;
pub mod eval;
pub mod interactions;
pub mod model;
pub mod numerics;
pub mod search;
pub mod synth;

pub use error::{AimError, Result};
