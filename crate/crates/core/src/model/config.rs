use serde::{Deserialize, Serialize};

use crate::interactions::IfKind;
use crate::numerics::OptimizerTag;
use crate::{AimError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    /// `sigmoid(l)`
    Fm,
    /// `sigmoid(l + MLP(E))`
    DeepFm,
    /// `sigmoid(MLP([E, gated interaction outputs]))`
    Ipnn,
}

impl HeadKind {
    pub fn has_mlp(self) -> bool {
        !matches!(self, HeadKind::Fm)
    }
}

impl std::str::FromStr for HeadKind {
    type Err = AimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fm" => Ok(HeadKind::Fm),
            "deepfm" => Ok(HeadKind::DeepFm),
            "ipnn" => Ok(HeadKind::Ipnn),
            other => Err(AimError::Config(format!("unknown head `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    /// One table per (field, interaction function).
    FunctionWise,
    /// One table per field shared by every interaction function.
    Shared,
}

impl std::str::FromStr for EmbeddingMode {
    type Err = AimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "function_wise" => Ok(EmbeddingMode::FunctionWise),
            "shared" => Ok(EmbeddingMode::Shared),
            other => Err(AimError::Config(format!("unknown embedding mode `{other}`"))),
        }
    }
}

/// Which optimizer trains each family of gates. `beta: None` means the
/// model has no dimension gates at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateModes {
    pub alpha: OptimizerTag,
    pub beta: Option<OptimizerTag>,
}

impl GateModes {
    /// Interaction/function search: alpha under GRDA, no dimension gates.
    pub const SEARCH_INTERACTIONS: GateModes = GateModes { alpha: OptimizerTag::Grda, beta: None };
    /// Dimension search: beta under GRDA, alpha trained as a weight.
    pub const SEARCH_EMBED: GateModes =
        GateModes { alpha: OptimizerTag::Adam, beta: Some(OptimizerTag::Grda) };
    /// Re-training: every surviving parameter under Adam.
    pub const RETRAIN: GateModes = GateModes { alpha: OptimizerTag::Adam, beta: None };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub head: HeadKind,
    pub max_order: usize,
    pub if_kinds: Vec<IfKind>,
    pub embed_dim: usize,
    /// Hidden widths; the output layer of width 1 is implied.
    pub mlp_widths: Vec<usize>,
    pub embedding_mode: EmbeddingMode,
    pub batch_norm: bool,
    pub gates: GateModes,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            head: HeadKind::Fm,
            max_order: 2,
            if_kinds: IfKind::DEFAULT_SET.to_vec(),
            embed_dim: 40,
            mlp_widths: vec![700; 5],
            embedding_mode: EmbeddingMode::FunctionWise,
            batch_norm: true,
            gates: GateModes::SEARCH_INTERACTIONS,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_order < 2 {
            return Err(AimError::Config(format!("max order must be at least 2, got {}", self.max_order)));
        }
        if self.embed_dim == 0 {
            return Err(AimError::Config("embedding size must be positive".into()));
        }
        if self.if_kinds.is_empty() {
            return Err(AimError::Config("at least one interaction function is required".into()));
        }
        for (i, k) in self.if_kinds.iter().enumerate() {
            if self.if_kinds[..i].contains(k) {
                return Err(AimError::Config(format!("interaction function {k} listed twice")));
            }
        }
        if self.head.has_mlp() && self.mlp_widths.is_empty() {
            return Err(AimError::Config(format!("{:?} head needs MLP widths", self.head)));
        }
        if self.mlp_widths.contains(&0) {
            return Err(AimError::Config("MLP widths must be positive".into()));
        }
        Ok(())
    }

    pub fn table_slots(&self) -> usize {
        match self.embedding_mode {
            EmbeddingMode::FunctionWise => self.if_kinds.len(),
            EmbeddingMode::Shared => 1,
        }
    }

    /// Embedding table slot an interaction function reads from.
    pub fn slot_of(&self, kind: IfKind) -> Option<usize> {
        match self.embedding_mode {
            EmbeddingMode::FunctionWise => self.if_kinds.iter().position(|k| *k == kind),
            EmbeddingMode::Shared => self.if_kinds.contains(&kind).then_some(0),
        }
    }
}
