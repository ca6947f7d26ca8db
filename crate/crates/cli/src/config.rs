use std::path::{Path, PathBuf};

use aim_core::data::{DataFormat, SplitFractions};
use aim_core::model::ModelConfig;
use aim_core::search::{RetrainSettings, SearchConfig, StageSettings};
use aim_core::AimError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: String,
    #[serde(default)]
    pub split: SplitFractions,
    #[serde(default)]
    pub split_seed: u64,
}

fn default_format() -> String {
    "svm".into()
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub top_k: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

/// A run configuration file. Relative paths resolve against the file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub search: SearchSection,
    #[serde(default)]
    pub stage1: StageSettings,
    #[serde(default = "default_stage2")]
    pub stage2: StageSettings,
    #[serde(default)]
    pub retrain: RetrainSettings,
    pub output: OutputSection,
}

fn default_stage2() -> StageSettings {
    SearchConfig::default().stage2
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, AimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AimError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| AimError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.data.path = base.join(&config.data.path);
        config.output.dir = base.join(&config.output.dir);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), AimError> {
        if !self.data.path.is_file() {
            return Err(AimError::Config(format!("dataset {} does not exist", self.data.path.display())));
        }
        self.format()?;
        self.data.split.validate()?;
        self.search_config().validate()
    }

    pub fn format(&self) -> Result<DataFormat, AimError> {
        self.data.format.parse()
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            model: self.model.clone(),
            stage1: self.stage1.clone(),
            stage2: self.stage2.clone(),
            retrain: self.retrain.clone(),
            top_k: self.search.top_k,
            seed: self.search.seed,
        }
    }

    pub fn stage_dir(&self, stage: &str) -> PathBuf {
        self.output.dir.join(stage)
    }

    pub fn artifact_path(&self) -> PathBuf {
        self.output.dir.join("artifact.json")
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.output.dir.join("metrics.jsonl")
    }
}
