//! The three-stage pipeline: interaction/function search, embedding
//! dimension search, and re-training on the selected architecture.
//!
//! Stage 1 gates every (tuple, function) pair with GRDA-trained `alpha'`,
//! growing higher orders from the strongest survivors of the order below.
//! Stage 2 rebuilds a model over the survivors and gates embedding
//! dimensions with GRDA-trained `beta`. Stage 3 allocates compact embeddings
//! and trains everything with Adam.

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{Dataset, FieldSchema, Instance, SplitTag};
use crate::eval::{evaluate, MetricReport};
use crate::interactions::{combine, enumerate_second_order, top_k_by_alpha, IfKind, InteractionTuple};
use crate::model::{FieldLayout, GateModes, HeadKind, Model, ModelConfig};
use crate::numerics::{AdamConfig, GrdaConfig, OptimizerSettings};
use crate::{AimError, Result};

/// Training budget and optimizer settings for one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub grda: GrdaConfig,
}

impl Default for StageSettings {
    fn default() -> Self {
        Self { epochs: 1, batch_size: 256, adam: AdamConfig::default(), grda: GrdaConfig::default() }
    }
}

impl StageSettings {
    fn optimizers(&self) -> OptimizerSettings {
        OptimizerSettings { adam: self.adam, grda: self.grda }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(AimError::Config("batch size must be at least 2".into()));
        }
        self.grda.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub head: HeadKind,
    /// Hidden widths of the re-train MLP; the search model's widths if absent.
    pub mlp_widths: Option<Vec<usize>>,
}

impl Default for RetrainSettings {
    fn default() -> Self {
        Self { epochs: 1, batch_size: 256, adam: AdamConfig::default(), head: HeadKind::DeepFm, mlp_widths: None }
    }
}

impl RetrainSettings {
    pub fn stage(&self) -> StageSettings {
        StageSettings { epochs: self.epochs, batch_size: self.batch_size, adam: self.adam, grda: GrdaConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub model: ModelConfig,
    pub stage1: StageSettings,
    pub stage2: StageSettings,
    pub retrain: RetrainSettings,
    /// Survivors of order `p - 1` that seed order `p`; `floor(n / 2)` if absent.
    pub top_k: Option<usize>,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            stage1: StageSettings::default(),
            stage2: StageSettings {
                grda: GrdaConfig { lr: 0.05, c: 0.7, mu: 0.6 },
                ..StageSettings::default()
            },
            retrain: RetrainSettings::default(),
            top_k: None,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.stage1.validate()?;
        self.stage2.validate()?;
        self.retrain.stage().validate()?;
        if self.model.head == HeadKind::Ipnn && self.model.max_order > 2 {
            return Err(AimError::Config(
                "an ipnn search head cannot grow higher-order terms; search with fm or deepfm".into(),
            ));
        }
        self.retrain_model_config().validate()
    }

    /// Short stable digest of the configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&json)[..16])
    }

    pub fn retrain_model_config(&self) -> ModelConfig {
        ModelConfig {
            head: self.retrain.head,
            mlp_widths: self.retrain.mlp_widths.clone().unwrap_or_else(|| self.model.mlp_widths.clone()),
            gates: GateModes::RETRAIN,
            ..self.model.clone()
        }
    }

    fn top_k(&self, n: usize) -> usize {
        self.top_k.unwrap_or(n / 2)
    }
}

/// One logged epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stage: String,
    pub epoch: usize,
    pub train_loss: f64,
    pub nonzero_gates: usize,
    pub valid: Option<MetricReport>,
}

/// Candidate and survivor counts for one interaction order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub order: usize,
    pub candidates: usize,
    pub gates: usize,
    pub surviving_tuples: usize,
    pub surviving_pairs: usize,
    pub fi_ratio: f64,
}

/// A surviving (tuple, function) pair. Serialized with 1-based fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedPair {
    pub fields: InteractionTuple,
    #[serde(rename = "if")]
    pub kind: IfKind,
    pub alpha: f64,
}

/// Retained embedding dimensions of one field, 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDims {
    pub index: usize,
    pub d_i: usize,
    pub phi: Vec<usize>,
    pub map: Vec<usize>,
}

impl FieldDims {
    /// Keeps the positions whose gate is nonzero.
    pub fn from_gates(index: usize, beta: &[f64]) -> Self {
        let phi: Vec<usize> = beta.iter().enumerate().filter(|(_, b)| **b != 0.0).map(|(j, _)| j + 1).collect();
        Self { index, d_i: phi.len(), map: phi.clone(), phi }
    }

    pub fn full(index: usize, d: usize) -> Self {
        let phi: Vec<usize> = (1..=d).collect();
        Self { index, d_i: d, map: phi.clone(), phi }
    }

    pub fn layout(&self, d: usize) -> Result<FieldLayout> {
        FieldLayout::new(self.map.iter().map(|p| p - 1).collect(), d)
    }

    /// Compact position (1-based) of an original position, if retained.
    pub fn compact_position(&self, original: usize) -> Option<usize> {
        self.map.binary_search(&original).ok().map(|c| c + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEpochs {
    pub stage1: usize,
    pub stage2: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub embed_dim: usize,
    pub stage_epochs: StageEpochs,
}

/// The searched architecture: surviving pairs and per-field dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchArtifact {
    pub schema_hash: String,
    pub pairs: Vec<SelectedPair>,
    pub fields: Vec<FieldDims>,
    pub provenance: Provenance,
}

impl SearchArtifact {
    /// Keeps every pair of order 2 and every dimension.
    pub fn identity(schema: &FieldSchema, config: &ModelConfig) -> Self {
        let alpha = Model::default_alpha(config);
        let pairs = enumerate_second_order(schema.field_count())
            .into_iter()
            .flat_map(|t| config.if_kinds.iter().map(move |&kind| SelectedPair { fields: t.clone(), kind, alpha }))
            .collect();
        Self {
            schema_hash: schema.hash(),
            pairs,
            fields: (1..=schema.field_count()).map(|i| FieldDims::full(i, config.embed_dim)).collect(),
            provenance: Provenance {
                config_hash: String::new(),
                seed: 0,
                embed_dim: config.embed_dim,
                stage_epochs: StageEpochs { stage1: 0, stage2: 0 },
            },
        }
    }

    pub fn validate(&self, schema: &FieldSchema) -> Result<()> {
        if self.schema_hash != schema.hash() {
            return Err(AimError::Validation(format!(
                "artifact schema {} does not match dataset schema {}",
                self.schema_hash,
                schema.hash()
            )));
        }
        let n = schema.field_count();
        if self.fields.len() != n {
            return Err(AimError::Validation(format!("artifact has {} fields, dataset {n}", self.fields.len())));
        }
        let d = self.provenance.embed_dim;
        for (i, f) in self.fields.iter().enumerate() {
            let ok = f.index == i + 1
                && f.d_i == f.phi.len()
                && f.phi == f.map
                && f.map.windows(2).all(|w| w[0] < w[1])
                && f.map.iter().all(|&p| (1..=d).contains(&p));
            if !ok {
                return Err(AimError::Validation(format!("inconsistent dimensions for field {}", i + 1)));
            }
        }
        for p in &self.pairs {
            if p.alpha == 0.0 || !p.alpha.is_finite() {
                return Err(AimError::Validation(format!("pair {} {} has gate {}", p.fields, p.kind, p.alpha)));
            }
            if p.fields.fields().iter().any(|&f| f >= n) {
                return Err(AimError::Validation(format!("pair {} references a missing field", p.fields)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Orders by |alpha'| descending, then tuple, then function.
pub fn sort_pairs(pairs: &mut [SelectedPair]) {
    pairs.sort_by(|a, b| {
        b.alpha
            .abs()
            .total_cmp(&a.alpha.abs())
            .then_with(|| a.fields.cmp(&b.fields))
            .then_with(|| a.kind.cmp(&b.kind))
    });
}

#[derive(Debug)]
pub struct Stage1Output {
    pub model: Model,
    pub orders: Vec<OrderReport>,
    /// Pairs with nonzero gates, sorted by |alpha'| descending.
    pub selected: Vec<SelectedPair>,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug)]
pub struct Stage2Output {
    pub model: Model,
    pub fields: Vec<FieldDims>,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug)]
pub struct Stage3Output {
    /// Snapshot with the best validation loss (the last epoch without a validation split).
    pub model: Model,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
    pub dropped_pairs: Vec<SelectedPair>,
    pub param_count: usize,
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub stage1: Stage1Output,
    pub stage2: Stage2Output,
    pub artifact: SearchArtifact,
    pub stage3: Stage3Output,
}

fn epoch_seed(seed: u64, stage: u64, epoch: usize) -> u64 {
    seed ^ stage.wrapping_mul(0xA24B_AED4_963E_E407) ^ (epoch as u64 + 1).wrapping_mul(0x9FB2_1C65_1E98_DF25)
}

fn train_epoch(model: &mut Model, dataset: &Dataset, settings: &StageSettings, seed: u64) -> Result<f64> {
    let optimizers = settings.optimizers();
    let mut total = 0.0;
    let mut seen = 0usize;
    for idx in dataset.batches(SplitTag::Train, settings.batch_size, seed)? {
        if idx.len() < 2 {
            debug!("skipping trailing batch of {}", idx.len());
            continue;
        }
        let batch: Vec<&Instance> = idx.iter().map(|&i| &dataset.instances[i]).collect();
        total += model.train_step(&batch, &optimizers)? * idx.len() as f64;
        seen += idx.len();
    }
    if seen == 0 {
        return Err(AimError::Empty);
    }
    Ok(total / seen as f64)
}

fn validation_report(model: &Model, dataset: &Dataset, batch_size: usize) -> Result<Option<MetricReport>> {
    if dataset.split_len(SplitTag::Valid) == 0 {
        return Ok(None);
    }
    match evaluate(model, dataset, SplitTag::Valid, batch_size) {
        Ok(r) => Ok(Some(r)),
        Err(AimError::UndefinedAuc) => Ok(None),
        Err(e) => Err(e),
    }
}

fn nonzero_alpha(model: &Model) -> usize {
    (0..model.terms().len()).filter(|&t| model.alpha_value(t) != 0.0).count()
}

fn nonzero_beta(model: &Model) -> usize {
    (0..model.schema().field_count())
        .filter_map(|f| model.beta(f))
        .map(|b| model.store().value(b).iter().filter(|v| **v != 0.0).count())
        .sum()
}

fn check_schema(config: &SearchConfig, dataset: &Dataset) -> Result<()> {
    config.validate()?;
    if dataset.split_len(SplitTag::Train) == 0 {
        return Err(AimError::Empty);
    }
    Ok(())
}

/// Pairs of `tuples` x every configured function able to model them.
fn gated_terms(tuples: &[InteractionTuple], config: &ModelConfig) -> Vec<(InteractionTuple, IfKind, f64)> {
    let alpha = Model::default_alpha(config);
    tuples
        .iter()
        .flat_map(|t| {
            config
                .if_kinds
                .iter()
                .filter(|k| k.supports_order(t.order()))
                .map(move |&k| (t.clone(), k, alpha))
        })
        .collect()
}

/// Largest |alpha'| per tuple of the given order, nonzero tuples only.
fn tuple_strengths(model: &Model, order: usize) -> Vec<(InteractionTuple, f64)> {
    let mut out: Vec<(InteractionTuple, f64)> = Vec::new();
    for (t, term) in model.terms().iter().enumerate() {
        if term.tuple.order() != order {
            continue;
        }
        let a = model.alpha_value(t).abs();
        match out.iter_mut().find(|(tuple, _)| *tuple == term.tuple) {
            Some(entry) => entry.1 = entry.1.max(a),
            None => out.push((term.tuple.clone(), a)),
        }
    }
    out.retain(|(_, a)| *a != 0.0);
    out
}

fn selected_pairs(model: &Model) -> Vec<SelectedPair> {
    let mut pairs: Vec<SelectedPair> = model
        .terms()
        .iter()
        .enumerate()
        .filter(|(t, _)| model.alpha_value(*t) != 0.0)
        .map(|(t, term)| SelectedPair { fields: term.tuple.clone(), kind: term.kind, alpha: model.alpha_value(t) })
        .collect();
    sort_pairs(&mut pairs);
    pairs
}

/// Interaction and function search.
pub fn run_stage1(dataset: &Dataset, config: &SearchConfig) -> Result<Stage1Output> {
    check_schema(config, dataset)?;
    let n = dataset.schema.field_count();
    let model_config = ModelConfig { gates: GateModes::SEARCH_INTERACTIONS, ..config.model.clone() };
    let second = enumerate_second_order(n);
    let terms = gated_terms(&second, &model_config);
    let mut model = Model::new(model_config.clone(), dataset.schema.clone(), None, &terms, config.seed)?;
    let mut candidates = vec![(2, second.len(), terms.len())];
    let singles: Vec<usize> = (0..n).collect();
    let k = config.top_k(n);
    let mut history = Vec::new();
    let mut epoch = 0;
    for order in 2..=model_config.max_order {
        if order > 2 {
            let strengths = tuple_strengths(&model, order - 1);
            let top = top_k_by_alpha(&strengths, k);
            let pool = combine(&top, &singles);
            let new_terms = gated_terms(&pool, &model_config);
            info!("order {order}: {} candidates from {} parents", pool.len(), top.len());
            candidates.push((order, pool.len(), new_terms.len()));
            if new_terms.is_empty() {
                continue;
            }
            model.add_terms(&new_terms)?;
        }
        for _ in 0..config.stage1.epochs {
            let loss = train_epoch(&mut model, dataset, &config.stage1, epoch_seed(config.seed, 1, epoch))?;
            let record = EpochRecord {
                stage: "search_interactions".into(),
                epoch,
                train_loss: loss,
                nonzero_gates: nonzero_alpha(&model),
                valid: validation_report(&model, dataset, config.stage1.batch_size)?,
            };
            info!("stage 1 epoch {epoch}: loss {loss:.6}, {} open gates", record.nonzero_gates);
            history.push(record);
            epoch += 1;
        }
    }
    let selected = selected_pairs(&model);
    let orders = candidates
        .into_iter()
        .map(|(order, cands, gates)| {
            let pairs: Vec<&SelectedPair> = selected.iter().filter(|p| p.fields.order() == order).collect();
            let mut tuples: Vec<&InteractionTuple> = pairs.iter().map(|p| &p.fields).collect();
            tuples.sort();
            tuples.dedup();
            OrderReport {
                order,
                candidates: cands,
                gates,
                surviving_tuples: tuples.len(),
                surviving_pairs: pairs.len(),
                fi_ratio: if cands == 0 { 0.0 } else { tuples.len() as f64 / cands as f64 },
            }
        })
        .collect();
    Ok(Stage1Output { model, orders, selected, history })
}

/// Embedding dimension search over the stage-1 survivors.
pub fn run_stage2(dataset: &Dataset, selected: &[SelectedPair], config: &SearchConfig) -> Result<Stage2Output> {
    check_schema(config, dataset)?;
    let model_config = ModelConfig { gates: GateModes::SEARCH_EMBED, ..config.model.clone() };
    let terms: Vec<(InteractionTuple, IfKind, f64)> =
        selected.iter().map(|p| (p.fields.clone(), p.kind, p.alpha)).collect();
    let mut model = Model::new(model_config, dataset.schema.clone(), None, &terms, config.seed ^ 0x5EED_0002)?;
    let mut history = Vec::new();
    for epoch in 0..config.stage2.epochs {
        let loss = train_epoch(&mut model, dataset, &config.stage2, epoch_seed(config.seed, 2, epoch))?;
        let record = EpochRecord {
            stage: "search_embed".into(),
            epoch,
            train_loss: loss,
            nonzero_gates: nonzero_beta(&model),
            valid: validation_report(&model, dataset, config.stage2.batch_size)?,
        };
        info!("stage 2 epoch {epoch}: loss {loss:.6}, {} open dimensions", record.nonzero_gates);
        history.push(record);
    }
    let fields: Vec<FieldDims> = (0..dataset.schema.field_count())
        .map(|f| {
            let beta = model.beta(f).expect("dimension gates present");
            FieldDims::from_gates(f + 1, model.store().value(beta))
        })
        .collect();
    if fields.iter().all(|f| f.d_i == 0) {
        return Err(AimError::SearchCollapsed);
    }
    Ok(Stage2Output { model, fields, history })
}

pub fn extract_artifact(
    schema: &FieldSchema,
    selected: &[SelectedPair],
    fields: &[FieldDims],
    config: &SearchConfig,
) -> SearchArtifact {
    let mut pairs = selected.to_vec();
    sort_pairs(&mut pairs);
    SearchArtifact {
        schema_hash: schema.hash(),
        pairs,
        fields: fields.to_vec(),
        provenance: Provenance {
            config_hash: config.hash(),
            seed: config.seed,
            embed_dim: config.model.embed_dim,
            stage_epochs: StageEpochs {
                stage1: config.stage1.epochs * (config.model.max_order - 1),
                stage2: config.stage2.epochs,
            },
        },
    }
}

/// Builds the compact re-train model described by an artifact.
pub fn build_retrain_model(
    schema: &FieldSchema,
    artifact: &SearchArtifact,
    model_config: &ModelConfig,
    seed: u64,
) -> Result<(Model, Vec<SelectedPair>)> {
    artifact.validate(schema)?;
    let d = model_config.embed_dim;
    if artifact.provenance.embed_dim != d {
        return Err(AimError::Validation(format!(
            "artifact was searched with embedding size {}, config has {d}",
            artifact.provenance.embed_dim
        )));
    }
    let layouts = artifact.fields.iter().map(|f| f.layout(d)).collect::<Result<Vec<_>>>()?;
    let (kept, dropped): (Vec<SelectedPair>, Vec<SelectedPair>) = artifact
        .pairs
        .iter()
        .cloned()
        .partition(|p| p.fields.fields().iter().all(|&f| artifact.fields[f].d_i > 0));
    for p in &dropped {
        warn!("dropping {} {}: it references a field with no retained dimensions", p.fields, p.kind);
    }
    let terms: Vec<(InteractionTuple, IfKind, f64)> =
        kept.iter().map(|p| (p.fields.clone(), p.kind, p.alpha)).collect();
    let max_order = terms.iter().map(|t| t.0.order()).max().unwrap_or(2).max(model_config.max_order);
    let config = ModelConfig { max_order, gates: GateModes::RETRAIN, ..model_config.clone() };
    let model = Model::new(config, schema.clone(), Some(layouts), &terms, seed)?;
    Ok((model, dropped))
}

/// Parameter count of the re-train model computed from the artifact alone.
pub fn analytic_param_count(schema: &FieldSchema, artifact: &SearchArtifact, model_config: &ModelConfig) -> usize {
    let d = model_config.embed_dim;
    let slots = model_config.table_slots();
    let widths: Vec<usize> = artifact.fields.iter().map(|f| f.d_i).collect();
    let kept: Vec<&SelectedPair> =
        artifact.pairs.iter().filter(|p| p.fields.fields().iter().all(|&f| widths[f] > 0)).collect();
    let embeddings: usize = (0..schema.field_count()).map(|f| widths[f] * schema.vocab_size(f) * slots).sum();
    let terms: usize = kept.iter().map(|p| 1 + p.kind.param_count(p.fields.order(), d)).sum();
    let linear: usize = schema.vocab_sizes().iter().sum::<usize>() + 1;
    let mlp = if model_config.head.has_mlp() {
        let mut chain = vec![widths.iter().sum::<usize>()];
        if model_config.head == HeadKind::Ipnn {
            chain[0] += kept.len();
        }
        chain.extend(&model_config.mlp_widths);
        chain.push(1);
        chain.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    } else {
        0
    };
    embeddings + terms + linear + mlp
}

/// Re-trains the architecture in `artifact` under `config.retrain`.
pub fn run_stage3(dataset: &Dataset, artifact: &SearchArtifact, config: &SearchConfig) -> Result<Stage3Output> {
    check_schema(config, dataset)?;
    let settings = &config.retrain.stage();
    let (mut model, dropped_pairs) =
        build_retrain_model(&dataset.schema, artifact, &config.retrain_model_config(), config.seed ^ 0x5EED_0003)?;
    let param_count = model.param_count();
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Model)> = None;
    for epoch in 0..settings.epochs {
        let loss = train_epoch(&mut model, dataset, settings, epoch_seed(config.seed, 3, epoch))?;
        let valid = validation_report(&model, dataset, settings.batch_size)?;
        info!("re-train epoch {epoch}: loss {loss:.6}");
        let score = valid.as_ref().map_or(f64::NEG_INFINITY, |v| v.logloss);
        if best.as_ref().is_none_or(|(b, _, _)| score <= *b) {
            best = Some((score, epoch, model.clone()));
        }
        history.push(EpochRecord {
            stage: "retrain".into(),
            epoch,
            train_loss: loss,
            nonzero_gates: nonzero_alpha(&model),
            valid,
        });
    }
    let (model, best_epoch) = match best {
        Some((_, e, m)) => (m, e),
        None => (model, 0),
    };
    Ok(Stage3Output { model, best_epoch, history, dropped_pairs, param_count })
}

/// Re-trains a searched architecture under a different output head.
pub fn transfer(
    dataset: &Dataset,
    artifact: &SearchArtifact,
    config: &SearchConfig,
    head: HeadKind,
) -> Result<Stage3Output> {
    let mut config = config.clone();
    config.retrain.head = head;
    run_stage3(dataset, artifact, &config)
}

pub fn run_pipeline(dataset: &Dataset, config: &SearchConfig) -> Result<PipelineOutput> {
    let stage1 = run_stage1(dataset, config)?;
    let stage2 = run_stage2(dataset, &stage1.selected, config)?;
    let artifact = extract_artifact(&dataset.schema, &stage1.selected, &stage2.fields, config);
    let stage3 = run_stage3(dataset, &artifact, config)?;
    Ok(PipelineOutput { stage1, stage2, artifact, stage3 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_from_gates() {
        let f = FieldDims::from_gates(1, &[0.5, 0.0, -0.2, 0.0]);
        assert_eq!((f.d_i, f.phi.clone(), f.map.clone()), (2, vec![1, 3], vec![1, 3]));
        assert_eq!(f.compact_position(3), Some(2));
        assert_eq!(f.compact_position(2), None);
        let layout = f.layout(4).unwrap();
        let mut wide = [9.0; 4];
        layout.widen(&[7.0, 8.0], &mut wide);
        assert_eq!(wide, [7.0, 0.0, 8.0, 0.0]);
        let full = FieldDims::from_gates(2, &[1.0, 2.0, 3.0]);
        assert_eq!(full, FieldDims::full(2, 3));
    }

    #[test]
    fn pairs_sort_by_magnitude_then_lexicographically() {
        let t = |a, b| InteractionTuple::new(vec![a, b]).unwrap();
        let mut pairs = vec![
            SelectedPair { fields: t(1, 2), kind: IfKind::Inner, alpha: 0.1 },
            SelectedPair { fields: t(0, 2), kind: IfKind::KernelScalar, alpha: -0.3 },
            SelectedPair { fields: t(0, 1), kind: IfKind::Inner, alpha: 0.3 },
        ];
        sort_pairs(&mut pairs);
        let order: Vec<String> = pairs.iter().map(|p| p.fields.to_string()).collect();
        assert_eq!(order, ["(1,2)", "(1,3)", "(2,3)"]);
    }

    #[test]
    fn identity_artifact_round_trips_and_validates() {
        let schema = FieldSchema::one_hot(vec![3, 4, 5]).unwrap();
        let config = ModelConfig { embed_dim: 4, ..ModelConfig::default() };
        let art = SearchArtifact::identity(&schema, &config);
        art.validate(&schema).unwrap();
        let text = art.to_json();
        assert!(text.contains("\"if\": \"outer_approx\""));
        let back = SearchArtifact::from_json(&text).unwrap();
        assert_eq!(back, art);
        assert_eq!(back.to_json(), text);
        let other = FieldSchema::one_hot(vec![3, 4]).unwrap();
        assert!(art.validate(&other).is_err());
    }

    #[test]
    fn analytic_count_matches_built_model() {
        let schema = FieldSchema::one_hot(vec![3, 4, 5, 2]).unwrap();
        for head in [HeadKind::Fm, HeadKind::DeepFm, HeadKind::Ipnn] {
            let config = ModelConfig { head, embed_dim: 4, mlp_widths: vec![6, 3], ..ModelConfig::default() };
            let mut art = SearchArtifact::identity(&schema, &config);
            let full = build_retrain_model(&schema, &art, &config, 1).unwrap().0;
            assert_eq!(full.param_count(), analytic_param_count(&schema, &art, &config));
            art.fields[1] = FieldDims::from_gates(2, &[0.0, 1.0, 0.0, 1.0]);
            art.fields[3] = FieldDims::from_gates(4, &[0.0; 4]);
            art.pairs.retain(|p| p.kind != IfKind::KernelScalar);
            let (pruned, dropped) = build_retrain_model(&schema, &art, &config, 1).unwrap();
            assert_eq!(pruned.param_count(), analytic_param_count(&schema, &art, &config));
            assert!(pruned.param_count() < full.param_count());
            assert_eq!(dropped.len(), 3 * 3);
        }
    }
}
