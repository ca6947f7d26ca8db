use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use aim_core::data::{load_dataset, DataFormat, Dataset, Instance, SplitFractions, SplitTag, Vocabulary};
use aim_core::eval::{auc, evaluate, mean_logloss, statistics_auc, MetricReport};
use aim_core::interactions::{enumerate_second_order, InteractionTuple};
use aim_core::model::{HeadKind, Model};
use aim_core::search::{
    analytic_param_count, extract_artifact, run_stage1, run_stage2, run_stage3, EpochRecord, FieldDims,
    OrderReport, SearchArtifact, SelectedPair,
};
use aim_core::synth::{generate, SynthConfig};
use anyhow::{Context, Result};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// A trained model together with what is needed to encode and split data for it.
#[derive(Serialize, Deserialize)]
pub struct Checkpoint {
    pub model: Model,
    pub vocab: Vocabulary,
    pub split: SplitFractions,
    pub split_seed: u64,
}

#[derive(Serialize, Deserialize)]
pub struct Stage1Report {
    pub orders: Vec<OrderReport>,
    pub fi_ratio: f64,
    pub pairs: Vec<SelectedPair>,
}

#[derive(Serialize, Deserialize)]
pub struct Stage2Report {
    pub fields: Vec<FieldDims>,
}

#[derive(Serialize, Deserialize)]
pub struct RetrainReport {
    pub head: HeadKind,
    pub param_count: usize,
    pub analytic_param_count: usize,
    pub best_epoch: usize,
    pub dropped_pairs: Vec<SelectedPair>,
    pub valid: Option<MetricReport>,
    pub test: Option<MetricReport>,
}

#[derive(Serialize)]
struct MetricLine<'a> {
    stage: &'a str,
    epoch: usize,
    train_loss: f64,
    nonzero_gates: usize,
    #[serde(flatten)]
    metrics: Option<&'a MetricReport>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(aim_core::AimError::from).with_context(|| {
        format!("reading {}", path.display())
    })?;
    Ok(serde_json::from_str(&text).map_err(aim_core::AimError::from)?)
}

/// Writes one line to stdout; a closed pipe ends output quietly.
pub fn print_line(text: &str) -> Result<()> {
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

pub fn print_json(value: &impl Serialize) -> Result<()> {
    print_line(&serde_json::to_string_pretty(value)?)
}

fn append_metrics(config: &RunConfig, history: &[EpochRecord], truncate: bool) -> Result<()> {
    fs::create_dir_all(&config.output.dir)?;
    let path = config.metrics_path();
    let mut file = if truncate {
        File::create(&path)?
    } else {
        OpenOptions::new().create(true).append(true).open(&path)?
    };
    for r in history {
        let line = MetricLine {
            stage: &r.stage,
            epoch: r.epoch,
            train_loss: r.train_loss,
            nonzero_gates: r.nonzero_gates,
            metrics: r.valid.as_ref(),
        };
        writeln!(file, "{}", serde_json::to_string(&line)?)?;
    }
    Ok(())
}

fn append_metric(config: &RunConfig, stage: &str, report: &MetricReport) -> Result<()> {
    #[derive(Serialize)]
    struct Line<'a> {
        stage: &'a str,
        #[serde(flatten)]
        metrics: &'a MetricReport,
    }
    let mut file = OpenOptions::new().create(true).append(true).open(config.metrics_path())?;
    writeln!(file, "{}", serde_json::to_string(&Line { stage, metrics: report })?)?;
    Ok(())
}

pub fn load(config: &RunConfig) -> Result<Dataset> {
    let started = Instant::now();
    let dataset = load_dataset(&config.data.path, config.format()?)
        .with_context(|| format!("loading {}", config.data.path.display()))?
        .split(config.data.split, config.data.split_seed)?;
    info!(
        "loaded {} instances over {} fields in {:.1}s",
        dataset.len(),
        dataset.schema.field_count(),
        started.elapsed().as_secs_f64()
    );
    Ok(dataset)
}

fn checkpoint(config: &RunConfig, dataset: &Dataset, model: &Model) -> Checkpoint {
    Checkpoint {
        model: model.clone(),
        vocab: dataset.vocab.clone(),
        split: config.data.split,
        split_seed: config.data.split_seed,
    }
}

pub fn search_interactions(config: &RunConfig, dataset: &Dataset) -> Result<Stage1Report> {
    let search = config.search_config();
    let out = run_stage1(dataset, &search)?;
    let candidates: usize = out.orders.iter().map(|o| o.candidates).sum();
    let survivors: usize = out.orders.iter().map(|o| o.surviving_tuples).sum();
    let report = Stage1Report {
        fi_ratio: if candidates == 0 { 0.0 } else { survivors as f64 / candidates as f64 },
        orders: out.orders,
        pairs: out.selected,
    };
    let dir = config.stage_dir("stage1");
    write_json(&dir.join("checkpoint.json"), &checkpoint(config, dataset, &out.model))?;
    write_json(&dir.join("report.json"), &report)?;
    append_metrics(config, &out.history, true)?;
    Ok(report)
}

pub fn search_embed(config: &RunConfig, dataset: &Dataset) -> Result<SearchArtifact> {
    let search = config.search_config();
    let stage1: Stage1Report = read_json(&config.stage_dir("stage1").join("report.json"))
        .context("stage 1 output missing; run search-interactions first")?;
    let out = run_stage2(dataset, &stage1.pairs, &search)?;
    let dir = config.stage_dir("stage2");
    write_json(&dir.join("checkpoint.json"), &checkpoint(config, dataset, &out.model))?;
    write_json(&dir.join("report.json"), &Stage2Report { fields: out.fields.clone() })?;
    append_metrics(config, &out.history, false)?;
    let artifact = extract_artifact(&dataset.schema, &stage1.pairs, &out.fields, &search);
    artifact.validate(&dataset.schema)?;
    write_json(&config.artifact_path(), &artifact)?;
    Ok(artifact)
}

pub fn retrain(
    config: &RunConfig,
    dataset: &Dataset,
    artifact_path: Option<&Path>,
    head: Option<HeadKind>,
) -> Result<RetrainReport> {
    let mut search = config.search_config();
    if let Some(head) = head {
        search.retrain.head = head;
    }
    let path: PathBuf = artifact_path.map_or_else(|| config.artifact_path(), Path::to_path_buf);
    let artifact: SearchArtifact = read_json(&path)?;
    let out = run_stage3(dataset, &artifact, &search)?;
    let batch = search.retrain.batch_size;
    let metric = |tag| match evaluate(&out.model, dataset, tag, batch) {
        Ok(r) => Ok(Some(r)),
        Err(aim_core::AimError::UndefinedAuc | aim_core::AimError::Empty) => Ok(None),
        Err(e) => Err(e),
    };
    let report = RetrainReport {
        head: search.retrain.head,
        param_count: out.param_count,
        analytic_param_count: analytic_param_count(&dataset.schema, &artifact, &search.retrain_model_config()),
        best_epoch: out.best_epoch,
        dropped_pairs: out.dropped_pairs,
        valid: metric(SplitTag::Valid)?,
        test: metric(SplitTag::Test)?,
    };
    let dir = config.stage_dir("retrain");
    write_json(&dir.join("checkpoint.json"), &checkpoint(config, dataset, &out.model))?;
    write_json(&dir.join("report.json"), &report)?;
    append_metrics(config, &out.history, false)?;
    if let Some(test) = &report.test {
        append_metric(config, "retrain", test)?;
    }
    Ok(report)
}

#[derive(Serialize)]
pub struct PipelineReport {
    pub stage1: Stage1Report,
    pub artifact: SearchArtifact,
    pub retrain: RetrainReport,
}

pub fn pipeline(config: &RunConfig) -> Result<PipelineReport> {
    let dataset = load(config)?;
    let stage1 = search_interactions(config, &dataset)?;
    let artifact = search_embed(config, &dataset)?;
    let retrain = retrain(config, &dataset, None, None)?;
    Ok(PipelineReport { stage1, artifact, retrain })
}

/// Evaluates a checkpoint on a data file. `split` re-applies the
/// checkpoint's split; `None` evaluates every instance.
pub fn evaluate_checkpoint(
    checkpoint_path: &Path,
    data: &Path,
    format: DataFormat,
    split: Option<SplitTag>,
) -> Result<MetricReport> {
    let ckpt: Checkpoint = read_json(checkpoint_path)?;
    let text = fs::read_to_string(data)
        .map_err(aim_core::AimError::from)
        .with_context(|| format!("reading {}", data.display()))?;
    let dataset = aim_core::data::parse_dataset(&text, format, Some(&ckpt.vocab))?;
    if dataset.schema.field_count() != ckpt.model.schema().field_count() {
        return Err(aim_core::AimError::Validation(format!(
            "data has {} fields, model expects {}",
            dataset.schema.field_count(),
            ckpt.model.schema().field_count()
        ))
        .into());
    }
    match split {
        Some(tag) => {
            let dataset = dataset.split(ckpt.split, ckpt.split_seed)?;
            Ok(evaluate(&ckpt.model, &dataset, tag, 1024)?)
        }
        None => {
            let mut logits = Vec::with_capacity(dataset.len());
            for chunk in dataset.instances.chunks(1024) {
                let batch: Vec<&Instance> = chunk.iter().collect();
                logits.extend(ckpt.model.predict_logits(&batch)?);
            }
            let labels: Vec<u8> = dataset.instances.iter().map(|i| i.label).collect();
            Ok(MetricReport {
                split: "all".into(),
                auc: auc(&logits, &labels)?,
                logloss: mean_logloss(&logits, &labels)?,
                count: labels.len(),
            })
        }
    }
}

#[derive(Serialize)]
pub struct StatsAucLine {
    pub fields: InteractionTuple,
    pub statistics_auc: f64,
}

pub fn stats_auc(config: &RunConfig, tuples: &[InteractionTuple]) -> Result<Vec<StatsAucLine>> {
    let dataset = load(config)?;
    let train: Vec<&Instance> = dataset.indices(SplitTag::Train).iter().map(|&i| &dataset.instances[i]).collect();
    let test: Vec<&Instance> = dataset.indices(SplitTag::Test).iter().map(|&i| &dataset.instances[i]).collect();
    let tuples = if tuples.is_empty() { enumerate_second_order(dataset.schema.field_count()) } else { tuples.to_vec() };
    tuples
        .into_iter()
        .map(|t| {
            if t.fields().iter().any(|&f| f >= dataset.schema.field_count()) {
                return Err(aim_core::AimError::Validation(format!("{t} references a missing field")).into());
            }
            let statistics_auc = statistics_auc(&train, &test, &t)?;
            Ok(StatsAucLine { fields: t, statistics_auc })
        })
        .collect()
}

#[derive(Serialize)]
pub struct RepeatRun {
    pub seed: u64,
    pub param_count: usize,
    pub test: Option<MetricReport>,
}

#[derive(Serialize)]
pub struct RepeatReport {
    pub runs: Vec<RepeatRun>,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub logloss_mean: f64,
    pub logloss_std: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Runs the whole pipeline once per seed, each in `<output>/seed-<n>`.
pub fn repeat(config: &RunConfig, seeds: &[u64]) -> Result<RepeatReport> {
    let mut runs = Vec::new();
    for &seed in seeds {
        let mut run = config.clone();
        run.search.seed = seed;
        run.output.dir = config.output.dir.join(format!("seed-{seed}"));
        let report = pipeline(&run)?;
        runs.push(RepeatRun { seed, param_count: report.retrain.param_count, test: report.retrain.test });
    }
    let aucs: Vec<f64> = runs.iter().filter_map(|r| r.test.as_ref().map(|t| t.auc)).collect();
    let losses: Vec<f64> = runs.iter().filter_map(|r| r.test.as_ref().map(|t| t.logloss)).collect();
    let (auc_mean, auc_std) = mean_std(&aucs);
    let (logloss_mean, logloss_std) = mean_std(&losses);
    Ok(RepeatReport { runs, auc_mean, auc_std, logloss_mean, logloss_std })
}

pub fn synth(config: &SynthConfig, out: &Path) -> Result<()> {
    let output = generate(config)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("data.svm"), output.to_svm())?;
    write_json(&out.join("manifest.json"), &output.manifest)?;
    print_json(&output.manifest)
}
