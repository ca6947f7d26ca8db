//! Ranking and calibration metrics.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Instance, SplitTag};
use crate::interactions::InteractionTuple;
use crate::model::{bce_with_logit, Model};
use crate::{AimError, Result};

/// One evaluation result, serialized as a single JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub split: String,
    pub auc: f64,
    pub logloss: f64,
    pub count: usize,
}

/// Probability that a random positive outranks a random negative, ties 1/2.
///
/// Uses tie-group midranks (Mann-Whitney U).
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(AimError::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(AimError::Validation("scores contain NaN".into()));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(AimError::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the rank sum keeps midranks integral.
    let mut rank_sum2: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let midrank2 = (start + 1 + end) as u128;
        let group_pos = order[start..end].iter().filter(|&&i| labels[i] == 1).count() as u128;
        rank_sum2 += midrank2 * group_pos;
        start = end;
    }
    let (p, n) = (positives as u128, negatives as u128);
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * n) as f64)
}

/// Mean cross-entropy over logits.
pub fn mean_logloss(logits: &[f64], labels: &[u8]) -> Result<f64> {
    if logits.is_empty() {
        return Err(AimError::Empty);
    }
    if logits.len() != labels.len() {
        return Err(AimError::Shape(format!("{} logits for {} labels", logits.len(), labels.len())));
    }
    let total: f64 = logits.iter().zip(labels).map(|(&z, &y)| bce_with_logit(z, f64::from(y))).sum();
    Ok(total / logits.len() as f64)
}

/// AUC of a predictor that scores each test instance by the training CTR of
/// its joint values on `tuple`; unseen combinations score the global CTR.
pub fn statistics_auc(train: &[&Instance], test: &[&Instance], tuple: &InteractionTuple) -> Result<f64> {
    if train.is_empty() || test.is_empty() {
        return Err(AimError::Empty);
    }
    let key = |inst: &Instance| -> Vec<Vec<u32>> {
        tuple
            .fields()
            .iter()
            .map(|&f| {
                let mut ids = inst.ids.get(f).cloned().unwrap_or_default();
                ids.sort_unstable();
                ids
            })
            .collect()
    };
    let mut table: HashMap<Vec<Vec<u32>>, (u64, u64)> = HashMap::new();
    let mut clicks = 0u64;
    for inst in train {
        let entry = table.entry(key(inst)).or_default();
        entry.0 += u64::from(inst.label);
        entry.1 += 1;
        clicks += u64::from(inst.label);
    }
    let global = clicks as f64 / train.len() as f64;
    let scores: Vec<f64> = test
        .iter()
        .map(|inst| table.get(&key(inst)).map_or(global, |&(c, n)| c as f64 / n as f64))
        .collect();
    let labels: Vec<u8> = test.iter().map(|i| i.label).collect();
    auc(&scores, &labels)
}

/// Eval-mode logits for every instance of a split, in split order.
pub fn predict_split(model: &Model, dataset: &Dataset, tag: SplitTag, batch_size: usize) -> Result<Vec<f64>> {
    let idx = dataset.indices(tag);
    let mut out = Vec::with_capacity(idx.len());
    for chunk in idx.chunks(batch_size.max(1)) {
        let batch: Vec<&Instance> = chunk.iter().map(|&i| &dataset.instances[i]).collect();
        out.extend(model.predict_logits(&batch)?);
    }
    Ok(out)
}

pub fn evaluate(model: &Model, dataset: &Dataset, tag: SplitTag, batch_size: usize) -> Result<MetricReport> {
    let logits = predict_split(model, dataset, tag, batch_size)?;
    let labels: Vec<u8> = dataset.indices(tag).iter().map(|&i| dataset.instances[i].label).collect();
    Ok(MetricReport {
        split: tag.to_string(),
        auc: auc(&logits, &labels)?,
        logloss: mean_logloss(&logits, &labels)?,
        count: labels.len(),
    })
}
