//! Multi-field categorical datasets.
//!
//! Two text formats are accepted:
//!
//! * svm-light style: `label field:feature field:feature ...`, 1-based field
//!   numbers, `#` starts a comment.
//! * delimited columns: a header row naming the fields plus a `label`
//!   column, then one categorical token per field per row. Tokens may hold
//!   several values separated by `|` (multi-hot).
//!
//! Feature ids are assigned per field in first-seen order starting at 1.
//! Id 0 is reserved in every field for out-of-vocabulary tokens.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{AimError, Result};

pub const OOV_ID: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    SvmLight,
    Delimited,
}

impl std::str::FromStr for DataFormat {
    type Err = AimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svm" | "svm-light" | "svmlight" | "libsvm" => Ok(DataFormat::SvmLight),
            "delimited" | "csv" | "tsv" => Ok(DataFormat::Delimited),
            other => Err(AimError::Config(format!("unknown data format `{other}`"))),
        }
    }
}

/// Field count, per-field vocabulary sizes (OOV slot included) and which
/// fields were seen with more than one active feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSchema {
    vocab_sizes: Vec<usize>,
    multi_hot: Vec<bool>,
}

impl FieldSchema {
    pub fn new(vocab_sizes: Vec<usize>, multi_hot: Vec<bool>) -> Result<Self> {
        if vocab_sizes.is_empty() {
            return Err(AimError::Validation("schema needs at least one field".into()));
        }
        if vocab_sizes.len() != multi_hot.len() {
            return Err(AimError::Validation(format!(
                "{} vocabulary sizes but {} multi-hot flags",
                vocab_sizes.len(),
                multi_hot.len()
            )));
        }
        if let Some(i) = vocab_sizes.iter().position(|&h| h == 0) {
            return Err(AimError::Validation(format!("field {} has an empty vocabulary", i + 1)));
        }
        Ok(Self { vocab_sizes, multi_hot })
    }

    /// One-hot schema with the given vocabulary sizes.
    pub fn one_hot(vocab_sizes: Vec<usize>) -> Result<Self> {
        let n = vocab_sizes.len();
        Self::new(vocab_sizes, vec![false; n])
    }

    pub fn field_count(&self) -> usize {
        self.vocab_sizes.len()
    }

    pub fn vocab_sizes(&self) -> &[usize] {
        &self.vocab_sizes
    }

    pub fn vocab_size(&self, field: usize) -> usize {
        self.vocab_sizes[field]
    }

    pub fn is_multi_hot(&self, field: usize) -> bool {
        self.multi_hot[field]
    }

    /// Stable hex digest of the schema, used to tie artifacts to data.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (size, multi) in self.vocab_sizes.iter().zip(&self.multi_hot) {
            h.update(format!("{size}:{}", u8::from(*multi)).as_bytes());
            h.update(b";");
        }
        hex::encode(&h.finalize()[..16])
    }

    /// Checks an instance against the schema.
    pub fn validate(&self, instance: &Instance) -> Result<()> {
        if instance.ids.len() != self.field_count() {
            return Err(AimError::Validation(format!(
                "instance has {} fields, schema has {}",
                instance.ids.len(),
                self.field_count()
            )));
        }
        if instance.label > 1 {
            return Err(AimError::Validation(format!("label {} outside {{0,1}}", instance.label)));
        }
        for (i, ids) in instance.ids.iter().enumerate() {
            if ids.is_empty() {
                return Err(AimError::Validation(format!("field {} has no active feature", i + 1)));
            }
            if !self.multi_hot[i] && ids.len() != 1 {
                return Err(AimError::Validation(format!(
                    "one-hot field {} carries {} ids",
                    i + 1,
                    ids.len()
                )));
            }
            if let Some(&bad) = ids.iter().find(|&&id| id as usize >= self.vocab_sizes[i]) {
                return Err(AimError::Validation(format!(
                    "id {bad} out of range for field {} (vocabulary {})",
                    i + 1,
                    self.vocab_sizes[i]
                )));
            }
        }
        Ok(())
    }
}

/// A labelled instance: per field, the list of active feature ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub label: u8,
    pub ids: Vec<Vec<u32>>,
}

impl Instance {
    pub fn one_hot(label: u8, ids: &[u32]) -> Self {
        Self { label, ids: ids.iter().map(|&id| vec![id]).collect() }
    }
}

/// Token <-> id maps for every field.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRepr")]
pub struct Vocabulary {
    names: Vec<String>,
    tokens: Vec<Vec<String>>,
    #[serde(skip)]
    index: Vec<HashMap<String, u32>>,
}

#[derive(Deserialize)]
struct VocabRepr {
    names: Vec<String>,
    tokens: Vec<Vec<String>>,
}

impl From<VocabRepr> for Vocabulary {
    fn from(r: VocabRepr) -> Self {
        let mut v = Vocabulary { names: r.names, tokens: r.tokens, index: Vec::new() };
        v.rebuild_index();
        v
    }
}

impl Vocabulary {
    fn with_fields(names: Vec<String>) -> Self {
        let n = names.len();
        Self { names, tokens: vec![Vec::new(); n], index: vec![HashMap::new(); n] }
    }

    fn rebuild_index(&mut self) {
        self.index = self
            .tokens
            .iter()
            .map(|toks| toks.iter().enumerate().map(|(i, t)| (t.clone(), i as u32 + 1)).collect())
            .collect();
    }

    pub fn field_names(&self) -> &[String] {
        &self.names
    }

    pub fn field_count(&self) -> usize {
        self.names.len()
    }

    /// Vocabulary size of a field including the OOV slot.
    pub fn vocab_size(&self, field: usize) -> usize {
        self.tokens[field].len() + 1
    }

    fn intern(&mut self, field: usize, token: &str) -> u32 {
        if let Some(&id) = self.index[field].get(token) {
            return id;
        }
        self.tokens[field].push(token.to_string());
        let id = self.tokens[field].len() as u32;
        self.index[field].insert(token.to_string(), id);
        id
    }

    pub fn lookup(&self, field: usize, token: &str) -> u32 {
        self.index[field].get(token).copied().unwrap_or(OOV_ID)
    }

    /// Token for an id; `None` for the OOV id.
    pub fn token(&self, field: usize, id: u32) -> Option<&str> {
        if id == OOV_ID {
            return None;
        }
        self.tokens[field].get(id as usize - 1).map(String::as_str)
    }

    pub fn decode(&self, instance: &Instance) -> Vec<Vec<Option<String>>> {
        instance
            .ids
            .iter()
            .enumerate()
            .map(|(f, ids)| ids.iter().map(|&id| self.token(f, id).map(str::to_string)).collect())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Valid,
    Test,
}

impl std::str::FromStr for SplitTag {
    type Err = AimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitTag::Train),
            "valid" | "validation" => Ok(SplitTag::Valid),
            "test" => Ok(SplitTag::Test),
            other => Err(AimError::Config(format!("unknown split `{other}`"))),
        }
    }
}

impl std::fmt::Display for SplitTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SplitTag::Train => "train",
            SplitTag::Valid => "valid",
            SplitTag::Test => "test",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn new(train: f64, valid: f64, test: f64) -> Result<Self> {
        let f = Self { train, valid, test };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.valid, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(AimError::Validation(format!("split fractions must be positive: {parts:?}")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(AimError::Validation(format!("split fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { train: 0.8, valid: 0.1, test: 0.1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: FieldSchema,
    pub vocab: Vocabulary,
    pub instances: Vec<Instance>,
    pub splits: Vec<SplitTag>,
}

impl Dataset {
    /// Builds a dataset from already encoded instances, all tagged train.
    pub fn from_instances(schema: FieldSchema, instances: Vec<Instance>) -> Result<Self> {
        if instances.is_empty() {
            return Err(AimError::Empty);
        }
        for inst in &instances {
            schema.validate(inst)?;
        }
        let names = (1..=schema.field_count()).map(|i| format!("f{i}")).collect();
        let mut vocab = Vocabulary::with_fields(names);
        for (f, &h) in schema.vocab_sizes().iter().enumerate() {
            for id in 1..h {
                vocab.intern(f, &id.to_string());
            }
        }
        let splits = vec![SplitTag::Train; instances.len()];
        Ok(Self { schema, vocab, instances, splits })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn indices(&self, tag: SplitTag) -> Vec<usize> {
        self.splits.iter().enumerate().filter(|(_, t)| **t == tag).map(|(i, _)| i).collect()
    }

    pub fn split_len(&self, tag: SplitTag) -> usize {
        self.splits.iter().filter(|t| **t == tag).count()
    }

    /// Deterministic train/valid/test assignment.
    pub fn split(mut self, fractions: SplitFractions, seed: u64) -> Result<Self> {
        fractions.validate()?;
        let n = self.instances.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = ((n as f64) * fractions.train).round() as usize;
        let n_valid = (((n as f64) * fractions.valid).round() as usize).min(n - n_train.min(n));
        let n_train = n_train.min(n);
        for (rank, &idx) in order.iter().enumerate() {
            self.splits[idx] = if rank < n_train {
                SplitTag::Train
            } else if rank < n_train + n_valid {
                SplitTag::Valid
            } else {
                SplitTag::Test
            };
        }
        Ok(self)
    }

    /// Mini-batches of one split; a seeded permutation, final partial batch included.
    pub fn batches(&self, tag: SplitTag, batch_size: usize, shuffle_seed: u64) -> Result<Batches> {
        if batch_size == 0 {
            return Err(AimError::Validation("batch size must be at least 1".into()));
        }
        let mut order = self.indices(tag);
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        Ok(Batches { order, batch_size, pos: 0 })
    }

    /// Encodes another file with this dataset's vocabulary; unseen tokens map to OOV.
    pub fn encode_file(&self, path: impl AsRef<Path>, format: DataFormat) -> Result<Dataset> {
        let text = std::fs::read_to_string(path)?;
        parse_dataset(&text, format, Some(&self.vocab))
    }
}

/// Index batches over one split.
#[derive(Debug, Clone)]
pub struct Batches {
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

impl Iterator for Batches {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let batch = self.order[self.pos..end].to_vec();
        self.pos = end;
        Some(batch)
    }
}

pub fn load_dataset(path: impl AsRef<Path>, format: DataFormat) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text, format, None)
}

/// Parses dataset text. With `vocab` given, ids come from it and unseen
/// tokens map to OOV; otherwise a vocabulary is built in first-seen order.
pub fn parse_dataset(text: &str, format: DataFormat, vocab: Option<&Vocabulary>) -> Result<Dataset> {
    let (mut vocab, frozen) = match vocab {
        Some(v) => (v.clone(), true),
        None => (Vocabulary::default(), false),
    };
    let mut raw: Vec<(u8, Vec<Vec<u32>>)> = Vec::new();
    match format {
        DataFormat::SvmLight => parse_svm(text, &mut vocab, frozen, &mut raw)?,
        DataFormat::Delimited => parse_delimited(text, &mut vocab, frozen, &mut raw)?,
    }
    if raw.is_empty() {
        return Err(AimError::Empty);
    }
    let n = vocab.field_count();
    let mut multi_hot = vec![false; n];
    let instances: Vec<Instance> = raw
        .into_iter()
        .map(|(label, mut ids)| {
            ids.resize(n, Vec::new());
            for (f, field_ids) in ids.iter_mut().enumerate() {
                if field_ids.is_empty() {
                    field_ids.push(OOV_ID);
                }
                if field_ids.len() > 1 {
                    multi_hot[f] = true;
                }
            }
            Instance { label, ids }
        })
        .collect();
    let schema = FieldSchema::new((0..n).map(|f| vocab.vocab_size(f)).collect(), multi_hot)?;
    let splits = vec![SplitTag::Train; instances.len()];
    Ok(Dataset { schema, vocab, instances, splits })
}

fn parse_label(tok: &str, line: usize) -> Result<u8> {
    let value: f64 = tok
        .parse()
        .map_err(|_| AimError::Parse { line, msg: format!("bad label `{tok}`") })?;
    if value == 0.0 {
        Ok(0)
    } else if value == 1.0 {
        Ok(1)
    } else {
        Err(AimError::Validation(format!("line {line}: label {tok} outside {{0,1}}")))
    }
}

fn parse_svm(
    text: &str,
    vocab: &mut Vocabulary,
    frozen: bool,
    out: &mut Vec<(u8, Vec<Vec<u32>>)>,
) -> Result<()> {
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut toks = body.split_whitespace();
        let label = parse_label(toks.next().unwrap_or_default(), line_no)?;
        let mut ids: Vec<Vec<u32>> = vec![Vec::new(); vocab.field_count()];
        for tok in toks {
            let (field, feat) = tok.split_once(':').ok_or_else(|| AimError::Parse {
                line: line_no,
                msg: format!("expected field:feature, got `{tok}`"),
            })?;
            let field: usize = field.parse().map_err(|_| AimError::Parse {
                line: line_no,
                msg: format!("bad field number `{field}`"),
            })?;
            let feat: u64 = feat.parse().map_err(|_| AimError::Parse {
                line: line_no,
                msg: format!("bad feature id `{feat}`"),
            })?;
            if field == 0 {
                return Err(AimError::Parse { line: line_no, msg: "field numbers start at 1".into() });
            }
            let f = field - 1;
            if f >= vocab.field_count() {
                if frozen {
                    return Err(AimError::Parse {
                        line: line_no,
                        msg: format!("field {field} not in schema of {} fields", vocab.field_count()),
                    });
                }
                while vocab.field_count() <= f {
                    let k = vocab.field_count() + 1;
                    vocab.names.push(format!("f{k}"));
                    vocab.tokens.push(Vec::new());
                    vocab.index.push(HashMap::new());
                }
                ids.resize(vocab.field_count(), Vec::new());
            }
            let key = feat.to_string();
            let id = if frozen { vocab.lookup(f, &key) } else { vocab.intern(f, &key) };
            ids[f].push(id);
        }
        out.push((label, ids));
    }
    Ok(())
}

fn parse_delimited(
    text: &str,
    vocab: &mut Vocabulary,
    frozen: bool,
    out: &mut Vec<(u8, Vec<Vec<u32>>)>,
) -> Result<()> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Ok(());
    };
    let delim = if header.contains('\t') { '\t' } else { ',' };
    let columns: Vec<&str> = header.split(delim).map(str::trim).collect();
    let label_col = columns
        .iter()
        .position(|c| *c == "label")
        .ok_or(AimError::Parse { line: 1, msg: "header has no `label` column".into() })?;
    let field_cols: Vec<(usize, &str)> =
        columns.iter().enumerate().filter(|(i, _)| *i != label_col).map(|(i, c)| (i, *c)).collect();
    if frozen {
        let names: Vec<&str> = field_cols.iter().map(|(_, c)| *c).collect();
        if names != vocab.names.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(AimError::Parse { line: 1, msg: "header fields differ from the schema".into() });
        }
    } else {
        *vocab = Vocabulary::with_fields(field_cols.iter().map(|(_, c)| c.to_string()).collect());
    }
    for (lineno, line) in lines {
        let line_no = lineno + 1;
        let cells: Vec<&str> = line.split(delim).map(str::trim).collect();
        if cells.len() != columns.len() {
            return Err(AimError::Parse {
                line: line_no,
                msg: format!("expected {} columns, got {}", columns.len(), cells.len()),
            });
        }
        let label = parse_label(cells[label_col], line_no)?;
        let ids = field_cols
            .iter()
            .enumerate()
            .map(|(f, (col, _))| {
                cells[*col]
                    .split('|')
                    .filter(|t| !t.is_empty())
                    .map(|t| if frozen { vocab.lookup(f, t) } else { vocab.intern(f, t) })
                    .collect()
            })
            .collect();
        out.push((label, ids));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn svm_vocab_counts_include_oov() {
        let ds = parse_dataset("1 1:3 2:7\n0 1:2 2:7\n", DataFormat::SvmLight, None).unwrap();
        assert_eq!(ds.schema.field_count(), 2);
        assert_eq!(ds.schema.vocab_sizes(), &[3, 2]);
        assert_eq!(ds.instances[0], Instance::one_hot(1, &[1, 1]));
        assert_eq!(ds.instances[1], Instance::one_hot(0, &[2, 1]));
    }

    #[test]
    fn empty_file_is_an_error() {
        let err = parse_dataset("", DataFormat::SvmLight, None).unwrap_err();
        assert_eq!(err.to_string(), "no instances");
        let err = parse_dataset("# only a comment\n\n", DataFormat::SvmLight, None).unwrap_err();
        assert!(matches!(err, AimError::Empty));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_dataset("1 1:3\n0 1-2\n", DataFormat::SvmLight, None).unwrap_err();
        assert!(matches!(err, AimError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn label_outside_binary_is_validation_error() {
        let err = parse_dataset("2 1:3\n", DataFormat::SvmLight, None).unwrap_err();
        assert!(matches!(err, AimError::Validation(_)));
    }

    #[test]
    fn comments_and_multi_hot() {
        let ds = parse_dataset("1 1:3 1:4 2:5 # trailing\n0 1:3 2:6\n", DataFormat::SvmLight, None)
            .unwrap();
        assert!(ds.schema.is_multi_hot(0));
        assert!(!ds.schema.is_multi_hot(1));
        assert_eq!(ds.instances[0].ids[0], vec![1, 2]);
    }

    #[test]
    fn missing_field_maps_to_oov() {
        let ds = parse_dataset("1 1:3 2:5\n0 2:6\n", DataFormat::SvmLight, None).unwrap();
        assert_eq!(ds.instances[1].ids[0], vec![OOV_ID]);
    }

    #[test]
    fn frozen_vocab_maps_unseen_to_oov() {
        let train = parse_dataset("1 1:3 2:5\n0 1:4 2:6\n", DataFormat::SvmLight, None).unwrap();
        let test = parse_dataset("1 1:9 2:5\n", DataFormat::SvmLight, Some(&train.vocab)).unwrap();
        assert_eq!(test.instances[0].ids, vec![vec![OOV_ID], vec![1]]);
        assert_eq!(test.schema, train.schema);
    }

    #[test]
    fn delimited_with_header() {
        let text = "app,label,site\na,1,x\nb,0,x\na|b,1,y\n";
        let ds = parse_dataset(text, DataFormat::Delimited, None).unwrap();
        assert_eq!(ds.vocab.field_names(), &["app".to_string(), "site".to_string()]);
        assert_eq!(ds.schema.vocab_sizes(), &[3, 3]);
        assert_eq!(ds.instances[2].ids[0], vec![1, 2]);
        assert_eq!(ds.instances[1].label, 0);
        let err = parse_dataset("app,label\na,1,extra\n", DataFormat::Delimited, None).unwrap_err();
        assert!(matches!(err, AimError::Parse { line: 2, .. }));
    }

    fn ten() -> Dataset {
        let instances = (0..10).map(|i| Instance::one_hot((i % 2) as u8, &[1 + (i % 3) as u32])).collect();
        Dataset::from_instances(FieldSchema::one_hot(vec![4]).unwrap(), instances).unwrap()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let f = SplitFractions::new(0.8, 0.1, 0.1).unwrap();
        let a = ten().split(f, 7).unwrap();
        assert_eq!(
            (a.split_len(SplitTag::Train), a.split_len(SplitTag::Valid), a.split_len(SplitTag::Test)),
            (8, 1, 1)
        );
        let b = ten().split(f, 7).unwrap();
        assert_eq!(a.splits, b.splits);
    }

    #[test]
    fn invalid_fractions_rejected() {
        assert!(SplitFractions::new(0.5, 0.5, 0.5).is_err());
        let bad = SplitFractions { train: 0.5, valid: 0.5, test: 0.5 };
        assert!(ten().split(bad, 1).is_err());
    }

    #[test]
    fn batch_sizes() {
        let instances = (0..5).map(|_| Instance::one_hot(1, &[1])).collect();
        let ds = Dataset::from_instances(FieldSchema::one_hot(vec![2]).unwrap(), instances).unwrap();
        let sizes: Vec<usize> = ds.batches(SplitTag::Train, 2, 3).unwrap().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![2, 2, 1]);
        let sizes: Vec<usize> = ds.batches(SplitTag::Train, 10, 3).unwrap().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![5]);
        let a: Vec<_> = ds.batches(SplitTag::Train, 2, 11).unwrap().collect();
        let b: Vec<_> = ds.batches(SplitTag::Train, 2, 11).unwrap().collect();
        assert_eq!(a, b);
        assert_eq!(ds.batches(SplitTag::Test, 2, 1).unwrap().count(), 0);
        assert!(ds.batches(SplitTag::Train, 0, 1).is_err());
    }

    #[test]
    fn schema_rejects_out_of_range_and_multi_on_one_hot() {
        let schema = FieldSchema::one_hot(vec![3, 2]).unwrap();
        assert!(schema.validate(&Instance::one_hot(1, &[2, 1])).is_ok());
        assert!(schema.validate(&Instance::one_hot(1, &[3, 1])).is_err());
        let multi = Instance { label: 0, ids: vec![vec![1, 2], vec![1]] };
        assert!(schema.validate(&multi).is_err());
        assert!(FieldSchema::one_hot(vec![3, 0]).is_err());
    }

    proptest! {
        #[test]
        fn svm_encode_decode_round_trip(rows in prop::collection::vec(
            (0u8..2, prop::collection::vec(0u64..50, 3)), 1..40)
        ) {
            let text: String = rows
                .iter()
                .map(|(y, feats)| {
                    let toks: Vec<String> =
                        feats.iter().enumerate().map(|(f, v)| format!("{}:{v}", f + 1)).collect();
                    format!("{y} {}\n", toks.join(" "))
                })
                .collect();
            let ds = parse_dataset(&text, DataFormat::SvmLight, None).unwrap();
            for ((y, feats), inst) in rows.iter().zip(&ds.instances) {
                prop_assert_eq!(inst.label, *y);
                let decoded = ds.vocab.decode(inst);
                for (f, v) in feats.iter().enumerate() {
                    prop_assert_eq!(decoded[f][0].clone(), Some(v.to_string()));
                    prop_assert!(inst.ids[f][0] != OOV_ID);
                }
            }
        }

        #[test]
        fn epoch_is_a_permutation_of_the_split(n in 1usize..60, bs in 1usize..9, seed in 0u64..1000) {
            let instances = (0..n).map(|i| Instance::one_hot((i % 2) as u8, &[1])).collect();
            let ds = Dataset::from_instances(FieldSchema::one_hot(vec![2]).unwrap(), instances)
                .unwrap()
                .split(SplitFractions::default(), seed)
                .unwrap();
            let mut seen: Vec<usize> = ds.batches(SplitTag::Train, bs, seed).unwrap().flatten().collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, ds.indices(SplitTag::Train));
        }
    }
}
