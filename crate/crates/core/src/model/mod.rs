//! The gated factorization model.
//!
//! ```text
//! e'_ik  = beta_i * widen_i( sum_{id in x_i} V_ik[id] )          embedding layer
//! l      = <w, x> + sum_{(q, k)} alpha'_(q,k) * BN( f_k(e'_q1k, ..., e'_qpk) )
//! logit  = l                      (fm)
//!        | l + MLP(E')            (deepfm)
//!        | MLP([E', gated terms]) (ipnn)
//! ```
//!
//! `widen_i` scatters a field's retained dimensions back to their original
//! positions and zero-fills the rest, so interaction functions always see
//! vectors of the base embedding size. The MLP reads the compact vectors.
//!
//! Forward and backward passes are written out by hand; the forward pass is
//! pure and returns a [`ForwardCache`] that the backward pass consumes.

mod config;
mod mlp;

pub use config::{EmbeddingMode, GateModes, HeadKind, ModelConfig};
pub use mlp::{Mlp, MlpCache};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{FieldSchema, Instance};
use crate::interactions::{backward_unchecked, forward_unchecked, IfKind, InteractionTuple};
use crate::numerics::{
    ops, BatchNorm, BnCache, BnMode, OptimizerSettings, OptimizerTag, ParamId, ParameterStore, Tensor,
};
use crate::{AimError, Result};

const EMBEDDING_INIT_STD: f64 = 0.01;

/// Retained embedding positions of one field (0-based, strictly increasing).
/// Compact position `c` holds original position `positions[c]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldLayout {
    positions: Vec<usize>,
}

impl FieldLayout {
    pub fn full(d: usize) -> Self {
        Self { positions: (0..d).collect() }
    }

    pub fn new(positions: Vec<usize>, d: usize) -> Result<Self> {
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AimError::Validation(format!("positions {positions:?} are not strictly increasing")));
        }
        if positions.last().is_some_and(|&p| p >= d) {
            return Err(AimError::Validation(format!("position out of range for embedding size {d}")));
        }
        Ok(Self { positions })
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn width(&self) -> usize {
        self.positions.len()
    }

    /// Scatter to full width, zeros elsewhere.
    pub fn widen(&self, compact: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (&p, &v) in self.positions.iter().zip(compact) {
            out[p] = v;
        }
    }

    pub fn gather(&self, wide: &[f64]) -> Vec<f64> {
        self.positions.iter().map(|&p| wide[p]).collect()
    }
}

/// One gated (interaction, function) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub tuple: InteractionTuple,
    pub kind: IfKind,
    pub alpha: ParamId,
    pub params: Option<ParamId>,
    pub bn: BatchNorm,
    slot: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    config: ModelConfig,
    schema: FieldSchema,
    layouts: Vec<FieldLayout>,
    store: ParameterStore,
    tables: Vec<Vec<Option<ParamId>>>,
    beta: Vec<Option<ParamId>>,
    linear: Vec<ParamId>,
    bias: ParamId,
    terms: Vec<Term>,
    mlp: Option<Mlp>,
    seed: u64,
    #[serde(skip)]
    version: u64,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    mode: BnMode,
    ids: Vec<Vec<Vec<u32>>>,
    labels: Vec<f64>,
    raw_emb: Vec<f64>,
    gated_emb: Vec<f64>,
    term_z: Vec<Vec<f64>>,
    term_bn: Vec<Option<BnCache>>,
    /// Gated per-term outputs `alpha' * BN(f)`, indexed `[term][instance]`.
    pub term_out: Vec<Vec<f64>>,
    /// Interaction-layer output `l` per instance.
    pub interaction: Vec<f64>,
    mlp: Vec<MlpCache>,
    pub logits: Vec<f64>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.logits.len()
    }

    pub fn mode(&self) -> BnMode {
        self.mode
    }

    /// Mean cross-entropy of the batch.
    pub fn loss(&self) -> f64 {
        let n = self.logits.len() as f64;
        self.logits.iter().zip(&self.labels).map(|(&z, &y)| bce_with_logit(z, y)).sum::<f64>() / n
    }
}

/// Cross-entropy computed from the logit: `max(z,0) - z y + ln(1 + e^{-|z|})`.
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

impl Model {
    /// Builds a model with freshly initialized parameters.
    ///
    /// `layouts` defaults to every field keeping all `embed_dim` positions.
    /// Each term is `(tuple, function, initial alpha')`.
    pub fn new(
        config: ModelConfig,
        schema: FieldSchema,
        layouts: Option<Vec<FieldLayout>>,
        terms: &[(InteractionTuple, IfKind, f64)],
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let n = schema.field_count();
        let d = config.embed_dim;
        let layouts = layouts.unwrap_or_else(|| vec![FieldLayout::full(d); n]);
        if layouts.len() != n {
            return Err(AimError::Validation(format!("{} layouts for {n} fields", layouts.len())));
        }
        if layouts.iter().any(|l| l.positions.last().is_some_and(|&p| p >= d)) {
            return Err(AimError::Validation("layout position beyond embedding size".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, EMBEDDING_INIT_STD).expect("valid std");
        let mut store = ParameterStore::new();
        let slot_names: Vec<String> = match config.embedding_mode {
            EmbeddingMode::FunctionWise => config.if_kinds.iter().map(|k| k.to_string()).collect(),
            EmbeddingMode::Shared => vec!["shared".to_string()],
        };
        let mut tables = Vec::with_capacity(n);
        for (f, layout) in layouts.iter().enumerate() {
            let h = schema.vocab_size(f);
            let w = layout.width();
            let row: Vec<Option<ParamId>> = slot_names
                .iter()
                .map(|slot| {
                    (w > 0).then(|| {
                        let vals = (0..h * w).map(|_| normal.sample(&mut rng)).collect();
                        store.register(
                            format!("emb.f{}.{slot}", f + 1),
                            Tensor::from_vec(&[h, w], vals).expect("sized"),
                            OptimizerTag::Adam,
                        )
                    })
                })
                .collect();
            tables.push(row);
        }
        let beta = (0..n)
            .map(|f| {
                config.gates.beta.map(|tag| {
                    store.register(format!("beta.f{}", f + 1), Tensor::filled(&[d], 1.0), tag)
                })
            })
            .collect();
        let linear = (0..n)
            .map(|f| {
                store.register(
                    format!("linear.f{}", f + 1),
                    Tensor::zeros(&[schema.vocab_size(f)]),
                    OptimizerTag::Adam,
                )
            })
            .collect();
        let bias = store.register("bias", Tensor::scalar(0.0), OptimizerTag::Adam);
        let mut model = Self {
            config,
            schema,
            layouts,
            store,
            tables,
            beta,
            linear,
            bias,
            terms: Vec::new(),
            mlp: None,
            seed,
            version: 0,
        };
        model.push_terms(terms, &mut rng)?;
        if model.config.head.has_mlp() {
            let width = model.mlp_input_width();
            let hidden = model.config.mlp_widths.clone();
            model.mlp = Some(Mlp::new(&mut model.store, width, &hidden, &mut rng));
        }
        Ok(model)
    }

    /// Default initial value for interaction gates: `1 / m`.
    pub fn default_alpha(config: &ModelConfig) -> f64 {
        1.0 / config.if_kinds.len() as f64
    }

    fn push_terms(&mut self, terms: &[(InteractionTuple, IfKind, f64)], rng: &mut ChaCha8Rng) -> Result<()> {
        let d = self.config.embed_dim;
        let n = self.schema.field_count();
        for (tuple, kind, alpha0) in terms {
            let p = tuple.order();
            if p > self.config.max_order {
                return Err(AimError::Validation(format!("{tuple} exceeds max order {}", self.config.max_order)));
            }
            if !kind.supports_order(p) {
                return Err(AimError::Validation(format!("{kind} cannot model order-{p} {tuple}")));
            }
            if tuple.fields().iter().any(|&f| f >= n) {
                return Err(AimError::Validation(format!("{tuple} references a field beyond {n}")));
            }
            if self.terms.iter().any(|t| t.tuple == *tuple && t.kind == *kind) {
                return Err(AimError::Validation(format!("duplicate term {tuple} {kind}")));
            }
            let slot = self
                .config
                .slot_of(*kind)
                .ok_or_else(|| AimError::Validation(format!("{kind} is not in the configured set")))?;
            let alpha = self.store.register(
                format!("alpha.{tuple}.{kind}"),
                Tensor::scalar(*alpha0),
                self.config.gates.alpha,
            );
            let params = kind.param_shape(p, d).map(|shape| {
                let values = match kind {
                    IfKind::OuterApprox => {
                        let normal = Normal::new(0.0, 1.0 / (d as f64).sqrt()).expect("valid std");
                        (0..p * d).map(|_| normal.sample(rng)).collect()
                    }
                    IfKind::KernelMatrix => {
                        (0..d * d).map(|i| if i / d == i % d { 1.0 } else { 0.0 }).collect()
                    }
                    _ => vec![1.0; shape.iter().product()],
                };
                self.store.register(
                    format!("if.{tuple}.{kind}"),
                    Tensor::from_vec(&shape, values).expect("sized"),
                    OptimizerTag::Adam,
                )
            });
            self.terms.push(Term { tuple: tuple.clone(), kind: *kind, alpha, params, bn: BatchNorm::default(), slot });
        }
        Ok(())
    }

    /// Adds gated terms to a model whose MLP input does not depend on them.
    pub fn add_terms(&mut self, terms: &[(InteractionTuple, IfKind, f64)]) -> Result<()> {
        if self.config.head == HeadKind::Ipnn {
            return Err(AimError::Config("terms cannot be added to an ipnn head after construction".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (self.terms.len() as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        self.push_terms(terms, &mut rng)?;
        self.version += 1;
        Ok(())
    }

    fn mlp_input_width(&self) -> usize {
        let e: usize = self.layouts.iter().map(FieldLayout::width).sum();
        match self.config.head {
            HeadKind::Ipnn => e + self.terms.len(),
            _ => e,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn schema(&self) -> &FieldSchema {
        &self.schema
    }

    pub fn layouts(&self) -> &[FieldLayout] {
        &self.layouts
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn terms_mut(&mut self) -> &mut [Term] {
        &mut self.terms
    }

    pub fn store(&self) -> &ParameterStore {
        &self.store
    }

    /// Mutable access to parameters; invalidates outstanding caches.
    pub fn store_mut(&mut self) -> &mut ParameterStore {
        self.version += 1;
        &mut self.store
    }

    pub fn mlp(&self) -> Option<&Mlp> {
        self.mlp.as_ref()
    }

    pub fn table(&self, field: usize, slot: usize) -> Option<ParamId> {
        self.tables[field][slot]
    }

    pub fn beta(&self, field: usize) -> Option<ParamId> {
        self.beta[field]
    }

    pub fn alpha_value(&self, term: usize) -> f64 {
        self.store.value(self.terms[term].alpha)[0]
    }

    pub fn param_count(&self) -> usize {
        self.store.scalar_count(None)
    }

    /// Copies every parameter whose name and shape match, plus batch-norm
    /// statistics of matching terms. Returns the number of parameters copied.
    pub fn load_matching(&mut self, other: &Model) -> usize {
        let mut copied = 0;
        let pairs: Vec<(ParamId, ParamId)> = self
            .store
            .iter()
            .filter_map(|(id, p)| {
                other
                    .store
                    .find(&p.name)
                    .filter(|&o| other.store.get(o).value.shape() == p.value.shape())
                    .map(|o| (id, o))
            })
            .collect();
        for (mine, theirs) in pairs {
            self.store.value_mut(mine).copy_from_slice(other.store.value(theirs));
            copied += 1;
        }
        for t in &mut self.terms {
            if let Some(o) = other.terms.iter().find(|o| o.tuple == t.tuple && o.kind == t.kind) {
                t.bn = o.bn.clone();
            }
        }
        self.version += 1;
        copied
    }

    fn emb_index(&self, b: usize, f: usize, s: usize) -> usize {
        let n = self.schema.field_count();
        let slots = self.config.table_slots();
        ((b * n + f) * slots + s) * self.config.embed_dim
    }

    /// Forward pass over a batch. Pure: batch-norm running statistics are
    /// only folded in by [`Model::commit_batch_stats`].
    pub fn forward(&self, batch: &[&Instance], mode: BnMode) -> Result<ForwardCache> {
        let n = self.schema.field_count();
        let d = self.config.embed_dim;
        let slots = self.config.table_slots();
        let bsz = batch.len();
        for inst in batch {
            self.schema.validate(inst)?;
        }
        let mut raw_emb = vec![0.0; bsz * n * slots * d];
        let mut gated_emb = vec![0.0; bsz * n * slots * d];
        let mut lin = vec![0.0; bsz];
        let bias = self.store.value(self.bias)[0];
        for (b, inst) in batch.iter().enumerate() {
            let mut acc = bias;
            for f in 0..n {
                let w = self.store.value(self.linear[f]);
                for &id in &inst.ids[f] {
                    acc += w[id as usize];
                }
                let layout = &self.layouts[f];
                let width = layout.width();
                for s in 0..slots {
                    let Some(table) = self.tables[f][s] else { continue };
                    let tv = self.store.value(table);
                    let mut compact = vec![0.0; width];
                    for &id in &inst.ids[f] {
                        let row = &tv[id as usize * width..(id as usize + 1) * width];
                        for (c, v) in compact.iter_mut().zip(row) {
                            *c += v;
                        }
                    }
                    let at = self.emb_index(b, f, s);
                    layout.widen(&compact, &mut raw_emb[at..at + d]);
                    match self.beta[f] {
                        Some(beta) => {
                            let bv = self.store.value(beta);
                            for k in 0..d {
                                gated_emb[at + k] = raw_emb[at + k] * bv[k];
                            }
                        }
                        None => gated_emb[at..at + d].copy_from_slice(&raw_emb[at..at + d]),
                    }
                }
            }
            lin[b] = acc;
        }

        let mut term_z = Vec::with_capacity(self.terms.len());
        let mut term_bn = Vec::with_capacity(self.terms.len());
        let mut term_out = Vec::with_capacity(self.terms.len());
        let mut interaction = lin;
        for term in &self.terms {
            let params = term.params.map(|p| self.store.value(p)).unwrap_or(&[]);
            let raw: Vec<f64> = (0..bsz)
                .map(|b| {
                    let embs: Vec<&[f64]> = term
                        .tuple
                        .fields()
                        .iter()
                        .map(|&f| {
                            let at = self.emb_index(b, f, term.slot);
                            &gated_emb[at..at + d]
                        })
                        .collect();
                    forward_unchecked(term.kind, &embs, params, d)
                })
                .collect();
            let (z, cache) = if self.config.batch_norm {
                let c = term.bn.forward(&raw, mode)?;
                (c.out.clone(), Some(c))
            } else {
                (raw, None)
            };
            let alpha = self.store.value(term.alpha)[0];
            let out: Vec<f64> = z.iter().map(|v| alpha * v).collect();
            for (acc, o) in interaction.iter_mut().zip(&out) {
                *acc += o;
            }
            term_z.push(z);
            term_bn.push(cache);
            term_out.push(out);
        }

        let mut logits = interaction.clone();
        let mut mlp_caches = Vec::new();
        if let Some(mlp) = &self.mlp {
            for b in 0..bsz {
                let mut input = Vec::with_capacity(mlp.input_width);
                for (f, layout) in self.layouts.iter().enumerate() {
                    let at = self.emb_index(b, f, 0);
                    input.extend(layout.positions().iter().map(|&p| gated_emb[at + p]));
                }
                if self.config.head == HeadKind::Ipnn {
                    input.extend(term_out.iter().map(|o| o[b]));
                }
                let (y, cache) = mlp.forward(&self.store, input)?;
                logits[b] = match self.config.head {
                    HeadKind::Ipnn => y,
                    _ => interaction[b] + y,
                };
                mlp_caches.push(cache);
            }
        }

        Ok(ForwardCache {
            version: self.version,
            mode,
            ids: batch.iter().map(|i| i.ids.clone()).collect(),
            labels: batch.iter().map(|i| f64::from(i.label)).collect(),
            raw_emb,
            gated_emb,
            term_z,
            term_bn,
            term_out,
            interaction,
            mlp: mlp_caches,
            logits,
        })
    }

    /// Accumulates gradients of the mean batch loss into every parameter.
    pub fn backward(&mut self, cache: &ForwardCache) -> Result<()> {
        if cache.version != self.version {
            return Err(AimError::StaleCache);
        }
        let n = self.schema.field_count();
        let d = self.config.embed_dim;
        let slots = self.config.table_slots();
        let bsz = cache.batch_size();
        let inv_b = 1.0 / bsz as f64;
        let dlogit: Vec<f64> = cache
            .logits
            .iter()
            .zip(&cache.labels)
            .map(|(&z, &y)| (ops::sigmoid(z) - y) * inv_b)
            .collect();
        let dl: Vec<f64> = match self.config.head {
            HeadKind::Ipnn => vec![0.0; bsz],
            _ => dlogit.clone(),
        };
        let mut dterm: Vec<Vec<f64>> = vec![dl.clone(); self.terms.len()];
        let mut d_gated = vec![0.0; cache.gated_emb.len()];

        if let Some(mlp) = &self.mlp {
            for b in 0..bsz {
                let dinput = mlp.backward(&mut self.store, &cache.mlp[b], dlogit[b])?;
                let mut c = 0;
                for f in 0..n {
                    let at = ((b * n + f) * slots) * d;
                    for &p in self.layouts[f].positions() {
                        d_gated[at + p] += dinput[c];
                        c += 1;
                    }
                }
                if self.config.head == HeadKind::Ipnn {
                    for (t, dt) in dterm.iter_mut().enumerate() {
                        dt[b] = dinput[c + t];
                    }
                }
            }
        }

        let dbias: f64 = dl.iter().sum();
        self.store.grad_mut(self.bias)[0] += dbias;
        for (b, ids) in cache.ids.iter().enumerate() {
            for f in 0..n {
                let g = self.store.grad_mut(self.linear[f]);
                for &id in &ids[f] {
                    g[id as usize] += dl[b];
                }
            }
        }

        let mut emb_buf = Vec::new();
        for (t, term) in self.terms.iter().enumerate() {
            let z = &cache.term_z[t];
            let dout = &dterm[t];
            let alpha = self.store.value(term.alpha)[0];
            let dalpha: f64 = dout.iter().zip(z).map(|(a, b)| a * b).sum();
            self.store.grad_mut(term.alpha)[0] += dalpha;
            let dz: Vec<f64> = dout.iter().map(|g| g * alpha).collect();
            let draw = match &cache.term_bn[t] {
                Some(bn) => BatchNorm::backward(bn, &dz),
                None => dz,
            };
            let p = term.tuple.order();
            emb_buf.resize(p * d, 0.0);
            let mut no_params: [f64; 0] = [];
            let (params, pgrad): (&[f64], &mut [f64]) = match term.params {
                Some(id) => self.store.value_and_grad_mut(id),
                None => (&[], &mut no_params),
            };
            for b in 0..bsz {
                if draw[b] == 0.0 {
                    continue;
                }
                let embs: Vec<&[f64]> = term
                    .tuple
                    .fields()
                    .iter()
                    .map(|&f| {
                        let at = ((b * n + f) * slots + term.slot) * d;
                        &cache.gated_emb[at..at + d]
                    })
                    .collect();
                emb_buf.iter_mut().for_each(|v| *v = 0.0);
                backward_unchecked(term.kind, &embs, params, draw[b], &mut emb_buf, pgrad, d);
                for (j, &f) in term.tuple.fields().iter().enumerate() {
                    let at = ((b * n + f) * slots + term.slot) * d;
                    for k in 0..d {
                        d_gated[at + k] += emb_buf[j * d + k];
                    }
                }
            }
        }

        for (b, ids) in cache.ids.iter().enumerate() {
            for f in 0..n {
                let layout = &self.layouts[f];
                for s in 0..slots {
                    let Some(table) = self.tables[f][s] else { continue };
                    let at = ((b * n + f) * slots + s) * d;
                    let dg = &d_gated[at..at + d];
                    let draw: Vec<f64> = match self.beta[f] {
                        Some(beta) => {
                            let raw = &cache.raw_emb[at..at + d];
                            let (bv, bg) = self.store.value_and_grad_mut(beta);
                            for k in 0..d {
                                bg[k] += dg[k] * raw[k];
                            }
                            dg.iter().zip(bv).map(|(g, bk)| g * bk).collect()
                        }
                        None => dg.to_vec(),
                    };
                    let width = layout.width();
                    let tg = self.store.grad_mut(table);
                    for &id in &ids[f] {
                        let row = &mut tg[id as usize * width..(id as usize + 1) * width];
                        for (c, &p) in layout.positions().iter().enumerate() {
                            row[c] += draw[p];
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Folds train-mode batch statistics into each term's running estimates.
    pub fn commit_batch_stats(&mut self, cache: &ForwardCache) {
        for (term, bn) in self.terms.iter_mut().zip(&cache.term_bn) {
            if let Some(bn) = bn {
                term.bn.update(bn);
            }
        }
    }

    /// Forward, backward, optimizer step. Returns the batch loss.
    pub fn train_step(&mut self, batch: &[&Instance], settings: &OptimizerSettings) -> Result<f64> {
        let cache = self.forward(batch, BnMode::Train)?;
        let loss = cache.loss();
        self.backward(&cache)?;
        self.commit_batch_stats(&cache);
        let stepped = self.store.step(settings);
        if stepped.is_err() {
            self.store.zero_grads();
        }
        self.version += 1;
        stepped.map(|_| loss)
    }

    /// Eval-mode logits.
    pub fn predict_logits(&self, batch: &[&Instance]) -> Result<Vec<f64>> {
        Ok(self.forward(batch, BnMode::Eval)?.logits)
    }

    pub fn zero_grads(&mut self) {
        self.store.zero_grads();
    }

    /// Gradients of one named parameter.
    pub fn grad(&self, id: ParamId) -> &[f64] {
        self.store.grad(id)
    }
}
