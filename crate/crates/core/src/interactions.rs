//! Interaction functions and the combinatorics of interaction candidates.
//!
//! An interaction of order `p` combines the embeddings of `p` distinct
//! fields into one scalar. The supported functions are
//!
//! | kind            | value                                   | parameters      |
//! |-----------------|-----------------------------------------|-----------------|
//! | `inner`         | `sum_k prod_j e_jk`                     | none            |
//! | `kernel_vector` | `sum_k phi_k prod_j e_jk`               | `phi`: `[d]`    |
//! | `kernel_scalar` | `phi * sum_k prod_j e_jk`               | `phi`: `[1]`    |
//! | `kernel_matrix` | `e_1^T Phi e_2` (order 2 only)          | `Phi`: `[d, d]` |
//! | `outer_approx`  | `prod_j (w_j^T e_j)`                    | `w`: `[p, d]`   |
//!
//! `outer_approx` is the rank-1 stand-in for a linear read-out of the full
//! outer product.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{AimError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IfKind {
    Inner,
    OuterApprox,
    KernelMatrix,
    KernelVector,
    KernelScalar,
}

impl IfKind {
    /// The four functions searched over by default.
    pub const DEFAULT_SET: [IfKind; 4] =
        [IfKind::Inner, IfKind::OuterApprox, IfKind::KernelVector, IfKind::KernelScalar];

    pub const ALL: [IfKind; 5] = [
        IfKind::Inner,
        IfKind::OuterApprox,
        IfKind::KernelMatrix,
        IfKind::KernelVector,
        IfKind::KernelScalar,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IfKind::Inner => "inner",
            IfKind::OuterApprox => "outer_approx",
            IfKind::KernelMatrix => "kernel_matrix",
            IfKind::KernelVector => "kernel_vector",
            IfKind::KernelScalar => "kernel_scalar",
        }
    }

    pub fn supports_order(self, p: usize) -> bool {
        p >= 2 && (self != IfKind::KernelMatrix || p == 2)
    }

    /// Shape of the function's own parameters, `None` when it has none.
    pub fn param_shape(self, p: usize, d: usize) -> Option<Vec<usize>> {
        match self {
            IfKind::Inner => None,
            IfKind::OuterApprox => Some(vec![p, d]),
            IfKind::KernelMatrix => Some(vec![d, d]),
            IfKind::KernelVector => Some(vec![d]),
            IfKind::KernelScalar => Some(vec![1]),
        }
    }

    pub fn param_count(self, p: usize, d: usize) -> usize {
        self.param_shape(p, d).map_or(0, |s| s.iter().product())
    }
}

impl fmt::Display for IfKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for IfKind {
    type Err = AimError;

    fn from_str(s: &str) -> Result<Self> {
        IfKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| AimError::Config(format!("unknown interaction function `{s}`")))
    }
}

/// A set of distinct fields, stored sorted ascending with 0-based indices.
/// Displayed and serialized 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InteractionTuple(Vec<usize>);

impl InteractionTuple {
    /// Canonicalizes 0-based field indices; rejects repeats and orders below 2.
    pub fn new(mut fields: Vec<usize>) -> Result<Self> {
        fields.sort_unstable();
        if fields.len() < 2 {
            return Err(AimError::Validation(format!("interaction needs at least 2 fields, got {}", fields.len())));
        }
        if fields.windows(2).any(|w| w[0] == w[1]) {
            return Err(AimError::Validation(format!("repeated field in interaction {fields:?}")));
        }
        Ok(Self(fields))
    }

    pub fn from_one_based(fields: &[usize]) -> Result<Self> {
        if fields.contains(&0) {
            return Err(AimError::Validation("field numbers are 1-based".into()));
        }
        Self::new(fields.iter().map(|f| f - 1).collect())
    }

    pub fn fields(&self) -> &[usize] {
        &self.0
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|f| f + 1).collect()
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, field: usize) -> bool {
        self.0.binary_search(&field).is_ok()
    }
}

impl fmt::Display for InteractionTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.one_based().iter().map(usize::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl Serialize for InteractionTuple {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for InteractionTuple {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        InteractionTuple::from_one_based(&v).map_err(serde::de::Error::custom)
    }
}

fn check_inputs(kind: IfKind, embs: &[&[f64]], params: &[f64]) -> Result<usize> {
    let p = embs.len();
    if !kind.supports_order(p) {
        return Err(AimError::Validation(format!("{kind} is not defined for order {p}")));
    }
    let d = embs[0].len();
    if embs.iter().any(|e| e.len() != d) {
        return Err(AimError::Shape("interaction embeddings differ in length".into()));
    }
    let want = kind.param_count(p, d);
    if params.len() != want {
        return Err(AimError::Shape(format!("{kind} needs {want} parameters, got {}", params.len())));
    }
    Ok(d)
}

#[inline]
fn prod_at(embs: &[&[f64]], k: usize) -> f64 {
    embs.iter().map(|e| e[k]).product()
}

#[inline]
fn prod_except(embs: &[&[f64]], skip: usize, k: usize) -> f64 {
    embs.iter().enumerate().filter(|(j, _)| *j != skip).map(|(_, e)| e[k]).product()
}

/// Evaluates an interaction function on `p` embeddings of equal length.
pub fn if_forward(kind: IfKind, embs: &[&[f64]], params: &[f64]) -> Result<f64> {
    let d = check_inputs(kind, embs, params)?;
    Ok(forward_unchecked(kind, embs, params, d))
}

pub(crate) fn forward_unchecked(kind: IfKind, embs: &[&[f64]], params: &[f64], d: usize) -> f64 {
    match kind {
        IfKind::Inner => (0..d).map(|k| prod_at(embs, k)).sum(),
        IfKind::KernelVector => (0..d).map(|k| params[k] * prod_at(embs, k)).sum(),
        IfKind::KernelScalar => params[0] * (0..d).map(|k| prod_at(embs, k)).sum::<f64>(),
        IfKind::KernelMatrix => {
            let (a, b) = (embs[0], embs[1]);
            (0..d)
                .map(|r| a[r] * (0..d).map(|c| params[r * d + c] * b[c]).sum::<f64>())
                .sum()
        }
        IfKind::OuterApprox => embs
            .iter()
            .enumerate()
            .map(|(j, e)| params[j * d..(j + 1) * d].iter().zip(*e).map(|(w, x)| w * x).sum::<f64>())
            .product(),
    }
}

/// Accumulates `upstream * d f / d(inputs)` into `emb_grads` (flat `[p, d]`)
/// and `param_grads`.
pub fn if_backward(
    kind: IfKind,
    embs: &[&[f64]],
    params: &[f64],
    upstream: f64,
    emb_grads: &mut [f64],
    param_grads: &mut [f64],
) -> Result<()> {
    let d = check_inputs(kind, embs, params)?;
    if emb_grads.len() != embs.len() * d {
        return Err(AimError::Shape("embedding gradient buffer has the wrong length".into()));
    }
    if param_grads.len() != params.len() {
        return Err(AimError::Shape("parameter gradient buffer has the wrong length".into()));
    }
    backward_unchecked(kind, embs, params, upstream, emb_grads, param_grads, d);
    Ok(())
}

pub(crate) fn backward_unchecked(
    kind: IfKind,
    embs: &[&[f64]],
    params: &[f64],
    upstream: f64,
    emb_grads: &mut [f64],
    param_grads: &mut [f64],
    d: usize,
) {
    let p = embs.len();
    match kind {
        IfKind::Inner | IfKind::KernelVector | IfKind::KernelScalar => {
            let scale = |k: usize| match kind {
                IfKind::Inner => 1.0,
                IfKind::KernelVector => params[k],
                _ => params[0],
            };
            for k in 0..d {
                let s = upstream * scale(k);
                for j in 0..p {
                    emb_grads[j * d + k] += s * prod_except(embs, j, k);
                }
            }
            match kind {
                IfKind::KernelVector => {
                    for k in 0..d {
                        param_grads[k] += upstream * prod_at(embs, k);
                    }
                }
                IfKind::KernelScalar => {
                    param_grads[0] += upstream * (0..d).map(|k| prod_at(embs, k)).sum::<f64>();
                }
                _ => {}
            }
        }
        IfKind::KernelMatrix => {
            let (a, b) = (embs[0], embs[1]);
            for r in 0..d {
                for c in 0..d {
                    let phi = params[r * d + c];
                    emb_grads[r] += upstream * phi * b[c];
                    emb_grads[d + c] += upstream * phi * a[r];
                    param_grads[r * d + c] += upstream * a[r] * b[c];
                }
            }
        }
        IfKind::OuterApprox => {
            let proj: Vec<f64> = embs
                .iter()
                .enumerate()
                .map(|(j, e)| params[j * d..(j + 1) * d].iter().zip(*e).map(|(w, x)| w * x).sum())
                .collect();
            for j in 0..p {
                let others: f64 = proj.iter().enumerate().filter(|(l, _)| *l != j).map(|(_, v)| v).product();
                let s = upstream * others;
                for k in 0..d {
                    emb_grads[j * d + k] += s * params[j * d + k];
                    param_grads[j * d + k] += s * embs[j][k];
                }
            }
        }
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// All field pairs `i < j` in lexicographic order.
pub fn enumerate_second_order(n: usize) -> Vec<InteractionTuple> {
    let mut out = Vec::with_capacity(binomial(n, 2));
    for i in 0..n {
        for j in i + 1..n {
            out.push(InteractionTuple(vec![i, j]));
        }
    }
    out
}

/// Extends each parent tuple by every single field it does not already
/// contain; the result is canonical, deduplicated and sorted.
pub fn combine(top_prev: &[InteractionTuple], singles: &[usize]) -> Vec<InteractionTuple> {
    let mut pool = BTreeSet::new();
    for parent in top_prev {
        for &f in singles {
            if parent.contains(f) {
                continue;
            }
            let mut fields = parent.0.clone();
            let pos = fields.binary_search(&f).unwrap_err();
            fields.insert(pos, f);
            pool.insert(InteractionTuple(fields));
        }
    }
    pool.into_iter().collect()
}

/// The `k` tuples with largest `|alpha|`; ties go to the lexicographically
/// smaller tuple.
pub fn top_k_by_alpha(scored: &[(InteractionTuple, f64)], k: usize) -> Vec<InteractionTuple> {
    let mut sorted: Vec<&(InteractionTuple, f64)> = scored.iter().collect();
    sorted.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then_with(|| a.0.cmp(&b.0)));
    sorted.into_iter().take(k).map(|(t, _)| t.clone()).collect()
}
