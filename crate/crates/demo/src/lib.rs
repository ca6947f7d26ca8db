//! Browser demo: GRDA gate trajectories, candidate pool sizes and a small
//! interaction search, exported through wasm-bindgen. Every export returns
//! a JSON string.

use aim_core::data::SplitFractions;
use aim_core::interactions::{binomial, combine, enumerate_second_order, InteractionTuple};
use aim_core::numerics::{grda_step, grda_threshold, GrdaConfig, GrdaState};
use aim_core::search::{run_stage1, SearchConfig};
use aim_core::synth::{generate, SynthConfig};
use aim_core::AimError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize, PartialEq)]
pub struct GrdaPoint {
    pub t: u64,
    pub gate: f64,
    pub threshold: f64,
}

/// Gate path under GRDA when gradients are `mean + noise * N(0, 1)`.
pub fn grda_trajectory(
    alpha0: f64,
    mean: f64,
    noise: f64,
    cfg: GrdaConfig,
    steps: u64,
    seed: u64,
) -> Result<Vec<GrdaPoint>, AimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = GrdaState::new(vec![alpha0]);
    let mut path = vec![GrdaPoint { t: 0, gate: alpha0, threshold: 0.0 }];
    for _ in 0..steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        let threshold = grda_threshold(state.t, &cfg);
        let gate = grda_step(&mut state, &[mean + noise * z], &cfg)?[0];
        path.push(GrdaPoint { t: state.t, gate, threshold });
    }
    Ok(path)
}

#[derive(Debug, Serialize, PartialEq)]
pub struct PoolRow {
    pub order: usize,
    pub enumerated: usize,
    pub pool: usize,
    pub bound: usize,
}

/// Candidate counts per order when the first `floor(n/2)` tuples of each
/// order seed the next, against full enumeration.
pub fn pool_sizes(n: usize, max_order: usize) -> Vec<PoolRow> {
    let singles: Vec<usize> = (0..n).collect();
    let mut parents = enumerate_second_order(n);
    let mut rows = vec![PoolRow { order: 2, enumerated: binomial(n, 2), pool: parents.len(), bound: n * n / 2 }];
    for order in 3..=max_order.min(n) {
        parents.truncate(n / 2);
        let pool = combine(&parents, &singles);
        rows.push(PoolRow { order, enumerated: binomial(n, order), pool: pool.len(), bound: n * n / 2 });
        parents = pool;
    }
    rows
}

#[derive(Debug, Serialize)]
pub struct SearchSummary {
    pub planted: Vec<InteractionTuple>,
    pub selected: Vec<(InteractionTuple, f64)>,
    pub recall: f64,
    pub pruned: f64,
}

/// Stage-1 search on a small synthetic dataset with five planted pairs.
pub fn search(fields: usize, instances: usize, c: f64, seed: u64) -> Result<SearchSummary, AimError> {
    let synth = generate(&SynthConfig { fields, instances, seed, ..SynthConfig::default() })?;
    let planted: Vec<InteractionTuple> = synth.manifest.planted.iter().map(|p| p.fields.clone()).collect();
    let data = synth.dataset.split(SplitFractions::default(), seed)?;
    let mut cfg = SearchConfig { seed, ..SearchConfig::default() };
    cfg.model.embed_dim = 4;
    cfg.stage1.epochs = 4;
    cfg.stage1.batch_size = 64;
    cfg.stage1.grda = GrdaConfig { lr: 0.3, c, ..GrdaConfig::default() };
    let out = run_stage1(&data, &cfg)?;
    let mut selected: Vec<(InteractionTuple, f64)> = Vec::new();
    for p in &out.selected {
        match selected.iter_mut().find(|(t, _)| *t == p.fields) {
            Some(entry) => entry.1 = entry.1.max(p.alpha.abs()),
            None => selected.push((p.fields.clone(), p.alpha.abs())),
        }
    }
    let hits = planted.iter().filter(|p| selected.iter().any(|(t, _)| t == *p)).count();
    let total = binomial(fields, 2);
    Ok(SearchSummary {
        recall: hits as f64 / planted.len() as f64,
        pruned: 1.0 - selected.len() as f64 / total as f64,
        planted,
        selected,
    })
}

fn to_js<T: Serialize>(value: Result<T, AimError>) -> Result<String, JsError> {
    let value = value.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&value).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = grdaTrajectory)]
#[allow(clippy::too_many_arguments)]
pub fn grda_trajectory_js(
    alpha0: f64,
    mean: f64,
    noise: f64,
    lr: f64,
    c: f64,
    mu: f64,
    steps: u32,
    seed: u32,
) -> Result<String, JsError> {
    to_js(grda_trajectory(alpha0, mean, noise, GrdaConfig { lr, c, mu }, u64::from(steps), u64::from(seed)))
}

#[wasm_bindgen(js_name = poolSizes)]
pub fn pool_sizes_js(n: u32, max_order: u32) -> Result<String, JsError> {
    to_js(Ok(pool_sizes(n as usize, max_order as usize)))
}

#[wasm_bindgen(js_name = searchInteractions)]
pub fn search_js(fields: u32, instances: u32, c: f64, seed: u32) -> Result<String, JsError> {
    to_js(search(fields as usize, instances as usize, c, u64::from(seed)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mean_gradients_close_the_gate() {
        let cfg = GrdaConfig { lr: 0.1, c: 0.5, mu: 0.6 };
        let path = grda_trajectory(0.25, 0.0, 0.01, cfg, 400, 1).unwrap();
        assert_eq!(path.len(), 401);
        assert_eq!(path.last().unwrap().gate, 0.0);
        let strong = grda_trajectory(0.25, -0.5, 0.01, cfg, 400, 1).unwrap();
        assert!(strong.last().unwrap().gate > 1.0);
    }

    #[test]
    fn invalid_settings_are_reported() {
        let cfg = GrdaConfig { lr: 0.1, c: 0.5, mu: 1.5 };
        assert!(grda_trajectory(0.25, 0.0, 0.0, cfg, 10, 1).is_err());
    }

    #[test]
    fn pools_stay_quadratic() {
        let rows = pool_sizes(24, 5);
        assert_eq!(rows[0].pool, 276);
        assert!(rows[1..].iter().all(|r| r.pool <= r.bound && r.pool < r.enumerated));
    }

    #[test]
    fn small_search_finds_planted_pairs() {
        let s = search(8, 20_000, 0.05, 0).unwrap();
        assert!(s.recall >= 0.6 && s.pruned > 0.3, "{s:?}");
        assert!(s.selected.windows(2).all(|w| w[0].0 != w[1].0));
    }
}
