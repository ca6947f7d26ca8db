use aim_core::data::{Dataset, SplitFractions, SplitTag};
use aim_core::eval::evaluate;
use aim_core::interactions::{IfKind, InteractionTuple};
use aim_core::model::{HeadKind, Model, ModelConfig};
use aim_core::search::{
    analytic_param_count, build_retrain_model, run_pipeline, run_stage1, run_stage2, transfer, FieldDims,
    SearchArtifact, SearchConfig, SelectedPair,
};
use aim_core::synth::{generate, SynthConfig};
use aim_core::AimError;

fn data(fields: usize, instances: usize, seed: u64) -> Dataset {
    generate(&SynthConfig { fields, instances, planted_pairs: 3, seed, ..SynthConfig::default() })
        .unwrap()
        .dataset
        .split(SplitFractions::default(), seed)
        .unwrap()
}

fn small_config() -> SearchConfig {
    let mut cfg = SearchConfig::default();
    cfg.model.embed_dim = 4;
    cfg.model.mlp_widths = vec![8];
    cfg.stage1.epochs = 2;
    cfg.stage1.grda.lr = 0.3;
    cfg.stage2.epochs = 2;
    cfg.retrain.epochs = 2;
    cfg
}

#[test]
fn searched_architecture_transfers_across_heads() {
    let ds = data(6, 6000, 1);
    let cfg = small_config();
    let out = run_pipeline(&ds, &cfg).unwrap();
    for head in [HeadKind::Fm, HeadKind::DeepFm, HeadKind::Ipnn] {
        let s3 = transfer(&ds, &out.artifact, &cfg, head).unwrap();
        assert_eq!(s3.model.config().head, head);
        let model_cfg = ModelConfig { head, ..cfg.retrain_model_config() };
        assert_eq!(s3.param_count, analytic_param_count(&ds.schema, &out.artifact, &model_cfg));
        let report = evaluate(&s3.model, &ds, SplitTag::Test, 512).unwrap();
        assert!(report.auc > 0.5, "{head:?}: {report:?}");
    }
}

#[test]
fn artifact_from_another_schema_is_rejected() {
    let ds = data(6, 2000, 2);
    let other = data(5, 2000, 2);
    let cfg = small_config();
    let artifact = SearchArtifact::identity(&ds.schema, &cfg.model);
    let err = transfer(&other, &artifact, &cfg, HeadKind::DeepFm).unwrap_err();
    assert!(matches!(err, AimError::Validation(_)), "{err}");
}

#[test]
fn artifact_embed_dim_must_match_config() {
    let ds = data(4, 500, 3);
    let cfg = small_config();
    let artifact = SearchArtifact::identity(&ds.schema, &cfg.model);
    let wider = ModelConfig { embed_dim: 8, ..cfg.retrain_model_config() };
    assert!(matches!(build_retrain_model(&ds.schema, &artifact, &wider, 0), Err(AimError::Validation(_))));
}

#[test]
fn identity_artifact_rebuilds_the_full_model() {
    let ds = data(5, 500, 4);
    let cfg = small_config();
    let model_cfg = cfg.retrain_model_config();
    let artifact = SearchArtifact::identity(&ds.schema, &model_cfg);
    let (compact, dropped) = build_retrain_model(&ds.schema, &artifact, &model_cfg, 0).unwrap();
    assert!(dropped.is_empty());
    let terms: Vec<_> = artifact.pairs.iter().map(|p| (p.fields.clone(), p.kind, p.alpha)).collect();
    let full = Model::new(model_cfg.clone(), ds.schema.clone(), None, &terms, 0).unwrap();
    assert_eq!(compact.param_count(), full.param_count());
    assert_eq!(compact.param_count(), analytic_param_count(&ds.schema, &artifact, &model_cfg));
}

#[test]
fn empty_artifact_leaves_a_linear_model() {
    let ds = data(4, 3000, 5);
    let mut cfg = small_config();
    cfg.retrain.head = HeadKind::Fm;
    let mut artifact = SearchArtifact::identity(&ds.schema, &cfg.model);
    artifact.pairs.clear();
    let s3 = aim_core::search::run_stage3(&ds, &artifact, &cfg).unwrap();
    assert!(s3.model.terms().is_empty());
    let linear: usize = ds.schema.vocab_sizes().iter().sum::<usize>() + 1;
    let tables = ds.schema.vocab_sizes().iter().sum::<usize>() * 4 * cfg.model.if_kinds.len();
    assert_eq!(s3.param_count, linear + tables);
    assert!(evaluate(&s3.model, &ds, SplitTag::Test, 512).unwrap().logloss.is_finite());
}

#[test]
fn pairs_on_pruned_fields_are_dropped() {
    let ds = data(4, 2000, 6);
    let cfg = small_config();
    let mut artifact = SearchArtifact::identity(&ds.schema, &cfg.model);
    artifact.fields[2] = FieldDims::from_gates(3, &[0.0; 4]);
    artifact.fields[0] = FieldDims::from_gates(1, &[0.0, 1.0, 0.0, 1.0]);
    let model_cfg = cfg.retrain_model_config();
    let (model, dropped) = build_retrain_model(&ds.schema, &artifact, &model_cfg, 0).unwrap();
    assert!(dropped.iter().all(|p| p.fields.contains(2)));
    assert_eq!(dropped.len(), 3 * cfg.model.if_kinds.len());
    assert!(model.terms().iter().all(|t| !t.tuple.contains(2)));
    assert_eq!(model.layouts()[0].positions(), &[1, 3]);
    assert_eq!(model.param_count(), analytic_param_count(&ds.schema, &artifact, &model_cfg));
}

#[test]
fn overly_strong_dimension_penalty_collapses() {
    let ds = data(4, 2000, 7);
    let mut cfg = small_config();
    cfg.stage2.grda.c = 1e3;
    let s1 = run_stage1(&ds, &cfg).unwrap();
    assert!(matches!(run_stage2(&ds, &s1.selected, &cfg), Err(AimError::SearchCollapsed)));
}

#[test]
fn single_function_search() {
    let ds = data(5, 4000, 8);
    let mut cfg = small_config();
    cfg.model.if_kinds = vec![IfKind::Inner];
    let out = run_pipeline(&ds, &cfg).unwrap();
    assert!(out.artifact.pairs.iter().all(|p| p.kind == IfKind::Inner));
    assert_eq!(out.stage1.orders[0].gates, 10);
}

#[test]
fn twenty_four_fields_start_with_1104_gates() {
    let ds = data(24, 400, 9);
    let mut cfg = small_config();
    cfg.stage1.epochs = 1;
    let s1 = run_stage1(&ds, &cfg).unwrap();
    assert_eq!(s1.orders[0].candidates, 276);
    assert_eq!(s1.orders[0].gates, 1104);
}

#[test]
fn higher_orders_grow_from_surviving_tuples() {
    let ds = data(6, 3000, 10);
    let mut cfg = small_config();
    cfg.model.max_order = 3;
    cfg.model.if_kinds = vec![IfKind::Inner, IfKind::KernelMatrix];
    let s1 = run_stage1(&ds, &cfg).unwrap();
    assert_eq!(s1.orders.len(), 2);
    let third = &s1.orders[1];
    assert!(third.candidates <= 6 * 6 / 2);
    // The matrix kernel is second-order only.
    assert_eq!(third.gates, third.candidates);
    assert!(s1.selected.iter().all(|p| p.fields.order() == 2 || p.kind == IfKind::Inner));
}

#[test]
fn ipnn_search_cannot_grow_orders() {
    let ds = data(4, 500, 11);
    let mut cfg = small_config();
    cfg.model.head = HeadKind::Ipnn;
    cfg.model.max_order = 3;
    assert!(matches!(run_stage1(&ds, &cfg), Err(AimError::Config(_))));
}

#[test]
fn pipeline_is_deterministic() {
    let ds = data(5, 3000, 12);
    let cfg = small_config();
    let a = run_pipeline(&ds, &cfg).unwrap();
    let b = run_pipeline(&ds, &cfg).unwrap();
    assert_eq!(a.artifact.to_json(), b.artifact.to_json());
    assert_eq!(a.stage3.history, b.stage3.history);
    let other = run_pipeline(&ds, &SearchConfig { seed: 1, ..cfg }).unwrap();
    assert_ne!(a.stage3.history, other.stage3.history);
}

#[test]
fn artifact_json_is_one_based_and_round_trips() {
    let ds = data(3, 200, 13);
    let cfg = small_config();
    let mut artifact = SearchArtifact::identity(&ds.schema, &cfg.model);
    artifact.pairs.truncate(1);
    artifact.fields[1] = FieldDims::from_gates(2, &[0.0, 0.3, 0.0, -0.1]);
    let json = artifact.to_json();
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(value["pairs"][0]["fields"], serde_json::json!([1, 2]));
    assert_eq!(value["pairs"][0]["if"], "inner");
    assert_eq!(value["fields"][1]["map"], serde_json::json!([2, 4]));
    assert_eq!(value["fields"][1]["d_i"], 2);
    assert_eq!(SearchArtifact::from_json(&json).unwrap(), artifact);

    let bad = SelectedPair { fields: InteractionTuple::new(vec![0, 5]).unwrap(), kind: IfKind::Inner, alpha: 0.5 };
    artifact.pairs.push(bad);
    assert!(artifact.validate(&ds.schema).is_err());
}
