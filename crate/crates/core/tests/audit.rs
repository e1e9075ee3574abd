mod common;

use std::fs;
use std::path::Path;

use fcm_audit::audit::{
    build_activation_vector, rank_features, rank_of, run_audit, select_instances, write_artifacts, ActivationMode,
    AuditConfig,
};
use fcm_audit::dataset::{Dataset, FeatureSchema};
use fcm_audit::forest::{fit_forest, ForestConfig, MaxFeatures, SplitCriterion};
use fcm_audit::shapley::{ShapExplanation, ShapMethod};
use fcm_audit::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn expl(a: Vec<f64>) -> ShapExplanation {
    ShapExplanation {
        attributions: a,
        base_value: 0.0,
        prediction: 0.0,
        target_class: 0,
        method: ShapMethod::Exact,
    }
}

#[test]
fn activation_modes() {
    let e = expl(vec![-0.2, 0.1, 0.0]);
    assert_eq!(
        build_activation_vector(&e, ActivationMode::Absolute).0 .0,
        vec![0.2, 0.1, 0.0]
    );
    assert_eq!(
        build_activation_vector(&e, ActivationMode::Signed).0 .0,
        vec![-0.2, 0.1, 0.0]
    );
    assert_eq!(
        build_activation_vector(&e, ActivationMode::MaxNormalized).0 .0,
        vec![1.0, 0.5, 0.0]
    );
    let (zero, flag) = build_activation_vector(&expl(vec![0.0; 3]), ActivationMode::MaxNormalized);
    assert!(flag && zero.is_zero());
}

#[test]
fn ranking_keeps_feature_order_on_ties() {
    let ids: Vec<String> = ["F1", "F2", "F3"].iter().map(|s| s.to_string()).collect();
    let r = rank_features(&ids, &[0.5, 0.9, 0.5]);
    assert_eq!(r, vec!["F2", "F1", "F3"]);
    assert_eq!(rank_of(&r, "F3"), Some(3));
    assert_eq!(rank_of(&r, "F9"), None);
}

fn threshold_data(n: usize) -> Dataset {
    let schema = vec![FeatureSchema::numeric("x", "F1")];
    let rows = (0..n).map(|i| vec![i as f64]).collect();
    let labels = (0..n).map(|i| usize::from(i >= n / 2)).collect();
    Dataset::new(schema, rows, labels, vec!["lo".into(), "hi".into()]).unwrap()
}

#[test]
fn selection_picks_correct_rows_of_each_class() {
    let ds = threshold_data(40);
    let model = fit_forest(&ds, &ForestConfig::new(10, SplitCriterion::Gini, MaxFeatures::All, 0)).unwrap();
    let sel = select_instances(&model, &ds, 1, 3).unwrap();
    assert_eq!(sel.len(), 2);
    assert_eq!(sel[0].class, 1);
    assert_eq!(ds.labels()[sel[0].row], 1);
    assert_eq!(sel[1].class, 0);
    assert_eq!(ds.labels()[sel[1].row], 0);
    assert_eq!(sel, select_instances(&model, &ds, 1, 3).unwrap());
}

#[test]
fn selection_without_a_correct_row_names_the_class() {
    let schema = vec![FeatureSchema::numeric("x", "F1")];
    let rows = (0..10).map(|i| vec![i as f64]).collect();
    let only_lo = Dataset::new(schema, rows, vec![0; 10], vec!["lo".into(), "hi".into()]).unwrap();
    let model = fit_forest(
        &only_lo,
        &ForestConfig::new(5, SplitCriterion::Gini, MaxFeatures::All, 0),
    )
    .unwrap();
    let test = threshold_data(10);
    match select_instances(&model, &test, 1, 0) {
        Err(Error::NoCorrectInstance(class)) => assert_eq!(class, "hi"),
        other => panic!("unexpected {other:?}"),
    }
}

/// Writes a small mixed-type dataset where a protected nominal feature is
/// carried by a numeric proxy, plus its schema and an audit config.
fn write_fixture(dir: &Path, protected: &str) -> AuditConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut csv = String::new();
    for _ in 0..300 {
        let group = rng.gen_bool(0.5);
        let proxy = if group { 6.0 } else { 2.0 } + rng.gen_range(-1.0..1.0);
        let income: f64 = rng.gen_range(0.0..10.0);
        let noise: f64 = rng.gen_range(0.0..1.0);
        let region = ["north", "south", "east"][rng.gen_range(0..3)];
        let score = income + 0.5 * proxy + rng.gen_range(-1.5..1.5);
        let label = if score > 7.0 { "yes" } else { "no" };
        csv.push_str(&format!(
            "{proxy:.3},{income:.3},{noise:.3},{region},{},{label}\n",
            if group { "b" } else { "a" }
        ));
    }
    fs::write(dir.join("data.csv"), csv).unwrap();
    let schema = r#"
label = "approved"
classes = ["no", "yes"]

[csv]
delimiter = ","
header = false

[[feature]]
name = "proxy"
id = "F1"
kind = "numeric"

[[feature]]
name = "income"
id = "F2"
kind = "numeric"

[[feature]]
name = "noise"
id = "F3"
kind = "numeric"

[[feature]]
name = "region"
id = "F4"
kind = "nominal"
categories = ["north", "south", "east"]

[[feature]]
name = "group"
id = "F5"
kind = "nominal"
categories = ["a", "b"]
protected = true
"#;
    fs::write(dir.join("schema.toml"), schema).unwrap();
    let config = format!(
        r#"
seed = 5
out_dir = "out"
positive_class = "yes"
protected = ["{protected}"]

[data]
path = "data.csv"
schema = "schema.toml"

[forest]
n_estimators = [10, 20]
criteria = ["gini"]
max_features = ["sqrt", "log2"]

[shap]
method = "exact"
background = 30
global_instances = 10
global_background = 10

[fcm]
phis = [0.0, 0.5, 0.9]
"#
    );
    let path = dir.join("audit.toml");
    fs::write(&path, config).unwrap();
    AuditConfig::from_file(&path).unwrap()
}

#[test]
fn end_to_end_on_synthetic_data() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_fixture(tmp.path(), "group");
    let bundle = run_audit(&cfg).unwrap();
    let r = &bundle.report;
    assert_eq!(r.protected, vec!["F5"]);
    assert_eq!(r.instances.len(), 2);
    assert!(bundle.test_accuracy > 0.6);
    let mut sorted_ids = r.feature_ids.clone();
    sorted_ids.sort();
    for inst in &r.instances {
        let mut shap = inst.shap_rank.clone();
        shap.sort();
        assert_eq!(shap, sorted_ids);
        assert_eq!(inst.runs.len(), 3);
        let still = inst.run(0.0).unwrap();
        assert_eq!(still.protected_delta["F5"], 0.0);
        for run in &inst.runs {
            let mut fcm = run.fcm_rank.clone();
            fcm.sort();
            assert_eq!(fcm, sorted_ids);
            let max = run.normalized_final.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!((max - 1.0).abs() < 1e-12);
        }
    }

    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    let files = write_artifacts(&cfg, &bundle, &out_a).unwrap();
    assert!(files.iter().any(|p| p.ends_with("bias_report.json")));
    assert_eq!(
        files.iter().filter(|p| p.to_string_lossy().contains("trace_")).count(),
        2 * 3 * 2
    );
    let again = run_audit(&cfg).unwrap();
    write_artifacts(&cfg, &again, &out_b).unwrap();
    for f in &files {
        let name = f.file_name().unwrap();
        assert_eq!(fs::read(f).unwrap(), fs::read(out_b.join(name)).unwrap(), "{name:?}");
    }
}

#[test]
fn unknown_protected_feature_fails_at_load() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_fixture(tmp.path(), "F42");
    let err = run_audit(&cfg).unwrap_err();
    match &err {
        Error::Stage { stage, .. } => assert_eq!(*stage, "load"),
        other => panic!("unexpected {other}"),
    }
    assert!(err.to_string().contains("F42"));
}
