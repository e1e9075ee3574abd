mod common;

use common::{numeric_classification, xor_dataset};
use fcm_audit::dataset::{Dataset, FeatureSchema};
use fcm_audit::forest::{fit_forest, tune, ForestConfig, ForestModel, MaxFeatures, SplitCriterion};
use proptest::prelude::*;

fn cfg(n: usize, seed: u64) -> ForestConfig {
    ForestConfig::new(n, SplitCriterion::Gini, MaxFeatures::Sqrt, seed)
}

#[test]
fn single_class_training_predicts_that_class() {
    let schema = vec![FeatureSchema::numeric("x", "F1")];
    let rows = (0..20).map(|i| vec![i as f64]).collect();
    let ds = Dataset::new(schema, rows, vec![1; 20], vec!["a".into(), "b".into()]).unwrap();
    let model = fit_forest(&ds, &cfg(5, 0)).unwrap();
    assert_eq!(model.predict_proba(&[3.5]).unwrap(), vec![0.0, 1.0]);
    assert_eq!(model.predict(&[-100.0]).unwrap(), 1);
}

#[test]
fn learns_xor() {
    let train = xor_dataset(800, 1);
    let test = xor_dataset(400, 2);
    let model = fit_forest(&train, &cfg(100, 3)).unwrap();
    assert!(model.accuracy(&test).unwrap() >= 0.95);
    assert!(model.class_probability(&[0.9, 0.1], 1) >= 0.9);
    assert!(model.class_probability(&[0.1, 0.1], 1) <= 0.1);
}

#[test]
fn fitting_is_deterministic_and_probabilities_sum_to_one() {
    let ds = numeric_classification(300, 5, &[], 4);
    let a = fit_forest(&ds, &cfg(20, 9)).unwrap();
    let b = fit_forest(&ds, &cfg(20, 9)).unwrap();
    assert_eq!(a, b);
    for row in ds.rows() {
        let p = a.predict_proba(row).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!(a != fit_forest(&ds, &cfg(20, 10)).unwrap());
}

#[test]
fn forest_probability_is_the_tree_average() {
    let ds = numeric_classification(200, 4, &[], 8);
    let model = fit_forest(&ds, &cfg(2, 5)).unwrap();
    let row = [0.4, 0.7, 0.1, 0.9];
    let expected: Vec<f64> = (0..2)
        .map(|c| {
            model
                .trees
                .iter()
                .map(|t| t.leaf_probabilities(&row, 2)[c])
                .sum::<f64>()
                / 2.0
        })
        .collect();
    assert_eq!(model.predict_proba(&row).unwrap(), expected);
}

#[test]
fn more_trees_reduce_seed_variance() {
    let ds = numeric_classification(300, 6, &[], 12);
    let row = [0.55, 0.6, 0.3, 0.3, 0.3, 0.3];
    let variance = |n: usize| {
        let ps: Vec<f64> = (0..20)
            .map(|s| fit_forest(&ds, &cfg(n, s)).unwrap().class_probability(&row, 1))
            .collect();
        let mean = ps.iter().sum::<f64>() / ps.len() as f64;
        ps.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / ps.len() as f64
    };
    let (v10, v100) = (variance(10), variance(100));
    assert!(v100 < v10, "{v100} >= {v10}");
}

#[test]
fn prefix_of_a_larger_forest_is_the_smaller_forest() {
    let ds = numeric_classification(200, 5, &[], 3);
    let small = fit_forest(&ds, &cfg(7, 21)).unwrap();
    let large = fit_forest(&ds, &cfg(19, 21)).unwrap();
    assert_eq!(small.trees[..], large.trees[..7]);
}

#[test]
fn tune_scores_every_entry_and_matches_separate_fits() {
    let ds = numeric_classification(400, 20, &[], 6);
    let train = ds.subset(&(0..300).collect::<Vec<_>>()).unwrap();
    let val = ds.subset(&(300..400).collect::<Vec<_>>()).unwrap();

    let single = tune(&train, &val, &[cfg(15, 2)]).unwrap();
    assert_eq!(single.scores.len(), 1);
    assert_eq!(single.best, cfg(15, 2));

    let mut grid = Vec::new();
    for n in [5, 10, 30] {
        for c in [SplitCriterion::Gini, SplitCriterion::Entropy] {
            for mf in [MaxFeatures::Sqrt, MaxFeatures::Log2] {
                grid.push(ForestConfig::new(n, c, mf, 2));
            }
        }
    }
    let report = tune(&train, &val, &grid).unwrap();
    assert_eq!(report.scores.len(), 12);
    for s in &report.scores {
        let separate = fit_forest(&train, &s.config).unwrap().accuracy(&val).unwrap();
        assert_eq!(s.validation_accuracy, separate, "{}", s.config.label());
    }
    let top = report.scores.iter().map(|s| s.validation_accuracy).fold(0.0, f64::max);
    let first = report.scores.iter().find(|s| s.validation_accuracy == top).unwrap();
    assert_eq!(report.best, first.config);
}

#[test]
fn tune_prefers_real_trees_over_stumps() {
    let ds = numeric_classification(400, 4, &[], 16);
    let train = ds.subset(&(0..300).collect::<Vec<_>>()).unwrap();
    let val = ds.subset(&(300..400).collect::<Vec<_>>()).unwrap();
    let stump = ForestConfig {
        max_depth: Some(0),
        ..cfg(20, 1)
    };
    let report = tune(&train, &val, &[stump, cfg(20, 1)]).unwrap();
    assert_eq!(report.best, cfg(20, 1));
    assert!(report.scores[1].validation_accuracy > report.scores[0].validation_accuracy);
}

#[test]
fn json_round_trip() {
    let ds = numeric_classification(100, 3, &[], 2);
    let model = fit_forest(&ds, &cfg(4, 0)).unwrap();
    let back = ForestModel::from_json(&model.to_json().unwrap()).unwrap();
    assert_eq!(back, model);
}

#[test]
fn empty_inputs_are_rejected() {
    let ds = numeric_classification(50, 3, &[], 2);
    assert!(ds.subset(&[]).is_err());
    assert!(fit_forest(&ds, &cfg(0, 0)).is_err());
    assert!(tune(&ds, &ds, &[]).is_err());
    let model = fit_forest(&ds, &cfg(3, 0)).unwrap();
    assert!(model.predict_proba(&[0.1]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn probabilities_are_a_distribution(seed in any::<u64>(), row in prop::collection::vec(-0.5f64..1.5, 3)) {
        let ds = numeric_classification(80, 3, &[], seed);
        let model = fit_forest(&ds, &cfg(5, seed)).unwrap();
        let p = model.predict_proba(&row).unwrap();
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
