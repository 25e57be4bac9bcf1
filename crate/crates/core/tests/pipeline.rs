// SPDX-License-Identifier: MIT OR Apache-2.0

//! Small end-to-end runs of featurize → rank → classify → evaluate.

use binsight_core::classifiers::{rf_train, ForestConfig};
use binsight_core::evaluation::{
    ablation_confirmation, evaluate_all, forward_selection_eval, mean_and_sample_std, Classifier, Protocol, SplitPlan,
};
use binsight_core::indicators::{build_grid, featurize, featurize_uncached, Aggregator, GridConfig, IndicatorMatrix};
use binsight_core::selection::mrmr_rank;
use binsight_core::signalgen::{generate_dataset, DatasetSpec, ShiftClass};

fn small(preset: &str, grid: &GridConfig, counts: [usize; 4]) -> IndicatorMatrix {
    let data = generate_dataset(21, &DatasetSpec::preset(preset).unwrap().with_counts(counts)).unwrap();
    featurize(&data, &build_grid(grid).unwrap()).unwrap()
}

#[test]
fn cached_featurization_matches_direct_evaluation() {
    let data = generate_dataset(4, &DatasetSpec::set_c().with_counts([6, 3, 3, 3])).unwrap();
    let specs = build_grid(&GridConfig::preset_c()).unwrap();
    assert_eq!(featurize(&data, &specs).unwrap(), featurize_uncached(&data, &specs).unwrap());
}

#[test]
fn matrix_csv_has_two_leading_columns_and_round_trips() {
    let m = small("A", &GridConfig::preset_ab(), [8, 4, 4, 4]);
    let mut buf = Vec::new();
    m.write_csv(&mut buf).unwrap();
    let header = std::str::from_utf8(&buf).unwrap().lines().next().unwrap();
    assert_eq!(header.split(',').count(), m.n_cols() + 2);
    assert_eq!(m.n_cols(), 1296);
    assert_eq!(IndicatorMatrix::read_csv(&buf[..]).unwrap(), m);
}

fn protocol(m: &IndicatorMatrix, train: usize) -> Protocol {
    Protocol::new(
        &m.labels,
        &SplitPlan {
            train_size: train,
            seed: 3,
        },
    )
    .unwrap()
}

#[test]
fn forward_evaluation_at_full_width_equals_all_indicator_run() {
    let m = small("A", &GridConfig::preset_ab().any_only(), [150, 50, 50, 50]);
    let p = protocol(&m, 100);
    let ranked = mrmr_rank(&m.select_rows(&p.train), m.n_cols()).unwrap();
    let nb = Classifier::NaiveBayes { smoothing: 1.0 };
    let rf = Classifier::Forest(ForestConfig {
        n_trees: 50,
        seed: 9,
        ..ForestConfig::default()
    });
    let curve = forward_selection_eval(&m, &p, &ranked, &[1, 5, m.n_cols()], &nb, &rf).unwrap();
    let last = curve.last().unwrap();
    assert_eq!(last.nb, evaluate_all(&m, &p, &nb).unwrap());
    assert_eq!(last.rf, evaluate_all(&m, &p, &rf).unwrap());
    let counts_in_test: Vec<u64> = ShiftClass::ALL
        .iter()
        .map(|&c| p.test.iter().filter(|&&r| m.labels[r] == c).count() as u64)
        .collect();
    for point in &curve {
        for report in [&point.nb, &point.rf] {
            assert_eq!(report.subset_accuracies.len(), 10);
            let (mean, std) = mean_and_sample_std(&report.subset_accuracies);
            assert!((report.mean - mean).abs() < 1e-12);
            assert!((report.std - std).abs() < 1e-12);
            assert_eq!(report.confusion.row_sums().to_vec(), counts_in_test);
            assert!(report.subset_accuracies.iter().all(|a| (0.0..=1.0).contains(a)));
        }
    }
}

#[test]
fn subset_accuracies_match_raw_predictions() {
    let m = small("A", &GridConfig::preset_ab().any_only(), [150, 50, 50, 50]);
    let p = protocol(&m, 100);
    let nb = Classifier::NaiveBayes { smoothing: 1.0 };
    let report = evaluate_all(&m, &p, &nb).unwrap();
    let train = m.select_rows(&p.train);
    let model = binsight_core::classifiers::nb_train(&train, 1.0).unwrap();
    for (subset, &acc) in p.subsets.iter().zip(&report.subset_accuracies) {
        let preds = model.predict_rows(subset.iter().map(|&r| m.row(r))).unwrap();
        let hits = subset.iter().zip(&preds).filter(|(&r, &c)| m.labels[r].index() == c).count();
        assert!((acc - hits as f64 / subset.len() as f64).abs() < 1e-12);
    }
}

#[test]
fn ablation_shares_rows_and_split() {
    let m = small("C", &GridConfig::preset_c(), [60, 20, 20, 20]);
    let any_specs = build_grid(&GridConfig::preset_c().any_only()).unwrap();
    assert!(any_specs.iter().all(|s| s.aggregator == Aggregator::Any));
    assert_eq!(any_specs.len(), 126);
    let p = protocol(&m, 60);
    let rf = Classifier::Forest(ForestConfig {
        n_trees: 30,
        seed: 1,
        ..ForestConfig::default()
    });
    let (full, reduced) = ablation_confirmation(&m, &any_specs, &p, &rf).unwrap();
    assert_eq!(full.n_features, 3024);
    assert_eq!(reduced.n_features, 126);
    assert_eq!(full.confusion.row_sums(), reduced.confusion.row_sums());
}

#[test]
fn forest_importance_finds_the_label_copy() {
    let m = small("A", &GridConfig::preset_ab().any_only(), [80, 40, 40, 40]);
    // overwrite two columns with an exact binary code of the class
    let rows: Vec<Vec<u8>> = (0..m.n_rows())
        .map(|r| {
            let mut row = m.row(r).to_vec();
            let c = m.labels[r].index();
            row[7] = (c >= 2) as u8;
            row[11] = (c % 2) as u8;
            row
        })
        .collect();
    let m = IndicatorMatrix::from_rows(m.specs.clone(), m.record_ids.clone(), m.labels.clone(), rows).unwrap();
    let forest = rf_train(
        &m,
        &ForestConfig {
            n_trees: 100,
            seed: 2,
            ..ForestConfig::default()
        },
    )
    .unwrap();
    let mut order: Vec<usize> = (0..m.n_cols()).collect();
    order.sort_by(|&a, &b| forest.importances[b].total_cmp(&forest.importances[a]));
    let mut top2 = order[..2].to_vec();
    top2.sort_unstable();
    assert_eq!(top2, vec![7, 11]);
    assert!(forest.oob_accuracy > 0.95);
}
