// SPDX-License-Identifier: MIT OR Apache-2.0

//! Evaluation protocol: stratified learning/test split, balanced test
//! subsets, accuracy and confusion reporting, forward-selection curves and
//! the confirmation-indicator ablation.

use std::io::Write;

use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{nb_train, rf_train, ForestConfig};
use crate::error::{Error, Result};
use crate::indicators::{IndicatorMatrix, IndicatorSpec};
use crate::rng::substream;
use crate::selection::RankedList;
use crate::signalgen::ShiftClass;

const K: usize = ShiftClass::COUNT;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub train_size: usize,
    pub seed: u64,
}

impl SplitPlan {
    pub fn new(seed: u64) -> Self {
        SplitPlan {
            train_size: 1000,
            seed,
        }
    }
}

/// Splits `total` into per-class quotas proportional to `counts`, using
/// largest remainders (ties to the lower class).
pub fn proportional_quotas(counts: &[usize; K], total: usize) -> [usize; K] {
    let n: usize = counts.iter().sum();
    let mut quotas = [0; K];
    if n == 0 {
        return quotas;
    }
    let mut remainders = Vec::with_capacity(K);
    for c in 0..K {
        quotas[c] = counts[c] * total / n;
        remainders.push((counts[c] * total % n, c));
    }
    let assigned: usize = quotas.iter().sum();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, c) in remainders.iter().take(total - assigned) {
        quotas[c] += 1;
    }
    quotas
}

fn class_counts(labels: &[ShiftClass]) -> [usize; K] {
    let mut counts = [0; K];
    for l in labels {
        counts[l.index()] += 1;
    }
    counts
}

/// Stratified split into `(train, test)` row indices, both sorted.
pub fn stratified_split(labels: &[ShiftClass], plan: &SplitPlan) -> Result<(Vec<usize>, Vec<usize>)> {
    if plan.train_size == 0 || plan.train_size >= labels.len() {
        return Err(Error::invalid(format!(
            "cannot draw {} training rows from {} records",
            plan.train_size,
            labels.len()
        )));
    }
    let quotas = proportional_quotas(&class_counts(labels), plan.train_size);
    let mut train = Vec::with_capacity(plan.train_size);
    for class in ShiftClass::ALL {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] == class).collect();
        let mut rng = substream(plan.seed, "split", class.index() as u64);
        rows.shuffle(&mut rng);
        train.extend_from_slice(&rows[..quotas[class.index()]]);
    }
    train.sort_unstable();
    let mut in_train = vec![false; labels.len()];
    for &r in &train {
        in_train[r] = true;
    }
    let test = (0..labels.len()).filter(|&r| !in_train[r]).collect();
    Ok((train, test))
}

/// `k` class-balanced subsets of `size` rows drawn from `test`.
///
/// Subsets are drawn independently; rows never repeat within a subset but
/// may appear in several subsets.
pub fn balanced_subsets(
    labels: &[ShiftClass],
    test: &[usize],
    k: usize,
    size: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if size > test.len() {
        return Err(Error::invalid(format!(
            "subset size {size} exceeds the {} test rows",
            test.len()
        )));
    }
    let by_class: Vec<Vec<usize>> = ShiftClass::ALL
        .iter()
        .map(|&c| test.iter().copied().filter(|&r| labels[r] == c).collect())
        .collect();
    let counts: [usize; K] = std::array::from_fn(|c| by_class[c].len());
    let quotas = proportional_quotas(&counts, size);
    Ok((0..k)
        .map(|i| {
            let mut rng = substream(seed, "subset", i as u64);
            let mut subset = Vec::with_capacity(size);
            for c in 0..K {
                let picks = index::sample(&mut rng, by_class[c].len(), quotas[c]);
                subset.extend(picks.iter().map(|j| by_class[c][j]));
            }
            subset.sort_unstable();
            subset
        })
        .collect())
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `counts[true][predicted]`.
    pub counts: [[u64; K]; K],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> [u64; K] {
        std::array::from_fn(|r| self.counts[r].iter().sum())
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        (0..K).map(|c| self.counts[c][c]).sum::<u64>() as f64 / total as f64
    }

    /// `1 - diagonal / row sum`; zero for empty rows.
    pub fn per_class_error(&self) -> [f64; K] {
        let sums = self.row_sums();
        std::array::from_fn(|c| {
            if sums[c] == 0 {
                0.0
            } else {
                1.0 - self.counts[c][c] as f64 / sums[c] as f64
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub per_class_error: [f64; K],
}

pub fn score(preds: &[usize], labels: &[ShiftClass]) -> Result<Score> {
    if preds.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: preds.len(),
        });
    }
    let mut confusion = ConfusionMatrix::default();
    for (&p, l) in preds.iter().zip(labels) {
        if p >= K {
            return Err(Error::invalid(format!("predicted class {p} out of range")));
        }
        confusion.counts[l.index()][p] += 1;
    }
    Ok(Score {
        accuracy: confusion.accuracy(),
        per_class_error: confusion.per_class_error(),
        confusion,
    })
}

pub fn mean_and_sample_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    NaiveBayes { smoothing: f64 },
    Forest(ForestConfig),
}

impl Classifier {
    pub fn name(&self) -> &'static str {
        match self {
            Classifier::NaiveBayes { .. } => "nb",
            Classifier::Forest(_) => "rf",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classifier: String,
    pub n_features: usize,
    pub train_accuracy: f64,
    pub train_per_class_error: [f64; K],
    pub oob_accuracy: Option<f64>,
    pub subset_accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// Confusion matrix over the whole test set.
    pub confusion: ConfusionMatrix,
    pub per_class_error: [f64; K],
}

/// Train/test rows plus the balanced test subsets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub subsets: Vec<Vec<usize>>,
}

impl Protocol {
    pub const SUBSETS: usize = 10;
    pub const SUBSET_SIZE: usize = 500;

    pub fn new(labels: &[ShiftClass], plan: &SplitPlan) -> Result<Self> {
        let (train, test) = stratified_split(labels, plan)?;
        let size = Self::SUBSET_SIZE.min(test.len());
        let subsets = balanced_subsets(labels, &test, Self::SUBSETS, size, plan.seed)?;
        Ok(Protocol {
            train,
            test,
            subsets,
        })
    }
}

/// Trains on the protocol's learning rows using `columns` and reports.
///
/// Columns are used in ascending index order, so any ordering of the same
/// column set yields the same model.
pub fn evaluate_columns(
    matrix: &IndicatorMatrix,
    protocol: &Protocol,
    columns: &[usize],
    classifier: &Classifier,
) -> Result<EvalReport> {
    if columns.is_empty() {
        return Err(Error::invalid("evaluation needs at least one column"));
    }
    let mut cols = columns.to_vec();
    cols.sort_unstable();
    cols.dedup();
    let sub = matrix.select_columns(&cols);
    let train = sub.select_rows(&protocol.train);
    let (train_preds, test_preds, oob) = match classifier {
        Classifier::NaiveBayes { smoothing } => {
            let model = nb_train(&train, *smoothing)?;
            (
                model.predict_rows(train.rows())?,
                model.predict_rows(protocol.test.iter().map(|&r| sub.row(r)))?,
                None,
            )
        }
        Classifier::Forest(cfg) => {
            let model = rf_train(&train, cfg)?;
            (
                model.predict_rows(train.rows())?,
                model.predict_rows(protocol.test.iter().map(|&r| sub.row(r)))?,
                Some(model.oob_accuracy),
            )
        }
    };
    let train_score = score(&train_preds, &train.labels)?;
    let test_labels: Vec<ShiftClass> = protocol.test.iter().map(|&r| matrix.labels[r]).collect();
    let test_score = score(&test_preds, &test_labels)?;

    let mut pred_of = vec![usize::MAX; matrix.n_rows()];
    for (&r, &p) in protocol.test.iter().zip(&test_preds) {
        pred_of[r] = p;
    }
    let subset_accuracies: Vec<f64> = protocol
        .subsets
        .iter()
        .map(|s| {
            let hits = s.iter().filter(|&&r| pred_of[r] == matrix.labels[r].index()).count();
            hits as f64 / s.len() as f64
        })
        .collect();
    let (mean, std) = mean_and_sample_std(&subset_accuracies);
    Ok(EvalReport {
        classifier: classifier.name().to_string(),
        n_features: cols.len(),
        train_accuracy: train_score.accuracy,
        train_per_class_error: train_score.per_class_error,
        oob_accuracy: oob,
        subset_accuracies,
        mean,
        std,
        confusion: test_score.confusion,
        per_class_error: test_score.per_class_error,
    })
}

pub fn evaluate_all(matrix: &IndicatorMatrix, protocol: &Protocol, classifier: &Classifier) -> Result<EvalReport> {
    let all: Vec<usize> = (0..matrix.n_cols()).collect();
    evaluate_columns(matrix, protocol, &all, classifier)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub k: usize,
    pub nb: EvalReport,
    pub rf: EvalReport,
}

/// Forward evaluation along the ranking: for every `k`, train both
/// classifiers on the first `k` ranked columns.
pub fn forward_selection_eval(
    matrix: &IndicatorMatrix,
    protocol: &Protocol,
    ranked: &RankedList,
    ks: &[usize],
    nb: &Classifier,
    rf: &Classifier,
) -> Result<Vec<CurvePoint>> {
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > ranked.len()) {
        return Err(Error::invalid(format!(
            "k = {k} outside 1..={} ranked columns",
            ranked.len()
        )));
    }
    ks.par_iter()
        .map(|&k| {
            let cols = ranked.top(k);
            Ok(CurvePoint {
                k,
                nb: evaluate_columns(matrix, protocol, cols, nb)?,
                rf: evaluate_columns(matrix, protocol, cols, rf)?,
            })
        })
        .collect()
}

/// `k` with the best Naive Bayes learning-set accuracy among `1..=k_max`;
/// the smallest such `k` wins ties.
pub fn pick_optimal_k(curve: &[CurvePoint], k_max: usize) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for k in 1..=k_max {
        let point = curve
            .iter()
            .find(|p| p.k == k)
            .ok_or_else(|| Error::invalid(format!("curve has no point for k = {k}")))?;
        if best.is_none_or(|(_, acc)| point.nb.train_accuracy > acc) {
            best = Some((k, point.nb.train_accuracy));
        }
    }
    best.map(|b| b.0)
        .ok_or_else(|| Error::invalid("k_max must be at least 1"))
}

pub const CURVE_HEADER: &str = "k,nb_train,nb_test_mean,nb_test_std,rf_train,rf_oob,rf_test_mean,rf_test_std,\
nb_train_err_0,nb_train_err_1,nb_train_err_2,nb_train_err_3,\
nb_test_err_0,nb_test_err_1,nb_test_err_2,nb_test_err_3";

pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], mut out: W) -> Result<()> {
    writeln!(out, "{CURVE_HEADER}")?;
    for p in curve {
        write!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.k,
            p.nb.train_accuracy,
            p.nb.mean,
            p.nb.std,
            p.rf.train_accuracy,
            p.rf.oob_accuracy.unwrap_or(f64::NAN),
            p.rf.mean,
            p.rf.std
        )?;
        for e in p.nb.train_per_class_error.iter().chain(&p.nb.per_class_error) {
            write!(out, ",{e}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Long-format per-subset accuracies for box plots.
pub fn write_subsets_csv<W: Write>(curve: &[CurvePoint], mut out: W) -> Result<()> {
    writeln!(out, "k,classifier,subset,accuracy")?;
    for p in curve {
        for report in [&p.nb, &p.rf] {
            for (i, a) in report.subset_accuracies.iter().enumerate() {
                writeln!(out, "{},{},{},{}", p.k, report.classifier, i, a)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Full grid against its base-indicator subset on the same rows and split.
pub fn ablation_confirmation(
    matrix: &IndicatorMatrix,
    any_only: &[IndicatorSpec],
    protocol: &Protocol,
    classifier: &Classifier,
) -> Result<(EvalReport, EvalReport)> {
    let subset = any_only
        .iter()
        .map(|s| {
            matrix
                .column_index(&s.id)
                .ok_or_else(|| Error::invalid(format!("indicator `{}` missing from the full grid", s.id)))
        })
        .collect::<Result<Vec<_>>>()?;
    let full = evaluate_all(matrix, protocol, classifier)?;
    let reduced = evaluate_columns(matrix, protocol, &subset, classifier)?;
    Ok((full, reduced))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_labels() -> Vec<ShiftClass> {
        ShiftClass::ALL
            .iter()
            .flat_map(|&c| std::iter::repeat_n(c, [3000, 1000, 1000, 1000][c.index()]))
            .collect()
    }

    #[test]
    fn quotas() {
        assert_eq!(proportional_quotas(&[3000, 1000, 1000, 1000], 1000), [500, 167, 167, 166]);
        assert_eq!(proportional_quotas(&[2500, 833, 833, 834], 500), [250, 83, 83, 84]);
        assert_eq!(proportional_quotas(&[10, 10, 10, 10], 40), [10; 4]);
    }

    #[test]
    fn paper_sized_split() {
        let labels = paper_labels();
        let plan = SplitPlan::new(11);
        let (train, test) = stratified_split(&labels, &plan).unwrap();
        assert_eq!(train.len(), 1000);
        assert_eq!(test.len(), 5000);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..6000).collect::<Vec<_>>());
        let counts = class_counts(&train.iter().map(|&r| labels[r]).collect::<Vec<_>>());
        for c in 0..4 {
            let exact = 1000.0 * [3000.0, 1000.0, 1000.0, 1000.0][c] / 6000.0;
            assert!((counts[c] as f64 - exact).abs() <= 1.0);
        }
        assert_eq!(stratified_split(&labels, &plan).unwrap(), (train, test));
        assert!(stratified_split(&labels[..10], &plan).is_err());
    }

    #[test]
    fn subsets_are_balanced_and_reproducible() {
        let labels = paper_labels();
        let (_, test) = stratified_split(&labels, &SplitPlan::new(3)).unwrap();
        let subsets = balanced_subsets(&labels, &test, 10, 500, 9).unwrap();
        assert_eq!(subsets.len(), 10);
        for s in &subsets {
            assert_eq!(s.len(), 500);
            let mut d = s.clone();
            d.dedup();
            assert_eq!(d.len(), 500);
            let counts = class_counts(&s.iter().map(|&r| labels[r]).collect::<Vec<_>>());
            assert_eq!(counts, [250, 83, 83, 84]);
        }
        assert_eq!(balanced_subsets(&labels, &test, 10, 500, 9).unwrap(), subsets);
        assert_ne!(subsets[0], subsets[1]);
    }

    #[test]
    fn table_two_accuracy() {
        let counts = [[2267, 162, 32, 39], [118, 671, 36, 4], [26, 4, 708, 91], [46, 7, 76, 700]];
        let cm = ConfusionMatrix { counts };
        assert_eq!(cm.total(), 4987);
        assert!((cm.accuracy() - 4346.0 / 4987.0).abs() < 1e-15);
        assert!((cm.accuracy() - 0.8715).abs() < 5e-5);
        assert_eq!(cm.row_sums(), [2500, 829, 829, 829]);
    }

    #[test]
    fn score_edge_cases() {
        let labels = vec![ShiftClass::NoChange, ShiftClass::Variance, ShiftClass::Mean, ShiftClass::Trend];
        let s = score(&[0, 1, 2, 3], &labels).unwrap();
        assert_eq!(s.accuracy, 1.0);
        assert_eq!(s.per_class_error, [0.0; 4]);
        let s = score(&[2, 2, 2, 2], &labels).unwrap();
        assert_eq!(s.accuracy, 0.25);
        assert!(score(&[0, 1], &labels).is_err());
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_and_sample_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    fn point(k: usize, nb_train: f64) -> CurvePoint {
        let r = EvalReport {
            classifier: "nb".into(),
            n_features: k,
            train_accuracy: nb_train,
            train_per_class_error: [0.0; 4],
            oob_accuracy: None,
            subset_accuracies: vec![],
            mean: 0.0,
            std: 0.0,
            confusion: ConfusionMatrix::default(),
            per_class_error: [0.0; 4],
        };
        CurvePoint { k, nb: r.clone(), rf: r }
    }

    #[test]
    fn optimal_k_rules() {
        let rising: Vec<_> = (1..=20).map(|k| point(k, k as f64 / 100.0)).collect();
        assert_eq!(pick_optimal_k(&rising, 20).unwrap(), 20);
        let flat: Vec<_> = (1..=20).map(|k| point(k, 0.5)).collect();
        assert_eq!(pick_optimal_k(&flat, 20).unwrap(), 1);
        assert!(pick_optimal_k(&flat[..5], 20).is_err());
    }
}
