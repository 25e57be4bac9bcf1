// SPDX-License-Identifier: MIT OR Apache-2.0

//! Classifiers over binary indicator vectors.

mod forest;
mod naive_bayes;

pub use forest::{rf_importance, rf_predict, rf_train, ForestConfig, ForestModel, Node, Tree};
pub use naive_bayes::{
    format_probability, nb_explain, nb_predict, nb_train, ExplainTable, NaiveBayesModel,
};

use serde::{Deserialize, Serialize};

/// A predicted class index with the per-class scores it was chosen from:
/// log joint probabilities for Naive Bayes, vote counts for forests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: usize,
    pub scores: Vec<f64>,
}

/// Index of the largest score; the lowest index wins ties.
pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::argmax;

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0, 2.0, 2.0]), 0);
        assert_eq!(argmax(&[0.0, 5.0, 1.0, 5.0]), 1);
    }
}
