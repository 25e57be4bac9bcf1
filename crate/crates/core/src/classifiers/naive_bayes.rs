// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::{argmax, Prediction};
use crate::error::{Error, Result};
use crate::indicators::IndicatorMatrix;
use crate::signalgen::ShiftClass;

/// Bernoulli Naive Bayes with additive smoothing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub class_priors: Vec<f64>,
    /// `cond_p[c][j] = P(x_j = 1 | c)`.
    pub cond_p: Vec<Vec<f64>>,
    pub smoothing: f64,
    pub feature_ids: Vec<String>,
}

impl NaiveBayesModel {
    pub fn n_features(&self) -> usize {
        self.cond_p.first().map_or(0, Vec::len)
    }

    pub fn n_classes(&self) -> usize {
        self.class_priors.len()
    }

    /// Per-class log joint probability of a bit vector.
    pub fn log_posteriors(&self, bits: &[u8]) -> Result<Vec<f64>> {
        if bits.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: bits.len(),
            });
        }
        Ok(self
            .class_priors
            .iter()
            .zip(&self.cond_p)
            .map(|(&prior, cond)| {
                let mut lp = prior.ln();
                for (&b, &p) in bits.iter().zip(cond) {
                    lp += if b != 0 { p.ln() } else { (-p).ln_1p() };
                }
                lp
            })
            .collect())
    }

    /// Batch prediction with log tables computed once.
    pub fn predict_rows<'a>(&self, rows: impl Iterator<Item = &'a [u8]>) -> Result<Vec<usize>> {
        let log_one: Vec<Vec<f64>> = self
            .cond_p
            .iter()
            .map(|c| c.iter().map(|p| p.ln()).collect())
            .collect();
        let log_zero: Vec<Vec<f64>> = self
            .cond_p
            .iter()
            .map(|c| c.iter().map(|p| (-p).ln_1p()).collect())
            .collect();
        let p = self.n_features();
        let mut scores = vec![0.0; self.n_classes()];
        rows.map(|bits| {
            if bits.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: bits.len(),
                });
            }
            for (c, s) in scores.iter_mut().enumerate() {
                let mut lp = self.class_priors[c].ln();
                for (j, &b) in bits.iter().enumerate() {
                    lp += if b != 0 { log_one[c][j] } else { log_zero[c][j] };
                }
                *s = lp;
            }
            Ok(argmax(&scores))
        })
        .collect()
    }
}

/// Class priors are frequencies; `P(x_j = 1 | c) = (ones + ε) / (rows_c + 2ε)`.
pub fn nb_train(matrix: &IndicatorMatrix, smoothing: f64) -> Result<NaiveBayesModel> {
    if !(smoothing > 0.0 && smoothing.is_finite()) {
        return Err(Error::invalid(format!("smoothing must be positive, got {smoothing}")));
    }
    let p = matrix.n_cols();
    let mut class_rows = [0u64; ShiftClass::COUNT];
    let mut ones = vec![vec![0u64; p]; ShiftClass::COUNT];
    for (r, label) in matrix.labels.iter().enumerate() {
        let c = label.index();
        class_rows[c] += 1;
        for (o, &b) in ones[c].iter_mut().zip(matrix.row(r)) {
            *o += u64::from(b);
        }
    }
    if let Some(c) = class_rows.iter().position(|&n| n == 0) {
        return Err(Error::MissingClass(c));
    }
    let total = matrix.n_rows() as f64;
    Ok(NaiveBayesModel {
        class_priors: class_rows.iter().map(|&n| n as f64 / total).collect(),
        cond_p: ones
            .iter()
            .zip(class_rows)
            .map(|(counts, n)| {
                counts
                    .iter()
                    .map(|&k| (k as f64 + smoothing) / (n as f64 + 2.0 * smoothing))
                    .collect()
            })
            .collect(),
        smoothing,
        feature_ids: matrix.specs.iter().map(|s| s.id.clone()).collect(),
    })
}

pub fn nb_predict(model: &NaiveBayesModel, bits: &[u8]) -> Result<Prediction> {
    let scores = model.log_posteriors(bits)?;
    Ok(Prediction {
        class: argmax(&scores),
        scores,
    })
}

/// Operator-facing table of `P(indicator = 1 | class)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplainTable {
    pub class_names: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl ExplainTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("indicator");
        for name in &self.class_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (id, probs) in &self.rows {
            out.push_str(id);
            for &p in probs {
                out.push(',');
                out.push_str(&format_probability(p));
            }
            out.push('\n');
        }
        out
    }
}

/// Three significant digits: `0.0103`, `0.971`, `0.00130`.
pub fn format_probability(p: f64) -> String {
    if p <= 0.0 || !p.is_finite() {
        return format!("{p}");
    }
    let decimals = (2 - p.log10().floor() as i32).max(0) as usize;
    format!("{p:.decimals$}")
}

pub fn nb_explain(model: &NaiveBayesModel, selected: &[usize]) -> Result<ExplainTable> {
    let p = model.n_features();
    let rows = selected
        .iter()
        .map(|&j| {
            if j >= p {
                return Err(Error::invalid(format!("feature {j} out of range for {p} features")));
            }
            let id = model.feature_ids.get(j).cloned().unwrap_or_else(|| j.to_string());
            Ok((id, model.cond_p.iter().map(|c| c[j]).collect()))
        })
        .collect::<Result<_>>()?;
    let class_names = (0..model.n_classes())
        .map(|c| {
            ShiftClass::try_from(c as u8).map_or_else(|_| c.to_string(), |s| s.name().to_string())
        })
        .collect();
    Ok(ExplainTable { class_names, rows })
}
