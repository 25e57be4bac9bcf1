// SPDX-License-Identifier: MIT OR Apache-2.0

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax, Prediction};
use crate::error::{Error, Result};
use crate::indicators::IndicatorMatrix;
use crate::rng::substream;
use crate::signalgen::ShiftClass;

/// Minimum weighted Gini decrease for a split to be accepted.
const MIN_DECREASE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features tried per node; `None` means `floor(sqrt(p))`.
    pub mtry: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 500,
            mtry: None,
            min_leaf: 1,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn resolved_mtry(&self, p: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| ((p as f64).sqrt().floor() as usize).max(1))
    }
}

/// Arena node. `left` follows bit 0, `right` follows bit 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        feature: usize,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: Vec<u32>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, bits: &[u8]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    left,
                    right,
                } => i = if bits[*feature] == 0 { *left } else { *right },
                Node::Leaf { counts } => {
                    let scores: Vec<f64> = counts.iter().map(|&c| f64::from(c)).collect();
                    return argmax(&scores);
                }
            }
        }
    }

    fn uses_valid_features(&self, p: usize) -> bool {
        self.nodes.iter().all(|n| match n {
            Node::Split {
                feature,
                left,
                right,
            } => *feature < p && *left < self.nodes.len() && *right < self.nodes.len(),
            Node::Leaf { .. } => true,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub n_features: usize,
    pub n_classes: usize,
    pub trees: Vec<Tree>,
    pub oob_accuracy: f64,
    /// Mean decrease in Gini impurity per feature, averaged over trees.
    pub importances: Vec<f64>,
    pub feature_ids: Vec<String>,
}

impl ForestModel {
    pub fn votes(&self, bits: &[u8]) -> Result<Vec<f64>> {
        if bits.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: bits.len(),
            });
        }
        let mut votes = vec![0.0; self.n_classes];
        for t in &self.trees {
            votes[t.predict(bits)] += 1.0;
        }
        Ok(votes)
    }

    pub fn predict_rows<'a>(&self, rows: impl Iterator<Item = &'a [u8]>) -> Result<Vec<usize>> {
        rows.map(|bits| self.votes(bits).map(|v| argmax(&v))).collect()
    }

    pub fn is_consistent(&self) -> bool {
        (0.0..=1.0).contains(&self.oob_accuracy)
            && self.trees.iter().all(|t| t.uses_valid_features(self.n_features))
    }
}

fn gini_mass(counts: &[u32]) -> f64 {
    // n · Gini(counts)
    let n: u32 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = f64::from(n);
    n - counts.iter().map(|&c| f64::from(c) * f64::from(c)).sum::<f64>() / n
}

struct GrownTree {
    tree: Tree,
    importance: Vec<f64>,
    /// `(row, predicted class)` for every out-of-bag row.
    oob: Vec<(usize, usize)>,
}

struct Grower<'a> {
    columns: &'a [Vec<u8>],
    labels: &'a [usize],
    n_classes: usize,
    mtry: usize,
    min_leaf: usize,
    total: f64,
}

impl Grower<'_> {
    fn class_counts(&self, rows: &[usize]) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_classes];
        for &r in rows {
            counts[self.labels[r]] += 1;
        }
        counts
    }

    /// Best `(feature, decrease)` among the sampled candidates.
    fn best_split(&self, rows: &[usize], counts: &[u32], candidates: &[usize]) -> Option<(usize, f64)> {
        let parent = gini_mass(counts);
        let mut ones = vec![0u32; self.n_classes];
        let mut zeros = vec![0u32; self.n_classes];
        let mut best: Option<(usize, f64)> = None;
        for &f in candidates {
            ones.iter_mut().for_each(|c| *c = 0);
            let col = &self.columns[f];
            for &r in rows {
                if col[r] != 0 {
                    ones[self.labels[r]] += 1;
                }
            }
            let n_one: u32 = ones.iter().sum();
            let n_zero = rows.len() as u32 - n_one;
            if (n_one as usize) < self.min_leaf || (n_zero as usize) < self.min_leaf {
                continue;
            }
            for ((z, &c), &o) in zeros.iter_mut().zip(counts).zip(&ones) {
                *z = c - o;
            }
            let decrease = (parent - gini_mass(&zeros) - gini_mass(&ones)) / self.total;
            if decrease > MIN_DECREASE && best.is_none_or(|(_, d)| decrease > d) {
                best = Some((f, decrease));
            }
        }
        best
    }

    fn grow(&self, rng: &mut impl Rng, mut rows: Vec<usize>, importance: &mut [f64]) -> Tree {
        let p = self.columns.len();
        let mut nodes: Vec<Node> = vec![Node::Leaf { counts: Vec::new() }];
        // (node slot, row range) work list; depth-first
        let mut stack = vec![(0usize, 0usize, rows.len())];
        while let Some((slot, lo, hi)) = stack.pop() {
            let node_rows = &mut rows[lo..hi];
            let counts = self.class_counts(node_rows);
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let split = if pure || node_rows.len() < 2 * self.min_leaf {
                None
            } else {
                let mut candidates = index::sample(rng, p, self.mtry).into_vec();
                candidates.sort_unstable();
                self.best_split(node_rows, &counts, &candidates)
            };
            let Some((feature, decrease)) = split else {
                nodes[slot] = Node::Leaf { counts };
                continue;
            };
            importance[feature] += decrease;
            let col = &self.columns[feature];
            // stable partition: zeros first
            let (zeros, ones): (Vec<usize>, Vec<usize>) = node_rows.iter().partition(|&&r| col[r] == 0);
            let mid = lo + zeros.len();
            rows[lo..mid].copy_from_slice(&zeros);
            rows[mid..hi].copy_from_slice(&ones);
            let left = nodes.len();
            let right = left + 1;
            nodes.push(Node::Leaf { counts: Vec::new() });
            nodes.push(Node::Leaf { counts: Vec::new() });
            nodes[slot] = Node::Split {
                feature,
                left,
                right,
            };
            stack.push((right, mid, hi));
            stack.push((left, lo, mid));
        }
        Tree { nodes }
    }
}

/// Trains a forest of bootstrap trees. Tree `t` draws from the substream
/// `(seed, t)`, so results do not depend on the thread count.
pub fn rf_train(matrix: &IndicatorMatrix, config: &ForestConfig) -> Result<ForestModel> {
    let n = matrix.n_rows();
    let p = matrix.n_cols();
    if config.n_trees == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    if p == 0 || n == 0 {
        return Err(Error::invalid("forest needs a non-empty matrix"));
    }
    let mtry = config.resolved_mtry(p);
    if mtry == 0 || mtry > p {
        return Err(Error::invalid(format!("mtry must be in 1..={p}, got {mtry}")));
    }
    if config.min_leaf == 0 {
        return Err(Error::invalid("min_leaf must be at least 1"));
    }
    let n_classes = ShiftClass::COUNT;
    let labels: Vec<usize> = matrix.labels.iter().map(|c| c.index()).collect();
    let columns: Vec<Vec<u8>> = (0..p).map(|c| matrix.column(c)).collect();
    let grower = Grower {
        columns: &columns,
        labels: &labels,
        n_classes,
        mtry,
        min_leaf: config.min_leaf,
        total: n as f64,
    };
    let grown: Vec<GrownTree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(config.seed, "tree", t as u64);
            let mut in_bag = vec![false; n];
            let rows: Vec<usize> = (0..n)
                .map(|_| {
                    let r = rng.random_range(0..n);
                    in_bag[r] = true;
                    r
                })
                .collect();
            let mut importance = vec![0.0; p];
            let tree = grower.grow(&mut rng, rows, &mut importance);
            let oob = (0..n)
                .filter(|&r| !in_bag[r])
                .map(|r| (r, tree.predict(matrix.row(r))))
                .collect();
            GrownTree {
                tree,
                importance,
                oob,
            }
        })
        .collect();

    let mut oob_votes = vec![vec![0u32; n_classes]; n];
    let mut importances = vec![0.0; p];
    for g in &grown {
        for &(r, c) in &g.oob {
            oob_votes[r][c] += 1;
        }
        for (acc, v) in importances.iter_mut().zip(&g.importance) {
            *acc += v;
        }
    }
    importances.iter_mut().for_each(|v| *v /= config.n_trees as f64);
    let (mut hits, mut seen) = (0usize, 0usize);
    for (r, votes) in oob_votes.iter().enumerate() {
        if votes.iter().any(|&v| v > 0) {
            seen += 1;
            let scores: Vec<f64> = votes.iter().map(|&v| f64::from(v)).collect();
            hits += usize::from(argmax(&scores) == labels[r]);
        }
    }
    Ok(ForestModel {
        config: config.clone(),
        n_features: p,
        n_classes,
        trees: grown.into_iter().map(|g| g.tree).collect(),
        oob_accuracy: if seen == 0 { 0.0 } else { hits as f64 / seen as f64 },
        importances,
        feature_ids: matrix.specs.iter().map(|s| s.id.clone()).collect(),
    })
}

/// Majority vote over trees; ties go to the lowest class code.
pub fn rf_predict(model: &ForestModel, bits: &[u8]) -> Result<Prediction> {
    let scores = model.votes(bits)?;
    Ok(Prediction {
        class: argmax(&scores),
        scores,
    })
}

pub fn rf_importance(model: &ForestModel) -> &[f64] {
    &model.importances
}
