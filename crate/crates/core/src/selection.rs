// SPDX-License-Identifier: MIT OR Apache-2.0

//! Mutual information on discrete columns and greedy mRMR ranking.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::indicators::IndicatorMatrix;

/// Plug-in mutual information, in bits, from a joint count table.
///
/// `joint` lists `(count_xy, count_x, count_y)` for every observed cell;
/// empty cells contribute nothing.
fn mi_from_cells(cells: impl Iterator<Item = (u64, u64, u64)>, total: u64) -> f64 {
    let n = total as f64;
    let mut mi = 0.0;
    for (cxy, cx, cy) in cells {
        if cxy == 0 {
            continue;
        }
        let pxy = cxy as f64 / n;
        mi += pxy * ((cxy as f64 * n) / (cx as f64 * cy as f64)).log2();
    }
    mi.max(0.0)
}

/// `I(x; y)` in bits for two discrete columns of equal length.
pub fn mutual_information(x: &[u8], y: &[u8]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::invalid("mutual information needs at least one row"));
    }
    let mut joint: BTreeMap<(u8, u8), u64> = BTreeMap::new();
    let mut mx: BTreeMap<u8, u64> = BTreeMap::new();
    let mut my: BTreeMap<u8, u64> = BTreeMap::new();
    for (&a, &b) in x.iter().zip(y) {
        *joint.entry((a, b)).or_default() += 1;
        *mx.entry(a).or_default() += 1;
        *my.entry(b).or_default() += 1;
    }
    Ok(mi_from_cells(
        joint.iter().map(|(&(a, b), &c)| (c, mx[&a], my[&b])),
        x.len() as u64,
    ))
}

/// Bit-packed binary column for fast pairwise counts.
struct PackedColumn {
    words: Vec<u64>,
    ones: u64,
}

impl PackedColumn {
    fn new(bits: impl Iterator<Item = u8>, n: usize) -> Self {
        let mut words = vec![0u64; n.div_ceil(64)];
        let mut ones = 0;
        for (i, b) in bits.enumerate() {
            if b != 0 {
                words[i / 64] |= 1 << (i % 64);
                ones += 1;
            }
        }
        PackedColumn { words, ones }
    }

    fn both(&self, other: &PackedColumn) -> u64 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| u64::from((a & b).count_ones()))
            .sum()
    }
}

/// MI between two binary columns from their overlap count. Cells are visited
/// in the same (x, y) order as [`mutual_information`].
fn binary_mi(a: &PackedColumn, b: &PackedColumn, n: u64) -> f64 {
    let n11 = a.both(b);
    let n10 = a.ones - n11;
    let n01 = b.ones - n11;
    let n00 = n - n11 - n10 - n01;
    let (a0, a1) = (n - a.ones, a.ones);
    let (b0, b1) = (n - b.ones, b.ones);
    mi_from_cells(
        [(n00, a0, b0), (n01, a0, b1), (n10, a1, b0), (n11, a1, b1)].into_iter(),
        n,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedList {
    pub order: Vec<usize>,
    /// mRMR score of each pick at the time it was selected.
    pub scores: Vec<f64>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn top(&self, k: usize) -> &[usize] {
        &self.order[..k.min(self.order.len())]
    }

    /// CSV `rank,column_index,indicator_id,score`, ranks starting at 1.
    pub fn write_csv<W: Write>(&self, ids: &[String], mut out: W) -> Result<()> {
        writeln!(out, "rank,column_index,indicator_id,score")?;
        for (rank, (&col, &score)) in self.order.iter().zip(&self.scores).enumerate() {
            writeln!(out, "{},{},{},{}", rank + 1, col, ids[col], score)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the CSV back; returns the list and the indicator ids in rank order.
    pub fn read_csv<R: BufRead>(input: R) -> Result<(Self, Vec<String>)> {
        let mut order = Vec::new();
        let mut scores = Vec::new();
        let mut ids = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            if idx == 0 || line.is_empty() {
                continue;
            }
            let fail = || Error::Format {
                line: idx + 1,
                message: "expected rank,column_index,indicator_id,score".into(),
            };
            let cells: Vec<&str> = line.split(',').collect();
            let [_, col, id, score] = cells[..] else {
                return Err(fail());
            };
            order.push(col.parse().map_err(|_| fail())?);
            ids.push(id.to_string());
            scores.push(score.parse().map_err(|_| fail())?);
        }
        Ok((RankedList { order, scores }, ids))
    }
}

/// Greedy minimum-redundancy maximum-relevance ranking (difference form).
///
/// The first pick maximizes `I(x_j; class)`. Each later pick maximizes
/// `I(x_j; class) - mean_{s ∈ S} I(x_j; x_s)` over unselected columns.
/// Ties go to the lower column index.
pub fn mrmr_rank(matrix: &IndicatorMatrix, k: usize) -> Result<RankedList> {
    let p = matrix.n_cols();
    if k == 0 || k > p {
        return Err(Error::invalid(format!(
            "number of ranked columns must be in 1..={p}, got {k}"
        )));
    }
    let n = matrix.n_rows();
    if n == 0 {
        return Err(Error::invalid("cannot rank columns of an empty matrix"));
    }
    let labels: Vec<u8> = matrix.labels.iter().map(|c| c.code()).collect();
    let columns: Vec<PackedColumn> = (0..p)
        .into_par_iter()
        .map(|c| PackedColumn::new((0..n).map(|r| matrix.get(r, c)), n))
        .collect();
    let relevance: Vec<f64> = (0..p)
        .into_par_iter()
        .map(|c| mutual_information(&matrix.column(c), &labels))
        .collect::<Result<_>>()?;

    let mut selected = vec![false; p];
    let mut redundancy = vec![0.0f64; p];
    let mut order = Vec::with_capacity(k);
    let mut scores = Vec::with_capacity(k);
    for step in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..p {
            if selected[j] {
                continue;
            }
            let score = if step == 0 {
                relevance[j]
            } else {
                relevance[j] - redundancy[j] / step as f64
            };
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((j, score));
            }
        }
        let (pick, score) = best.expect("k <= p leaves a candidate");
        selected[pick] = true;
        order.push(pick);
        scores.push(score);
        if step + 1 < k {
            let picked = &columns[pick];
            let added: Vec<f64> = columns
                .par_iter()
                .map(|c| binary_mi(c, picked, n as u64))
                .collect();
            for (r, a) in redundancy.iter_mut().zip(added) {
                *r += a;
            }
        }
    }
    Ok(RankedList { order, scores })
}
