// SPDX-License-Identifier: MIT OR Apache-2.0

//! Binary indicators built from sliding-window two-sample tests.
//!
//! An indicator is one point of a parameter grid: a test, a level, a window
//! plan and an aggregation rule that reduces the per-position rejections of
//! a signal to a single bit. Confirmation aggregators (rate, run, k-of-n)
//! need several rejections before firing.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signalgen::{ShiftClass, SignalRecord};
use crate::stattests::TestKind;

/// Width of the trailing moving average used by smoothed indicators.
pub const SMOOTHING_WIDTH: usize = 5;

/// Trailing moving average: element `j` is the mean of `values[j..j + width]`.
pub fn moving_average(values: &[f64], width: usize) -> Result<Vec<f64>> {
    if width == 0 {
        return Err(Error::invalid("moving average width must be >= 1"));
    }
    if values.len() < width {
        return Err(Error::invalid(format!(
            "sequence of length {} is shorter than the averaging width {width}",
            values.len()
        )));
    }
    let w = width as f64;
    Ok(values
        .windows(width)
        .map(|win| win.iter().sum::<f64>() / w)
        .collect())
}

/// Total number of samples a window covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum WindowSize {
    Fixed(usize),
    /// `min(n - 2, cap)` for a series of length `n`.
    LengthCapped { cap: usize },
}

impl WindowSize {
    pub fn effective(self, n: usize) -> usize {
        match self {
            WindowSize::Fixed(w) => w,
            WindowSize::LengthCapped { cap } => n.saturating_sub(2).min(cap),
        }
    }
}

impl fmt::Display for WindowSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WindowSize::Fixed(w) => write!(f, "{w}"),
            WindowSize::LengthCapped { cap } => write!(f, "min(n-2;{cap})"),
        }
    }
}

impl FromStr for WindowSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::parse("window size", s);
        if let Some(rest) = s.strip_prefix("min(n-2;") {
            let cap = rest.strip_suffix(')').ok_or_else(bad)?;
            return Ok(WindowSize::LengthCapped {
                cap: cap.parse().map_err(|_| bad())?,
            });
        }
        Ok(WindowSize::Fixed(s.parse().map_err(|_| bad())?))
    }
}

impl TryFrom<String> for WindowSize {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<WindowSize> for String {
    fn from(w: WindowSize) -> String {
        w.to_string()
    }
}

/// Number of observations shared by consecutive windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Overlap {
    /// `W - d` shared observations, i.e. stride `d`.
    WindowMinus(usize),
    Fixed(usize),
}

impl Overlap {
    /// Stride between window starts; never below one.
    pub fn stride(self, window: usize) -> usize {
        match self {
            Overlap::WindowMinus(d) => d.max(1),
            Overlap::Fixed(o) => window.saturating_sub(o).max(1),
        }
    }
}

impl fmt::Display for Overlap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Overlap::WindowMinus(d) => write!(f, "w-{d}"),
            Overlap::Fixed(o) => write!(f, "{o}"),
        }
    }
}

impl FromStr for Overlap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::parse("overlap", s);
        match s.strip_prefix("w-") {
            Some(d) => Ok(Overlap::WindowMinus(d.parse().map_err(|_| bad())?)),
            None => Ok(Overlap::Fixed(s.parse().map_err(|_| bad())?)),
        }
    }
}

impl TryFrom<String> for Overlap {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Overlap> for String {
    fn from(o: Overlap) -> String {
        o.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowPlan {
    pub size: WindowSize,
    pub overlap: Overlap,
    pub smoothed: bool,
}

impl WindowPlan {
    /// Stride-one plan on the raw signal.
    pub fn sliding(size: WindowSize) -> Self {
        WindowPlan {
            size,
            overlap: Overlap::WindowMinus(1),
            smoothed: false,
        }
    }
}

/// Window starts `0, s, 2s, …` with `start + W <= n`, paired with the center
/// `start + floor(W/2)`. Empty when the window does not fit.
pub fn window_positions(n: usize, plan: &WindowPlan) -> Vec<(usize, usize)> {
    let w = plan.size.effective(n);
    if w < 2 || w > n {
        return Vec::new();
    }
    let stride = plan.overlap.stride(w);
    (0..=n - w)
        .step_by(stride)
        .map(|start| (start, start + w / 2))
        .collect()
}

/// Reduction of a rejection sequence to one bit.
///
/// Fractions are stored in thousandths so `β·m` thresholds compare exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Aggregator {
    Any,
    RateAtLeast { permille: u16 },
    RunAtLeast { permille: u16 },
    KofN { k: usize, n: usize },
}

fn permille_of(beta: f64) -> Result<u16> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::invalid(format!("beta must lie in (0, 1], got {beta}")));
    }
    Ok((beta * 1000.0).round() as u16)
}

impl Aggregator {
    pub fn rate(beta: f64) -> Result<Self> {
        Ok(Aggregator::RateAtLeast {
            permille: permille_of(beta)?,
        })
    }

    pub fn run(beta: f64) -> Result<Self> {
        Ok(Aggregator::RunAtLeast {
            permille: permille_of(beta)?,
        })
    }

    pub fn k_of_n(k: usize, n: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::invalid(format!("k-of-n needs 1 <= k <= n, got {k} of {n}")));
        }
        Ok(Aggregator::KofN { k, n })
    }

    pub fn is_confirmation(self) -> bool {
        !matches!(self, Aggregator::Any)
    }

    pub fn apply(self, seq: &[bool]) -> bool {
        let m = seq.len();
        if m == 0 {
            return false;
        }
        match self {
            Aggregator::Any => seq.iter().any(|&b| b),
            Aggregator::RateAtLeast { permille } => {
                let count = seq.iter().filter(|&&b| b).count();
                1000 * count >= usize::from(permille) * m
            }
            Aggregator::RunAtLeast { permille } => {
                1000 * longest_run(seq) >= usize::from(permille) * m
            }
            Aggregator::KofN { k, n } => {
                if m < n {
                    return false;
                }
                let mut count = seq[..n].iter().filter(|&&b| b).count();
                if count >= k {
                    return true;
                }
                for i in n..m {
                    count += usize::from(seq[i]);
                    count -= usize::from(seq[i - n]);
                    if count >= k {
                        return true;
                    }
                }
                false
            }
        }
    }
}

fn longest_run(seq: &[bool]) -> usize {
    let mut best = 0;
    let mut cur = 0;
    for &b in seq {
        cur = if b { cur + 1 } else { 0 };
        best = best.max(cur);
    }
    best
}

/// Public wrapper matching the per-sequence contract.
pub fn aggregate(seq: &[bool], agg: Aggregator) -> bool {
    agg.apply(seq)
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Aggregator::Any => f.write_str("any"),
            Aggregator::RateAtLeast { permille } => {
                write!(f, "rate={}", f64::from(permille) / 1000.0)
            }
            Aggregator::RunAtLeast { permille } => write!(f, "run={}", f64::from(permille) / 1000.0),
            Aggregator::KofN { k, n } => write!(f, "k={k}/{n}"),
        }
    }
}

impl FromStr for Aggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::parse("aggregator", s);
        if s == "any" {
            return Ok(Aggregator::Any);
        }
        if let Some(b) = s.strip_prefix("rate=") {
            return Aggregator::rate(b.parse().map_err(|_| bad())?);
        }
        if let Some(b) = s.strip_prefix("run=") {
            return Aggregator::run(b.parse().map_err(|_| bad())?);
        }
        if let Some(kn) = s.strip_prefix("k=") {
            let (k, n) = kn.split_once('/').ok_or_else(bad)?;
            return Aggregator::k_of_n(k.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?);
        }
        Err(bad())
    }
}

/// One binary detector.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorSpec {
    pub id: String,
    pub test: TestKind,
    pub alpha: f64,
    pub window: WindowPlan,
    pub aggregator: Aggregator,
}

impl IndicatorSpec {
    pub fn new(test: TestKind, alpha: f64, window: WindowPlan, aggregator: Aggregator) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let id = format!(
            "{}:w={}:a={}:{}:o={}:{}",
            test.code(),
            window.size,
            alpha,
            aggregator,
            window.overlap,
            if window.smoothed { "sm" } else { "raw" }
        );
        Ok(IndicatorSpec {
            id,
            test,
            alpha,
            window,
            aggregator,
        })
    }
}

impl FromStr for IndicatorSpec {
    type Err = Error;

    /// Parses an id of the form `u:w=30:a=0.005:k=2/3:o=w-1:sm`.
    fn from_str(id: &str) -> Result<Self> {
        let bad = || Error::parse("indicator id", id);
        let parts: Vec<&str> = id.split(':').collect();
        let [test, size, alpha, agg, overlap, smooth] = parts[..] else {
            return Err(bad());
        };
        let size = size.strip_prefix("w=").ok_or_else(bad)?.parse()?;
        let alpha: f64 = alpha
            .strip_prefix("a=")
            .ok_or_else(bad)?
            .parse()
            .map_err(|_| bad())?;
        let overlap = overlap.strip_prefix("o=").ok_or_else(bad)?.parse()?;
        let smoothed = match smooth {
            "sm" => true,
            "raw" => false,
            _ => return Err(bad()),
        };
        let spec = IndicatorSpec::new(
            test.parse()?,
            alpha,
            WindowPlan {
                size,
                overlap,
                smoothed,
            },
            agg.parse()?,
        )?;
        if spec.id != id {
            return Err(bad());
        }
        Ok(spec)
    }
}

/// Per-position rejection bits of one test on one signal.
pub fn rejection_sequence(
    signal: &[f64],
    test: TestKind,
    alpha: f64,
    plan: &WindowPlan,
) -> Result<Vec<bool>> {
    let smoothed;
    let series = if plan.smoothed {
        if signal.len() < SMOOTHING_WIDTH {
            return Ok(Vec::new());
        }
        smoothed = moving_average(signal, SMOOTHING_WIDTH)?;
        &smoothed[..]
    } else {
        signal
    };
    let w = plan.size.effective(series.len());
    let half = w / 2;
    window_positions(series.len(), plan)
        .into_iter()
        .map(|(start, center)| {
            let out = test.run(&series[start..center], &series[center..center + half])?;
            Ok(out.p_value < alpha)
        })
        .collect()
}

/// Declarative description of an indicator grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub tests: Vec<TestKind>,
    pub window_sizes: Vec<WindowSize>,
    pub alphas: Vec<f64>,
    pub smoothing: Vec<bool>,
    /// Emit the stride-one "at least one rejection" base indicators.
    pub base: bool,
    /// Fractions β for the rate and run confirmation rules.
    pub betas: Vec<f64>,
    pub rate: bool,
    pub run: bool,
    /// Overlaps crossed with the rate and run rules.
    pub overlaps: Vec<Overlap>,
    /// `(k, n)` pairs for the k-of-n consecutive windows rule.
    pub k_of_n: Vec<(usize, usize)>,
    pub k_of_n_overlaps: Vec<Overlap>,
}

impl GridConfig {
    /// Mann-Whitney, Kolmogorov-Smirnov and F tests with every aggregator.
    pub fn preset_ab() -> Self {
        GridConfig {
            tests: vec![
                TestKind::MannWhitneyU,
                TestKind::KolmogorovSmirnov,
                TestKind::FVariance,
            ],
            window_sizes: vec![
                WindowSize::Fixed(30),
                WindowSize::Fixed(50),
                WindowSize::LengthCapped { cap: 100 },
            ],
            alphas: vec![0.005, 0.1, 0.5],
            smoothing: vec![false, true],
            base: true,
            betas: vec![0.1, 0.3, 0.5],
            rate: true,
            run: true,
            overlaps: vec![Overlap::WindowMinus(1), Overlap::Fixed(5), Overlap::Fixed(10)],
            k_of_n: vec![(2, 3), (3, 3), (2, 5), (3, 5), (4, 5)],
            k_of_n_overlaps: vec![Overlap::WindowMinus(1)],
        }
    }

    /// The A/B grid plus pooled and Welch t-tests and the two slope tests.
    pub fn preset_c() -> Self {
        GridConfig {
            tests: TestKind::ALL.to_vec(),
            ..Self::preset_ab()
        }
    }

    /// Same grid restricted to base indicators.
    pub fn any_only(&self) -> Self {
        GridConfig {
            rate: false,
            run: false,
            k_of_n: Vec::new(),
            base: true,
            ..self.clone()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "AB" | "ab" | "A" | "B" => Ok(Self::preset_ab()),
            "C" | "c" => Ok(Self::preset_c()),
            "Cm" | "cm" => Ok(Self::preset_c().any_only()),
            other => Err(Error::parse("grid preset", other)),
        }
    }
}

/// Expands a grid into indicator specs. Ids must be unique.
pub fn build_grid(config: &GridConfig) -> Result<Vec<IndicatorSpec>> {
    let mut aggregators: Vec<(Aggregator, Overlap)> = Vec::new();
    if config.base {
        aggregators.push((Aggregator::Any, Overlap::WindowMinus(1)));
    }
    for &overlap in &config.overlaps {
        for &beta in &config.betas {
            if config.rate {
                aggregators.push((Aggregator::rate(beta)?, overlap));
            }
            if config.run {
                aggregators.push((Aggregator::run(beta)?, overlap));
            }
        }
    }
    for &overlap in &config.k_of_n_overlaps {
        for &(k, n) in &config.k_of_n {
            aggregators.push((Aggregator::k_of_n(k, n)?, overlap));
        }
    }
    let mut specs = Vec::new();
    let mut seen = HashSet::new();
    for &smoothed in &config.smoothing {
        for &test in &config.tests {
            for &size in &config.window_sizes {
                if let WindowSize::Fixed(w) = size {
                    if w / 2 < test.min_half() {
                        return Err(Error::invalid(format!(
                            "window {w} is too small for the {test} test"
                        )));
                    }
                }
                for &alpha in &config.alphas {
                    for &(aggregator, overlap) in &aggregators {
                        let plan = WindowPlan {
                            size,
                            overlap,
                            smoothed,
                        };
                        let spec = IndicatorSpec::new(test, alpha, plan, aggregator)?;
                        if !seen.insert(spec.id.clone()) {
                            return Err(Error::DuplicateId(spec.id));
                        }
                        specs.push(spec);
                    }
                }
            }
        }
    }
    if specs.is_empty() {
        return Err(Error::invalid("grid expands to no indicators"));
    }
    Ok(specs)
}

/// Signals × indicators bit matrix, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorMatrix {
    pub specs: Vec<IndicatorSpec>,
    pub record_ids: Vec<String>,
    pub labels: Vec<ShiftClass>,
    bits: Vec<u8>,
}

impl IndicatorMatrix {
    pub fn from_rows(
        specs: Vec<IndicatorSpec>,
        record_ids: Vec<String>,
        labels: Vec<ShiftClass>,
        rows: Vec<Vec<u8>>,
    ) -> Result<Self> {
        if record_ids.len() != rows.len() || labels.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: labels.len().min(record_ids.len()),
            });
        }
        let p = specs.len();
        let mut bits = Vec::with_capacity(rows.len() * p);
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: row.len(),
                });
            }
            if row.iter().any(|&b| b > 1) {
                return Err(Error::invalid("indicator values must be 0 or 1"));
            }
            bits.extend(row);
        }
        Ok(IndicatorMatrix {
            specs,
            record_ids,
            labels,
            bits,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.specs.len()
    }

    pub fn row(&self, r: usize) -> &[u8] {
        let p = self.n_cols();
        &self.bits[r * p..(r + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        (0..self.n_rows()).map(|r| self.row(r))
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.bits[r * self.n_cols() + c]
    }

    pub fn column(&self, c: usize) -> Vec<u8> {
        (0..self.n_rows()).map(|r| self.get(r, c)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut bits = Vec::with_capacity(rows.len() * self.n_cols());
        for &r in rows {
            bits.extend_from_slice(self.row(r));
        }
        IndicatorMatrix {
            specs: self.specs.clone(),
            record_ids: rows.iter().map(|&r| self.record_ids[r].clone()).collect(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            bits,
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut bits = Vec::with_capacity(self.n_rows() * cols.len());
        for r in 0..self.n_rows() {
            let row = self.row(r);
            bits.extend(cols.iter().map(|&c| row[c]));
        }
        IndicatorMatrix {
            specs: cols.iter().map(|&c| self.specs[c].clone()).collect(),
            record_ids: self.record_ids.clone(),
            labels: self.labels.clone(),
            bits,
        }
    }

    pub fn column_index(&self, id: &str) -> Option<usize> {
        self.specs.iter().position(|s| s.id == id)
    }

    /// CSV with header `id,label,<indicator ids>` and 0/1 cells.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut line = String::from("id,label");
        for s in &self.specs {
            line.push(',');
            line.push_str(&s.id);
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
        for r in 0..self.n_rows() {
            let id = &self.record_ids[r];
            if id.contains([',', '\n', '"']) {
                return Err(Error::invalid(format!("record id `{id}` cannot be written to CSV")));
            }
            line.clear();
            line.push_str(id);
            line.push(',');
            line.push_str(&self.labels[r].code().to_string());
            for &b in self.row(r) {
                line.push(',');
                line.push(if b == 1 { '1' } else { '0' });
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or(Error::Format {
            line: 1,
            message: "missing header".into(),
        })??;
        let mut fields = header.split(',');
        if fields.next() != Some("id") || fields.next() != Some("label") {
            return Err(Error::Format {
                line: 1,
                message: "header must start with `id,label`".into(),
            });
        }
        let specs = fields
            .map(|f| {
                f.parse::<IndicatorSpec>().map_err(|e| Error::Format {
                    line: 1,
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let p = specs.len();
        let mut record_ids = Vec::new();
        let mut labels = Vec::new();
        let mut bits = Vec::new();
        for (idx, line) in lines.enumerate() {
            let lineno = idx + 2;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fail = |message: String| Error::Format {
                line: lineno,
                message,
            };
            let mut cells = line.split(',');
            let id = cells.next().unwrap_or_default().to_string();
            let label: u8 = cells
                .next()
                .and_then(|l| l.parse().ok())
                .ok_or_else(|| fail("missing or malformed label".into()))?;
            let label = ShiftClass::try_from(label).map_err(|e| fail(e.to_string()))?;
            let before = bits.len();
            for cell in cells {
                match cell {
                    "0" => bits.push(0),
                    "1" => bits.push(1),
                    other => return Err(fail(format!("cell `{other}` is not 0 or 1"))),
                }
            }
            if bits.len() - before != p {
                return Err(fail(format!(
                    "expected {p} indicator cells, found {}",
                    bits.len() - before
                )));
            }
            record_ids.push(id);
            labels.push(label);
        }
        Ok(IndicatorMatrix {
            specs,
            record_ids,
            labels,
            bits,
        })
    }
}

/// Specs sharing a (test, window size, smoothing) triple reuse one stride-one
/// p-value sequence; strided plans subsample it.
struct PValueGroups {
    keys: Vec<(TestKind, WindowSize, bool)>,
    group_of: Vec<usize>,
}

impl PValueGroups {
    fn new(specs: &[IndicatorSpec]) -> Self {
        let mut keys = Vec::new();
        let group_of = specs
            .iter()
            .map(|s| {
                let key = (s.test, s.window.size, s.window.smoothed);
                keys.iter().position(|k| *k == key).unwrap_or_else(|| {
                    keys.push(key);
                    keys.len() - 1
                })
            })
            .collect();
        PValueGroups { keys, group_of }
    }
}

fn stride_one_p_values(series: &[f64], test: TestKind, size: WindowSize) -> Result<Vec<f64>> {
    let plan = WindowPlan::sliding(size);
    let half = size.effective(series.len()) / 2;
    window_positions(series.len(), &plan)
        .into_iter()
        .map(|(start, center)| {
            Ok(test
                .run(&series[start..center], &series[center..center + half])?
                .p_value)
        })
        .collect()
}

fn featurize_row(values: &[f64], specs: &[IndicatorSpec], groups: &PValueGroups) -> Result<Vec<u8>> {
    let smoothed = if values.len() >= SMOOTHING_WIDTH {
        moving_average(values, SMOOTHING_WIDTH)?
    } else {
        Vec::new()
    };
    let p_values = groups
        .keys
        .iter()
        .map(|&(test, size, sm)| {
            let series = if sm { &smoothed[..] } else { values };
            stride_one_p_values(series, test, size)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut seq = Vec::new();
    Ok(specs
        .iter()
        .zip(&groups.group_of)
        .map(|(spec, &g)| {
            let n = if spec.window.smoothed {
                smoothed.len()
            } else {
                values.len()
            };
            let stride = spec.window.overlap.stride(spec.window.size.effective(n));
            seq.clear();
            seq.extend(p_values[g].iter().step_by(stride).map(|&p| p < spec.alpha));
            u8::from(spec.aggregator.apply(&seq))
        })
        .collect())
}

/// Evaluates every indicator on every signal. Rows are computed in parallel
/// and come back in input order.
pub fn featurize(dataset: &[SignalRecord], specs: &[IndicatorSpec]) -> Result<IndicatorMatrix> {
    if specs.is_empty() {
        return Err(Error::invalid("featurize needs at least one indicator"));
    }
    let groups = PValueGroups::new(specs);
    let rows = dataset
        .par_iter()
        .map(|rec| featurize_row(&rec.values, specs, &groups))
        .collect::<Result<Vec<_>>>()?;
    IndicatorMatrix::from_rows(
        specs.to_vec(),
        dataset.iter().map(|r| r.id.clone()).collect(),
        dataset.iter().map(|r| r.label).collect(),
        rows,
    )
}

/// Reference featurization without the shared p-value cache.
pub fn featurize_uncached(dataset: &[SignalRecord], specs: &[IndicatorSpec]) -> Result<IndicatorMatrix> {
    let rows = dataset
        .iter()
        .map(|rec| {
            specs
                .iter()
                .map(|s| {
                    let seq = rejection_sequence(&rec.values, s.test, s.alpha, &s.window)?;
                    Ok(u8::from(s.aggregator.apply(&seq)))
                })
                .collect::<Result<Vec<u8>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    IndicatorMatrix::from_rows(
        specs.to_vec(),
        dataset.iter().map(|r| r.id.clone()).collect(),
        dataset.iter().map(|r| r.label).collect(),
        rows,
    )
}
