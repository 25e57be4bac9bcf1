// SPDX-License-Identifier: MIT OR Apache-2.0

//! Two-sample tests used on sliding windows.
//!
//! Every test returns a two-sided p-value. Windows on which a statistic is
//! undefined (all values tied, zero variance) are reported as degenerate with
//! `p = 1`; featurization must never abort on flat data.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{f_tails, kolmogorov_q, std_normal_sf, student_t_two_sided};

/// Smallest p-value ever reported for a non-degenerate window.
pub const MIN_P_VALUE: f64 = f64::MIN_POSITIVE;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TestKind {
    MannWhitneyU,
    KolmogorovSmirnov,
    FVariance,
    TPooled,
    TWelch,
    SlopeShift,
    SlopeChange,
}

impl TestKind {
    pub const ALL: [TestKind; 7] = [
        TestKind::MannWhitneyU,
        TestKind::KolmogorovSmirnov,
        TestKind::FVariance,
        TestKind::TPooled,
        TestKind::TWelch,
        TestKind::SlopeShift,
        TestKind::SlopeChange,
    ];

    /// Short code used in indicator ids and config files.
    pub fn code(self) -> &'static str {
        match self {
            TestKind::MannWhitneyU => "u",
            TestKind::KolmogorovSmirnov => "ks",
            TestKind::FVariance => "f",
            TestKind::TPooled => "tp",
            TestKind::TWelch => "tw",
            TestKind::SlopeShift => "ss",
            TestKind::SlopeChange => "sc",
        }
    }

    /// Minimum number of values each half-window must hold.
    pub fn min_half(self) -> usize {
        match self {
            TestKind::MannWhitneyU | TestKind::KolmogorovSmirnov => 1,
            TestKind::FVariance | TestKind::TPooled | TestKind::TWelch => 2,
            TestKind::SlopeShift | TestKind::SlopeChange => 3,
        }
    }

    pub fn run(self, left: &[f64], right: &[f64]) -> Result<TestOutcome> {
        match self {
            TestKind::MannWhitneyU => mann_whitney_u(left, right),
            TestKind::KolmogorovSmirnov => ks_two_sample(left, right),
            TestKind::FVariance => f_variance(left, right),
            TestKind::TPooled => t_pooled(left, right),
            TestKind::TWelch => t_welch(left, right),
            TestKind::SlopeShift => slope_shift(left, right),
            TestKind::SlopeChange => slope_change(left, right),
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl TryFrom<String> for TestKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TestKind> for String {
    fn from(k: TestKind) -> String {
        k.code().to_string()
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestKind::ALL
            .into_iter()
            .find(|t| t.code() == s)
            .ok_or_else(|| Error::parse("test kind", s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub degenerate: bool,
}

impl TestOutcome {
    fn new(statistic: f64, p_value: f64) -> Self {
        let p_value = if p_value.is_nan() {
            1.0
        } else {
            p_value.clamp(MIN_P_VALUE, 1.0)
        };
        TestOutcome {
            statistic,
            p_value,
            degenerate: false,
        }
    }

    fn degenerate(statistic: f64) -> Self {
        TestOutcome {
            statistic,
            p_value: 1.0,
            degenerate: true,
        }
    }
}

fn require_len(sample: &[f64], needed: usize) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if sample.len() < needed {
        return Err(Error::SampleTooSmall {
            needed,
            got: sample.len(),
        });
    }
    Ok(())
}

/// Mean and unbiased variance; exactly zero variance for constant input.
fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let first = xs[0];
    if xs.iter().all(|&v| v == first) {
        return (first, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|&v| (v - mean) * (v - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Midranks of the pooled sample. Returns left rank sum and the tie term
/// `Σ (t³ - t)`.
fn pooled_ranks(left: &[f64], right: &[f64]) -> (f64, f64) {
    let mut pooled: Vec<(f64, bool)> = left
        .iter()
        .map(|&v| (v, true))
        .chain(right.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum_left = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j share the average
        let midrank = (i + 1 + j) as f64 * 0.5;
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        let lefts = pooled[i..j].iter().filter(|p| p.1).count();
        rank_sum_left += midrank * lefts as f64;
        i = j;
    }
    (rank_sum_left, tie_term)
}

/// Mann-Whitney U test, normal approximation with tie-corrected variance and
/// a 0.5 continuity correction.
pub fn mann_whitney_u(left: &[f64], right: &[f64]) -> Result<TestOutcome> {
    require_len(left, 1)?;
    require_len(right, 1)?;
    let nl = left.len() as f64;
    let nr = right.len() as f64;
    let n = nl + nr;
    let (rank_sum, tie_term) = pooled_ranks(left, right);
    let u = rank_sum - nl * (nl + 1.0) * 0.5;
    let mean = nl * nr * 0.5;
    let var = if n > 1.0 {
        nl * nr / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)))
    } else {
        0.0
    };
    if var <= 0.0 {
        return Ok(TestOutcome::degenerate(u));
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    Ok(TestOutcome::new(u, (2.0 * std_normal_sf(z)).min(1.0)))
}

/// Exact two-sided Mann-Whitney p-value by enumerating every assignment of
/// ranks to the left sample. Only for small tie-free inputs (`n ≤ 16`).
pub fn mann_whitney_exact(left: &[f64], right: &[f64]) -> Result<TestOutcome> {
    require_len(left, 1)?;
    require_len(right, 1)?;
    let nl = left.len();
    let n = nl + right.len();
    if n > 16 {
        return Err(Error::invalid(format!(
            "exact enumeration supports at most 16 values, got {n}"
        )));
    }
    let (rank_sum, tie_term) = pooled_ranks(left, right);
    if tie_term != 0.0 {
        return Err(Error::invalid("exact enumeration requires tie-free samples"));
    }
    let offset = (nl * (nl + 1)) as f64 * 0.5;
    let u_obs = rank_sum - offset;
    let mean = (nl * right.len()) as f64 * 0.5;
    let observed = (u_obs - mean).abs();
    let mut total = 0u64;
    let mut extreme = 0u64;
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != nl {
            continue;
        }
        let ranks: usize = (0..n).filter(|b| mask & (1 << b) != 0).map(|b| b + 1).sum();
        let u = ranks as f64 - offset;
        total += 1;
        if (u - mean).abs() >= observed - 1e-9 {
            extreme += 1;
        }
    }
    Ok(TestOutcome::new(u_obs, extreme as f64 / total as f64))
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov tail and
/// the usual `√n_e + 0.12 + 0.11/√n_e` small-sample adjustment.
pub fn ks_two_sample(left: &[f64], right: &[f64]) -> Result<TestOutcome> {
    require_len(left, 1)?;
    require_len(right, 1)?;
    let mut l = left.to_vec();
    let mut r = right.to_vec();
    l.sort_unstable_by(f64::total_cmp);
    r.sort_unstable_by(f64::total_cmp);
    if l[0] == l[l.len() - 1] && r[0] == r[r.len() - 1] && l[0] == r[0] {
        return Ok(TestOutcome::degenerate(0.0));
    }
    let nl = l.len() as f64;
    let nr = r.len() as f64;
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < l.len() && j < r.len() {
        let x = l[i].min(r[j]);
        while i < l.len() && l[i] <= x {
            i += 1;
        }
        while j < r.len() && r[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / nl - j as f64 / nr).abs());
    }
    let ne = nl * nr / (nl + nr);
    let sqrt_ne = ne.sqrt();
    let lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d;
    Ok(TestOutcome::new(d, kolmogorov_q(lambda)))
}

/// F-test for equality of variances, two-sided.
pub fn f_variance(left: &[f64], right: &[f64]) -> Result<TestOutcome> {
    require_len(left, 2)?;
    require_len(right, 2)?;
    let (_, vl) = mean_var(left);
    let (_, vr) = mean_var(right);
    if vl == 0.0 && vr == 0.0 {
        return Ok(TestOutcome::degenerate(1.0));
    }
    let f = vl / vr;
    let (lower, upper) = f_tails(f, (left.len() - 1) as f64, (right.len() - 1) as f64);
    Ok(TestOutcome::new(f, (2.0 * lower.min(upper)).min(1.0)))
}

fn t_outcome(diff: f64, se2: f64, df: f64) -> TestOutcome {
    if se2 == 0.0 {
        if diff == 0.0 {
            return TestOutcome::degenerate(0.0);
        }
        return TestOutcome::new(diff.signum() * f64::INFINITY, MIN_P_VALUE);
    }
    let t = diff / se2.sqrt();
    TestOutcome::new(t, student_t_two_sided(t, df))
}

/// Two-sample Student t-test with pooled variance.
pub fn t_pooled(left: &[f64], right: &[f64]) -> Result<TestOutcome> {
    require_len(left, 2)?;
    require_len(right, 2)?;
    let nl = left.len() as f64;
    let nr = right.len() as f64;
    let (ml, vl) = mean_var(left);
    let (mr, vr) = mean_var(right);
    let df = nl + nr - 2.0;
    let pooled = ((nl - 1.0) * vl + (nr - 1.0) * vr) / df;
    Ok(t_outcome(ml - mr, pooled * (1.0 / nl + 1.0 / nr), df))
}

/// Welch t-test with Welch-Satterthwaite degrees of freedom.
pub fn t_welch(left: &[f64], right: &[f64]) -> Result<TestOutcome> {
    require_len(left, 2)?;
    require_len(right, 2)?;
    let nl = left.len() as f64;
    let nr = right.len() as f64;
    let (ml, vl) = mean_var(left);
    let (mr, vr) = mean_var(right);
    let (al, ar) = (vl / nl, vr / nr);
    let se2 = al + ar;
    let df = if se2 > 0.0 {
        se2 * se2 / (al * al / (nl - 1.0) + ar * ar / (nr - 1.0))
    } else {
        nl + nr - 2.0
    };
    Ok(t_outcome(ml - mr, se2, df))
}

/// Least-squares line against the local index `0..m`.
#[derive(Clone, Copy, Debug)]
struct LineFit {
    slope: f64,
    /// Squared standard error of the slope; exactly zero for a perfect fit.
    slope_var: f64,
    df: f64,
}

fn fit_line(ys: &[f64]) -> LineFit {
    let m = ys.len() as f64;
    let df = m - 2.0;
    let first = ys[0];
    if ys.iter().all(|&v| v == first) {
        return LineFit {
            slope: 0.0,
            slope_var: 0.0,
            df,
        };
    }
    let x_mean = (m - 1.0) * 0.5;
    let y_mean = ys.iter().sum::<f64>() / m;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (i, &y) in ys.iter().enumerate() {
        let dx = i as f64 - x_mean;
        let dy = y - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let rss = (syy - slope * sxy).max(0.0);
    // residuals at rounding level mean the points lie on a line
    let rss = if rss <= 1e-20 * syy { 0.0 } else { rss };
    LineFit {
        slope,
        slope_var: rss / df / sxx,
        df,
    }
}

fn same_slope(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
}

/// Difference between the least-squares slopes of the two windows.
pub fn slope_shift(left: &[f64], right: &[f64]) -> Result<TestOutcome> {
    require_len(left, 3)?;
    require_len(right, 3)?;
    let l = fit_line(left);
    let r = fit_line(right);
    let diff = r.slope - l.slope;
    let se2 = l.slope_var + r.slope_var;
    if se2 == 0.0 {
        if same_slope(l.slope, r.slope) {
            return Ok(TestOutcome::degenerate(0.0));
        }
        return Ok(TestOutcome::new(diff.signum() * f64::INFINITY, MIN_P_VALUE));
    }
    let df = se2 * se2
        / (l.slope_var * l.slope_var / l.df + r.slope_var * r.slope_var / r.df);
    let t = diff / se2.sqrt();
    Ok(TestOutcome::new(t, student_t_two_sided(t, df)))
}

/// Slope of the right window against zero; the left window is ignored.
pub fn slope_change(_left: &[f64], right: &[f64]) -> Result<TestOutcome> {
    require_len(right, 3)?;
    let r = fit_line(right);
    Ok(t_outcome(r.slope, r.slope_var, r.df))
}
