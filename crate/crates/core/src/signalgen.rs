// SPDX-License-Identifier: MIT OR Apache-2.0

//! Labeled synthetic series with a single change point.
//!
//! A signal is stationary noise of random length in `100..=200`. Shifted
//! classes change their distribution at a change point drawn uniformly in
//! the central 60% of the series.

use std::fmt;
use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, Stream};

pub const MIN_LENGTH: usize = 100;
pub const MAX_LENGTH: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
#[repr(u8)]
pub enum ShiftClass {
    NoChange = 0,
    Variance = 1,
    Mean = 2,
    Trend = 3,
}

impl ShiftClass {
    pub const COUNT: usize = 4;
    pub const ALL: [ShiftClass; 4] = [
        ShiftClass::NoChange,
        ShiftClass::Variance,
        ShiftClass::Mean,
        ShiftClass::Trend,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ShiftClass::NoChange => "no change",
            ShiftClass::Variance => "variance",
            ShiftClass::Mean => "mean",
            ShiftClass::Trend => "trend",
        }
    }
}

impl TryFrom<u8> for ShiftClass {
    type Error = Error;

    fn try_from(code: u8) -> Result<Self> {
        ShiftClass::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::invalid(format!("shift class must be 0..=3, got {code}")))
    }
}

impl From<ShiftClass> for u8 {
    fn from(c: ShiftClass) -> u8 {
        c.code()
    }
}

impl fmt::Display for ShiftClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalRecord {
    pub id: String,
    pub values: Vec<f64>,
    pub label: ShiftClass,
    pub change_point: Option<usize>,
}

impl SignalRecord {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    /// i.i.d. standard normal.
    Gaussian,
    /// `a · Y_i` with `Y_i` i.i.d. Student-t and `a` drawn once per signal.
    ScaledStudent { df: f64, scale_range: [f64; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub noise: NoiseModel,
    pub mean_shift_range: [f64; 2],
    /// Standard-deviation factor applied after the change point.
    pub std_shift_range: [f64; 2],
    pub slope_range: [f64; 2],
    /// Number of records per class, indexed by class code.
    pub counts: [usize; 4],
}

pub const PAPER_COUNTS: [usize; 4] = [3000, 1000, 1000, 1000];

impl DatasetSpec {
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "A" | "a" => Ok(Self::set_a()),
            "B" | "b" => Ok(Self::set_b()),
            "C" | "c" => Ok(Self::set_c()),
            other => Err(Error::parse("dataset preset", other)),
        }
    }

    pub fn set_a() -> Self {
        DatasetSpec {
            name: "A".into(),
            noise: NoiseModel::Gaussian,
            mean_shift_range: [1.01, 5.0],
            std_shift_range: [1.01, 5.0],
            slope_range: [0.02, 3.0],
            counts: PAPER_COUNTS,
        }
    }

    pub fn set_b() -> Self {
        DatasetSpec {
            name: "B".into(),
            mean_shift_range: [0.505, 2.5],
            ..Self::set_a()
        }
    }

    pub fn set_c() -> Self {
        DatasetSpec {
            name: "C".into(),
            noise: NoiseModel::ScaledStudent {
                df: 3.0,
                scale_range: [0.5, 3.0],
            },
            mean_shift_range: [0.3, 5.0],
            std_shift_range: [1.05, 5.0],
            slope_range: [0.02, 3.0],
            counts: PAPER_COUNTS,
        }
    }

    pub fn with_counts(mut self, counts: [usize; 4]) -> Self {
        self.counts = counts;
        self
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    fn validate(&self) -> Result<()> {
        for (what, [lo, hi]) in [
            ("mean_shift_range", self.mean_shift_range),
            ("std_shift_range", self.std_shift_range),
            ("slope_range", self.slope_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::invalid(format!("{what} must satisfy low <= high")));
            }
        }
        if let NoiseModel::ScaledStudent { df, scale_range } = &self.noise {
            if !(*df > 0.0) || !(scale_range[0] > 0.0 && scale_range[0] <= scale_range[1]) {
                return Err(Error::invalid("scaled Student noise needs df > 0 and 0 < low <= high"));
            }
        }
        Ok(())
    }
}

/// Signal length, uniform on `100..=200`.
pub fn draw_length(rng: &mut impl Rng) -> usize {
    rng.random_range(MIN_LENGTH..=MAX_LENGTH)
}

/// Inclusive bounds `[ceil(2n/10), floor(8n/10)]` for the change point.
pub fn change_point_bounds(n: usize) -> (usize, usize) {
    ((2 * n).div_ceil(10), 8 * n / 10)
}

pub fn draw_change_point(rng: &mut impl Rng, n: usize) -> usize {
    let (lo, hi) = change_point_bounds(n);
    rng.random_range(lo..=hi)
}

fn uniform(rng: &mut impl Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

pub fn generate_signal(
    rng: &mut impl Rng,
    id: String,
    label: ShiftClass,
    spec: &DatasetSpec,
) -> Result<SignalRecord> {
    spec.validate()?;
    let n = draw_length(rng);
    let change_point = match label {
        ShiftClass::NoChange => None,
        _ => Some(draw_change_point(rng, n)),
    };
    let tau = change_point.unwrap_or(n);
    let mut scale_after = 1.0;
    let mut mean_after = 0.0;
    let mut slope = 0.0;
    match label {
        ShiftClass::NoChange => {}
        ShiftClass::Variance => scale_after = uniform(rng, spec.std_shift_range),
        ShiftClass::Mean => mean_after = uniform(rng, spec.mean_shift_range),
        ShiftClass::Trend => slope = uniform(rng, spec.slope_range),
    }
    let values = match &spec.noise {
        NoiseModel::Gaussian => (0..n)
            .map(|i| {
                let e: f64 = StandardNormal.sample(rng);
                if i < tau {
                    e
                } else {
                    scale_after * e + mean_after + slope * (i - tau) as f64
                }
            })
            .collect(),
        NoiseModel::ScaledStudent { df, scale_range } => {
            let a = uniform(rng, *scale_range);
            let t = StudentT::new(*df).map_err(|e| Error::invalid(e.to_string()))?;
            (0..n)
                .map(|i| {
                    let e = a * t.sample(rng);
                    if i < tau {
                        e
                    } else {
                        scale_after * e + mean_after + slope * (i - tau) as f64
                    }
                })
                .collect()
        }
    };
    Ok(SignalRecord {
        id,
        values,
        label,
        change_point,
    })
}

/// Generates `spec.counts[c]` records of every class, grouped by class.
///
/// Record `i` draws from its own substream keyed by `(master_seed, i)`, so
/// the output does not depend on generation order or thread count.
pub fn generate_dataset(master_seed: u64, spec: &DatasetSpec) -> Result<Vec<SignalRecord>> {
    spec.validate()?;
    let labels: Vec<ShiftClass> = ShiftClass::ALL
        .iter()
        .flat_map(|&c| std::iter::repeat_n(c, spec.counts[c.index()]))
        .collect();
    labels
        .par_iter()
        .enumerate()
        .map(|(i, &label)| {
            let mut rng: Stream = substream(master_seed, "signal", i as u64);
            generate_signal(&mut rng, format!("{}-{:05}", spec.name, i), label, spec)
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct RawRecord {
    id: String,
    label: u8,
    change_point: Option<usize>,
    values: Vec<f64>,
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Writes one JSON object per line with 17 significant digits per value.
pub fn write_jsonl<W: Write>(records: &[SignalRecord], mut out: W) -> Result<()> {
    let mut line = String::new();
    for r in records {
        line.clear();
        line.push_str("{\"id\":");
        line.push_str(&json_string(&r.id));
        line.push_str(&format!(",\"label\":{}", r.label.code()));
        match r.change_point {
            Some(cp) => line.push_str(&format!(",\"change_point\":{cp}")),
            None => line.push_str(",\"change_point\":null"),
        }
        line.push_str(",\"values\":[");
        for (i, v) in r.values.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format!("{v:.16e}"));
        }
        line.push_str("]}\n");
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<SignalRecord>> {
    let mut records = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fail = |message: String| Error::Format {
            line: lineno,
            message,
        };
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| fail(e.to_string()))?;
        let label = ShiftClass::try_from(raw.label).map_err(|e| fail(e.to_string()))?;
        if raw.values.is_empty() || raw.values.iter().any(|v| !v.is_finite()) {
            return Err(fail("values must be a non-empty list of finite numbers".into()));
        }
        match (label, raw.change_point) {
            (ShiftClass::NoChange, Some(_)) => {
                return Err(fail("class 0 records must not have a change point".into()))
            }
            (ShiftClass::NoChange, None) => {}
            (_, None) => return Err(fail("shifted records need a change point".into())),
            (_, Some(cp)) if cp >= raw.values.len() => {
                return Err(fail(format!("change point {cp} outside the series")))
            }
            _ => {}
        }
        records.push(SignalRecord {
            id: raw.id,
            values: raw.values,
            label,
            change_point: raw.change_point,
        });
    }
    Ok(records)
}
