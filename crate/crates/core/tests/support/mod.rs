// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reference implementations and checkers shared by the integration tests.
//!
//! Nothing here calls the library routine it is used to check.

#![allow(dead_code)]

use std::collections::HashMap;

use binsight_core::indicators::{aggregate, build_grid, rejection_sequence, Aggregator, GridConfig, IndicatorMatrix, WindowPlan};
use binsight_core::rng::substream;
use binsight_core::signalgen::ShiftClass;
use binsight_core::stattests::TestKind;
use rand::Rng;
use rand_distr::StandardNormal;

pub const ALPHAS: [f64; 3] = [0.005, 0.1, 0.5];

/// Adaptive Simpson on [a, b].
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 60)
}

/// Regularized incomplete beta by quadrature of the beta density.
pub fn incomplete_beta_quadrature(a: f64, b: f64, x: f64) -> f64 {
    // scaled so the peak is 1; 64 panels keep the first estimates honest
    let log_kernel = |t: f64| (a - 1.0) * t.ln() + (b - 1.0) * (1.0 - t).ln();
    let peak = if a > 1.0 && b > 1.0 {
        log_kernel((a - 1.0) / (a + b - 2.0))
    } else {
        0.0
    };
    let density = |t: f64| {
        if t <= 0.0 || t >= 1.0 {
            t.powf(a - 1.0) * (1.0 - t).powf(b - 1.0) * (-peak).exp()
        } else {
            (log_kernel(t) - peak).exp()
        }
    };
    let integrate = |hi: f64| -> f64 {
        let panels = 64;
        (0..panels)
            .map(|i| {
                let lo = hi * i as f64 / panels as f64;
                let up = hi * (i + 1) as f64 / panels as f64;
                simpson(&density, lo, up, 1e-17)
            })
            .sum()
    };
    integrate(x) / integrate(1.0)
}

/// The 100-point `(a, b, x)` grid used for the incomplete beta check.
pub fn beta_grid() -> Vec<(f64, f64, f64)> {
    let mut grid = Vec::new();
    for &a in &[1.0, 1.5, 3.0, 8.0, 20.0] {
        for &b in &[1.0, 2.0, 5.0, 12.0] {
            for &x in &[0.05, 0.2, 0.5, 0.8, 0.95] {
                grid.push((a, b, x));
            }
        }
    }
    grid
}

/// Exact two-sided Mann-Whitney p-value from the U count distribution.
pub fn exact_u_p(n1: usize, n2: usize, u: f64) -> f64 {
    // table[i][j][v]: arrangements of i left and j right items with U = v
    let max_u = n1 * n2;
    let mut table = vec![vec![vec![0f64; max_u + 1]; n2 + 1]; n1 + 1];
    for i in 0..=n1 {
        table[i][0][0] = 1.0;
    }
    for j in 0..=n2 {
        table[0][j][0] = 1.0;
    }
    for i in 1..=n1 {
        for j in 1..=n2 {
            for v in 0..=max_u {
                // the largest item is either left (adds j) or right (adds 0)
                let from_left = if v >= j { table[i - 1][j][v - j] } else { 0.0 };
                table[i][j][v] = from_left + table[i][j - 1][v];
            }
        }
    }
    let dist = &table[n1][n2];
    let total: f64 = dist.iter().sum();
    let mean = (n1 * n2) as f64 / 2.0;
    let obs = (u - mean).abs();
    dist.iter()
        .enumerate()
        .filter(|(v, _)| (*v as f64 - mean).abs() >= obs - 1e-9)
        .map(|(_, c)| c)
        .sum::<f64>()
        / total
}

/// Every tie-free 8+8 split of the ranks 0..16.
pub fn all_8_plus_8_splits() -> Vec<(Vec<f64>, Vec<f64>)> {
    (0u32..(1 << 16))
        .filter(|m| m.count_ones() == 8)
        .map(|mask| {
            let (mut left, mut right) = (Vec::new(), Vec::new());
            for v in 0..16 {
                if mask & (1 << v) != 0 {
                    left.push(v as f64);
                } else {
                    right.push(v as f64);
                }
            }
            (left, right)
        })
        .collect()
}

/// Rows with class-dependent Bernoulli bits.
pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> IndicatorMatrix {
    let specs = build_grid(&GridConfig::preset_ab()).unwrap()[..cols].to_vec();
    let mut labels = Vec::new();
    let mut bits = Vec::new();
    for r in 0..rows {
        let class = ShiftClass::ALL[r % 4];
        let row: Vec<u8> = (0..cols)
            .map(|c| {
                let bias = 0.2 + 0.15 * ((c + class.index()) % 4) as f64;
                rng.random_bool(bias) as u8
            })
            .collect();
        labels.push(class);
        bits.push(row);
    }
    let ids = (0..rows).map(|i| format!("s{i}")).collect();
    IndicatorMatrix::from_rows(specs, ids, labels, bits).unwrap()
}

/// `ln P(class, bits)` by direct counting and a plain product, Laplace ε = 1.
pub fn nb_joint_log(m: &IndicatorMatrix, class: usize, bits: &[u8]) -> f64 {
    let rows: Vec<&[u8]> = (0..m.n_rows())
        .filter(|&r| m.labels[r].index() == class)
        .map(|r| m.row(r))
        .collect();
    let nc = rows.len() as f64;
    let mut joint = nc / m.n_rows() as f64;
    for (j, &b) in bits.iter().enumerate() {
        let ones = rows.iter().filter(|row| row[j] == 1).count() as f64;
        let q = (ones + 1.0) / (nc + 2.0);
        joint *= if b == 1 { q } else { 1.0 - q };
    }
    joint.ln()
}

/// I(X;Y) = H(X) + H(Y) - H(X,Y) in bits.
pub fn entropy_mi(x: &[u8], y: &[u8]) -> f64 {
    let n = x.len() as f64;
    let h = |counts: &HashMap<(u8, u8), usize>| -> f64 {
        counts
            .values()
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.log2()
            })
            .sum()
    };
    let (mut hx, mut hy, mut hxy) = (HashMap::new(), HashMap::new(), HashMap::new());
    for (&a, &b) in x.iter().zip(y) {
        *hx.entry((a, 0)).or_insert(0) += 1;
        *hy.entry((b, 0)).or_insert(0) += 1;
        *hxy.entry((a, b)).or_insert(0) += 1;
    }
    h(&hx) + h(&hy) - h(&hxy)
}

/// Greedy mRMR (difference form) recomputing every MI from scratch.
pub fn brute_force_mrmr(m: &IndicatorMatrix, k: usize) -> Vec<usize> {
    let y: Vec<u8> = m.labels.iter().map(|c| c.code()).collect();
    let cols: Vec<Vec<u8>> = (0..m.n_cols()).map(|c| m.column(c)).collect();
    let mut chosen: Vec<usize> = Vec::new();
    while chosen.len() < k {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for j in 0..cols.len() {
            if chosen.contains(&j) {
                continue;
            }
            let rel = entropy_mi(&cols[j], &y);
            let red = if chosen.is_empty() {
                0.0
            } else {
                chosen.iter().map(|&s| entropy_mi(&cols[j], &cols[s])).sum::<f64>() / chosen.len() as f64
            };
            if rel - red > best.1 + 1e-12 {
                best = (j, rel - red);
            }
        }
        chosen.push(best.0);
    }
    chosen
}

pub fn gaussian(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Null rejection rates at [`ALPHAS`] over `reps` pairs of N(0,1) samples.
pub fn null_rejection_rates(test: TestKind, half: usize, reps: usize, seed: u64) -> [f64; 3] {
    let mut hits = [0usize; 3];
    for rep in 0..reps {
        let mut rng = substream(seed, test.code(), rep as u64);
        let left = gaussian(&mut rng, half);
        let right = gaussian(&mut rng, half);
        let p = test.run(&left, &right).unwrap().p_value;
        for (h, &a) in hits.iter_mut().zip(&ALPHAS) {
            *h += usize::from(p < a);
        }
    }
    hits.map(|h| h as f64 / reps as f64)
}

pub fn calibration_tolerance(alpha: f64, reps: usize) -> f64 {
    4.0 * (alpha * (1.0 - alpha) / reps as f64).sqrt()
}

/// Any ⇐ Rate(β) ⇐ Run(β), and every k-of-n ⇒ Any.
pub fn aggregators_are_ordered(seq: &[bool]) -> bool {
    let any = aggregate(seq, Aggregator::Any);
    let chains = [0.1, 0.3, 0.5].iter().all(|&beta| {
        let rate = aggregate(seq, Aggregator::rate(beta).unwrap());
        let run = aggregate(seq, Aggregator::run(beta).unwrap());
        run <= rate && rate <= any
    });
    let kn = [(2, 3), (3, 3), (2, 5), (3, 5), (4, 5)]
        .iter()
        .all(|&(k, n)| aggregate(seq, Aggregator::k_of_n(k, n).unwrap()) <= any);
    chains && kn
}

/// Window bits and their Any reduction never decrease as α grows.
pub fn rejections_are_alpha_monotone(signal: &[f64], test: TestKind, plan: &WindowPlan) -> bool {
    let seqs: Vec<Vec<bool>> = ALPHAS
        .iter()
        .map(|&a| rejection_sequence(signal, test, a, plan).unwrap())
        .collect();
    seqs.windows(2).all(|pair| {
        pair[0].len() == pair[1].len()
            && pair[0].iter().zip(&pair[1]).all(|(lo, hi)| lo <= hi)
            && aggregate(&pair[0], Aggregator::Any) <= aggregate(&pair[1], Aggregator::Any)
    })
}
