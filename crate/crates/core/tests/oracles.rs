// SPDX-License-Identifier: MIT OR Apache-2.0

//! Library results against independent reference computations.

mod support;

use binsight_core::classifiers::nb_train;
use binsight_core::indicators::{build_grid, GridConfig, IndicatorMatrix};
use binsight_core::selection::{mrmr_rank, mutual_information};
use binsight_core::signalgen::ShiftClass;
use binsight_core::special::{kolmogorov_q, reg_incomplete_beta, std_normal_cdf};
use binsight_core::stattests::{f_variance, mann_whitney_exact, mann_whitney_u};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

#[test]
fn asymptotic_u_tracks_exact_enumeration_on_every_8_plus_8_split() {
    let splits = all_8_plus_8_splits();
    assert_eq!(splits.len(), 12_870);
    let mut worst: f64 = 0.0;
    for (left, right) in &splits {
        let asym = mann_whitney_u(left, right).unwrap();
        let oracle = exact_u_p(8, 8, asym.statistic);
        worst = worst.max((asym.p_value - oracle).abs());
    }
    assert!(worst <= 0.08, "worst gap {worst}");
}

#[test]
fn exact_u_matches_count_distribution() {
    // every 64th split keeps the 2^16-mask enumeration cheap
    for (left, right) in all_8_plus_8_splits().iter().step_by(64) {
        let exact = mann_whitney_exact(left, right).unwrap();
        assert!((exact.p_value - exact_u_p(8, 8, exact.statistic)).abs() < 1e-12);
    }
    let exact = mann_whitney_exact(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
    assert!((exact.p_value - 0.1).abs() < 1e-12);
}

#[test]
fn incomplete_beta_matches_quadrature_on_grid() {
    let grid = beta_grid();
    assert_eq!(grid.len(), 100);
    let worst = grid
        .iter()
        .map(|&(a, b, x)| (reg_incomplete_beta(a, b, x).unwrap() - incomplete_beta_quadrature(a, b, x)).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-10, "worst error {worst}");
}

#[test]
fn normal_cdf_matches_quadrature() {
    let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    for &z in &[0.5, 1.0, 1.96, 3.0] {
        let oracle = 0.5 + simpson(&phi, 0.0, z, 1e-15);
        assert!((std_normal_cdf(z) - oracle).abs() < 1e-12, "z = {z}");
    }
    assert!((std_normal_cdf(1.96) - 0.975).abs() < 1e-4);
}

#[test]
fn kolmogorov_tail_matches_series() {
    for &lambda in &[0.6, 1.0, 1.36, 2.0] {
        let oracle: f64 = 2.0
            * (1..=10)
                .map(|k| {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    let k = k as f64;
                    sign * (-2.0 * k * k * lambda * lambda).exp()
                })
                .sum::<f64>();
        assert!((kolmogorov_q(lambda) - oracle).abs() < 1e-10, "lambda = {lambda}");
    }
}

#[test]
fn f_test_matches_density_quadrature() {
    // variances 2 and 1 on three points each: F = 2 with (2, 2) degrees of freedom
    let s = 2f64.sqrt();
    let out = f_variance(&[-s, 0.0, s], &[-1.0, 0.0, 1.0]).unwrap();
    assert!((out.statistic - 2.0).abs() < 1e-12);
    // the F(2, 2) density is (1 + f)^-2
    let lower = simpson(&|f: f64| (1.0 + f).powi(-2), 0.0, 2.0, 1e-15);
    let oracle = 2.0 * lower.min(1.0 - lower);
    assert!((out.p_value - oracle).abs() < 1e-12);
}

#[test]
fn naive_bayes_matches_joint_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for p in [1, 4, 10] {
        let m = random_matrix(&mut rng, 120, p);
        let model = nb_train(&m, 1.0).unwrap();
        for x in 0u32..(1 << p) {
            let bits: Vec<u8> = (0..p).map(|j| ((x >> j) & 1) as u8).collect();
            let got = model.log_posteriors(&bits).unwrap();
            for (c, g) in got.iter().enumerate() {
                assert!((g - nb_joint_log(&m, c, &bits)).abs() < 1e-12, "p = {p}, x = {x}, c = {c}");
            }
        }
    }
}

#[test]
fn mrmr_matches_brute_force_greedy() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for trial in 0..20 {
        let p = 2 + trial % 11;
        let m = random_matrix(&mut rng, 300, p);
        assert_eq!(mrmr_rank(&m, p).unwrap().order, brute_force_mrmr(&m, p), "trial {trial}");
    }
}

#[test]
fn mutual_information_matches_entropy_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let x: Vec<u8> = (0..200).map(|_| rng.random_range(0..3)).collect();
        let y: Vec<u8> = (0..200).map(|_| rng.random_range(0..4)).collect();
        assert!((mutual_information(&x, &y).unwrap() - entropy_mi(&x, &y)).abs() < 1e-12);
    }
}

#[test]
fn duplicated_column_is_not_picked_twice_early() {
    // columns 0 and 1 are identical and informative; column 2 is weaker but distinct
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let specs = build_grid(&GridConfig::preset_ab()).unwrap()[..3].to_vec();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for r in 0..400 {
        let class = ShiftClass::ALL[r % 4];
        let strong = (class.index() >= 2) as u8;
        let weak = if rng.random_bool(0.8) {
            (class.index() % 2) as u8
        } else {
            rng.random_bool(0.5) as u8
        };
        rows.push(vec![strong, strong, weak]);
        labels.push(class);
    }
    let ids = (0..400).map(|i| i.to_string()).collect();
    let m = IndicatorMatrix::from_rows(specs, ids, labels, rows).unwrap();
    assert_eq!(mrmr_rank(&m, 3).unwrap().order, vec![0, 2, 1]);
}
