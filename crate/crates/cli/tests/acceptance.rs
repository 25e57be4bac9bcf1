// SPDX-License-Identifier: MIT OR Apache-2.0

//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use binsight::reproduce::read_summary;
use binsight_core::classifiers::nb_train;
use binsight_core::evaluation::score;
use binsight_core::indicators::{build_grid, featurize, GridConfig, WindowPlan, WindowSize};
use binsight_core::rng::substream;
use binsight_core::selection::mrmr_rank;
use binsight_core::signalgen::{generate_signal, DatasetSpec, ShiftClass, SignalRecord};
use binsight_core::special::reg_incomplete_beta;
use binsight_core::stattests::{mann_whitney_u, TestKind};
use rand::Rng;
use support::*;

const SEED: u64 = 0;
const CALIBRATION_REPS: usize = 10_000;
const CALIBRATION_HALVES: [usize; 3] = [15, 25, 50];
const INSTANCES: usize = 1000;

struct Outcome {
    criterion: u32,
    pass: bool,
    detail: String,
}

fn run_reproduce(out: &Path, jobs: usize) -> Duration {
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_binsight"))
        .args(["--jobs", &jobs.to_string(), "reproduce", "--svg", "--seed", &SEED.to_string(), "--out"])
        .arg(out)
        .status()
        .expect("binsight runs");
    assert!(status.success(), "reproduce exited with {status}");
    start.elapsed()
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, files: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, files);
            } else {
                files.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut files = BTreeMap::new();
    walk(root, root, &mut files);
    files
}

fn within(value: f64, reference: f64, tol: f64) -> bool {
    (value - reference).abs() <= tol
}

fn summary_criteria(summary: &BTreeMap<String, f64>) -> Vec<Outcome> {
    let get = |key: &str| *summary.get(key).unwrap_or_else(|| panic!("summary has no {key}"));
    let mut outcomes = Vec::new();

    let (a_rf, a_oob) = (get("A.rf.test_mean"), get("A.rf.oob"));
    outcomes.push(Outcome {
        criterion: 1,
        pass: within(a_rf, 0.9352, 0.04) && within(a_oob, 0.9228, 0.05),
        detail: format!("A RF test {a_rf:.4} (0.9352 ± 0.04), OOB {a_oob:.4} (0.9228 ± 0.05)"),
    });

    let b_rf = get("B.rf.test_mean");
    outcomes.push(Outcome {
        criterion: 2,
        pass: within(b_rf, 0.9226, 0.04),
        detail: format!("B RF test {b_rf:.4} (0.9226 ± 0.04)"),
    });

    let (a_nb, b_nb) = (get("A.nb.test_mean"), get("B.nb.test_mean"));
    let gap = ["A", "B"]
        .iter()
        .map(|s| {
            let full = (get(&format!("{s}.nb.train")) - get(&format!("{s}.nb.test_mean"))).abs();
            full.max(get(&format!("{s}.nb.max_train_test_gap")))
        })
        .fold(0.0, f64::max);
    outcomes.push(Outcome {
        criterion: 3,
        pass: within(a_nb, 0.8687, 0.05) && within(b_nb, 0.8632, 0.05) && gap <= 0.03,
        detail: format!(
            "NB test A {a_nb:.4} (0.8687 ± 0.05), B {b_nb:.4} (0.8632 ± 0.05), max train-test gap {gap:.4} (<= 0.03)"
        ),
    });

    let (ka, kb) = (get("A.nb_best.k"), get("B.nb_best.k"));
    let (best_a, best_b) = (get("A.nb_best.test_mean"), get("B.nb_best.test_mean"));
    outcomes.push(Outcome {
        criterion: 4,
        pass: best_a >= 0.80 && best_b >= 0.85 && ka <= 20.0 && kb <= 20.0,
        detail: format!("optimal-k NB A k={ka} test {best_a:.4} (>= 0.80), B k={kb} test {best_b:.4} (>= 0.85)"),
    });

    let (c, cm) = (get("C.rf.test_mean"), get("Cm.rf.test_mean"));
    outcomes.push(Outcome {
        criterion: 5,
        pass: c - cm >= 0.01,
        detail: format!("C RF {c:.4} vs Cm RF {cm:.4}, difference {:.4} (>= 0.01)", c - cm),
    });

    let probs: Vec<(String, f64)> = summary
        .iter()
        .filter(|(k, _)| k.starts_with("A.top_u_confirmation["))
        .map(|(k, v)| (k.clone(), *v))
        .collect();
    let prob = |class: &str| {
        probs
            .iter()
            .find(|(k, _)| k.ends_with(&format!(".p_{class}")))
            .map(|(_, v)| *v)
    };
    let detail;
    let pass = match (prob("no_change"), prob("variance"), prob("mean"), prob("trend")) {
        (Some(none), Some(var), Some(mean), Some(trend)) => {
            let id = probs[0].0.split(['[', ']']).nth(1).unwrap_or("?").to_string();
            detail = format!(
                "top U confirmation {id}: p(no change) {none:.4} < 0.1, p(variance) {var:.4} < 0.1, p(mean) {mean:.4} > 0.85, p(trend) {trend:.4} > 0.85"
            );
            none < 0.1 && var < 0.1 && mean > 0.85 && trend > 0.85
        }
        _ => {
            detail = "no U-test confirmation indicator was ranked on set A".to_string();
            false
        }
    };
    outcomes.push(Outcome { criterion: 6, pass, detail });
    outcomes
}

fn calibration() -> Outcome {
    let start = Instant::now();
    let mut misses = Vec::new();
    for &half in &CALIBRATION_HALVES {
        for test in TestKind::ALL {
            let rates = null_rejection_rates(test, half, CALIBRATION_REPS, 2024 + half as u64);
            for (rate, alpha) in rates.iter().zip(ALPHAS) {
                let tol = calibration_tolerance(alpha, CALIBRATION_REPS);
                if (rate - alpha).abs() > tol {
                    misses.push(format!("{test} n={half}+{half} alpha={alpha}: {rate:.4} (± {tol:.4})"));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let checks = CALIBRATION_HALVES.len() * TestKind::ALL.len() * ALPHAS.len();
    Outcome {
        criterion: 7,
        pass: misses.is_empty() && elapsed < Duration::from_secs(300),
        detail: format!(
            "{}/{checks} rejection rates within 4 sigma, runtime {:.1}s (< 300s){}",
            checks - misses.len(),
            elapsed.as_secs_f64(),
            if misses.is_empty() { String::new() } else { format!("; off: {}", misses.join("; ")) }
        ),
    }
}

fn oracles() -> Outcome {
    let mut worst_u: f64 = 0.0;
    let splits = all_8_plus_8_splits();
    for (left, right) in &splits {
        let asym = mann_whitney_u(left, right).unwrap();
        worst_u = worst_u.max((asym.p_value - exact_u_p(8, 8, asym.statistic)).abs());
    }

    let mut rng = substream(SEED, "acceptance:nb", 0);
    let mut worst_nb: f64 = 0.0;
    for p in 1..=10 {
        let m = random_matrix(&mut rng, 200, p);
        let model = nb_train(&m, 1.0).unwrap();
        for x in 0u32..(1 << p) {
            let bits: Vec<u8> = (0..p).map(|j| ((x >> j) & 1) as u8).collect();
            for (c, g) in model.log_posteriors(&bits).unwrap().iter().enumerate() {
                worst_nb = worst_nb.max((g - nb_joint_log(&m, c, &bits)).abs());
            }
        }
    }

    let mut rng = substream(SEED, "acceptance:mrmr", 0);
    let mut mrmr_mismatch = 0;
    let mrmr_trials = 30;
    for trial in 0..mrmr_trials {
        let p = 2 + trial % 11;
        let m = random_matrix(&mut rng, 300, p);
        mrmr_mismatch += usize::from(mrmr_rank(&m, p).unwrap().order != brute_force_mrmr(&m, p));
    }

    let grid = beta_grid();
    let worst_beta = grid
        .iter()
        .map(|&(a, b, x)| (reg_incomplete_beta(a, b, x).unwrap() - incomplete_beta_quadrature(a, b, x)).abs())
        .fold(0.0, f64::max);

    Outcome {
        criterion: 8,
        pass: worst_u <= 0.08 && worst_nb <= 1e-12 && mrmr_mismatch == 0 && worst_beta <= 1e-10,
        detail: format!(
            "(a) U vs exact over {} splits max {worst_u:.4} (<= 0.08); (b) NB vs joint max {worst_nb:.1e} (<= 1e-12); (c) mRMR mismatches {mrmr_mismatch}/{mrmr_trials}; (d) incomplete beta max {worst_beta:.1e} on {} points (<= 1e-10)",
            splits.len(),
            grid.len()
        ),
    }
}

fn determinism(first: &Path, second: &Path, runtimes: (Duration, Duration)) -> Outcome {
    let (a, b) = (tree(first), tree(second));
    let differing: Vec<String> = a
        .keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    Outcome {
        criterion: 9,
        pass: differing.is_empty() && !a.is_empty(),
        detail: format!(
            "{} artifacts byte-identical between --jobs 1 and --jobs 3 (runtimes {:.0}s / {:.0}s){}",
            a.len(),
            runtimes.0.as_secs_f64(),
            runtimes.1.as_secs_f64(),
            if differing.is_empty() { String::new() } else { format!("; differ: {}", differing.join(", ")) }
        ),
    }
}

fn properties() -> Outcome {
    let mut rng = substream(SEED, "acceptance:properties", 0);
    let mut failed = Vec::new();

    let dominance = (0..INSTANCES)
        .filter(|_| {
            let len = rng.random_range(0..80);
            let density = rng.random_range(0.0..1.0);
            let seq: Vec<bool> = (0..len).map(|_| rng.random_bool(density)).collect();
            aggregators_are_ordered(&seq)
        })
        .count();
    if dominance < INSTANCES {
        failed.push("dominance");
    }

    let sizes = [WindowSize::Fixed(30), WindowSize::Fixed(50), WindowSize::LengthCapped { cap: 100 }];
    let spec = DatasetSpec::set_c();
    let monotone = (0..INSTANCES)
        .filter(|&i| {
            let class = ShiftClass::ALL[rng.random_range(0..4)];
            let signal = generate_signal(&mut rng, format!("p{i}"), class, &spec).unwrap();
            let test = TestKind::ALL[rng.random_range(0..TestKind::ALL.len())];
            let plan = WindowPlan {
                smoothed: rng.random_bool(0.5),
                ..WindowPlan::sliding(sizes[rng.random_range(0..sizes.len())])
            };
            rejections_are_alpha_monotone(&signal.values, test, &plan)
        })
        .count();
    if monotone < INSTANCES {
        failed.push("alpha monotonicity");
    }

    let specs = build_grid(&GridConfig::preset_c()).unwrap();
    let records: Vec<SignalRecord> = (0..INSTANCES)
        .map(|i| SignalRecord {
            id: format!("flat{i}"),
            values: vec![rng.random_range(-1e6..1e6); rng.random_range(100..=200)],
            label: ShiftClass::NoChange,
            change_point: None,
        })
        .collect();
    let flat = featurize(&records, &specs).unwrap();
    let silent = (0..flat.n_rows()).filter(|&r| flat.row(r).iter().all(|&b| b == 0)).count();
    if silent < INSTANCES {
        failed.push("constant signal");
    }

    let conserved = (0..INSTANCES)
        .filter(|_| {
            let n = rng.random_range(1..300);
            let labels: Vec<ShiftClass> = (0..n).map(|_| ShiftClass::ALL[rng.random_range(0..4)]).collect();
            let preds: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();
            let sums = score(&preds, &labels).unwrap().confusion.row_sums();
            (0..4).all(|c| sums[c] == labels.iter().filter(|l| l.index() == c).count() as u64)
        })
        .count();
    if conserved < INSTANCES {
        failed.push("row sums");
    }

    Outcome {
        criterion: 10,
        pass: failed.is_empty(),
        detail: format!(
            "dominance {dominance}/{INSTANCES}, alpha monotonicity {monotone}/{INSTANCES}, constant => zero ({} columns) {silent}/{INSTANCES}, row sums {conserved}/{INSTANCES}",
            specs.len()
        ),
    }
}

#[test]
fn acceptance_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let (first, second) = (dir.path().join("jobs1"), dir.path().join("jobs3"));
    let t1 = run_reproduce(&first, 1);
    let summary: BTreeMap<String, f64> = read_summary(&first.join("summary.csv")).unwrap().into_iter().collect();

    let mut outcomes = summary_criteria(&summary);
    outcomes.push(calibration());
    outcomes.push(oracles());
    let t2 = run_reproduce(&second, 3);
    outcomes.push(determinism(&first, &second, (t1, t2)));
    outcomes.push(properties());

    for o in &outcomes {
        println!("{} criterion {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.criterion, o.detail);
    }
    let failed: Vec<u32> = outcomes.iter().filter(|o| !o.pass).map(|o| o.criterion).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
