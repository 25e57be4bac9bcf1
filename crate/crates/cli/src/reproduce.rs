// SPDX-License-Identifier: MIT OR Apache-2.0

//! One-command run of sets A, B, C and Cm with every table and curve.

use std::fmt::Write as _;
use std::path::Path;

use binsight_core::classifiers::{nb_explain, nb_train};
use binsight_core::evaluation::{
    evaluate_columns, forward_selection_eval, pick_optimal_k, write_curve_csv, write_subsets_csv, Classifier,
    CurvePoint, EvalReport, Protocol,
};
use binsight_core::indicators::{build_grid, featurize, Aggregator, GridConfig, IndicatorMatrix};
use binsight_core::selection::{mrmr_rank, RankedList};
use binsight_core::signalgen::{generate_dataset, write_jsonl, DatasetSpec, ShiftClass, PAPER_COUNTS};
use binsight_core::stattests::TestKind;
use clap::Args;

use crate::manifest::{sha256_hex, RunManifest};
use crate::{
    charts, dataset_seed, ensure_dir, forest_config, parse_counts, split_plan, write_file, write_json, write_text,
    CliResult, OutArg,
};

/// Largest `k` searched for the Naive Bayes optimum.
pub const OPTIMAL_K_MAX: usize = 20;
/// Ranked indicators listed in the conditional-probability table.
pub const EXPLAIN_ROWS: usize = 9;

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trees for the all-indicator forests.
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
    /// Trees for the forests along the curves.
    #[arg(long, default_value_t = 500)]
    pub curve_trees: usize,
    /// Curves run for k = 1..=K ranked indicators.
    #[arg(long, default_value_t = 100)]
    pub curve_k: usize,
    /// Per-class counts `c0,c1,c2,c3` (default 3000,1000,1000,1000).
    #[arg(long)]
    pub counts: Option<String>,
    /// Rows in each set's stratified learning set.
    #[arg(long, default_value_t = 1000)]
    pub train_size: usize,
    /// Also write SVG charts.
    #[arg(long)]
    pub svg: bool,
    #[command(flatten)]
    pub out: OutArg,
}

/// Published reference numbers the run is compared against.
pub mod reference {
    /// (train, oob, test mean, test std)
    pub const RF_A: (f64, f64, f64, f64) = (0.9770, 0.9228, 0.9352, 0.0100);
    pub const RF_B: (f64, f64, f64, f64) = (0.9709, 0.9118, 0.9226, 0.0108);
    /// (train, test mean, test std)
    pub const NB_A: (f64, f64, f64) = (0.9228, 0.8687, 0.0099);
    pub const NB_B: (f64, f64, f64) = (0.8978, 0.8632, 0.0160);
    /// (k, train, test mean, test std)
    pub const NB_BEST_A: (usize, f64, f64, f64) = (9, 0.8487, 0.8448, 0.0134);
    pub const NB_BEST_B: (usize, f64, f64, f64) = (13, 0.9018, 0.8935, 0.0130);
    /// (train, test mean, test std)
    pub const RF_C: (f64, f64, f64) = (0.9629, 0.7656, 0.0161);
    pub const RF_CM: (f64, f64, f64) = (0.95298, 0.731513, 0.0171);
    /// Conditional probabilities of the top U-test 2-of-3 indicator on A.
    pub const TOP_U_CONFIRMATION_A: [f64; 4] = [0.0103, 0.011, 0.971, 0.939];
}

/// Everything computed for one dataset (or one column subset of it).
pub struct SetResult {
    pub name: String,
    pub signals_sha256: String,
    pub matrix: IndicatorMatrix,
    pub protocol: Protocol,
    pub ranked: RankedList,
    pub nb_all: EvalReport,
    pub rf_all: EvalReport,
    pub curve: Vec<CurvePoint>,
    pub best_k: usize,
}

impl SetResult {
    pub fn best_nb(&self) -> &EvalReport {
        &self.curve.iter().find(|p| p.k == self.best_k).expect("best k is on the curve").nb
    }

    /// Largest |NB learning accuracy − NB test mean| along the curve.
    pub fn max_nb_gap(&self) -> f64 {
        self.curve
            .iter()
            .map(|p| (p.nb.train_accuracy - p.nb.mean).abs())
            .fold(0.0, f64::max)
    }
}

fn log(msg: &str) {
    eprintln!("[reproduce] {msg}");
}

struct Settings {
    nb: Classifier,
    rf: Classifier,
    rf_curve: Classifier,
    curve_k: usize,
    seed: u64,
    train_size: usize,
}

fn evaluate_set(
    name: &str,
    signals_sha256: &str,
    matrix: IndicatorMatrix,
    settings: &Settings,
) -> CliResult<SetResult> {
    let protocol = Protocol::new(&matrix.labels, &split_plan(settings.seed, settings.train_size))?;
    let train = matrix.select_rows(&protocol.train);
    let rank_k = settings.curve_k.max(OPTIMAL_K_MAX).min(matrix.n_cols());
    log(&format!("{name}: ranking {rank_k} of {} indicators", matrix.n_cols()));
    let ranked = mrmr_rank(&train, rank_k)?;
    let all: Vec<usize> = (0..matrix.n_cols()).collect();
    log(&format!("{name}: all-indicator classifiers"));
    let nb_all = evaluate_columns(&matrix, &protocol, &all, &settings.nb)?;
    let rf_all = evaluate_columns(&matrix, &protocol, &all, &settings.rf)?;
    let ks: Vec<usize> = (1..=settings.curve_k.min(ranked.len())).collect();
    log(&format!("{name}: curves for k = 1..{}", ks.len()));
    let curve = forward_selection_eval(&matrix, &protocol, &ranked, &ks, &settings.nb, &settings.rf_curve)?;
    let best_k = pick_optimal_k(&curve, OPTIMAL_K_MAX.min(ks.len()))?;
    Ok(SetResult {
        name: name.to_string(),
        signals_sha256: signals_sha256.to_string(),
        matrix,
        protocol,
        ranked,
        nb_all,
        rf_all,
        curve,
        best_k,
    })
}

fn simulate_and_featurize(
    preset: &str,
    grid: &GridConfig,
    seed: u64,
    counts: [usize; 4],
) -> CliResult<(String, IndicatorMatrix)> {
    let spec = DatasetSpec::preset(preset)?.with_counts(counts);
    log(&format!("{preset}: simulating {} signals", spec.total()));
    let records = generate_dataset(dataset_seed(seed, preset), &spec)?;
    let mut bytes = Vec::new();
    write_jsonl(&records, &mut bytes)?;
    let specs = build_grid(grid)?;
    log(&format!("{preset}: featurizing {} indicators", specs.len()));
    let matrix = featurize(&records, &specs)?;
    Ok((sha256_hex(&bytes), matrix))
}

/// Columns of the base (any-rejection) indicators.
pub fn any_only_columns(matrix: &IndicatorMatrix) -> Vec<usize> {
    (0..matrix.n_cols())
        .filter(|&c| matrix.specs[c].aggregator == Aggregator::Any)
        .collect()
}

/// First ranked U-test confirmation indicator and its per-class
/// probability of firing under the Naive Bayes estimate.
pub fn top_u_confirmation(set: &SetResult, smoothing: f64) -> CliResult<Option<(String, Vec<f64>)>> {
    let Some(&col) = set.ranked.order.iter().find(|&&c| {
        let s = &set.matrix.specs[c];
        s.test == TestKind::MannWhitneyU && s.aggregator.is_confirmation()
    }) else {
        return Ok(None);
    };
    let sub = set.matrix.select_columns(&[col]).select_rows(&set.protocol.train);
    let model = nb_train(&sub, smoothing)?;
    Ok(Some((
        set.matrix.specs[col].id.clone(),
        model.cond_p.iter().map(|c| c[0]).collect(),
    )))
}

pub fn run(args: ReproduceArgs) -> CliResult<()> {
    let counts = match &args.counts {
        Some(text) => parse_counts(text)?,
        None => PAPER_COUNTS,
    };
    let smoothing = 1.0;
    let settings = Settings {
        nb: Classifier::NaiveBayes { smoothing },
        rf: Classifier::Forest(forest_config(args.seed, args.trees)),
        rf_curve: Classifier::Forest(forest_config(args.seed, args.curve_trees)),
        curve_k: args.curve_k.max(1),
        seed: args.seed,
        train_size: args.train_size,
    };
    let dir = args.out.dir();
    ensure_dir(&dir)?;

    let grid_ab = GridConfig::preset_ab();
    let grid_c = GridConfig::preset_c();
    let mut sets = Vec::new();
    for preset in ["A", "B"] {
        let (hash, matrix) = simulate_and_featurize(preset, &grid_ab, args.seed, counts)?;
        sets.push(evaluate_set(preset, &hash, matrix, &settings)?);
    }
    let (hash, matrix_c) = simulate_and_featurize("C", &grid_c, args.seed, counts)?;
    let matrix_cm = matrix_c.select_columns(&any_only_columns(&matrix_c));
    sets.push(evaluate_set("C", &hash, matrix_c, &settings)?);
    sets.push(evaluate_set("Cm", &hash, matrix_cm, &settings)?);

    let mut manifest = RunManifest::new("reproduce")
        .seed(args.seed)
        .grid("AB", &grid_ab)
        .grid("C", &grid_c)
        .grid("Cm", &grid_c.any_only())
        .classifier(&settings.nb)
        .classifier(&settings.rf)
        .classifier(&settings.rf_curve);
    for preset in ["A", "B", "C"] {
        manifest = manifest.dataset(&DatasetSpec::preset(preset)?.with_counts(counts));
    }
    if args.train_size != 1000 {
        manifest = manifest.note(format!("learning set of {} rows per set", args.train_size));
    }
    if args.curve_trees != args.trees {
        manifest = manifest.note(format!(
            "curve forests use {} trees; all-indicator forests use {}",
            args.curve_trees, args.trees
        ));
    }

    let mut outputs = Vec::new();
    let mut emit = |name: &str, text: String| -> CliResult<()> {
        let path = dir.join(name);
        write_text(&path, &text)?;
        outputs.push(path);
        Ok(())
    };
    emit("datasets.csv", datasets_csv(&sets))?;
    emit("table1.csv", table1(&sets))?;
    emit("table2.csv", table2(&sets[0].nb_all))?;
    emit("table3.csv", table3(&sets))?;
    emit("table4.csv", table4(&sets[0], smoothing)?)?;
    emit("table5.csv", table5(&sets[2], &sets[3]))?;
    emit("summary.csv", summary(&sets, smoothing)?)?;
    if args.svg {
        for set in &sets {
            for (kind, svg) in charts::curve_charts(&format!("set {}", set.name), &set.curve) {
                emit(&format!("curves_{}_{kind}.svg", set.name), svg)?;
            }
        }
        emit(
            "confirmation_box.svg",
            charts::paired_box_chart(
                "RF test accuracy with and without confirmation indicators",
                ("C", &sets[2].curve),
                ("Cm", &sets[3].curve),
            ),
        )?;
    }
    for set in &sets {
        let curves = dir.join(format!("curves_{}.csv", set.name));
        write_file(&curves, |w| write_curve_csv(&set.curve, w))?;
        let subsets = dir.join(format!("curves_{}_subsets.csv", set.name));
        write_file(&subsets, |w| write_subsets_csv(&set.curve, w))?;
        let ranking = dir.join(format!("ranking_{}.csv", set.name));
        let ids: Vec<String> = set.matrix.specs.iter().map(|s| s.id.clone()).collect();
        write_file(&ranking, |w| set.ranked.write_csv(&ids, w))?;
        let reports = dir.join(format!("reports_{}.json", set.name));
        write_json(
            &reports,
            &serde_json::json!({
                "nb_all": set.nb_all,
                "rf_all": set.rf_all,
                "nb_best_k": set.best_k,
                "nb_best": set.best_nb(),
            }),
        )?;
        outputs.extend([curves, subsets, ranking, reports]);
    }
    for path in &outputs {
        manifest = manifest.output(path)?;
    }
    manifest.write_to(&dir.join("manifest.json"))?;
    log(&format!("done; artifacts in {}", dir.display()));
    Ok(())
}

fn f4(x: f64) -> String {
    format!("{x:.4}")
}

fn datasets_csv(sets: &[SetResult]) -> String {
    let mut out = String::from("set,records,indicators,signals_sha256\n");
    for s in sets {
        let _ = writeln!(out, "{},{},{},{}", s.name, s.matrix.n_rows(), s.matrix.n_cols(), s.signals_sha256);
    }
    out
}

fn table1(sets: &[SetResult]) -> String {
    let mut out = String::from("set,classifier,indicators,train_accuracy,oob_accuracy,test_mean,test_std\n");
    for s in &sets[..2] {
        for r in [&s.rf_all, &s.nb_all] {
            let oob = r.oob_accuracy.map(f4).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.name,
                r.classifier,
                r.n_features,
                f4(r.train_accuracy),
                oob,
                f4(r.mean),
                f4(r.std)
            );
        }
    }
    out
}

fn table2(report: &EvalReport) -> String {
    let mut out = String::from("true_class,pred_0,pred_1,pred_2,pred_3,total\n");
    let sums = report.confusion.row_sums();
    for c in ShiftClass::ALL {
        let row = &report.confusion.counts[c.index()];
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            c.code(),
            row[0],
            row[1],
            row[2],
            row[3],
            sums[c.index()]
        );
    }
    out
}

fn table3(sets: &[SetResult]) -> String {
    let mut out = String::from("set,k,train_accuracy,test_mean,test_std\n");
    for s in &sets[..2] {
        let r = s.best_nb();
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.name,
            s.best_k,
            f4(r.train_accuracy),
            f4(r.mean),
            f4(r.std)
        );
    }
    out
}

fn table4(set: &SetResult, smoothing: f64) -> CliResult<String> {
    let top = set.ranked.top(EXPLAIN_ROWS);
    let sub = set.matrix.select_columns(top).select_rows(&set.protocol.train);
    let model = nb_train(&sub, smoothing)?;
    let all: Vec<usize> = (0..model.n_features()).collect();
    Ok(nb_explain(&model, &all)?.to_csv())
}

fn table5(c: &SetResult, cm: &SetResult) -> String {
    let mut out = String::from("set,indicators,train_accuracy,oob_accuracy,test_mean,test_std\n");
    for s in [c, cm] {
        let r = &s.rf_all;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.name,
            r.n_features,
            f4(r.train_accuracy),
            r.oob_accuracy.map(f4).unwrap_or_default(),
            f4(r.mean),
            f4(r.std)
        );
    }
    out
}

fn summary(sets: &[SetResult], smoothing: f64) -> CliResult<String> {
    use reference as r;
    let mut rows: Vec<(String, f64, Option<f64>)> = Vec::new();
    let mut push = |name: &str, value: f64, reference: Option<f64>| rows.push((name.to_string(), value, reference));
    let (a, b, c, cm) = (&sets[0], &sets[1], &sets[2], &sets[3]);
    for (s, rf, nb, best) in [(a, r::RF_A, r::NB_A, r::NB_BEST_A), (b, r::RF_B, r::NB_B, r::NB_BEST_B)] {
        let n = &s.name;
        push(&format!("{n}.rf.train"), s.rf_all.train_accuracy, Some(rf.0));
        push(&format!("{n}.rf.oob"), s.rf_all.oob_accuracy.unwrap_or(f64::NAN), Some(rf.1));
        push(&format!("{n}.rf.test_mean"), s.rf_all.mean, Some(rf.2));
        push(&format!("{n}.rf.test_std"), s.rf_all.std, Some(rf.3));
        push(&format!("{n}.nb.train"), s.nb_all.train_accuracy, Some(nb.0));
        push(&format!("{n}.nb.test_mean"), s.nb_all.mean, Some(nb.1));
        push(&format!("{n}.nb.test_std"), s.nb_all.std, Some(nb.2));
        push(&format!("{n}.nb.max_train_test_gap"), s.max_nb_gap(), None);
        push(&format!("{n}.nb_best.k"), s.best_k as f64, Some(best.0 as f64));
        push(&format!("{n}.nb_best.train"), s.best_nb().train_accuracy, Some(best.1));
        push(&format!("{n}.nb_best.test_mean"), s.best_nb().mean, Some(best.2));
        push(&format!("{n}.nb_best.test_std"), s.best_nb().std, Some(best.3));
    }
    for (s, rf) in [(c, r::RF_C), (cm, r::RF_CM)] {
        let n = &s.name;
        push(&format!("{n}.rf.train"), s.rf_all.train_accuracy, Some(rf.0));
        push(&format!("{n}.rf.test_mean"), s.rf_all.mean, Some(rf.1));
        push(&format!("{n}.rf.test_std"), s.rf_all.std, Some(rf.2));
    }
    push(
        "C_minus_Cm.rf.test_mean",
        c.rf_all.mean - cm.rf_all.mean,
        Some(r::RF_C.1 - r::RF_CM.1),
    );
    let mut out = String::from("quantity,value,reference,delta\n");
    for (name, value, reference) in rows {
        let (reference, delta) = match reference {
            Some(x) => (f4(x), f4(value - x)),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(out, "{name},{},{reference},{delta}", f4(value));
    }
    if let Some((id, probs)) = top_u_confirmation(a, smoothing)? {
        for (class, (p, x)) in ShiftClass::ALL.iter().zip(probs.iter().zip(r::TOP_U_CONFIRMATION_A)) {
            let _ = writeln!(
                out,
                "A.top_u_confirmation[{id}].p_{},{},{},{}",
                class.name().replace(' ', "_"),
                f4(*p),
                f4(x),
                f4(p - x)
            );
        }
    }
    Ok(out)
}

/// Reads `summary.csv` back into `(quantity, value)` pairs.
pub fn read_summary(path: &Path) -> CliResult<Vec<(String, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| crate::CliError::Input {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    Ok(text
        .lines()
        .skip(1)
        .filter_map(|line| {
            let mut cells = line.split(',');
            let name = cells.next()?.to_string();
            let value = cells.next()?.parse().ok()?;
            Some((name, value))
        })
        .collect())
}
