// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end for the `binsight-core` pipeline.
//!
//! Every command derives all randomness from one `--seed` through named
//! substreams, so identical inputs give identical bytes regardless of
//! `--jobs`.

#![forbid(unsafe_code)]

pub mod charts;
pub mod manifest;
pub mod reproduce;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use binsight_core::classifiers::{nb_explain, nb_train, rf_train, ForestConfig, ForestModel, NaiveBayesModel};
use binsight_core::evaluation::{
    evaluate_columns, forward_selection_eval, write_curve_csv, write_subsets_csv, Classifier, Protocol, SplitPlan,
};
use binsight_core::indicators::{build_grid, featurize, GridConfig, IndicatorMatrix};
use binsight_core::rng::derive_seed;
use binsight_core::selection::{mrmr_rank, RankedList};
use binsight_core::signalgen::{generate_dataset, read_jsonl, write_jsonl, DatasetSpec};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::manifest::RunManifest;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "BINSIGHT_OUT";
const DEFAULT_OUT: &str = "binsight-out";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Input {
        path: PathBuf,
        source: binsight_core::Error,
    },
    #[error("{}: {source}", path.display())]
    Output { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] binsight_core::Error),
}

impl CliError {
    /// 2 for usage and input problems, 1 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Input { .. } => 2,
            CliError::Output { .. } => 1,
            CliError::Core(binsight_core::Error::Io(_)) => 1,
            CliError::Core(_) => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "binsight", version, about = "Change-type classification from binary test indicators")]
pub struct Cli {
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled signal set as JSON lines.
    Simulate(SimulateArgs),
    /// Print a grid preset as JSON.
    Grid(GridArgs),
    /// Compute the indicator matrix of a signal file.
    Featurize(FeaturizeArgs),
    /// Rank indicator columns by mRMR on the learning rows.
    Rank(RankArgs),
    /// Train a classifier on the learning rows.
    Train(TrainArgs),
    /// Train and evaluate on the balanced test subsets.
    Eval(TrainArgs),
    /// Accuracy as a function of the number of ranked indicators.
    Curves(CurvesArgs),
    /// Conditional probability table of a Naive Bayes model.
    Explain(ExplainArgs),
    /// Run every dataset end to end and write all tables.
    Reproduce(reproduce::ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Output directory (default: $BINSIGHT_OUT or ./binsight-out).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl OutArg {
    pub fn dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub preset: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-class counts `c0,c1,c2,c3` instead of 3000,1000,1000,1000.
    #[arg(long)]
    pub counts: Option<String>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, default_value = "AB")]
    pub preset: String,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    #[arg(long)]
    pub signals: PathBuf,
    /// Preset name (AB, C, Cm) or path to a grid JSON file.
    #[arg(long, default_value = "AB")]
    pub grid: String,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rows in the stratified learning set.
    #[arg(long, default_value_t = 1000)]
    pub train_size: usize,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    /// Number of columns to rank (default: min(100, columns)).
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ModelKind {
    Nb,
    Rf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "rf")]
    pub model: ModelKind,
    /// Laplace smoothing for Naive Bayes.
    #[arg(long, default_value_t = 1.0)]
    pub smoothing: f64,
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
}

impl ModelArgs {
    pub fn classifier(&self, seed: u64) -> Classifier {
        match self.model {
            ModelKind::Nb => Classifier::NaiveBayes {
                smoothing: self.smoothing,
            },
            ModelKind::Rf => Classifier::Forest(forest_config(seed, self.trees)),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Use only the first `k` ranked columns (needs `--ranking`).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub ranking: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long)]
    pub ranking: PathBuf,
    /// `a:b`, `a,b,c` or a single value.
    #[arg(long, default_value = "1:100")]
    pub k: String,
    #[arg(long, default_value_t = 1.0)]
    pub smoothing: f64,
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
    /// Also write SVG charts.
    #[arg(long)]
    pub svg: bool,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub out: OutArg,
}

/// Serialized model with the matrix column ids it was trained on.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelFile {
    NaiveBayes(NaiveBayesModel),
    Forest(ForestModel),
}

pub fn forest_config(seed: u64, trees: usize) -> ForestConfig {
    ForestConfig {
        n_trees: trees,
        seed: derive_seed(seed, "forest", 0),
        ..ForestConfig::default()
    }
}

pub fn split_plan(seed: u64, train_size: usize) -> SplitPlan {
    SplitPlan {
        train_size,
        ..SplitPlan::new(derive_seed(seed, "split", 0))
    }
}

/// Seed of the signal set for `preset` under a master seed.
pub fn dataset_seed(seed: u64, preset: &str) -> u64 {
    derive_seed(seed, &format!("dataset:{preset}"), 0)
}

/// `1:100` → 1..=100; `1,5,9`; `7`.
pub fn parse_ks(text: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::Usage(format!("cannot parse k list `{text}`"));
    if let Some((a, b)) = text.split_once(':') {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a == 0 || a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect()
}

pub fn parse_counts(text: &str) -> CliResult<[usize; 4]> {
    let parts: Vec<usize> = text
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("cannot parse counts `{text}`")))?;
    parts
        .try_into()
        .map_err(|_| CliError::Usage(format!("expected four counts, got `{text}`")))
}

fn open_input(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        source: e.into(),
    })
}

fn with_input<T>(path: &Path, read: impl FnOnce(BufReader<File>) -> binsight_core::Result<T>) -> CliResult<T> {
    read(open_input(path)?).map_err(|source| CliError::Input {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_matrix(path: &Path) -> CliResult<IndicatorMatrix> {
    with_input(path, IndicatorMatrix::read_csv)
}

pub fn read_ranking(path: &Path) -> CliResult<(RankedList, Vec<String>)> {
    with_input(path, RankedList::read_csv)
}

/// Resolves a `--grid` value: an existing JSON file or a preset name.
pub fn load_grid(value: &str) -> CliResult<GridConfig> {
    let path = Path::new(value);
    if path.is_file() {
        return with_input(path, |r| Ok(serde_json::from_reader(r)?));
    }
    GridConfig::preset(value).map_err(|_| CliError::Usage(format!("`{value}` is neither a grid file nor a preset")))
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Output {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes a file through a buffered writer.
pub fn write_file(
    path: &Path,
    fill: impl FnOnce(&mut BufWriter<File>) -> binsight_core::Result<()>,
) -> CliResult<()> {
    let out_err = |source| CliError::Output {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(out_err)?;
    let mut w = BufWriter::new(file);
    fill(&mut w).map_err(|e| match e {
        binsight_core::Error::Io(source) => out_err(source),
        other => CliError::Core(other),
    })?;
    w.flush().map_err(out_err)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    write_file(path, |w| Ok(w.write_all(text.as_bytes())?))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(binsight_core::Error::from)?;
    text.push('\n');
    write_text(path, &text)
}

/// Resolves the model columns: the first `k` ranked ids, or all columns.
fn model_columns(matrix: &IndicatorMatrix, k: Option<usize>, ranking: Option<&Path>) -> CliResult<Vec<usize>> {
    match (k, ranking) {
        (None, _) => Ok((0..matrix.n_cols()).collect()),
        (Some(_), None) => Err(CliError::Usage("--k needs --ranking".into())),
        (Some(k), Some(path)) => {
            let (ranked, ids) = read_ranking(path)?;
            if k == 0 || k > ranked.len() {
                return Err(CliError::Usage(format!("--k must be in 1..={}", ranked.len())));
            }
            ids[..k]
                .iter()
                .map(|id| {
                    matrix
                        .column_index(id)
                        .ok_or_else(|| CliError::Usage(format!("ranked indicator `{id}` is not in the matrix")))
                })
                .collect()
        }
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::Grid(args) => {
            let grid = GridConfig::preset(&args.preset)?;
            let text = serde_json::to_string_pretty(&grid).map_err(binsight_core::Error::from)?;
            println!("{text}");
            Ok(())
        }
        Command::Featurize(args) => featurize_cmd(args),
        Command::Rank(args) => rank(args),
        Command::Train(args) => train(args),
        Command::Eval(args) => eval(args),
        Command::Curves(args) => curves(args),
        Command::Explain(args) => explain(args),
        Command::Reproduce(args) => reproduce::run(args),
    }
}

fn simulate(args: SimulateArgs) -> CliResult<()> {
    let mut spec = DatasetSpec::preset(&args.preset)?;
    if let Some(counts) = &args.counts {
        spec = spec.with_counts(parse_counts(counts)?);
    }
    let records = generate_dataset(dataset_seed(args.seed, &spec.name), &spec)?;
    let dir = args.out.dir();
    ensure_dir(&dir)?;
    let path = dir.join("signals.jsonl");
    write_file(&path, |w| write_jsonl(&records, w))?;
    RunManifest::new("simulate")
        .seed(args.seed)
        .dataset(&spec)
        .output(&path)?
        .write_beside(&path)
}

fn featurize_cmd(args: FeaturizeArgs) -> CliResult<()> {
    let grid = load_grid(&args.grid)?;
    let specs = build_grid(&grid)?;
    let records = with_input(&args.signals, read_jsonl)?;
    let matrix = featurize(&records, &specs)?;
    let dir = args.out.dir();
    ensure_dir(&dir)?;
    let path = dir.join("matrix.csv");
    write_file(&path, |w| matrix.write_csv(w))?;
    RunManifest::new("featurize")
        .grid(&args.grid, &grid)
        .input(&args.signals)?
        .output(&path)?
        .write_beside(&path)
}

fn rank(args: RankArgs) -> CliResult<()> {
    let matrix = read_matrix(&args.split.matrix)?;
    let protocol = Protocol::new(&matrix.labels, &split_plan(args.split.seed, args.split.train_size))?;
    let k = args.k.unwrap_or(100.min(matrix.n_cols()));
    let ranked = mrmr_rank(&matrix.select_rows(&protocol.train), k)?;
    let ids: Vec<String> = matrix.specs.iter().map(|s| s.id.clone()).collect();
    let dir = args.out.dir();
    ensure_dir(&dir)?;
    let path = dir.join("ranking.csv");
    write_file(&path, |w| ranked.write_csv(&ids, w))?;
    RunManifest::new("rank")
        .seed(args.split.seed)
        .input(&args.split.matrix)?
        .output(&path)?
        .write_beside(&path)
}

fn train(args: TrainArgs) -> CliResult<()> {
    let matrix = read_matrix(&args.split.matrix)?;
    let protocol = Protocol::new(&matrix.labels, &split_plan(args.split.seed, args.split.train_size))?;
    let mut columns = model_columns(&matrix, args.k, args.ranking.as_deref())?;
    let classifier = args.model.classifier(args.split.seed);
    let model = match &classifier {
        // Naive Bayes keeps rank order so the explain table reads top-down.
        Classifier::NaiveBayes { smoothing } => {
            let sub = matrix.select_columns(&columns).select_rows(&protocol.train);
            ModelFile::NaiveBayes(nb_train(&sub, *smoothing)?)
        }
        Classifier::Forest(cfg) => {
            columns.sort_unstable();
            let sub = matrix.select_columns(&columns).select_rows(&protocol.train);
            ModelFile::Forest(rf_train(&sub, cfg)?)
        }
    };
    let dir = args.out.dir();
    ensure_dir(&dir)?;
    let path = dir.join("model.json");
    write_json(&path, &model)?;
    let mut manifest = RunManifest::new("train")
        .seed(args.split.seed)
        .classifier(&classifier)
        .input(&args.split.matrix)?;
    if let Some(r) = &args.ranking {
        manifest = manifest.input(r)?;
    }
    manifest.output(&path)?.write_beside(&path)
}

fn eval(args: TrainArgs) -> CliResult<()> {
    let matrix = read_matrix(&args.split.matrix)?;
    let protocol = Protocol::new(&matrix.labels, &split_plan(args.split.seed, args.split.train_size))?;
    let columns = model_columns(&matrix, args.k, args.ranking.as_deref())?;
    let classifier = args.model.classifier(args.split.seed);
    let report = evaluate_columns(&matrix, &protocol, &columns, &classifier)?;
    let dir = args.out.dir();
    ensure_dir(&dir)?;
    let path = dir.join("report.json");
    write_json(&path, &report)?;
    let mut manifest = RunManifest::new("eval")
        .seed(args.split.seed)
        .classifier(&classifier)
        .input(&args.split.matrix)?;
    if let Some(r) = &args.ranking {
        manifest = manifest.input(r)?;
    }
    manifest.output(&path)?.write_beside(&path)
}

fn curves(args: CurvesArgs) -> CliResult<()> {
    let matrix = read_matrix(&args.split.matrix)?;
    let (ranked, ids) = read_ranking(&args.ranking)?;
    let ranked = reindex_ranking(&matrix, ranked, &ids)?;
    let protocol = Protocol::new(&matrix.labels, &split_plan(args.split.seed, args.split.train_size))?;
    let ks = parse_ks(&args.k)?;
    let nb = Classifier::NaiveBayes {
        smoothing: args.smoothing,
    };
    let rf = Classifier::Forest(forest_config(args.split.seed, args.trees));
    let curve = forward_selection_eval(&matrix, &protocol, &ranked, &ks, &nb, &rf)?;
    let dir = args.out.dir();
    ensure_dir(&dir)?;
    let path = dir.join("curves.csv");
    let subsets = dir.join("curves_subsets.csv");
    write_file(&path, |w| write_curve_csv(&curve, w))?;
    write_file(&subsets, |w| write_subsets_csv(&curve, w))?;
    let mut manifest = RunManifest::new("curves")
        .seed(args.split.seed)
        .classifier(&nb)
        .classifier(&rf)
        .input(&args.split.matrix)?
        .input(&args.ranking)?
        .output(&path)?
        .output(&subsets)?;
    if args.svg {
        for (name, svg) in charts::curve_charts("", &curve) {
            let p = dir.join(format!("curves_{name}.svg"));
            write_text(&p, &svg)?;
            manifest = manifest.output(&p)?;
        }
    }
    manifest.write_beside(&path)
}

/// Maps a ranking's indicator ids onto the columns of `matrix`.
fn reindex_ranking(matrix: &IndicatorMatrix, ranked: RankedList, ids: &[String]) -> CliResult<RankedList> {
    let order = ids
        .iter()
        .map(|id| {
            matrix
                .column_index(id)
                .ok_or_else(|| CliError::Usage(format!("ranked indicator `{id}` is not in the matrix")))
        })
        .collect::<CliResult<_>>()?;
    Ok(RankedList {
        order,
        scores: ranked.scores,
    })
}

fn explain(args: ExplainArgs) -> CliResult<()> {
    let model: ModelFile = with_input(&args.model, |r| Ok(serde_json::from_reader(r)?))?;
    let ModelFile::NaiveBayes(nb) = model else {
        return Err(CliError::Usage("explain needs a Naive Bayes model".into()));
    };
    let all: Vec<usize> = (0..nb.n_features()).collect();
    let table = nb_explain(&nb, &all)?;
    let dir = args.out.dir();
    ensure_dir(&dir)?;
    let path = dir.join("explain.csv");
    write_text(&path, &table.to_csv())?;
    RunManifest::new("explain")
        .input(&args.model)?
        .output(&path)?
        .write_beside(&path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_lists() {
        assert_eq!(parse_ks("1:5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_ks("3,9").unwrap(), vec![3, 9]);
        assert_eq!(parse_ks("7").unwrap(), vec![7]);
        assert!(parse_ks("0:3").is_err());
        assert!(parse_ks("x").is_err());
    }

    #[test]
    fn counts() {
        assert_eq!(parse_counts("30,10,10,10").unwrap(), [30, 10, 10, 10]);
        assert!(parse_counts("1,2,3").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        let parse = binsight_core::Error::InvalidArgument("bad".into());
        assert_eq!(CliError::Core(parse).exit_code(), 2);
        let io = std::io::Error::other("disk");
        assert_eq!(CliError::Core(io.into()).exit_code(), 1);
    }
}
