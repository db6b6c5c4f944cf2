//! Command-line front end: data generation, training (gradient tree,
//! weighted ensemble, or greedy CART), evaluation, prediction, DOT export,
//! and the fixed 20-row benchmark.
//!
//! Every subcommand is deterministic: all randomness derives from --seed
//! (default 42), seeds are echoed into every report, and outputs carry no
//! timestamps unless --timestamps is given. Exit codes: 0 success, 2 usage
//! error, 1 runtime error.

mod metrics;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use ndarray::ArrayView2;
use serde::Serialize;

use gradtree::cart::{cart_fit, evaluate_split, Criterion};
use gradtree::data::{
    generate_titanic, load_csv, titanic20, Dataset, PreprocessOptions, Preprocessor, RawTable,
    TitanicVersion, TITANIC20_ROOT_GINI_GAINS,
};
use gradtree::ensemble::{ensemble_accuracy, train_ensemble, Ensemble, EnsembleConfig};
use gradtree::model_io::{
    cart_to_vanilla, export_dot, load_model, prune, save_model, to_vanilla, Model, ModelKind,
    VanillaTree,
};
use gradtree::optim::{train_tree, tree_accuracy, TrainConfig, TrainReport};
use gradtree::tree::{ForwardMode, SplitActivation};
use gradtree::GradTreeError;

#[derive(Parser)]
#[command(name = "gradtree", version, about = "Decision trees trained by gradient descent")]
struct Cli {
    /// Worker-thread cap; GRADTREE_THREADS is an equivalent env var.
    /// Defaults to the hardware thread count. Results are independent of
    /// the value because all randomness is seeded per logical unit.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Include a wall-clock timestamp in report files.
    #[arg(long, global = true)]
    timestamps: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on a CSV file and write model + report files.
    Train(Box<TrainArgs>),
    /// Evaluate a saved model on a CSV file with labels.
    Eval(EvalArgs),
    /// Predict labels and probabilities for a CSV file.
    Predict(PredictArgs),
    /// Export a saved tree model to Graphviz DOT.
    Export(ExportArgs),
    /// Generate a synthetic Titanic-style CSV.
    Gen(GenArgs),
    /// Reproduce the fixed 20-row greedy-vs-gradient comparison.
    BenchTitanic(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelFlag {
    Gradtree,
    Grande,
    Cart,
}

impl ModelFlag {
    fn name(self) -> &'static str {
        match self {
            ModelFlag::Gradtree => "gradtree",
            ModelFlag::Grande => "grande",
            ModelFlag::Cart => "cart",
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Training data CSV.
    #[arg(long)]
    data: PathBuf,
    /// Name of the label column.
    #[arg(long)]
    label_col: String,
    #[arg(long, value_enum, default_value = "gradtree")]
    model: ModelFlag,
    /// Output model file (JSON).
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
    /// Output report file (JSON lines); defaults to <out>.report.jsonl.
    #[arg(long)]
    report: Option<PathBuf>,
    /// JSON config file providing the full hyperparameter set; explicit
    /// flags still override it. Unknown keys are rejected.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    restarts: Option<usize>,
    /// Split activation: sigmoid, entmoid, or softsign.
    #[arg(long)]
    activation: Option<String>,
    /// Focal-loss exponent; 0 is plain cross-entropy.
    #[arg(long)]
    focal: Option<f64>,
    /// Ensemble size (grande only).
    #[arg(long)]
    estimators: Option<usize>,
    /// Estimator dropout probability (grande only).
    #[arg(long)]
    dropout: Option<f64>,
    /// Split criterion: gini or entropy (cart only).
    #[arg(long)]
    criterion: Option<String>,
    /// Skip the quantile-to-normal transform of numeric columns.
    #[arg(long)]
    no_quantile: bool,
    /// Comma-separated numeric columns to treat as categorical.
    #[arg(long, value_delimiter = ',')]
    categorical_cols: Vec<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Label column; defaults to the one the model was trained with.
    #[arg(long)]
    label_col: Option<String>,
    /// Optional metrics output file (also printed to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Optional predictions output file (also printed to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    model: PathBuf,
    /// Output DOT file.
    #[arg(long)]
    out: PathBuf,
    /// CSV of training rows; branches no sample reaches are removed.
    #[arg(long)]
    prune_data: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Which Titanic discretization: numeric, categorical, heterogeneous.
    #[arg(long)]
    titanic: String,
    /// Number of rows to draw.
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Emit the fixed 20-row example table instead of sampling.
    #[arg(long)]
    fixed: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Optional JSON output file (a text table is always printed).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let threads = match resolve_threads(cli.threads) {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            std::process::exit(2);
        }
    };
    let ctx = RunContext {
        threads,
        timestamps: cli.timestamps,
    };
    let result = match cli.command {
        Command::Train(args) => cmd_train(*args, &ctx),
        Command::Eval(args) => cmd_eval(args, &ctx),
        Command::Predict(args) => cmd_predict(args, &ctx),
        Command::Export(args) => cmd_export(args),
        Command::Gen(args) => cmd_gen(args),
        Command::BenchTitanic(args) => cmd_bench_titanic(args, &ctx),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

struct RunContext {
    threads: usize,
    timestamps: bool,
}

fn resolve_threads(flag: Option<usize>) -> std::result::Result<usize, String> {
    let threads = match flag {
        Some(t) => t,
        None => match std::env::var("GRADTREE_THREADS") {
            Ok(v) => v
                .parse()
                .map_err(|_| format!("GRADTREE_THREADS is not a number: '{v}'"))?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if threads == 0 {
        return Err("--threads must be >= 1".into());
    }
    Ok(threads)
}

/// Flag-combination error: report and exit with the usage code.
fn usage_error(msg: &str) -> ! {
    eprintln!("error: {msg}");
    std::process::exit(2);
}

type Result<T> = std::result::Result<T, GradTreeError>;

fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

fn parse_activation(s: &str) -> SplitActivation {
    match s.parse() {
        Ok(a) => a,
        Err(e) => usage_error(&e.to_string()),
    }
}

fn parse_criterion(s: &str) -> Criterion {
    match s.parse() {
        Ok(c) => c,
        Err(e) => usage_error(&format!("{e}")),
    }
}

fn read_config<T: serde::de::DeserializeOwned>(path: &Path) -> T {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => usage_error(&format!("cannot read config {}: {e}", path.display())),
    };
    match serde_json::from_str(&text) {
        Ok(cfg) => cfg,
        Err(e) => usage_error(&format!("bad config {}: {e}", path.display())),
    }
}

fn validate_train_flags(args: &TrainArgs) {
    let model = args.model;
    if args.estimators.is_some() && model != ModelFlag::Grande {
        usage_error("--estimators only applies to --model grande");
    }
    if args.dropout.is_some() && model != ModelFlag::Grande {
        usage_error("--dropout only applies to --model grande");
    }
    if args.criterion.is_some() && model != ModelFlag::Cart {
        usage_error("--criterion only applies to --model cart");
    }
    if model == ModelFlag::Cart {
        for (set, flag) in [
            (args.epochs.is_some(), "--epochs"),
            (args.batch_size.is_some(), "--batch-size"),
            (args.patience.is_some(), "--patience"),
            (args.restarts.is_some(), "--restarts"),
            (args.activation.is_some(), "--activation"),
            (args.focal.is_some(), "--focal"),
            (args.config.is_some(), "--config"),
        ] {
            if set {
                usage_error(&format!("{flag} does not apply to --model cart"));
            }
        }
    }
}

fn apply_tree_overrides(cfg: &mut TrainConfig, args: &TrainArgs) {
    cfg.seed = args.seed;
    if let Some(d) = args.depth {
        cfg.depth = d;
    }
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if let Some(b) = args.batch_size {
        cfg.batch_size = b;
    }
    if let Some(p) = args.patience {
        cfg.patience = p;
    }
    if let Some(r) = args.restarts {
        cfg.restarts = r;
    }
    if let Some(a) = &args.activation {
        cfg.activation = parse_activation(a);
    }
    if let Some(f) = args.focal {
        cfg.loss.focal_factor = f;
    }
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    seed: u64,
    model: &'a str,
    threads: usize,
    train_accuracy: f64,
    internal_nodes: usize,
    chosen_restart: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<u64>,
}

fn report_path(args: &TrainArgs) -> PathBuf {
    args.report.clone().unwrap_or_else(|| {
        let mut s = args.out.as_os_str().to_owned();
        s.push(".report.jsonl");
        PathBuf::from(s)
    })
}

fn cmd_train(args: TrainArgs, ctx: &RunContext) -> Result<()> {
    validate_train_flags(&args);
    let table = load_csv(&args.data)?;
    let opts = PreprocessOptions {
        quantile: !args.no_quantile,
        categorical_cols: args.categorical_cols.clone(),
        ..PreprocessOptions::default()
    };
    let (pre, ds) = Preprocessor::fit(&table, &args.label_col, &opts)?;

    let mut metadata = BTreeMap::new();
    metadata.insert("seed".into(), serde_json::json!(args.seed));
    metadata.insert("model".into(), serde_json::json!(args.model.name()));
    metadata.insert("threads".into(), serde_json::json!(ctx.threads));

    let (kind, accuracy, internal_nodes, report): (ModelKind, f64, usize, Option<TrainReport>) =
        match args.model {
            ModelFlag::Gradtree => {
                let mut cfg: TrainConfig = args
                    .config
                    .as_deref()
                    .map_or_else(TrainConfig::default, read_config);
                apply_tree_overrides(&mut cfg, &args);
                let (tree, report) = train_tree(ds.x.view(), &ds.y, ds.c(), &cfg)?;
                let acc = tree_accuracy(&tree, ds.x.view(), &ds.y, cfg.activation)?;
                metadata.insert("depth".into(), serde_json::json!(cfg.depth));
                metadata.insert("activation".into(), serde_json::to_value(cfg.activation)?);
                let nodes = tree.n_internal();
                (ModelKind::Dense { tree }, acc, nodes, Some(report))
            }
            ModelFlag::Grande => {
                let mut cfg: EnsembleConfig = args
                    .config
                    .as_deref()
                    .map_or_else(EnsembleConfig::default, read_config);
                apply_tree_overrides(&mut cfg.train, &args);
                if let Some(e) = args.estimators {
                    cfg.estimators = e;
                }
                if let Some(p) = args.dropout {
                    cfg.dropout = p;
                }
                let (ens, report) = train_ensemble(ds.x.view(), &ds.y, ds.c(), &cfg)?;
                let acc = ensemble_accuracy(&ens, ds.x.view(), &ds.y)?;
                metadata.insert("depth".into(), serde_json::json!(cfg.train.depth));
                metadata.insert("estimators".into(), serde_json::json!(cfg.estimators));
                metadata.insert(
                    "activation".into(),
                    serde_json::to_value(cfg.train.activation)?,
                );
                let nodes = cfg.estimators * ens.trees[0].n_internal();
                (ModelKind::Ensemble { ensemble: ens }, acc, nodes, Some(report))
            }
            ModelFlag::Cart => {
                let criterion =
                    args.criterion.as_deref().map_or(Criterion::Gini, parse_criterion);
                let depth = args.depth.unwrap_or(3);
                let root = cart_fit(ds.x.view(), &ds.y, ds.c(), depth, criterion, 1)?;
                let tree =
                    cart_to_vanilla(&root, ds.n(), ds.c(), Some(&ds.feature_names))?;
                let preds = tree.predict(ds.x.view());
                let acc = metrics::accuracy(&preds, &ds.y);
                metadata.insert("depth".into(), serde_json::json!(depth));
                metadata.insert("criterion".into(), serde_json::json!(format!("{criterion:?}").to_lowercase()));
                let nodes = tree.n_internal();
                (ModelKind::Vanilla { tree }, acc, nodes, None)
            }
        };

    metadata.insert("train_accuracy".into(), serde_json::json!(accuracy));
    let mut model = Model::new(kind);
    model.preprocessor = Some(pre);
    model.metadata = metadata;
    save_model(&model, &args.out)?;

    let summary = TrainSummary {
        seed: args.seed,
        model: args.model.name(),
        threads: ctx.threads,
        train_accuracy: accuracy,
        internal_nodes,
        chosen_restart: report.as_ref().map(|r| r.chosen_restart),
        timestamp: ctx.timestamps.then(unix_timestamp),
    };
    let mut text = serde_json::to_string(&summary)?;
    text.push('\n');
    if let Some(r) = &report {
        text.push_str(&r.to_json_lines()?);
    }
    write_text(&report_path(&args), &text)?;
    println!(
        "trained {} on {} rows: train accuracy {:.4}, {} internal nodes",
        args.model.name(),
        ds.m(),
        accuracy,
        internal_nodes
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// eval / predict
// ---------------------------------------------------------------------------

/// Hard-mode predictions plus class probabilities for any model kind.
fn model_predict(model: &Model, x: ArrayView2<f64>) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    match &model.kind {
        ModelKind::Dense { tree } => {
            let vanilla = to_vanilla(tree, None)?;
            predict_vanilla(&vanilla, x)
        }
        ModelKind::Vanilla { tree } => predict_vanilla(tree, x),
        ModelKind::Ensemble { ensemble } => predict_ensemble(ensemble, x),
    }
}

fn predict_vanilla(tree: &VanillaTree, x: ArrayView2<f64>) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let mut labels = Vec::with_capacity(x.nrows());
    let mut probs = Vec::with_capacity(x.nrows());
    for s in 0..x.nrows() {
        labels.push(tree.predict_row(x.row(s)));
        probs.push(tree.predict_proba_row(x.row(s)).to_vec());
    }
    Ok((labels, probs))
}

fn predict_ensemble(ens: &Ensemble, x: ArrayView2<f64>) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let fwd = gradtree::ensemble::ensemble_forward(ens, x, ForwardMode::Hard, None)?;
    let mut labels = Vec::with_capacity(x.nrows());
    let mut probs = Vec::with_capacity(x.nrows());
    for s in 0..x.nrows() {
        let row: Vec<f64> = fwd.probs.row(s).to_vec();
        labels.push(metrics::argmax(&row));
        probs.push(row);
    }
    Ok((labels, probs))
}

fn load_model_and_data(model_path: &Path, data_path: &Path) -> Result<(Model, RawTable, Dataset)> {
    let model = load_model(model_path)?;
    let table = load_csv(data_path)?;
    let pre = model
        .preprocessor
        .as_ref()
        .ok_or_else(|| GradTreeError::ModelLoad("model carries no preprocessor".into()))?;
    let x = pre.apply(&table)?;
    let y = pre.apply_labels(&table).unwrap_or_default();
    let ds = Dataset {
        x,
        y,
        feature_names: pre.feature_names.clone(),
        class_names: pre.class_names.clone(),
    };
    Ok((model, table, ds))
}

fn cmd_eval(args: EvalArgs, ctx: &RunContext) -> Result<()> {
    let (model, table, ds) = load_model_and_data(&args.model, &args.data)?;
    let pre = model.preprocessor.as_ref().expect("checked above");
    let label_col = args.label_col.as_deref().unwrap_or(&pre.label_col);
    if table.column(label_col).is_none() {
        return Err(GradTreeError::Data(format!(
            "label column '{label_col}' not found"
        )));
    }
    if ds.y.is_empty() {
        return Err(GradTreeError::Data("no labels to evaluate against".into()));
    }
    let (preds, _) = model_predict(&model, ds.x.view())?;
    let report = metrics::evaluate(&preds, &ds.y, &ds.class_names, args.seed, ctx.threads);
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    print!("{text}");
    if let Some(out) = &args.out {
        write_text(out, &text)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct PredictionRow {
    row: usize,
    label: usize,
    class: String,
    probabilities: Vec<f64>,
}

#[derive(Serialize)]
struct PredictReport {
    seed: u64,
    predictions: Vec<PredictionRow>,
}

fn cmd_predict(args: PredictArgs, _ctx: &RunContext) -> Result<()> {
    let (model, _, ds) = load_model_and_data(&args.model, &args.data)?;
    let (labels, probs) = model_predict(&model, ds.x.view())?;
    let predictions = labels
        .iter()
        .zip(probs)
        .enumerate()
        .map(|(row, (&label, probabilities))| PredictionRow {
            row,
            label,
            class: ds.class_names.get(label).cloned().unwrap_or_default(),
            probabilities,
        })
        .collect();
    let report = PredictReport {
        seed: args.seed,
        predictions,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    print!("{text}");
    if let Some(out) = &args.out {
        write_text(out, &text)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// export / gen
// ---------------------------------------------------------------------------

fn cmd_export(args: ExportArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let names = model.preprocessor.as_ref().map(|p| p.feature_names.clone());
    let class_names = model.preprocessor.as_ref().map(|p| p.class_names.clone());
    let mut tree = match &model.kind {
        ModelKind::Dense { tree } => to_vanilla(tree, names.as_deref())?,
        ModelKind::Vanilla { tree } => tree.clone(),
        ModelKind::Ensemble { .. } => {
            return Err(GradTreeError::Argument(
                "export supports single-tree models only".into(),
            ))
        }
    };
    if let Some(data) = &args.prune_data {
        let table = load_csv(data)?;
        let pre = model
            .preprocessor
            .as_ref()
            .ok_or_else(|| GradTreeError::ModelLoad("model carries no preprocessor".into()))?;
        let x = pre.apply(&table)?;
        tree = prune(&tree, x.view())?;
    }
    let dot = export_dot(&tree, class_names.as_deref());
    write_text(&args.out, &dot)?;
    println!(
        "exported tree with {} internal nodes to {}",
        tree.n_internal(),
        args.out.display()
    );
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let version: TitanicVersion = args.titanic.parse()?;
    let table = if args.fixed {
        if args.rows.is_some_and(|r| r != 20) {
            usage_error("--fixed emits exactly 20 rows; drop --rows");
        }
        titanic20(version)
    } else {
        let rows = args.rows.unwrap_or_else(|| usage_error("--rows is required without --fixed"));
        generate_titanic(rows, args.seed, version)?
    };
    write_text(&args.out, &table.to_csv_string()?)?;
    println!("wrote {} rows to {}", table.n_rows, args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// bench-titanic
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct BenchRow {
    model: String,
    accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy_median: Option<f64>,
    internal_nodes: usize,
}

#[derive(Serialize)]
struct GiniDiffRow {
    candidate: String,
    computed: f64,
    expected: f64,
    diff: f64,
}

#[derive(Serialize)]
struct BenchReport {
    seed: u64,
    threads: usize,
    rows: Vec<BenchRow>,
    gini_gain_diff: Vec<GiniDiffRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<u64>,
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Gini gains of every root candidate on the raw-unit features, diffed
/// against the reference values.
fn gini_diff_table(ds: &Dataset) -> Result<Vec<GiniDiffRow>> {
    let age = feature_index(ds, "Age")?;
    let fare = feature_index(ds, "Fare Category=High")?;
    let idx: Vec<usize> = (0..ds.m()).collect();
    let mut rows = Vec::new();
    for &(threshold, expected) in TITANIC20_ROOT_GINI_GAINS {
        let (candidate, feature, thr) = match threshold {
            None => ("Fare Category".to_string(), fare, 0.5),
            Some(t) => (format!("Age >= {t}"), age, t),
        };
        let gain = evaluate_split(ds.x.view(), &ds.y, &idx, feature, thr, Criterion::Gini, ds.c())?;
        rows.push(GiniDiffRow {
            candidate,
            computed: round3(gain),
            expected,
            diff: round3(round3(gain) - expected),
        });
    }
    Ok(rows)
}

fn feature_index(ds: &Dataset, name: &str) -> Result<usize> {
    ds.feature_names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| GradTreeError::Data(format!("feature '{name}' not found")))
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn cmd_bench_titanic(args: BenchArgs, ctx: &RunContext) -> Result<()> {
    let table = titanic20(TitanicVersion::Heterogeneous);
    // Raw units for the greedy baselines and the gain table; the gradient
    // models train on the quantile-transformed features.
    let raw_opts = PreprocessOptions {
        quantile: false,
        ..PreprocessOptions::default()
    };
    let (_, raw) = Preprocessor::fit(&table, "Survived", &raw_opts)?;
    let (_, ds) = Preprocessor::fit(&table, "Survived", &PreprocessOptions::default())?;

    let mut rows = Vec::new();
    for criterion in [Criterion::Gini, Criterion::Entropy] {
        let root = cart_fit(raw.x.view(), &raw.y, raw.c(), 3, criterion, 1)?;
        let tree = cart_to_vanilla(&root, raw.n(), raw.c(), Some(&raw.feature_names))?;
        let preds = tree.predict(raw.x.view());
        rows.push(BenchRow {
            model: format!("cart ({criterion:?}, depth 3)").to_lowercase(),
            accuracy: metrics::accuracy(&preds, &raw.y),
            accuracy_median: None,
            internal_nodes: tree.n_internal(),
        });
    }

    let mut accs = Vec::new();
    let mut best_nodes = 0;
    let mut best_acc = f64::NEG_INFINITY;
    for k in 0..10 {
        let cfg = TrainConfig {
            depth: 3,
            seed: args.seed + k,
            ..TrainConfig::default()
        };
        let (tree, _) = train_tree(ds.x.view(), &ds.y, ds.c(), &cfg)?;
        let acc = tree_accuracy(&tree, ds.x.view(), &ds.y, cfg.activation)?;
        if acc > best_acc {
            best_acc = acc;
            best_nodes = prune(&to_vanilla(&tree, None)?, ds.x.view())?.n_internal();
        }
        accs.push(acc);
    }
    accs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    rows.push(BenchRow {
        model: "gradtree (depth 3, best of 10 runs)".into(),
        accuracy: *accs.last().unwrap(),
        accuracy_median: Some(median(&accs)),
        internal_nodes: best_nodes,
    });

    let ens_cfg = EnsembleConfig {
        estimators: 8,
        train: TrainConfig {
            depth: 3,
            seed: args.seed,
            ..EnsembleConfig::default().train
        },
        ..EnsembleConfig::default()
    };
    let (ens, _) = train_ensemble(ds.x.view(), &ds.y, ds.c(), &ens_cfg)?;
    rows.push(BenchRow {
        model: "grande (8 estimators, depth 3)".into(),
        accuracy: ensemble_accuracy(&ens, ds.x.view(), &ds.y)?,
        accuracy_median: None,
        internal_nodes: 8 * ens.trees[0].n_internal(),
    });

    let gini_gain_diff = gini_diff_table(&raw)?;

    println!("{:<38} {:>9} {:>9} {:>7}", "model", "accuracy", "median", "nodes");
    for row in &rows {
        let med = row
            .accuracy_median
            .map_or(String::from("-"), |m| format!("{m:.2}"));
        println!(
            "{:<38} {:>9.2} {:>9} {:>7}",
            row.model, row.accuracy, med, row.internal_nodes
        );
    }
    println!();
    println!("{:<22} {:>9} {:>9} {:>7}", "root candidate", "computed", "expected", "diff");
    for g in &gini_gain_diff {
        println!(
            "{:<22} {:>9.3} {:>9.3} {:>7.3}",
            g.candidate, g.computed, g.expected, g.diff
        );
    }

    let report = BenchReport {
        seed: args.seed,
        threads: ctx.threads,
        rows,
        gini_gain_diff,
        timestamp: ctx.timestamps.then(unix_timestamp),
    };
    if let Some(out) = &args.out {
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        write_text(out, &text)?;
    }
    Ok(())
}
