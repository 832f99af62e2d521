//! `philaex` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use philaex::adversarial::{build_attack_set, read_jsonl, write_jsonl, AttackConfig};
use philaex::data::{train_test_split, DataFormat, Dataset, TfIdfEncoder};
use philaex::evaluation::{
    good_explanation_curve, good_explanation_rate, pcr_curve, write_curves_csv, EvalMode,
    EvaluationCurve, Method,
};
use philaex::explainer::AttributionReport;
use philaex::models::{
    evaluate_classifier, EncodedModel, ExternalModel, ForestParams, LogisticModel, LogisticParams,
    ModelBundle, ModelKind, RandomForestModel, ScoreModel, SplitSpec, TrainedModel,
};
use philaex::synth::{pdf_style, PdfStyleConfig};
use philaex::{explain, ExplainerConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const RUN_CONFIG: &str = "run_config.json";

#[derive(Debug, Parser)]
#[command(name = "philaex", version, about = "Feature attribution for binary classifiers")]
struct Cli {
    /// Directory receiving all outputs and the run config echo.
    #[arg(long, global = true, env = "PHILAEX_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "command")]
enum Command {
    /// Write a synthetic PDF-style corpus as numeric CSV.
    Generate(GenerateArgs),
    /// Train a model and report held-out metrics.
    Train(TrainArgs),
    /// Explain model predictions, one JSON report per line.
    Explain(ExplainArgs),
    /// Generate add-only evasive samples with a genetic algorithm.
    Attack(AttackArgs),
    /// Compute fidelity curves.
    Evaluate(EvaluateArgs),
    /// Re-run the command recorded in a run config echo.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct GenerateArgs {
    #[arg(long, default_value = "data.csv")]
    out: PathBuf,
    #[arg(long, default_value_t = 4999)]
    malicious: usize,
    #[arg(long, default_value_t = 5000)]
    benign: usize,
    #[arg(long, default_value_t = 135)]
    features: usize,
    #[arg(long, default_value_t = 25)]
    markers: usize,
    #[arg(long, default_value_t = 0.4)]
    marker_rate: f64,
    #[arg(long, default_value_t = 0.1)]
    cross_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct DataArgs {
    /// Dataset file (token lists, or numeric CSV for `.csv`).
    #[arg(long)]
    data: PathBuf,
    /// Override the format inferred from the file extension.
    #[arg(long)]
    format: Option<DataFormat>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "forest")]
    model_kind: ModelKind,
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
    #[arg(long, default_value_t = 0.67)]
    train_fraction: f64,
    /// Tf-idf encode features (default: on for token lists, off for CSV).
    #[arg(long)]
    tfidf: Option<bool>,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long, default_value_t = 10)]
    depth: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct ModelArgs {
    /// Model JSON written by `train`.
    #[arg(long, required_unless_present_any = ["external_cmd", "external_tcp"])]
    model: Option<PathBuf>,
    /// Score through a subprocess speaking the JSONL protocol on stdio.
    #[arg(long, conflicts_with_all = ["model", "external_tcp"])]
    external_cmd: Option<String>,
    /// Score through a TCP endpoint speaking the JSONL protocol.
    #[arg(long, conflicts_with = "model")]
    external_tcp: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum SplitChoice {
    Test,
    Train,
    All,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct SampleArgs {
    /// Which part of the data to use (default: the model's test split when
    /// known, otherwise all).
    #[arg(long, value_enum)]
    split: Option<SplitChoice>,
    /// Restrict to these sample ids (row order in the data file).
    #[arg(long, value_delimiter = ',')]
    samples: Vec<usize>,
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct ExplainerArgs {
    #[arg(long, default_value_t = 10)]
    max_core: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long)]
    mask_samples: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
}

impl ExplainerArgs {
    fn config(&self, seed: u64) -> ExplainerConfig {
        ExplainerConfig {
            max_core_features: self.max_core,
            alpha: self.alpha,
            mask_samples: self.mask_samples,
            contribution_epsilon: self.epsilon,
            seed,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct ExplainArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    select: SampleArgs,
    #[command(flatten)]
    explainer: ExplainerArgs,
    #[arg(long, default_value = "reports.jsonl")]
    out: PathBuf,
    /// Print per-sample wall time to stderr.
    #[arg(long)]
    timing: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct AttackArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    select: SampleArgs,
    #[arg(long, default_value_t = 50)]
    count: usize,
    /// Addable feature ids (default: every feature).
    #[arg(long, value_delimiter = ',')]
    addable: Vec<usize>,
    /// Addable features by name prefix, e.g. a permission namespace.
    #[arg(long)]
    addable_prefix: Option<String>,
    #[arg(long, default_value_t = 50)]
    population: usize,
    #[arg(long, default_value_t = 500)]
    generations: usize,
    #[arg(long, default_value_t = 10)]
    stable_rounds: usize,
    #[arg(long, default_value_t = 0.99)]
    target: f64,
    #[arg(long, default_value_t = 0.01)]
    mutation_rate: f64,
    #[arg(long, default_value_t = 0.1)]
    init_density: f64,
    #[arg(long, default_value_t = 3)]
    attempts_per_seed: usize,
    #[arg(long, default_value = "attacks.jsonl")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MethodName {
    Philaex,
    Random,
    Lime,
}

impl MethodName {
    fn as_str(self) -> &'static str {
        match self {
            MethodName::Philaex => "philaex",
            MethodName::Random => "random",
            MethodName::Lime => "lime",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ModeName {
    GoodExplanation,
    Deduction,
    Augmentation,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct EvaluateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    select: SampleArgs,
    #[command(flatten)]
    explainer: ExplainerArgs,
    #[arg(long, value_enum)]
    mode: ModeName,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "philaex,random,lime")]
    methods: Vec<MethodName>,
    /// Feature counts for deduction/augmentation.
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,20,30,40,50,60,70,80")]
    ks: Vec<usize>,
    /// Thresholds for the good-explanation sweep.
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    thresholds: Vec<f64>,
    /// Attack set (JSONL from `attack`) for the good-explanation mode.
    #[arg(long)]
    attacks: Option<PathBuf>,
    /// Output stem; writes `<stem>.csv` and `<stem>.json`.
    #[arg(long, default_value = "curves")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Args)]
struct ReplayArgs {
    /// A run config echo written by an earlier run.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct RunConfig {
    command: Command,
}

enum CliError {
    Usage(String),
    Runtime(String),
}

type CliResult<T> = Result<T, CliError>;

fn runtime<E: std::fmt::Display>(context: impl Into<String>) -> impl FnOnce(E) -> CliError {
    let context = context.into();
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be >= 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("global pool configured once");
    }
    match run(cli.command, &cli.out_dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command, out_dir: &Path) -> CliResult<()> {
    let command = match command {
        Command::Replay(r) => {
            let text = fs::read_to_string(&r.config).map_err(runtime(&r.config.display().to_string()))?;
            let cfg: RunConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: not a run config: {e}", r.config.display())))?;
            cfg.command
        }
        other => resolve_paths(other),
    };
    fs::create_dir_all(out_dir).map_err(runtime(&out_dir.display().to_string()))?;
    let echo = serde_json::to_string_pretty(&RunConfig {
        command: command.clone(),
    })
    .expect("run config serializes");
    fs::write(out_dir.join(RUN_CONFIG), echo + "\n").map_err(runtime(RUN_CONFIG))?;
    match command {
        Command::Generate(a) => cmd_generate(&a, out_dir),
        Command::Train(a) => cmd_train(&a, out_dir),
        Command::Explain(a) => cmd_explain(&a, out_dir),
        Command::Attack(a) => cmd_attack(&a, out_dir),
        Command::Evaluate(a) => cmd_evaluate(&a, out_dir),
        Command::Replay(_) => unreachable!("replay resolved above"),
    }
}

fn absolute(p: &mut PathBuf) {
    if let Ok(c) = fs::canonicalize(&*p) {
        *p = c;
    }
}

/// Makes input paths absolute so the echoed config replays from any
/// directory.
fn resolve_paths(mut c: Command) -> Command {
    let fix_model = |m: &mut ModelArgs| {
        if let Some(p) = &mut m.model {
            absolute(p);
        }
    };
    match &mut c {
        Command::Generate(_) | Command::Replay(_) => {}
        Command::Train(a) => absolute(&mut a.data.data),
        Command::Explain(a) => {
            absolute(&mut a.data.data);
            fix_model(&mut a.model);
        }
        Command::Attack(a) => {
            absolute(&mut a.data.data);
            fix_model(&mut a.model);
        }
        Command::Evaluate(a) => {
            absolute(&mut a.data.data);
            fix_model(&mut a.model);
            if let Some(p) = &mut a.attacks {
                absolute(p);
            }
        }
    }
    c
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(runtime(&path.display().to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    fs::write(path, text + "\n").map_err(runtime(&path.display().to_string()))
}

fn cmd_generate(a: &GenerateArgs, out_dir: &Path) -> CliResult<()> {
    if 2 * a.markers > a.features {
        return Err(CliError::Usage(format!(
            "--markers {} needs at least {} features",
            a.markers,
            2 * a.markers
        )));
    }
    for (name, v) in [("marker-rate", a.marker_rate), ("cross-rate", a.cross_rate)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(CliError::Usage(format!("--{name} must lie in [0, 1]")));
        }
    }
    let corpus = pdf_style(&PdfStyleConfig {
        n_malicious: a.malicious,
        n_benign: a.benign,
        n_features: a.features,
        malicious_markers: a.markers,
        benign_markers: a.markers,
        marker_rate: a.marker_rate,
        cross_rate: a.cross_rate,
        seed: a.seed,
    });
    let path = out_dir.join(&a.out);
    let mut w = create(&path)?;
    corpus
        .dataset
        .write_numeric_csv(&mut w)
        .and_then(|_| w.flush())
        .map_err(runtime(&path.display().to_string()))?;
    eprintln!("wrote {} samples to {}", corpus.dataset.len(), path.display());
    Ok(())
}

fn data_format(d: &DataArgs) -> DataFormat {
    d.format.unwrap_or_else(|| DataFormat::infer(&d.data))
}

#[derive(Serialize)]
struct TrainReport {
    tpr: f64,
    fpr: f64,
    accuracy: f64,
    train_samples: usize,
    test_samples: usize,
    model_kind: ModelKind,
}

fn cmd_train(a: &TrainArgs, out_dir: &Path) -> CliResult<()> {
    let format = data_format(&a.data);
    let data = Dataset::load(&a.data.data, format).map_err(runtime(&a.data.data.display().to_string()))?;
    let (train, test) =
        train_test_split(&data, a.train_fraction, a.seed).map_err(|e| CliError::Usage(e.to_string()))?;
    let use_tfidf = a.tfidf.unwrap_or(format == DataFormat::TokenLists);
    let encoder = if use_tfidf {
        Some(TfIdfEncoder::fit(&train).map_err(runtime("tf-idf"))?)
    } else {
        None
    };
    let encoded = match &encoder {
        Some(e) => e.encode_dataset(&train).map_err(runtime("tf-idf"))?,
        None => train.clone(),
    };
    let inner = match a.model_kind {
        ModelKind::Logistic => TrainedModel::Logistic(
            LogisticModel::train(
                &encoded,
                LogisticParams {
                    l2: a.l2,
                    lr: a.lr,
                    epochs: a.epochs,
                    seed: a.seed,
                },
            )
            .map_err(|e| CliError::Usage(e.to_string()))?,
        ),
        ModelKind::Forest => TrainedModel::Forest(
            RandomForestModel::train(
                &encoded,
                ForestParams {
                    tree_count: a.trees,
                    max_depth: a.depth,
                    seed: a.seed,
                    ..Default::default()
                },
            )
            .map_err(|e| CliError::Usage(e.to_string()))?,
        ),
    };
    let bundle = ModelBundle {
        vocabulary: data.vocabulary.clone(),
        data_format: format,
        split: Some(SplitSpec {
            train_fraction: a.train_fraction,
            seed: a.seed,
        }),
        model: EncodedModel { encoder, inner },
    };
    let model_path = out_dir.join(&a.out);
    bundle.save(&model_path).map_err(runtime("save model"))?;
    let m = evaluate_classifier(&bundle, &test).map_err(runtime("evaluate"))?;
    write_json(
        &out_dir.join("metrics.json"),
        &TrainReport {
            tpr: m.tpr,
            fpr: m.fpr,
            accuracy: m.accuracy,
            train_samples: train.len(),
            test_samples: test.len(),
            model_kind: a.model_kind,
        },
    )?;
    eprintln!(
        "test accuracy {:.4}, tpr {:.4}, fpr {:.4}; model written to {}",
        m.accuracy,
        m.tpr,
        m.fpr,
        model_path.display()
    );
    Ok(())
}

struct Loaded {
    model: Box<dyn ScoreModel>,
    bundle: Option<ModelBundle>,
    data: Dataset,
}

/// Loads the scorer and the data it will see.
fn load(m: &ModelArgs, d: &DataArgs) -> CliResult<Loaded> {
    let format = data_format(d);
    let data_err = runtime(d.data.display().to_string());
    if let Some(path) = &m.model {
        let bundle = ModelBundle::load(path).map_err(runtime("load model"))?;
        let data = match format {
            DataFormat::TokenLists => Dataset::load_with_vocabulary(&d.data, format, &bundle.vocabulary),
            // dimensions are checked per sample so that errors can name it
            DataFormat::NumericCsv => Dataset::load(&d.data, format),
        }
        .map_err(data_err)?;
        return Ok(Loaded {
            model: Box::new(bundle.clone()),
            bundle: Some(bundle),
            data,
        });
    }
    let data = Dataset::load(&d.data, format).map_err(data_err)?;
    let dim = data.dim();
    let model: Box<dyn ScoreModel> = match (&m.external_cmd, &m.external_tcp) {
        (Some(cmd), _) => {
            let argv: Vec<String> = cmd.split_whitespace().map(str::to_owned).collect();
            Box::new(ExternalModel::spawn(&argv, dim).map_err(runtime("external model"))?)
        }
        (_, Some(addr)) => Box::new(ExternalModel::connect(addr, dim).map_err(runtime("external model"))?),
        _ => return Err(CliError::Usage("one of --model, --external-cmd, --external-tcp is required".into())),
    };
    Ok(Loaded {
        model,
        bundle: None,
        data,
    })
}

fn check_dims(l: &Loaded, data: &Dataset) -> CliResult<()> {
    for s in &data.samples {
        if s.features.dim() != l.model.dim() {
            return Err(CliError::Runtime(format!(
                "sample {}: dimension mismatch: model expects {} features, sample has {}",
                s.id,
                l.model.dim(),
                s.features.dim()
            )));
        }
    }
    Ok(())
}

/// Applies `--split`, `--samples` and `--limit`.
fn select(l: &Loaded, sel: &SampleArgs) -> CliResult<Dataset> {
    let spec = l.bundle.as_ref().and_then(|b| b.split);
    let choice = sel
        .split
        .unwrap_or(if spec.is_some() { SplitChoice::Test } else { SplitChoice::All });
    let mut data = match (choice, spec) {
        (SplitChoice::All, _) => l.data.clone(),
        (_, None) => {
            return Err(CliError::Usage(
                "--split test/train needs a model trained by this tool; use --split all".into(),
            ))
        }
        (c, Some(s)) => {
            let (train, test) = train_test_split(&l.data, s.train_fraction, s.seed)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            if c == SplitChoice::Train {
                train
            } else {
                test
            }
        }
    };
    if !sel.samples.is_empty() {
        let mut picked = Vec::new();
        for &id in &sel.samples {
            let s = data
                .sample(id)
                .ok_or_else(|| CliError::Usage(format!("sample {id} is not in the selected split")))?;
            picked.push(s.clone());
        }
        data.samples = picked;
    }
    if let Some(n) = sel.limit {
        data.samples.truncate(n);
    }
    if data.is_empty() {
        return Err(CliError::Usage("no samples selected".into()));
    }
    check_dims(l, &data)?;
    Ok(data)
}

fn name_report(r: AttributionReport, l: &Loaded, id: usize) -> AttributionReport {
    let vocab = l.bundle.as_ref().map_or(&l.data.vocabulary, |b| &b.vocabulary);
    r.with_sample_id(id).with_names(vocab)
}

fn cmd_explain(a: &ExplainArgs, out_dir: &Path) -> CliResult<()> {
    let l = load(&a.model, &a.data)?;
    let data = select(&l, &a.select)?;
    let cfg = a.explainer.config(a.seed);
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let results: Vec<(usize, Duration, Result<AttributionReport, String>)> = data
        .samples
        .par_iter()
        .map(|s| {
            let t = Instant::now();
            let r = explain(&*l.model, &s.features, &cfg)
                .map(|r| name_report(r, &l, s.id))
                .map_err(|e| format!("sample {}: {e}", s.id));
            (s.id, t.elapsed(), r)
        })
        .collect();
    let path = out_dir.join(&a.out);
    let mut w = create(&path)?;
    let mut times = Vec::new();
    for (id, dt, r) in results {
        let r = r.map_err(CliError::Runtime)?;
        writeln!(w, "{}", r.to_json()).map_err(runtime(&path.display().to_string()))?;
        if a.timing {
            eprintln!("sample {id}: {:.3} ms", dt.as_secs_f64() * 1e3);
        }
        times.push(dt);
    }
    w.flush().map_err(runtime(&path.display().to_string()))?;
    if a.timing {
        times.sort();
        eprintln!("median explanation time: {:.3} ms", times[times.len() / 2].as_secs_f64() * 1e3);
    }
    eprintln!("wrote {} reports to {}", times.len(), path.display());
    Ok(())
}

fn addable_features(a: &AttackArgs, l: &Loaded) -> CliResult<Vec<usize>> {
    let dim = l.model.dim();
    let vocab = l.bundle.as_ref().map_or(&l.data.vocabulary, |b| &b.vocabulary);
    let mut ids: Vec<usize> = a.addable.clone();
    if let Some(bad) = ids.iter().find(|&&i| i >= dim) {
        return Err(CliError::Usage(format!("--addable id {bad} out of range (dimension {dim})")));
    }
    if let Some(prefix) = &a.addable_prefix {
        ids.extend((0..dim).filter(|&i| vocab.name(i).is_some_and(|n| n.starts_with(prefix.as_str()))));
    }
    if a.addable.is_empty() && a.addable_prefix.is_none() {
        ids = (0..dim).collect();
    }
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() {
        return Err(CliError::Usage("no addable features selected".into()));
    }
    Ok(ids)
}

fn cmd_attack(a: &AttackArgs, out_dir: &Path) -> CliResult<()> {
    let l = load(&a.model, &a.data)?;
    let path = out_dir.join(&a.out);
    if a.count == 0 {
        create(&path)?.flush().map_err(runtime(&path.display().to_string()))?;
        eprintln!("count 0: wrote empty {}", path.display());
        return Ok(());
    }
    let data = select(&l, &a.select)?;
    let cfg = AttackConfig {
        addable_features: addable_features(a, &l)?,
        population_size: a.population,
        max_generations: a.generations,
        stable_rounds: a.stable_rounds,
        fitness_target: a.target,
        mutation_rate: a.mutation_rate,
        init_density: a.init_density,
        attempts_per_seed: a.attempts_per_seed,
        seed: a.seed,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let set = build_attack_set(&*l.model, &data, a.count, &cfg).map_err(runtime("attack"))?;
    let mut w = create(&path)?;
    write_jsonl(&mut w, &set.samples)
        .and_then(|_| w.flush())
        .map_err(runtime(&path.display().to_string()))?;
    if set.samples.len() < a.count {
        eprintln!("warning: only {} of {} requested samples found", set.samples.len(), a.count);
    }
    eprintln!(
        "wrote {} evasive samples to {} (success {:.1}% over {} attempts)",
        set.samples.len(),
        path.display(),
        100.0 * set.success_rate(),
        set.attempts
    );
    Ok(())
}

#[derive(Serialize)]
struct GoodExplanationSummary {
    method: String,
    threshold: f64,
    rate: f64,
    at_least_one_rate: f64,
    counted: usize,
    excluded_empty: usize,
}

#[derive(Serialize)]
struct PcrSummary {
    method: String,
    evaluated: usize,
    excluded_empty: Vec<usize>,
    exceeded_selection: Vec<usize>,
}

#[derive(Serialize)]
struct EvaluationOutput {
    curves: Vec<EvaluationCurve>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    good_explanation: Vec<GoodExplanationSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pcr: Vec<PcrSummary>,
}

fn cmd_evaluate(a: &EvaluateArgs, out_dir: &Path) -> CliResult<()> {
    let base = a.explainer.config(a.seed);
    base.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let methods: Vec<Method> = a
        .methods
        .iter()
        .map(|m| Method::parse(m.as_str(), base, a.seed).map_err(|e| CliError::Usage(e.to_string())))
        .collect::<CliResult<_>>()?;
    let l = load(&a.model, &a.data)?;
    let mut out = EvaluationOutput {
        curves: Vec::new(),
        good_explanation: Vec::new(),
        pcr: Vec::new(),
    };
    match a.mode {
        ModeName::GoodExplanation => {
            let path = a
                .attacks
                .as_ref()
                .ok_or_else(|| CliError::Usage("--mode good-explanation needs --attacks".into()))?;
            let file = File::open(path).map_err(runtime(&path.display().to_string()))?;
            let records = read_jsonl(BufReader::new(file)).map_err(runtime(&path.display().to_string()))?;
            if records.is_empty() {
                return Err(CliError::Runtime(format!("{}: no adversarial samples", path.display())));
            }
            let advs = records
                .iter()
                .map(|r| r.materialize(&l.data))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            for m in &methods {
                let reports = advs
                    .par_iter()
                    .enumerate()
                    .map(|(i, adv)| {
                        m.explain(&*l.model, &adv.sample(), i as u64)
                            .map_err(|e| format!("adversarial sample {i} (base {:?}): {e}", adv.base_id))
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(CliError::Runtime)?;
                let pairs: Vec<_> = advs.iter().zip(&reports).collect();
                let curve = good_explanation_curve(&pairs, &a.thresholds, m.name())
                    .map_err(|e| CliError::Usage(e.to_string()))?;
                for &t in &a.thresholds {
                    let g = good_explanation_rate(&pairs, t).map_err(runtime("good explanation"))?;
                    out.good_explanation.push(GoodExplanationSummary {
                        method: m.name().into(),
                        threshold: t,
                        rate: g.rate,
                        at_least_one_rate: g.at_least_one_rate,
                        counted: g.counted,
                        excluded_empty: g.excluded_empty,
                    });
                }
                out.curves.push(curve);
            }
        }
        mode => {
            let mode = if mode == ModeName::Deduction {
                EvalMode::Deduction
            } else {
                EvalMode::Augmentation
            };
            let kf: Vec<usize> = a.ks.clone();
            if kf.windows(2).any(|w| w[1] <= w[0]) || (mode == EvalMode::Deduction && kf.first() == Some(&0)) {
                return Err(CliError::Usage("--ks must be strictly increasing (and >= 1 for deduction)".into()));
            }
            let data = select(&l, &a.select)?;
            for m in &methods {
                let r = pcr_curve(&*l.model, &data, m, mode, &a.ks).map_err(runtime(m.name()))?;
                out.pcr.push(PcrSummary {
                    method: m.name().into(),
                    evaluated: r.evaluated,
                    excluded_empty: r.excluded_empty,
                    exceeded_selection: r.exceeded_selection,
                });
                out.curves.push(r.curve);
            }
        }
    }
    let csv_path = out_dir.join(a.out.with_extension("csv"));
    let w = create(&csv_path)?;
    write_curves_csv(w, &out.curves).map_err(runtime(&csv_path.display().to_string()))?;
    write_json(&out_dir.join(a.out.with_extension("json")), &out)?;
    for c in &out.curves {
        let v: Vec<String> = c.points.iter().map(|p| format!("{}:{:.3}", p.parameter, p.value)).collect();
        eprintln!("{} {}: {}", c.mode, c.method, v.join(" "));
    }
    Ok(())
}
