//! `wpt` command-line frontend: one subcommand per pipeline stage.
//!
//! Exit codes: 0 success, 2 usage or invalid input, 3 I/O failure, 4 empty
//! result, 5 incompatible model file. Every command that writes a file also
//! writes `<out>.manifest.json` recording the arguments and resolved
//! configuration needed to reproduce it.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dataset::{self, Dataset, DatasetError};
use crate::eval::{self, EvalError, EvalReport, ModelRecipe};
use crate::gbrt::{self, GbrtError, GbrtGrid, GbrtModel, GbrtParams};
use crate::mlp::{self, MlpArchitecture, MlpError, MlpModel, Optimizer, TrainConfig};
use crate::outlier::{self, DbscanParams, OutlierError};
use crate::synth::{self, GeneratorConfig, SynthError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_EMPTY: i32 = 4;
pub const EXIT_MODEL: i32 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        CliError::new(EXIT_USAGE, message)
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::new(EXIT_IO, format!("{}: {e}", path.display()))
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io(_) => CliError::new(EXIT_IO, e.to_string()),
            DatasetError::Csv(ref c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => {
                CliError::new(EXIT_IO, e.to_string())
            }
            DatasetError::EmptyDataset => CliError::new(EXIT_EMPTY, e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<OutlierError> for CliError {
    fn from(e: OutlierError) -> Self {
        match e {
            OutlierError::AllSessionsRejected => CliError::new(EXIT_EMPTY, e.to_string()),
            OutlierError::Dataset(d) => d.into(),
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<GbrtError> for CliError {
    fn from(e: GbrtError) -> Self {
        match e {
            GbrtError::EmptyDataset(_) => CliError::new(EXIT_EMPTY, e.to_string()),
            GbrtError::Eval(inner) => (*inner).into(),
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<MlpError> for CliError {
    fn from(e: MlpError) -> Self {
        match e {
            MlpError::EmptyDataset { .. } => CliError::new(EXIT_EMPTY, e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::usage(e.to_string())
    }
}

/// Formats with 9 significant digits, trailing zeros trimmed.
pub fn sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..9).contains(&exp) {
        return format!("{x:.8e}");
    }
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gbrt,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Parser)]
#[command(name = "wpt", version, about = "Received-energy estimation for wireless charging sessions")]
pub struct Cli {
    /// Seed for every random choice the command makes.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Input file.
    #[arg(long = "in", global = true)]
    pub input: Option<PathBuf>,
    /// Primary output file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic monitoring sessions as CSV.
    Generate(GenerateArgs),
    /// Validate a monitoring CSV and write every training point.
    Ingest,
    /// Drop anomalous sessions with DBSCAN and write the cleaned points.
    Clean(CleanArgs),
    /// Fit a model on a training-point CSV and save it as JSON.
    Train(TrainArgs),
    /// Cross-validate GBRT and MLP on one shared fold split.
    Evaluate(EvaluateArgs),
    /// Predict received energy (Ah) with a saved model.
    Predict(PredictArgs),
    /// Summarize an evaluation report as JSON or box-plot CSV.
    Report,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 1.5, 2.0])]
    pub distances: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub sessions_per_distance: usize,
    #[arg(long, default_value_t = 30)]
    pub duration_min: usize,
    #[arg(long, default_value_t = 1)]
    pub mt_min: usize,
    #[arg(long, default_value_t = 10.0)]
    pub base_rate: f64,
    #[arg(long, default_value_t = 0.8)]
    pub decay_beta: f64,
    #[arg(long, default_value_t = 2.0)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 6)]
    pub anomalies: usize,
    #[arg(long, default_value_t = 400.0)]
    pub spike: f64,
}

#[derive(Debug, Args)]
pub struct CleanArgs {
    #[arg(long, default_value_t = 0.9)]
    pub eps: f64,
    #[arg(long, default_value_t = 3)]
    pub min_pts: usize,
    /// Cleaning report path; defaults to `<out>.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GbrtFlags {
    #[arg(long, default_value_t = 100)]
    pub rounds: usize,
    #[arg(long, default_value_t = 0.3)]
    pub eta: f64,
    #[arg(long, default_value_t = 3)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub min_child_weight: f64,
}

impl GbrtFlags {
    fn params(&self) -> GbrtParams {
        GbrtParams {
            n_rounds: self.rounds,
            eta: self.eta,
            max_depth: self.max_depth,
            lambda: self.lambda,
            gamma: self.gamma,
            min_child_weight: self.min_child_weight,
        }
    }
}

#[derive(Debug, Args)]
pub struct MlpFlags {
    /// Widths of the three hidden layers.
    #[arg(long, value_delimiter = ',', num_args = 1, default_values_t = vec![32, 32, 32])]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, value_enum, default_value_t = OptimizerKind::Adam)]
    pub optimizer: OptimizerKind,
    #[arg(long)]
    pub no_shuffle: bool,
}

impl MlpFlags {
    fn recipe(&self, seed: u64) -> Result<(MlpArchitecture, TrainConfig), CliError> {
        let widths: [usize; 3] = self
            .hidden
            .as_slice()
            .try_into()
            .map_err(|_| CliError::usage("--hidden needs exactly three widths"))?;
        let arch = MlpArchitecture::new(widths)?;
        let config = TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            optimizer: match self.optimizer {
                OptimizerKind::Adam => Optimizer::default(),
                OptimizerKind::Sgd => Optimizer::Sgd,
            },
            seed,
            shuffle: !self.no_shuffle,
        };
        config.validate()?;
        Ok((arch, config))
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub kind: ModelKind,
    /// Grid-search GBRT hyperparameters: `default` or a JSON grid file.
    #[arg(long)]
    pub grid: Option<String>,
    /// Folds for grid search.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[command(flatten)]
    pub gbrt: GbrtFlags,
    #[command(flatten)]
    pub mlp: MlpFlags,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Box-plot CSV path; defaults to `<out>.boxplot.csv`.
    #[arg(long)]
    pub boxplot: Option<PathBuf>,
    #[command(flatten)]
    pub gbrt: GbrtFlags,
    #[command(flatten)]
    pub mlp: MlpFlags,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub distance: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub duration: f64,
}

/// Written next to each command's primary output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, verbatim.
    pub args: Vec<String>,
    pub config: Value,
    pub seed: u64,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub wall_clock_ms: u128,
}

/// A saved model of either family, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SavedModel {
    Gbrt(GbrtModel),
    Mlp(MlpModel),
}

impl SavedModel {
    pub fn predict(&self, distance_cm: f64, duration_min: f64) -> f64 {
        match self {
            SavedModel::Gbrt(m) => gbrt::predict_gbrt(m, distance_cm, duration_min),
            SavedModel::Mlp(m) => m.predict([distance_cm, duration_min]),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::new(EXIT_MODEL, format!("{}: not a model file: {e}", path.display())))?;
        let kind = value.get("kind").and_then(Value::as_str).unwrap_or("");
        let expected = match kind {
            "gbrt" => gbrt::MODEL_VERSION,
            "mlp" => mlp::MODEL_VERSION,
            other => {
                return Err(CliError::new(EXIT_MODEL, format!("{}: unknown model kind {other:?}", path.display())))
            }
        };
        let version = value.get("version").and_then(Value::as_u64);
        if version != Some(u64::from(expected)) {
            return Err(CliError::new(
                EXIT_MODEL,
                format!("{}: model version {version:?}, this build reads {expected}", path.display()),
            ));
        }
        let model: SavedModel = serde_json::from_value(value)
            .map_err(|e| CliError::new(EXIT_MODEL, format!("{}: {e}", path.display())))?;
        if let SavedModel::Mlp(m) = &model {
            m.validate().map_err(|e| CliError::new(EXIT_MODEL, e.to_string()))?;
        }
        Ok(model)
    }
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a PathBuf, CliError> {
    p.as_ref().ok_or_else(|| CliError::usage(format!("{flag} is required")))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

fn read_sessions(path: &Path) -> Result<Vec<dataset::Session>, CliError> {
    dataset::parse_monitoring_csv(open(path)?).map_err(|e| {
        let e: CliError = e.into();
        CliError::new(e.code, format!("{}: {}", path.display(), e.message))
    })
}

fn read_points(path: &Path) -> Result<Dataset, CliError> {
    let ds = dataset::parse_points_csv(open(path)?).map_err(|e| {
        let e: CliError = e.into();
        CliError::new(e.code, format!("{}: {}", path.display(), e.message))
    })?;
    if ds.is_empty() {
        return Err(CliError::new(EXIT_EMPTY, format!("{}: no training points", path.display())));
    }
    Ok(ds)
}

fn write_points(path: &Path, ds: &Dataset) -> Result<(), CliError> {
    let mut w = create(path)?;
    dataset::write_points_csv(&ds.points, &mut w, sig9)?;
    w.flush().map_err(|e| CliError::io(path, e))
}

struct Outcome {
    config: Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    /// Where the manifest goes; `None` for commands that only print.
    manifest_for: Option<PathBuf>,
}

/// Parses `argv` (program name first) and runs the command, returning the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let started = Instant::now();
    match execute(&cli) {
        Ok(outcome) => {
            if let Some(primary) = outcome.manifest_for {
                let manifest = RunManifest {
                    command: command_name(&cli.command).to_string(),
                    args: argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect(),
                    config: outcome.config,
                    seed: cli.seed,
                    inputs: outcome.inputs.iter().map(|p| p.display().to_string()).collect(),
                    outputs: outcome.outputs.iter().map(|p| p.display().to_string()).collect(),
                    tool_version: env!("CARGO_PKG_VERSION").to_string(),
                    wall_clock_ms: started.elapsed().as_millis(),
                };
                if let Err(e) = write_json(&sibling(&primary, ".manifest.json"), &manifest) {
                    eprintln!("error: {}", e.message);
                    return e.code;
                }
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Generate(_) => "generate",
        Command::Ingest => "ingest",
        Command::Clean(_) => "clean",
        Command::Train(_) => "train",
        Command::Evaluate(_) => "evaluate",
        Command::Predict(_) => "predict",
        Command::Report => "report",
    }
}

fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(cli, a),
        Command::Ingest => cmd_ingest(cli),
        Command::Clean(a) => cmd_clean(cli, a),
        Command::Train(a) => cmd_train(cli, a),
        Command::Evaluate(a) => cmd_evaluate(cli, a),
        Command::Predict(a) => cmd_predict(cli, a),
        Command::Report => cmd_report(cli),
    }
}

fn cmd_generate(cli: &Cli, a: &GenerateArgs) -> Result<Outcome, CliError> {
    let out = require(&cli.out, "--out")?;
    let config = GeneratorConfig {
        distances_cm: a.distances.clone(),
        sessions_per_distance: a.sessions_per_distance,
        duration_min: a.duration_min,
        mt_min: a.mt_min,
        base_rate_mah_per_min: a.base_rate,
        decay_beta: a.decay_beta,
        noise_sigma_mah: a.noise_sigma,
        anomaly_session_count: a.anomalies,
        anomaly_spike_mah: a.spike,
        seed: cli.seed,
    };
    let sessions = synth::generate(&config)?;
    let mut w = create(out)?;
    dataset::write_monitoring_csv(&sessions, &mut w)?;
    w.flush().map_err(|e| CliError::io(out, e))?;
    log::info!("wrote {} sessions to {}", sessions.len(), out.display());
    Ok(Outcome {
        config: json!({
            "generator": config,
            "anomalous_sessions": synth::anomalous_sessions(&config),
        }),
        inputs: vec![],
        outputs: vec![out.clone()],
        manifest_for: Some(out.clone()),
    })
}

fn cmd_ingest(cli: &Cli) -> Result<Outcome, CliError> {
    let input = require(&cli.input, "--in")?;
    let out = require(&cli.out, "--out")?;
    let sessions = read_sessions(input)?;
    let ds = Dataset::from_sessions(&sessions)?;
    write_points(out, &ds)?;
    let summary = json!({
        "sessions": sessions.len(),
        "points": ds.len(),
        "negative_increase_points": ds.flagged_count(),
    });
    println!("{summary}");
    Ok(Outcome {
        config: summary,
        inputs: vec![input.clone()],
        outputs: vec![out.clone()],
        manifest_for: Some(out.clone()),
    })
}

fn cmd_clean(cli: &Cli, a: &CleanArgs) -> Result<Outcome, CliError> {
    let input = require(&cli.input, "--in")?;
    let out = require(&cli.out, "--out")?;
    let params = DbscanParams {
        eps: a.eps,
        min_pts: a.min_pts,
    };
    params.validate()?;
    let sessions = read_sessions(input)?;
    let cleaned = outlier::clean_dataset(&sessions, params)?;
    write_points(out, &cleaned.dataset)?;
    let report_path = a.report.clone().unwrap_or_else(|| sibling(out, ".report.json"));
    let report = cleaned.report(params);
    write_json(&report_path, &report)?;
    println!(
        "kept {} sessions ({} points), rejected {}",
        report.kept.len(),
        report.kept_points,
        report.rejected.len()
    );
    Ok(Outcome {
        config: json!({ "dbscan": params, "rejected": report.rejected }),
        inputs: vec![input.clone()],
        outputs: vec![out.clone(), report_path],
        manifest_for: Some(out.clone()),
    })
}

fn load_grid(spec: &str) -> Result<GbrtGrid, CliError> {
    if spec == "default" {
        return Ok(GbrtGrid::standard());
    }
    let path = Path::new(spec);
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{spec}: bad grid: {e}")))
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<Outcome, CliError> {
    let input = require(&cli.input, "--in")?;
    let out = require(&cli.out, "--out")?;
    let data = read_points(input)?;
    let (model, config) = match a.kind {
        ModelKind::Gbrt => {
            let (params, search) = match &a.grid {
                Some(spec) => {
                    let grid = load_grid(spec)?;
                    let outcome = gbrt::grid_search(&data, &grid, a.k, cli.seed)?;
                    let summary: Vec<Value> = outcome
                        .results
                        .iter()
                        .map(|r| json!({ "params": r.params, "mean_rmse": r.mean_rmse }))
                        .collect();
                    (outcome.best, json!({ "grid": grid, "k": a.k, "results": summary }))
                }
                None => (a.gbrt.params(), Value::Null),
            };
            let model = gbrt::fit_gbrt(&data, &params)?;
            (SavedModel::Gbrt(model), json!({ "kind": "gbrt", "params": params, "grid_search": search }))
        }
        ModelKind::Mlp => {
            let (arch, cfg) = a.mlp.recipe(cli.seed)?;
            let trained = mlp::train(&data, &arch, &cfg)?;
            let final_loss = trained.loss_history.last().copied();
            (
                SavedModel::Mlp(trained.model),
                json!({ "kind": "mlp", "architecture": arch, "train_config": cfg, "final_train_mse": final_loss }),
            )
        }
    };
    write_json(out, &model)?;
    Ok(Outcome {
        config,
        inputs: vec![input.clone()],
        outputs: vec![out.clone()],
        manifest_for: Some(out.clone()),
    })
}

fn cmd_evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<Outcome, CliError> {
    let input = require(&cli.input, "--in")?;
    let out = require(&cli.out, "--out")?;
    let data = read_points(input)?;
    let gbrt_params = a.gbrt.params();
    gbrt_params.validate()?;
    let (architecture, config) = a.mlp.recipe(cli.seed)?;
    let recipes = [
        ModelRecipe::Gbrt(gbrt_params),
        ModelRecipe::Mlp { architecture, config },
    ];
    let report = eval::compare(&data, &recipes, a.k, cli.seed)?;
    write_json(out, &report)?;
    let boxplot = a.boxplot.clone().unwrap_or_else(|| sibling(out, ".boxplot.csv"));
    let mut w = create(&boxplot)?;
    eval::write_boxplot_csv(&report, &mut w, sig9).map_err(|e| CliError::io(&boxplot, e))?;
    w.flush().map_err(|e| CliError::io(&boxplot, e))?;
    for m in &report.models {
        println!("{}: mean rmse {} Ah, median {} Ah", m.model, sig9(m.mean_rmse), sig9(m.boxplot.median));
    }
    println!("winner by median: {}", report.winner_by_median);
    Ok(Outcome {
        config: json!({ "k": a.k, "recipes": recipes }),
        inputs: vec![input.clone()],
        outputs: vec![out.clone(), boxplot],
        manifest_for: Some(out.clone()),
    })
}

fn cmd_predict(cli: &Cli, a: &PredictArgs) -> Result<Outcome, CliError> {
    if !(a.distance.is_finite() && a.duration.is_finite()) {
        return Err(CliError::usage("--distance and --duration must be finite"));
    }
    let model = SavedModel::load(&a.model)?;
    let value = model.predict(a.distance, a.duration);
    let line = format!("{}\n", sig9(value));
    print!("{line}");
    if let Some(out) = &cli.out {
        fs::write(out, &line).map_err(|e| CliError::io(out, e))?;
    }
    Ok(Outcome {
        config: json!({ "distance_cm": a.distance, "duration_min": a.duration }),
        inputs: vec![a.model.clone()],
        outputs: cli.out.iter().cloned().collect(),
        manifest_for: cli.out.clone(),
    })
}

fn cmd_report(cli: &Cli) -> Result<Outcome, CliError> {
    let input = require(&cli.input, "--in")?;
    let text = fs::read_to_string(input).map_err(|e| CliError::io(input, e))?;
    let report: EvalReport =
        serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", input.display())))?;
    if report.version != eval::REPORT_VERSION {
        return Err(CliError::new(EXIT_MODEL, format!("report version {} unsupported", report.version)));
    }
    let mut buf = Vec::new();
    match cli.format {
        Format::Csv => eval::write_boxplot_csv(&report, &mut buf, sig9).map_err(|e| CliError::io(input, e))?,
        Format::Json => {
            let models: Vec<Value> = report
                .models
                .iter()
                .map(|m| {
                    json!({
                        "model": m.model,
                        "mean_rmse": sig9(m.mean_rmse),
                        "median_rmse": sig9(m.boxplot.median),
                        "q1": sig9(m.boxplot.q1),
                        "q3": sig9(m.boxplot.q3),
                        "fold_rmse": m.fold_rmse.iter().map(|&v| sig9(v)).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let summary = json!({
                "k": report.k,
                "n_points": report.n_points,
                "models": models,
                "winner_by_median": report.winner_by_median,
            });
            buf = serde_json::to_vec_pretty(&summary).map_err(|e| CliError::io(input, e))?;
            buf.push(b'\n');
        }
    }
    match &cli.out {
        Some(out) => fs::write(out, &buf).map_err(|e| CliError::io(out, e))?,
        None => std::io::stdout()
            .write_all(&buf)
            .map_err(|e| CliError::new(EXIT_IO, e.to_string()))?,
    }
    Ok(Outcome {
        config: json!({ "format": cli.format }),
        inputs: vec![input.clone()],
        outputs: cli.out.iter().cloned().collect(),
        manifest_for: cli.out.clone(),
    })
}
