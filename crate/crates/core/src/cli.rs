//! Command-line surface.
//!
//! Subcommands: `calibrate`, `stream`, `eval`, `synth`, `ablate`, `convert`.
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
//! On failure the last line on standard error is machine-readable JSON:
//! `{"error":"usage|data|internal","message":"..."}`.
//!
//! Every command loads an optional JSON run config (defaults apply when
//! absent), merges command-line overrides, and emits the fully-resolved
//! config plus its SHA-256 hash alongside its outputs — inside report JSON,
//! as the header line of JSONL logs, and as a `#` comment line plus sibling
//! `.config.json` for CSV outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::detector::{calibrate_threshold, DecisionRecord, DetectorConfig, Engine, Margin};
use crate::error::{Error, Result};
use crate::geometry::FeatureVector;
use crate::io::config::{config_hash, RunConfig};
use crate::io::csv as csvio;
use crate::io::oddf::{self, SampleLabel};
use crate::metrics::{auroc, fpr_at_tpr, DatasetMetrics, EvalReport, ScoredPopulation};
use crate::protocols::{
    algorithm2_sweep, boundary_sweep, run_clusters_comparison, run_protocol, Algorithm2Params,
    BoundarySweepParams, ClustersParams, DatasetRef, ProtocolKind, ProtocolSpec,
};
use crate::scoring::{Combinator, DistributionLabel};

#[derive(Parser, Debug)]
#[command(
    name = "oddstream",
    version,
    about = "Streaming OOD detection with an adaptive k-NN memory bank"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Calibrate the decision threshold on ID validation features.
    Calibrate(CalibrateArgs),
    /// Stream test features through the engine, logging every decision.
    Stream(StreamArgs),
    /// Run a streaming evaluation protocol over several datasets.
    Eval(EvalArgs),
    /// Run the synthetic Gaussian suites, emitting CSV plot data.
    Synth(SynthArgs),
    /// Sweep one parameter over a grid, emitting CSV.
    Ablate(AblateArgs),
    /// Convert between the CSV and ODDF feature formats.
    Convert(ConvertArgs),
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// ID training features (ODDF) used to build the bank.
    #[arg(long)]
    train: PathBuf,
    /// ID validation features (ODDF) scored for the threshold.
    #[arg(long)]
    val: PathBuf,
    /// JSON run config; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output JSON threshold report.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct StreamArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: PathBuf,
    /// Test stream features (ODDF); labels, when present, feed metrics only.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSONL decision log output.
    #[arg(long)]
    log: PathBuf,
    /// Metrics JSON output.
    #[arg(long)]
    metrics: PathBuf,
    /// Override the config's adapt flag.
    #[arg(long, value_enum)]
    adapt: Option<OnOff>,
    /// Include mean decide-time microseconds in the metrics JSON (wall
    /// clock, so it breaks byte-for-byte reproducibility).
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Which streaming protocol to run.
    #[arg(long, value_enum)]
    protocol: ProtocolArg,
    /// Comma-separated ODDF dataset paths, streamed in the listed order.
    #[arg(long, value_delimiter = ',', required = true)]
    datasets: Vec<PathBuf>,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shuffle seed override for the mixture protocols.
    #[arg(long)]
    seed: Option<u64>,
    /// Optional JSONL decision log output.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Metrics JSON output.
    #[arg(long)]
    metrics: PathBuf,
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_enum)]
    preset: SynthPreset,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path; a sibling `.config.json` is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AblateArgs {
    /// Which parameter to sweep.
    #[arg(long, value_enum)]
    sweep: SweepParam,
    /// Comma-separated grid values (combinator names, true/false, or
    /// numbers; "inf" is accepted for gamma).
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    /// Optional feature files; when all three are given the sweep runs on
    /// them, otherwise on the synthetic clusters setup.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ConvertArgs {
    #[arg(long, value_enum)]
    from: FileFormat,
    #[arg(long, value_enum)]
    to: FileFormat,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProtocolArg {
    Single,
    Sequential,
    OodMixture,
    IdOodMixture,
}

impl From<ProtocolArg> for ProtocolKind {
    fn from(value: ProtocolArg) -> Self {
        match value {
            ProtocolArg::Single => ProtocolKind::Single,
            ProtocolArg::Sequential => ProtocolKind::Sequential,
            ProtocolArg::OodMixture => ProtocolKind::OodMixture,
            ProtocolArg::IdOodMixture => ProtocolKind::IdOodMixture,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SynthPreset {
    /// 1-D boundary-accuracy sweep, analytic + Monte-Carlo.
    Fig1,
    /// FPR versus accessible OOD samples, overlapping distributions.
    Fig3,
    /// FPR versus accessible OOD samples, well-separated distributions.
    Fig4,
    /// Overlapping d-dimensional clusters: vanilla versus adaptive.
    Clusters,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SweepParam {
    K,
    Gamma,
    Kappa,
    Combinator,
    Normalize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FileFormat {
    Csv,
    Oddf,
}

/// Failure classified for the exit code.
enum CliError {
    Usage(String),
    Data(Error),
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Internal(_) => "internal",
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => m.clone(),
            CliError::Data(e) => e.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e)
    }
}

/// Entry point for the binary: parses `std::env::args`.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

/// Testable entry point.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let err = CliError::Usage(e.to_string());
            eprint!("{e}");
            emit_error_line(&err);
            return err.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            emit_error_line(&err);
            err.exit_code()
        }
    }
}

fn emit_error_line(err: &CliError) {
    let line = serde_json::json!({
        "error": err.kind(),
        "message": err.message(),
    });
    eprintln!("{line}");
}

fn dispatch(command: Command) -> std::result::Result<(), CliError> {
    match command {
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Stream(args) => cmd_stream(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Convert(args) => cmd_convert(args),
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn read_dataset(path: &Path) -> Result<(Vec<FeatureVector>, Option<Vec<SampleLabel>>)> {
    oddf::read_features(path)
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Unlabeled rows evaluate as OOD: the protocols stream OOD sets by
/// default, and only explicit `id` labels mark stream samples as ID.
fn truth_labels(labels: Option<Vec<SampleLabel>>, count: usize) -> Vec<DistributionLabel> {
    match labels {
        None => vec![DistributionLabel::Ood; count],
        Some(ls) => ls
            .into_iter()
            .map(|l| match l {
                SampleLabel::Id => DistributionLabel::Id,
                SampleLabel::Ood | SampleLabel::Unlabeled => DistributionLabel::Ood,
            })
            .collect(),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> std::result::Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Internal(format!("serializing output: {e}")))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::Data(Error::Io(e)))?;
    Ok(())
}

/// JSONL log: one header line `{"header":{...}}`, then one record per line.
fn write_jsonl_log(
    path: &Path,
    hash: &str,
    seed: u64,
    lambda: f64,
    records: &[DecisionRecord],
) -> std::result::Result<(), CliError> {
    let mut out = String::new();
    let header = serde_json::json!({
        "header": { "config_hash": hash, "seed": seed, "lambda": lambda }
    });
    out.push_str(&header.to_string());
    out.push('\n');
    for rec in records {
        out.push_str(
            &serde_json::to_string(rec)
                .map_err(|e| CliError::Internal(format!("serializing record: {e}")))?,
        );
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| CliError::Data(Error::Io(e)))?;
    Ok(())
}

/// CSV artifact: `# config_hash=...` comment, header row, data rows, plus a
/// sibling `<out>.config.json` carrying the resolved config.
fn write_csv_artifact(
    path: &Path,
    config: &RunConfig,
    header: &[&str],
    rows: Vec<Vec<String>>,
) -> std::result::Result<(), CliError> {
    let hash = config_hash(config);
    let mut out = format!("# config_hash={hash}\n");
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| CliError::Data(Error::Io(e)))?;
    let sidecar = path.with_extension("config.json");
    write_json(&sidecar, &config.resolved())?;
    Ok(())
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

#[derive(Serialize)]
struct ThresholdReport {
    config_hash: String,
    lambda: f64,
    achieved_tpr: f64,
    n_train: usize,
    n_val: usize,
    config: RunConfig,
}

/// Builds an engine with adaptation off and a placeholder threshold, ready
/// for calibration.
fn build_uncalibrated_engine(config: &RunConfig, train: Vec<FeatureVector>) -> Result<Engine> {
    let settings = config.detector;
    let bank = crate::bank::MemoryBank::init(train, settings.normalize)?;
    let detector = DetectorConfig {
        lambda: settings.lambda.unwrap_or(0.0).min(0.0),
        adapt: false,
        ..settings.to_detector_config(0.0)
    };
    Engine::new(bank, detector)
}

fn cmd_calibrate(args: CalibrateArgs) -> std::result::Result<(), CliError> {
    let config = load_config(&args.config)?;
    let (train, _) = read_dataset(&args.train)?;
    let (val, _) = read_dataset(&args.val)?;
    let n_train = train.len();
    let n_val = val.len();
    if n_val == 0 {
        return Err(CliError::Data(Error::EmptyDataset {
            name: dataset_name(&args.val),
        }));
    }

    let engine = build_uncalibrated_engine(&config, train)?;
    let scores = engine.batch_scores(&val)?;
    let lambda = calibrate_threshold(&scores, config.tpr_target())?;
    let achieved_tpr = scores.iter().filter(|s| **s >= lambda).count() as f64 / n_val as f64;

    write_json(
        &args.out,
        &ThresholdReport {
            config_hash: config_hash(&config),
            lambda,
            achieved_tpr,
            n_train,
            n_val,
            config: config.resolved(),
        },
    )
}

#[derive(Serialize)]
struct StreamMetricsDoc {
    config_hash: String,
    seed: u64,
    lambda: f64,
    #[serde(flatten)]
    report: EvalReport,
    bank_size_initial: usize,
    bank_size_final: usize,
    augmented_id: usize,
    augmented_ood: usize,
    config: RunConfig,
}

fn cmd_stream(args: StreamArgs) -> std::result::Result<(), CliError> {
    let mut config = load_config(&args.config)?;
    if let Some(adapt) = args.adapt {
        config.detector.adapt = matches!(adapt, OnOff::On);
    }
    let (train, _) = read_dataset(&args.train)?;
    let (val, _) = read_dataset(&args.val)?;
    let (input, input_labels) = read_dataset(&args.input)?;
    if input.is_empty() {
        return Err(CliError::Data(Error::EmptyDataset {
            name: dataset_name(&args.input),
        }));
    }
    let truth = truth_labels(input_labels, input.len());
    let bank_size_initial = train.len();

    let mut engine = build_uncalibrated_engine(&config, train)?;
    let val_scores = engine.batch_scores(&val)?;
    let lambda = match config.detector.lambda {
        Some(l) => l,
        None => calibrate_threshold(&val_scores, config.tpr_target())?,
    };
    engine.set_lambda(lambda)?;
    engine.set_adapt(config.detector.adapt)?;

    let (records, stats) = engine.process_stream_with_stats(&input)?;

    let mut id_scores = Vec::new();
    let mut ood_scores = Vec::new();
    for (rec, t) in records.iter().zip(&truth) {
        match t {
            DistributionLabel::Id => id_scores.push(rec.score),
            DistributionLabel::Ood => ood_scores.push(rec.score),
        }
    }
    let id_side = if id_scores.is_empty() {
        val_scores.clone()
    } else {
        id_scores
    };
    let pop = ScoredPopulation::new(id_side, ood_scores).map_err(CliError::Data)?;
    let fpr95 = fpr_at_tpr(&pop, config.tpr_target()).map_err(CliError::Data)?;
    let auroc_value = auroc(&pop).map_err(CliError::Data)?;
    let id_reeval_accuracy = Some(engine.reevaluate_id(&val)?);
    let (_, augmented_id, augmented_ood) = engine.bank().provenance_counts();

    let hash = config_hash(&config);
    write_jsonl_log(&args.log, &hash, config.seed, lambda, &records)?;

    let mut per_dataset = BTreeMap::new();
    per_dataset.insert(
        dataset_name(&args.input),
        DatasetMetrics {
            fpr95,
            auroc: auroc_value,
        },
    );
    write_json(
        &args.metrics,
        &StreamMetricsDoc {
            config_hash: hash,
            seed: config.seed,
            lambda,
            report: EvalReport {
                fpr95,
                auroc: auroc_value,
                id_reeval_accuracy,
                per_dataset,
                mean_inference_micros: args.timing.then_some(stats.mean_decide_micros),
            },
            bank_size_initial,
            bank_size_final: engine.bank().len(),
            augmented_id,
            augmented_ood,
            config: config.resolved(),
        },
    )
}

#[derive(Serialize)]
struct EvalMetricsDoc {
    config_hash: String,
    seed: u64,
    lambda: f64,
    protocol: String,
    #[serde(flatten)]
    report: EvalReport,
    /// Metrics from re-scoring the stream against the final bank.
    rescored_fpr95: f64,
    rescored_auroc: f64,
    bank_size_final: usize,
    config: RunConfig,
}

fn cmd_eval(args: EvalArgs) -> std::result::Result<(), CliError> {
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let (train, _) = read_dataset(&args.train)?;
    let (val, _) = read_dataset(&args.val)?;
    let id_train = DatasetRef::all_id("id-train", train)?;
    let id_val = DatasetRef::all_id("id-val", val)?;

    let mut datasets = Vec::with_capacity(args.datasets.len());
    for path in &args.datasets {
        let (features, labels) = read_dataset(path)?;
        let truth = truth_labels(labels, features.len());
        datasets.push(DatasetRef::new(dataset_name(path), features, truth)?);
    }

    let kind: ProtocolKind = args.protocol.into();
    let spec = ProtocolSpec {
        kind,
        datasets,
        shuffle_seed: config.seed,
    };
    let detector = config.detector.to_detector_config(0.0);
    let mut outcome = run_protocol(&spec, detector, &id_train, &id_val, config.tpr_target())?;
    if !args.timing {
        outcome.report.mean_inference_micros = None;
    }

    let hash = config_hash(&config);
    if let Some(log) = &args.log {
        write_jsonl_log(log, &hash, config.seed, outcome.lambda, &outcome.records)?;
    }
    write_json(
        &args.metrics,
        &EvalMetricsDoc {
            config_hash: hash,
            seed: config.seed,
            lambda: outcome.lambda,
            protocol: match kind {
                ProtocolKind::Single => "single".into(),
                ProtocolKind::Sequential => "sequential".into(),
                ProtocolKind::OodMixture => "ood-mixture".into(),
                ProtocolKind::IdOodMixture => "id-ood-mixture".into(),
            },
            report: outcome.report,
            rescored_fpr95: outcome.rescored.fpr95,
            rescored_auroc: outcome.rescored.auroc,
            bank_size_final: outcome.final_bank_size,
            config: config.resolved(),
        },
    )
}

fn clusters_params(config: &RunConfig, seed: u64) -> ClustersParams {
    let synth = config.synth();
    ClustersParams {
        dim: synth.cluster_dim,
        id_std: synth.id_std,
        ood_mean: synth.cluster_ood_mean,
        ood_std: synth.cluster_ood_std,
        bank_count: synth.cluster_bank_count,
        val_count: synth.cluster_val_count,
        stream_count: synth.cluster_stream_count,
        seed,
        k: config.detector.k,
        gamma: config.detector.gamma,
        kappa: config.detector.kappa,
        combinator: config.detector.combinator,
        tpr_target: config.tpr_target(),
    }
}

fn cmd_synth(args: SynthArgs) -> std::result::Result<(), CliError> {
    let config = load_config(&args.config)?;
    let synth = config.synth();
    match args.preset {
        SynthPreset::Fig1 => {
            let points = boundary_sweep(&BoundarySweepParams {
                id_mean: synth.id_mean,
                id_std: synth.id_std,
                ood_mean: synth.ood_mean,
                ood_std: synth.ood_std,
                thresholds: synth.threshold_grid(),
                mc_draws: synth.mc_draws,
                mc_seeds: synth.mc_seeds,
                base_seed: config.seed,
            })?;
            let rows = points
                .iter()
                .map(|p| {
                    vec![
                        fmt_f64(p.threshold),
                        fmt_f64(p.id_acc),
                        fmt_f64(p.ood_acc),
                        fmt_f64(p.fpr),
                        fmt_f64(p.mc_id_acc_mean),
                        fmt_f64(p.mc_id_acc_se),
                        fmt_f64(p.mc_ood_acc_mean),
                        fmt_f64(p.mc_ood_acc_se),
                        fmt_f64(p.mc_fpr_mean),
                        fmt_f64(p.mc_fpr_se),
                    ]
                })
                .collect();
            write_csv_artifact(
                &args.out,
                &config,
                &[
                    "threshold",
                    "id_acc",
                    "ood_acc",
                    "fpr",
                    "mc_id_acc_mean",
                    "mc_id_acc_se",
                    "mc_ood_acc_mean",
                    "mc_ood_acc_se",
                    "mc_fpr_mean",
                    "mc_fpr_se",
                ],
                rows,
            )
        }
        SynthPreset::Fig3 | SynthPreset::Fig4 => {
            let ood_mean = match args.preset {
                SynthPreset::Fig4 => 10.0,
                _ => synth.ood_mean,
            };
            let base = Algorithm2Params {
                id_mean: vec![synth.id_mean],
                id_std: synth.id_std,
                ood_mean: vec![ood_mean],
                ood_std: synth.ood_std,
                id_count: synth.id_count,
                id_val_count: synth.val_count,
                ood_test_count: synth.ood_count,
                accessible_ood: 0,
                k: synth.k,
                kappa: synth.kappa,
                tpr_target: config.tpr_target(),
                repeats: synth.repeats,
                base_seed: config.seed,
            };
            let points = algorithm2_sweep(&base, &synth.m_values)?;
            let rows = points
                .iter()
                .map(|p| vec![p.m.to_string(), fmt_f64(p.mean_fpr), fmt_f64(p.std_err)])
                .collect();
            write_csv_artifact(&args.out, &config, &["m", "mean_fpr", "std_err"], rows)
        }
        SynthPreset::Clusters => {
            let mut rows = Vec::new();
            for s in 0..synth.cluster_seeds {
                let outcome =
                    run_clusters_comparison(&clusters_params(&config, config.seed.wrapping_add(s)))?;
                rows.push(vec![
                    s.to_string(),
                    fmt_f64(outcome.lambda),
                    fmt_f64(outcome.fpr95_vanilla),
                    fmt_f64(outcome.fpr95_adaptive),
                    fmt_f64(outcome.relative_reduction),
                    fmt_f64(outcome.id_reeval_adaptive),
                ]);
            }
            write_csv_artifact(
                &args.out,
                &config,
                &[
                    "seed",
                    "lambda",
                    "fpr95_vanilla",
                    "fpr95_adaptive",
                    "relative_reduction",
                    "id_reeval_adaptive",
                ],
                rows,
            )
        }
    }
}

/// One grid point of an ablation sweep.
enum SweepValue {
    K(usize),
    Gamma(Margin),
    Kappa(f64),
    Combinator(Combinator),
    Normalize(bool),
}

fn parse_sweep_values(
    sweep: SweepParam,
    raw: &[String],
) -> std::result::Result<Vec<SweepValue>, CliError> {
    raw.iter()
        .map(|token| {
            let token = token.trim();
            match sweep {
                SweepParam::K => token
                    .parse::<usize>()
                    .map(SweepValue::K)
                    .map_err(|e| CliError::Usage(format!("bad k value {token:?}: {e}"))),
                SweepParam::Gamma => {
                    if token == "inf" {
                        Ok(SweepValue::Gamma(Margin::Infinite))
                    } else {
                        token
                            .parse::<f64>()
                            .map(|g| SweepValue::Gamma(Margin::Finite(g)))
                            .map_err(|e| CliError::Usage(format!("bad gamma value {token:?}: {e}")))
                    }
                }
                SweepParam::Kappa => token
                    .parse::<f64>()
                    .map(SweepValue::Kappa)
                    .map_err(|e| CliError::Usage(format!("bad kappa value {token:?}: {e}"))),
                SweepParam::Combinator => match token {
                    "k-avg" => Ok(SweepValue::Combinator(Combinator::KAvg)),
                    "k-th" => Ok(SweepValue::Combinator(Combinator::KTh)),
                    "k-median" => Ok(SweepValue::Combinator(Combinator::KMedian)),
                    _ => Err(CliError::Usage(format!(
                        "bad combinator {token:?} (expected k-avg, k-th or k-median)"
                    ))),
                },
                SweepParam::Normalize => match token {
                    "true" | "on" => Ok(SweepValue::Normalize(true)),
                    "false" | "off" => Ok(SweepValue::Normalize(false)),
                    _ => Err(CliError::Usage(format!(
                        "bad normalize value {token:?} (expected true/false)"
                    ))),
                },
            }
        })
        .collect()
}

fn apply_sweep_value(config: &mut RunConfig, value: &SweepValue) -> String {
    match value {
        SweepValue::K(k) => {
            config.detector.k = *k;
            k.to_string()
        }
        SweepValue::Gamma(g) => {
            config.detector.gamma = *g;
            match g {
                Margin::Finite(v) => fmt_f64(*v),
                Margin::Infinite => "inf".into(),
            }
        }
        SweepValue::Kappa(v) => {
            config.detector.kappa = *v;
            fmt_f64(*v)
        }
        SweepValue::Combinator(c) => {
            config.detector.combinator = *c;
            match c {
                Combinator::KAvg => "k-avg".into(),
                Combinator::KTh => "k-th".into(),
                Combinator::KMedian => "k-median".into(),
            }
        }
        SweepValue::Normalize(b) => {
            config.detector.normalize = *b;
            b.to_string()
        }
    }
}

fn cmd_ablate(args: AblateArgs) -> std::result::Result<(), CliError> {
    let base_config = load_config(&args.config)?;
    let values = parse_sweep_values(args.sweep, &args.values)?;
    let param_name = match args.sweep {
        SweepParam::K => "k",
        SweepParam::Gamma => "gamma",
        SweepParam::Kappa => "kappa",
        SweepParam::Combinator => "combinator",
        SweepParam::Normalize => "normalize",
    };

    // Data source: feature files when all three are given, the synthetic
    // clusters setup otherwise.
    let file_data = match (&args.train, &args.val, &args.input) {
        (Some(t), Some(v), Some(i)) => {
            let (train, _) = read_dataset(t)?;
            let (val, _) = read_dataset(v)?;
            let (input, labels) = read_dataset(i)?;
            let truth = truth_labels(labels, input.len());
            Some((train, val, input, truth, dataset_name(i)))
        }
        (None, None, None) => None,
        _ => {
            return Err(CliError::Usage(
                "ablate needs either all of --train/--val/--input or none".into(),
            ));
        }
    };

    let mut rows = Vec::new();
    for value in &values {
        let mut config = base_config.clone();
        let value_text = apply_sweep_value(&mut config, value);
        let row = match &file_data {
            Some((train, val, input, truth, name)) => {
                let id_train = DatasetRef::all_id("id-train", train.clone())?;
                let id_val = DatasetRef::all_id("id-val", val.clone())?;
                let dataset = DatasetRef::new(name.clone(), input.clone(), truth.clone())?;
                let spec = ProtocolSpec {
                    kind: ProtocolKind::Single,
                    datasets: vec![dataset],
                    shuffle_seed: config.seed,
                };
                let detector = config.detector.to_detector_config(0.0);
                let outcome =
                    run_protocol(&spec, detector, &id_train, &id_val, config.tpr_target())?;
                vec![
                    param_name.to_string(),
                    value_text,
                    fmt_f64(outcome.lambda),
                    fmt_f64(outcome.report.fpr95),
                    fmt_f64(outcome.report.auroc),
                    fmt_f64(outcome.report.id_reeval_accuracy.unwrap_or(f64::NAN)),
                ]
            }
            None => {
                let outcome = run_clusters_comparison(&clusters_params(&config, config.seed))?;
                vec![
                    param_name.to_string(),
                    value_text,
                    fmt_f64(outcome.lambda),
                    fmt_f64(outcome.fpr95_adaptive),
                    fmt_f64(outcome.fpr95_vanilla),
                    fmt_f64(outcome.id_reeval_adaptive),
                ]
            }
        };
        rows.push(row);
    }

    let header: &[&str] = if file_data.is_some() {
        &[
            "param",
            "value",
            "lambda",
            "fpr95",
            "auroc",
            "id_reeval_accuracy",
        ]
    } else {
        &[
            "param",
            "value",
            "lambda",
            "fpr95_adaptive",
            "fpr95_vanilla",
            "id_reeval_accuracy",
        ]
    };
    write_csv_artifact(&args.out, &base_config, header, rows)
}

fn cmd_convert(args: ConvertArgs) -> std::result::Result<(), CliError> {
    let (vectors, labels) = match args.from {
        FileFormat::Csv => csvio::read_csv_features(&args.input)?,
        FileFormat::Oddf => oddf::read_features(&args.input)?,
    };
    match args.to {
        FileFormat::Csv => csvio::write_csv_features(&args.out, &vectors, labels.as_deref())?,
        FileFormat::Oddf => oddf::write_features(&args.out, &vectors, labels.as_deref())?,
    }
    Ok(())
}
