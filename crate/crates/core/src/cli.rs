//! Command-line front door. Every command resolves its flags, runs the
//! pipeline, writes CSV artifacts atomically, and drops a manifest alongside
//! them recording the exact resolved invocation so `replay` can reproduce
//! the outputs byte for byte.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dataio::{
    self, group_ids, make_fold_plan, read_logit_csv, write_logit_csv, LogitRecord,
};
use crate::density::{boxplot_summary, kde, BoxplotSummary, DensityCurve, DEFAULT_GRID_SIZE};
use crate::error::{Error, Result};
use crate::eval::{
    score_records, sweep, CurveReport, PositiveDefinition, ScoredSample, ThresholdSpec,
};
use crate::report::{boxplot_svg, density_svg, fmt_f64, write_atomic};
use crate::scores::{Orientation, ScorerKind, ScorerSpec};
use crate::stats::{group_comparison, DEFAULT_LILLIEFORS_SIMS};
use crate::synth::{self, NovelPlacement, SynthConfig};

pub const OUT_DIR_ENV: &str = "COGNIZANCE_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "cognizance",
    version,
    about = "Confidence and latent-cognizance scoring of classifier logits, \
             with novelty-detection evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic logit dataset from a freshly trained linear
    /// softmax classifier.
    Synth(SynthArgs),
    /// Score every record of a logit CSV with one scorer.
    Score(ScoreArgs),
    /// Sweep thresholds and report AUROC/AUPR per scorer.
    Evaluate(EvaluateArgs),
    /// Rank-sum comparisons between CP/IP/NS score groups plus normality
    /// pre-checks.
    Stats(StatsArgs),
    /// Smoothed density curves and boxplot summaries of score
    /// distributions.
    Density(DensityArgs),
    /// Produce the full report bundle for one dataset.
    Report(ReportArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

fn parse_scorer(name: &str) -> std::result::Result<ScorerKind, String> {
    ScorerKind::from_name(name).ok_or_else(|| {
        let valid: Vec<&str> = ScorerKind::ALL.iter().map(|k| k.name()).collect();
        format!("unknown scorer '{name}'; valid names: {}", valid.join(", "))
    })
}

/// Scorer selection as a single flag value: "all" or a comma list.
#[derive(Debug, Clone)]
struct ScorerList(Vec<ScorerKind>);

fn parse_scorer_list(value: &str) -> std::result::Result<ScorerList, String> {
    if value == "all" {
        return Ok(ScorerList(ScorerKind::ALL.to_vec()));
    }
    let mut kinds = Vec::new();
    for name in value.split(',') {
        let kind = parse_scorer(name.trim())?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    Ok(ScorerList(kinds))
}

fn parse_placement(value: &str) -> std::result::Result<NovelPlacement, String> {
    NovelPlacement::from_name(value)
        .ok_or_else(|| format!("unknown placement '{value}'; valid: midpoint, far"))
}

fn parse_thresholds(value: &str) -> std::result::Result<ThresholdChoice, String> {
    if value == "all" {
        return Ok(ThresholdChoice::All);
    }
    value
        .parse::<usize>()
        .map_err(|_| format!("thresholds must be 'all' or a count, got '{value}'"))
        .and_then(|n| {
            if n < 2 {
                Err("threshold count must be at least 2".into())
            } else {
                Ok(ThresholdChoice::Count(n))
            }
        })
}

#[derive(Debug, Clone, Copy)]
enum ThresholdChoice {
    All,
    Count(usize),
}

impl ThresholdChoice {
    fn spec(self) -> ThresholdSpec {
        match self {
            ThresholdChoice::All => ThresholdSpec::AllUnique,
            ThresholdChoice::Count(n) => ThresholdSpec::Count(n),
        }
    }

    fn label(self) -> String {
        match self {
            ThresholdChoice::All => "all".into(),
            ThresholdChoice::Count(n) => n.to_string(),
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum PositiveChoice {
    Novel,
    WrongOrNovel,
    Both,
}

impl PositiveChoice {
    fn definitions(self) -> Vec<PositiveDefinition> {
        match self {
            PositiveChoice::Novel => vec![PositiveDefinition::NovelOnly],
            PositiveChoice::WrongOrNovel => vec![PositiveDefinition::WrongOrNovel],
            PositiveChoice::Both => vec![
                PositiveDefinition::NovelOnly,
                PositiveDefinition::WrongOrNovel,
            ],
        }
    }

    fn label(self) -> &'static str {
        match self {
            PositiveChoice::Novel => "novel",
            PositiveChoice::WrongOrNovel => "wrong-or-novel",
            PositiveChoice::Both => "both",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum FoldMode {
    Pooled,
    PerFold,
    Both,
}

impl FoldMode {
    fn label(self) -> &'static str {
        match self {
            FoldMode::Pooled => "pooled",
            FoldMode::PerFold => "per-fold",
            FoldMode::Both => "both",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum GroupSplit {
    /// Combined sign group (CP plus IP) versus NS.
    SsVsNs,
    /// CP, IP, and NS separately.
    CpIpNs,
}

impl GroupSplit {
    fn label(self) -> &'static str {
        match self {
            GroupSplit::SsVsNs => "ss-vs-ns",
            GroupSplit::CpIpNs => "cp-ip-ns",
        }
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Flat key=value config file; explicit flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seen (trained) classes.
    #[arg(long)]
    classes: Option<usize>,
    /// Number of held-out novel classes.
    #[arg(long)]
    novel: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    samples_per_class: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long, value_parser = parse_placement)]
    placement: Option<NovelPlacement>,
    /// Number of signer-analogue groups to rotate sample ids through.
    #[arg(long)]
    groups: Option<usize>,
    /// Output logit CSV path (default <out-dir>/synth_logits.csv).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "cognizance_out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = parse_scorer)]
    scorer: ScorerKind,
    /// Invert the scorer's default orientation.
    #[arg(long)]
    flip_orientation: bool,
    /// Output CSV path (default <out-dir>/scored_<scorer>.csv).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV, default_value = "cognizance_out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    input: PathBuf,
    /// "all" or a comma list, e.g. cs2,cr.
    #[arg(long, default_value = "all", value_parser = parse_scorer_list)]
    scorers: ScorerList,
    #[arg(long, value_enum, default_value_t = PositiveChoice::Both)]
    positive: PositiveChoice,
    /// Number of rotating folds; omit to evaluate the whole dataset at once.
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, default_value_t = 3)]
    fold_window: usize,
    /// Wraparound cycle of the rotation (defaults to the fold count).
    #[arg(long)]
    fold_cycle: Option<usize>,
    #[arg(long, value_enum, default_value_t = FoldMode::Pooled)]
    fold_mode: FoldMode,
    /// Curve resolution: "all" unique thresholds or a point count.
    #[arg(long, default_value = "all", value_parser = parse_thresholds)]
    thresholds: ThresholdChoice,
    #[arg(long, env = OUT_DIR_ENV, default_value = "cognizance_out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "all", value_parser = parse_scorer_list)]
    scorers: ScorerList,
    /// Monte Carlo simulations per Lilliefors p-value.
    #[arg(long, default_value_t = DEFAULT_LILLIEFORS_SIMS)]
    sims: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, env = OUT_DIR_ENV, default_value = "cognizance_out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct DensityArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "lc_cubic", value_parser = parse_scorer)]
    scorer: ScorerKind,
    #[arg(long, value_enum, default_value_t = GroupSplit::SsVsNs)]
    groups: GroupSplit,
    /// Density over log10 of the raw scores (requires all-positive scores).
    #[arg(long)]
    log: bool,
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    grid: usize,
    /// Also render SVG plots.
    #[arg(long)]
    svg: bool,
    #[arg(long, env = OUT_DIR_ENV, default_value = "cognizance_out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long, default_value_t = 3)]
    fold_window: usize,
    #[arg(long)]
    fold_cycle: Option<usize>,
    #[arg(long, value_enum, default_value_t = FoldMode::Pooled)]
    fold_mode: FoldMode,
    #[arg(long, default_value_t = DEFAULT_LILLIEFORS_SIMS)]
    sims: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    grid: usize,
    #[arg(long)]
    svg: bool,
    #[arg(long, env = OUT_DIR_ENV, default_value = "cognizance_out")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    /// Manifest written by a previous run.
    manifest: PathBuf,
}

/// Record of a resolved invocation, written alongside every output set.
/// Outputs carry no timestamps, so replaying the recorded argv reproduces
/// them byte for byte.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Fully resolved argument vector, suitable for `replay`.
    pub argv: Vec<String>,
    pub inputs: Vec<String>,
    pub parameters: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    fn new(command: &str, argv: Vec<String>) -> Self {
        Self {
            tool: "cognizance".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            argv,
            inputs: Vec::new(),
            parameters: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut body = serde_json::to_string_pretty(self)
            .map_err(|e| Error::InvalidInput(format!("manifest serialization: {e}")))?;
        body.push('\n');
        write_atomic(path, body.as_bytes())
    }
}

/// Entry point used by the binary.
pub fn run() -> ExitCode {
    let code = run_from(std::env::args_os());
    ExitCode::from(code)
}

/// Parse and execute; returns the process exit code.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            // clap renders its own help/version output on stdout with
            // success status.
            if err.use_stderr() {
                eprint!("{err}");
                return 1;
            }
            print!("{err}");
            return 0;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            2
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(args) => cmd_synth(args),
        Command::Score(args) => cmd_score(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Density(args) => cmd_density(args),
        Command::Report(args) => cmd_report(args),
        Command::Replay(args) => cmd_replay(args),
    }
}

fn path_str(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => SynthConfig::from_kv_str(&std::fs::read_to_string(path)?)?,
        None => SynthConfig::default(),
    };
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.classes {
        config.n_classes_seen = v;
    }
    if let Some(v) = args.novel {
        config.n_classes_novel = v;
    }
    if let Some(v) = args.dim {
        config.dim = v;
    }
    if let Some(v) = args.samples_per_class {
        config.samples_per_class = v;
    }
    if let Some(v) = args.separation {
        config.cluster_separation = v;
    }
    if let Some(v) = args.epochs {
        config.epochs = v;
    }
    if let Some(v) = args.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = args.placement {
        config.novel_placement = v;
    }
    if let Some(v) = args.groups {
        config.n_groups = v;
    }
    config.validate()?;

    let out = args
        .out
        .unwrap_or_else(|| args.out_dir.join("synth_logits.csv"));

    let (train_records, test_records) = synth::generate(&config)?;
    let outcome = synth::train(&train_records, &config)?;
    let logits = synth::emit_logits(&outcome.model, &test_records)?;
    write_logit_csv(&out, &logits)?;

    let mut argv = vec!["cognizance".into(), "synth".into()];
    for (flag, value) in [
        ("--seed", config.seed.to_string()),
        ("--classes", config.n_classes_seen.to_string()),
        ("--novel", config.n_classes_novel.to_string()),
        ("--dim", config.dim.to_string()),
        ("--samples-per-class", config.samples_per_class.to_string()),
        ("--separation", config.cluster_separation.to_string()),
        ("--epochs", config.epochs.to_string()),
        ("--learning-rate", config.learning_rate.to_string()),
        ("--placement", config.novel_placement.name().to_string()),
        ("--groups", config.n_groups.to_string()),
        ("--out", path_str(&out)),
    ] {
        argv.push(flag.into());
        argv.push(value);
    }
    let mut manifest = RunManifest::new("synth", argv);
    for (key, value) in [
        ("seed", config.seed.to_string()),
        ("train_accuracy", fmt_f64(outcome.train_accuracy)),
        (
            "final_loss",
            fmt_f64(*outcome.loss_history.last().expect("non-empty history")),
        ),
        ("train_records", train_records.len().to_string()),
        ("test_records", test_records.len().to_string()),
    ] {
        manifest.parameters.insert(key.into(), value);
    }
    manifest.outputs.push(path_str(&out));
    manifest.write(&manifest_sibling(&out))?;

    println!("wrote {}", out.display());
    println!("train_accuracy={}", fmt_f64(outcome.train_accuracy));
    Ok(())
}

fn manifest_sibling(out: &Path) -> PathBuf {
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{name}.manifest.json"))
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let records = read_logit_csv(&args.input)?;
    let mut spec = ScorerSpec::new(args.scorer);
    if args.flip_orientation {
        spec.orientation = match spec.orientation {
            Orientation::HighMeansSign => Orientation::HighMeansNonsign,
            Orientation::HighMeansNonsign => Orientation::HighMeansSign,
        };
    }

    let out = args
        .out
        .unwrap_or_else(|| args.out_dir.join(format!("scored_{}.csv", args.scorer.name())));

    let mut body = String::from("sample_id,group,raw,oriented,flags\n");
    for (index, record) in records.iter().enumerate() {
        let predicted = crate::scores::argmax_pair(&record.logits).0;
        let group =
            crate::eval::classify_outcome(record.true_class, record.is_novel, predicted)?;
        let value = crate::scores::score(spec, &record.logits).map_err(|e| Error::Parse {
            // +2: one header line, one-based rows.
            line: index as u64 + 2,
            message: format!("sample {}: {e}", record.sample_id),
        })?;
        body.push_str(&format!(
            "{},{},{},{},{}\n",
            record.sample_id,
            group.name(),
            fmt_f64(value.raw),
            fmt_f64(value.oriented),
            value.flags.label(),
        ));
    }
    write_atomic(&out, body.as_bytes())?;

    let argv = vec![
        "cognizance".into(),
        "score".into(),
        "--input".into(),
        path_str(&args.input),
        "--scorer".into(),
        args.scorer.name().into(),
        "--out".into(),
        path_str(&out),
    ];
    let mut argv = argv;
    if args.flip_orientation {
        argv.insert(6, "--flip-orientation".into());
    }
    let mut manifest = RunManifest::new("score", argv);
    manifest.inputs.push(path_str(&args.input));
    manifest
        .parameters
        .insert("scorer".into(), args.scorer.name().into());
    manifest
        .parameters
        .insert("records".into(), records.len().to_string());
    manifest.outputs.push(path_str(&out));
    manifest.write(&manifest_sibling(&out))?;

    println!("wrote {}", out.display());
    Ok(())
}

struct SummaryRow {
    scorer: ScorerKind,
    positive: PositiveDefinition,
    mode: String,
    auroc: f64,
    aupr: f64,
    n_pos: usize,
    n_neg: usize,
}

fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut body = String::from("scorer,positive,mode,auroc,aupr,n_pos,n_neg\n");
    for row in rows {
        body.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.scorer.name(),
            row.positive.name(),
            row.mode,
            fmt_f64(row.auroc),
            fmt_f64(row.aupr),
            row.n_pos,
            row.n_neg,
        ));
    }
    body
}

fn curve_csv(report: &CurveReport) -> String {
    let mut body = String::from("threshold,detection_rate,false_alarm_rate,precision,recall\n");
    for point in &report.points {
        body.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(point.threshold),
            fmt_f64(point.detection_rate),
            fmt_f64(point.false_alarm_rate),
            fmt_f64(point.precision),
            fmt_f64(point.recall),
        ));
    }
    body
}

struct EvaluationArtifacts {
    summary_rows: Vec<SummaryRow>,
    /// (scorer, positive, pooled-or-whole sweep) used for curve CSVs.
    curves: Vec<(ScorerKind, PositiveDefinition, CurveReport)>,
    fold_plan_csv: Option<String>,
}

fn evaluate_dataset(
    records: &[LogitRecord],
    scorers: &[ScorerKind],
    positives: &[PositiveDefinition],
    folds: Option<(usize, usize, Option<usize>)>,
    fold_mode: FoldMode,
    thresholds: ThresholdSpec,
) -> Result<EvaluationArtifacts> {
    let mut summary_rows = Vec::new();
    let mut curves = Vec::new();
    let mut fold_plan_csv = None;

    let plan = match folds {
        None => None,
        Some((n_folds, window, cycle)) => {
            let sign_records: Vec<LogitRecord> = records
                .iter()
                .filter(|r| !r.is_novel)
                .cloned()
                .collect();
            let ids = group_ids(&sign_records);
            let plan = make_fold_plan(&ids, window, n_folds, cycle)?;
            fold_plan_csv = Some(dataio::fold_plan_csv_string(&plan));
            Some(plan)
        }
    };

    for &scorer in scorers {
        let spec = ScorerSpec::new(scorer);
        let samples = score_records(records, spec)?;
        for &positive in positives {
            match &plan {
                None => {
                    let report = sweep(&samples, positive, thresholds)?;
                    summary_rows.push(SummaryRow {
                        scorer,
                        positive,
                        mode: "all".into(),
                        auroc: report.auroc,
                        aupr: report.aupr,
                        n_pos: report.n_pos,
                        n_neg: report.n_neg,
                    });
                    curves.push((scorer, positive, report));
                }
                Some(plan) => {
                    let mut pooled: Vec<ScoredSample> = Vec::new();
                    let mut fold_reports = Vec::new();
                    for fold in &plan.folds {
                        let test_ids: Vec<&str> = fold
                            .test_group_ids
                            .iter()
                            .map(String::as_str)
                            .collect();
                        let fold_samples: Vec<ScoredSample> = samples
                            .iter()
                            .filter(|s| s.is_novel || test_ids.contains(&s.group_id.as_str()))
                            .cloned()
                            .collect();
                        let report = sweep(&fold_samples, positive, ThresholdSpec::AllUnique)?;
                        pooled.extend(fold_samples);
                        fold_reports.push((fold.index, report));
                    }
                    let pooled_report = sweep(&pooled, positive, thresholds)?;

                    if matches!(fold_mode, FoldMode::Pooled | FoldMode::Both) {
                        summary_rows.push(SummaryRow {
                            scorer,
                            positive,
                            mode: "pooled".into(),
                            auroc: pooled_report.auroc,
                            aupr: pooled_report.aupr,
                            n_pos: pooled_report.n_pos,
                            n_neg: pooled_report.n_neg,
                        });
                    }
                    if matches!(fold_mode, FoldMode::PerFold | FoldMode::Both) {
                        let count = fold_reports.len() as f64;
                        let mean_auroc =
                            fold_reports.iter().map(|(_, r)| r.auroc).sum::<f64>() / count;
                        let mean_aupr =
                            fold_reports.iter().map(|(_, r)| r.aupr).sum::<f64>() / count;
                        for (index, report) in &fold_reports {
                            summary_rows.push(SummaryRow {
                                scorer,
                                positive,
                                mode: format!("fold_{index}"),
                                auroc: report.auroc,
                                aupr: report.aupr,
                                n_pos: report.n_pos,
                                n_neg: report.n_neg,
                            });
                        }
                        summary_rows.push(SummaryRow {
                            scorer,
                            positive,
                            mode: "per_fold_mean".into(),
                            auroc: mean_auroc,
                            aupr: mean_aupr,
                            n_pos: fold_reports.iter().map(|(_, r)| r.n_pos).sum(),
                            n_neg: fold_reports.iter().map(|(_, r)| r.n_neg).sum(),
                        });
                    }
                    curves.push((scorer, positive, pooled_report));
                }
            }
        }
    }

    Ok(EvaluationArtifacts {
        summary_rows,
        curves,
        fold_plan_csv,
    })
}

fn write_evaluation(
    out_dir: &Path,
    artifacts: &EvaluationArtifacts,
) -> Result<Vec<String>> {
    let mut outputs = Vec::new();
    let summary_path = out_dir.join("summary.csv");
    write_atomic(&summary_path, summary_csv(&artifacts.summary_rows).as_bytes())?;
    outputs.push(path_str(&summary_path));

    for (scorer, positive, report) in &artifacts.curves {
        let path = out_dir
            .join("curves")
            .join(format!("curve_{}_{}.csv", scorer.name(), positive.name()));
        write_atomic(&path, curve_csv(report).as_bytes())?;
        outputs.push(path_str(&path));
    }

    if let Some(fold_csv) = &artifacts.fold_plan_csv {
        let path = out_dir.join("fold_plan.csv");
        write_atomic(&path, fold_csv.as_bytes())?;
        outputs.push(path_str(&path));
    }
    Ok(outputs)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let records = read_logit_csv(&args.input)?;
    let positives = args.positive.definitions();
    let folds = args.folds.map(|n| (n, args.fold_window, args.fold_cycle));
    let artifacts = evaluate_dataset(
        &records,
        &args.scorers.0,
        &positives,
        folds,
        args.fold_mode,
        args.thresholds.spec(),
    )?;
    let outputs = write_evaluation(&args.out_dir, &artifacts)?;

    let scorer_names: Vec<String> = args
        .scorers
        .0
        .iter()
        .map(|k| k.name().to_string())
        .collect();
    let mut argv = vec![
        "cognizance".into(),
        "evaluate".into(),
        "--input".into(),
        path_str(&args.input),
        "--scorers".into(),
        scorer_names.join(","),
        "--positive".into(),
        args.positive.label().into(),
        "--thresholds".into(),
        args.thresholds.label(),
        "--fold-mode".into(),
        args.fold_mode.label().into(),
        "--out-dir".into(),
        path_str(&args.out_dir),
    ];
    if let Some(n) = args.folds {
        argv.push("--folds".into());
        argv.push(n.to_string());
        argv.push("--fold-window".into());
        argv.push(args.fold_window.to_string());
        if let Some(c) = args.fold_cycle {
            argv.push("--fold-cycle".into());
            argv.push(c.to_string());
        }
    }
    let mut manifest = RunManifest::new("evaluate", argv);
    manifest.inputs.push(path_str(&args.input));
    manifest
        .parameters
        .insert("scorers".into(), scorer_names.join(","));
    manifest
        .parameters
        .insert("records".into(), records.len().to_string());
    manifest.outputs = outputs;
    manifest.write(&args.out_dir.join("manifest.json"))?;

    println!("wrote {}", args.out_dir.join("summary.csv").display());
    Ok(())
}

fn stats_csvs(
    records: &[LogitRecord],
    scorers: &[ScorerKind],
    sims: usize,
    seed: u64,
) -> Result<(String, String)> {
    let mut comparisons =
        String::from("scorer,comparison,statistic,p_value,method,n1,n2,significant_at_0.01\n");
    let mut normality =
        String::from("scorer,group,n,statistic,p_value,method,rejected_at_0.05,note\n");

    for (offset, &scorer) in scorers.iter().enumerate() {
        let spec = ScorerSpec::new(scorer);
        let samples = score_records(records, spec)?;
        let report = group_comparison(&samples, spec, sims, seed.wrapping_add(offset as u64 * 101))?;
        for (pair, result) in &report.comparisons {
            comparisons.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                scorer.name(),
                pair.name(),
                fmt_f64(result.statistic),
                fmt_f64(result.p_value),
                result.method.name(),
                result.n1,
                result.n2,
                u8::from(result.p_value < 0.01),
            ));
        }
        for check in &report.normality {
            match &check.outcome {
                Some(outcome) => normality.push_str(&format!(
                    "{},{},{},{},{},{},{},\n",
                    scorer.name(),
                    check.group.name(),
                    check.n,
                    fmt_f64(outcome.test.statistic),
                    fmt_f64(outcome.test.p_value),
                    outcome.test.method.name(),
                    u8::from(outcome.rejected),
                )),
                None => normality.push_str(&format!(
                    "{},{},{},,,,,{}\n",
                    scorer.name(),
                    check.group.name(),
                    check.n,
                    check.note.as_deref().unwrap_or(""),
                )),
            }
        }
    }
    Ok((comparisons, normality))
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let records = read_logit_csv(&args.input)?;
    let (comparisons, normality) = stats_csvs(&records, &args.scorers.0, args.sims, args.seed)?;

    let comparisons_path = args.out_dir.join("stats_comparisons.csv");
    let normality_path = args.out_dir.join("stats_normality.csv");
    write_atomic(&comparisons_path, comparisons.as_bytes())?;
    write_atomic(&normality_path, normality.as_bytes())?;

    let scorer_names: Vec<String> = args
        .scorers
        .0
        .iter()
        .map(|k| k.name().to_string())
        .collect();
    let argv = vec![
        "cognizance".into(),
        "stats".into(),
        "--input".into(),
        path_str(&args.input),
        "--scorers".into(),
        scorer_names.join(","),
        "--sims".into(),
        args.sims.to_string(),
        "--seed".into(),
        args.seed.to_string(),
        "--out-dir".into(),
        path_str(&args.out_dir),
    ];
    let mut manifest = RunManifest::new("stats", argv);
    manifest.inputs.push(path_str(&args.input));
    manifest.parameters.insert("sims".into(), args.sims.to_string());
    manifest.parameters.insert("seed".into(), args.seed.to_string());
    manifest.outputs = vec![path_str(&comparisons_path), path_str(&normality_path)];
    manifest.write(&args.out_dir.join("manifest.json"))?;

    println!("wrote {}", comparisons_path.display());
    Ok(())
}

/// Raw scores per display group, in a fixed group order.
fn split_by_group(
    samples: &[ScoredSample],
    split: GroupSplit,
) -> Vec<(&'static str, Vec<f64>)> {
    use crate::eval::OutcomeGroup;
    match split {
        GroupSplit::SsVsNs => {
            let ss = samples
                .iter()
                .filter(|s| s.group != OutcomeGroup::Ns)
                .map(|s| s.raw_score)
                .collect();
            let ns = samples
                .iter()
                .filter(|s| s.group == OutcomeGroup::Ns)
                .map(|s| s.raw_score)
                .collect();
            vec![("SS", ss), ("NS", ns)]
        }
        GroupSplit::CpIpNs => OutcomeGroup::ALL
            .iter()
            .map(|&g| {
                (
                    g.name(),
                    samples
                        .iter()
                        .filter(|s| s.group == g)
                        .map(|s| s.raw_score)
                        .collect(),
                )
            })
            .collect(),
    }
}

fn log10_scores(scorer: ScorerKind, values: &[f64]) -> Result<Vec<f64>> {
    let non_positive = values.iter().filter(|&&v| v <= 0.0).count();
    if non_positive > 0 {
        return Err(Error::InvalidInput(format!(
            "cannot log-scale {}: {non_positive} scores are not positive",
            scorer.name()
        )));
    }
    Ok(values.iter().map(|v| v.log10()).collect())
}

fn density_csv(curve: &DensityCurve) -> String {
    let mut body = String::from("score,density\n");
    for (g, d) in curve.grid.iter().zip(&curve.density) {
        body.push_str(&format!("{},{}\n", fmt_f64(*g), fmt_f64(*d)));
    }
    body
}

fn boxplot_row(label: &str, summary: &BoxplotSummary) -> String {
    format!(
        "{label},{},{},{},{},{},{},{},{}\n",
        fmt_f64(summary.min),
        fmt_f64(summary.q1),
        fmt_f64(summary.median),
        fmt_f64(summary.q3),
        fmt_f64(summary.max),
        fmt_f64(summary.lower_whisker),
        fmt_f64(summary.upper_whisker),
        summary.outliers.len(),
    )
}

const BOXPLOT_HEADER: &str =
    "group,min,q1,median,q3,max,lower_whisker,upper_whisker,outlier_count\n";

fn cmd_density(args: DensityArgs) -> Result<()> {
    let records = read_logit_csv(&args.input)?;
    let spec = ScorerSpec::new(args.scorer);
    let samples = score_records(&records, spec)?;
    let groups = split_by_group(&samples, args.groups);

    let mut outputs = Vec::new();
    let suffix = if args.log { "_log10" } else { "" };
    let mut curves = Vec::new();
    let mut boxplots = String::from(BOXPLOT_HEADER);
    for (label, values) in &groups {
        let values = if args.log {
            log10_scores(args.scorer, values)?
        } else {
            values.clone()
        };
        if values.is_empty() {
            return Err(Error::InvalidInput(format!(
                "group {label} has no samples"
            )));
        }
        let curve = kde(&values, args.grid)?;
        let path = args.out_dir.join(format!(
            "density_{}_{}{suffix}.csv",
            args.scorer.name(),
            label.to_lowercase()
        ));
        write_atomic(&path, density_csv(&curve).as_bytes())?;
        outputs.push(path_str(&path));
        curves.push((label.to_string(), curve));
        boxplots.push_str(&boxplot_row(label, &boxplot_summary(&values)?));
    }

    let boxplot_path = args
        .out_dir
        .join(format!("boxplot_{}{suffix}.csv", args.scorer.name()));
    write_atomic(&boxplot_path, boxplots.as_bytes())?;
    outputs.push(path_str(&boxplot_path));

    if args.svg {
        let density_path = args
            .out_dir
            .join(format!("density_{}{suffix}.svg", args.scorer.name()));
        write_atomic(
            &density_path,
            density_svg(&curves, args.scorer.name()).as_bytes(),
        )?;
        outputs.push(path_str(&density_path));
    }

    let mut argv = vec![
        "cognizance".into(),
        "density".into(),
        "--input".into(),
        path_str(&args.input),
        "--scorer".into(),
        args.scorer.name().into(),
        "--groups".into(),
        args.groups.label().into(),
        "--grid".into(),
        args.grid.to_string(),
        "--out-dir".into(),
        path_str(&args.out_dir),
    ];
    if args.log {
        argv.push("--log".into());
    }
    if args.svg {
        argv.push("--svg".into());
    }
    let mut manifest = RunManifest::new("density", argv);
    manifest.inputs.push(path_str(&args.input));
    manifest
        .parameters
        .insert("scorer".into(), args.scorer.name().into());
    manifest
        .parameters
        .insert("log10".into(), args.log.to_string());
    manifest
        .parameters
        .insert("groups".into(), args.groups.label().into());
    manifest.outputs = outputs;
    manifest.write(&args.out_dir.join("manifest.json"))?;

    println!("wrote {}", boxplot_path.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let records = read_logit_csv(&args.input)?;
    let scorers: Vec<ScorerKind> = ScorerKind::ALL.to_vec();
    let positives = vec![
        PositiveDefinition::NovelOnly,
        PositiveDefinition::WrongOrNovel,
    ];
    let folds = args.folds.map(|n| (n, args.fold_window, args.fold_cycle));

    let artifacts = evaluate_dataset(
        &records,
        &scorers,
        &positives,
        folds,
        args.fold_mode,
        ThresholdSpec::AllUnique,
    )?;
    let mut outputs = write_evaluation(&args.out_dir, &artifacts)?;

    let (comparisons, normality) = stats_csvs(&records, &scorers, args.sims, args.seed)?;
    let comparisons_path = args.out_dir.join("stats_comparisons.csv");
    write_atomic(&comparisons_path, comparisons.as_bytes())?;
    outputs.push(path_str(&comparisons_path));
    let normality_path = args.out_dir.join("stats_normality.csv");
    write_atomic(&normality_path, normality.as_bytes())?;
    outputs.push(path_str(&normality_path));

    // Densities and boxplots of the raw scores, sign group versus non-sign.
    let mut boxplots = String::from(
        "scorer,group,min,q1,median,q3,max,lower_whisker,upper_whisker,outlier_count\n",
    );
    for &scorer in &scorers {
        let samples = score_records(&records, ScorerSpec::new(scorer))?;
        let mut curves = Vec::new();
        for (label, values) in split_by_group(&samples, GroupSplit::SsVsNs) {
            let curve = kde(&values, args.grid)?;
            let path = args.out_dir.join("density").join(format!(
                "density_{}_{}.csv",
                scorer.name(),
                label.to_lowercase()
            ));
            write_atomic(&path, density_csv(&curve).as_bytes())?;
            outputs.push(path_str(&path));
            curves.push((label.to_string(), curve));

            let summary = boxplot_summary(&values)?;
            boxplots.push_str(&format!("{},{}", scorer.name(), boxplot_row(label, &summary)));
        }
        if args.svg {
            let path = args
                .out_dir
                .join("density")
                .join(format!("density_{}.svg", scorer.name()));
            write_atomic(&path, density_svg(&curves, scorer.name()).as_bytes())?;
            outputs.push(path_str(&path));
        }
    }
    let boxplot_path = args.out_dir.join("boxplot.csv");
    write_atomic(&boxplot_path, boxplots.as_bytes())?;
    outputs.push(path_str(&boxplot_path));

    if args.svg {
        let per_scorer: Result<Vec<(String, BoxplotSummary)>> = scorers
            .iter()
            .map(|&scorer| {
                let samples = score_records(&records, ScorerSpec::new(scorer))?;
                let values: Vec<f64> = samples.iter().map(|s| s.raw_score).collect();
                Ok((scorer.name().to_string(), boxplot_summary(&values)?))
            })
            .collect();
        let path = args.out_dir.join("boxplot.svg");
        write_atomic(
            &path,
            boxplot_svg(&per_scorer?, "score distributions").as_bytes(),
        )?;
        outputs.push(path_str(&path));
    }

    let mut argv = vec![
        "cognizance".into(),
        "report".into(),
        "--input".into(),
        path_str(&args.input),
        "--sims".into(),
        args.sims.to_string(),
        "--seed".into(),
        args.seed.to_string(),
        "--grid".into(),
        args.grid.to_string(),
        "--fold-mode".into(),
        args.fold_mode.label().into(),
        "--out-dir".into(),
        path_str(&args.out_dir),
    ];
    if let Some(n) = args.folds {
        argv.push("--folds".into());
        argv.push(n.to_string());
        argv.push("--fold-window".into());
        argv.push(args.fold_window.to_string());
        if let Some(c) = args.fold_cycle {
            argv.push("--fold-cycle".into());
            argv.push(c.to_string());
        }
    }
    if args.svg {
        argv.push("--svg".into());
    }
    let mut manifest = RunManifest::new("report", argv);
    manifest.inputs.push(path_str(&args.input));
    manifest.parameters.insert("sims".into(), args.sims.to_string());
    manifest.parameters.insert("seed".into(), args.seed.to_string());
    manifest.outputs = outputs;
    manifest.write(&args.out_dir.join("manifest.json"))?;

    println!("wrote report to {}", args.out_dir.display());
    Ok(())
}

fn cmd_replay(args: ReplayArgs) -> Result<()> {
    let body = std::fs::read_to_string(&args.manifest)?;
    let manifest: RunManifest = serde_json::from_str(&body).map_err(|e| Error::Parse {
        line: e.line() as u64,
        message: format!("manifest: {e}"),
    })?;
    let cli = Cli::try_parse_from(&manifest.argv)
        .map_err(|e| Error::InvalidInput(format!("recorded argv does not parse: {e}")))?;
    dispatch(cli.command)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scorer_list_parses_all_and_sublists() {
        assert_eq!(parse_scorer_list("all").unwrap().0.len(), 10);
        assert_eq!(
            parse_scorer_list("cs2,cr").unwrap().0,
            vec![ScorerKind::Cs2, ScorerKind::Cr]
        );
        let err = parse_scorer_list("cs2,bogus").unwrap_err();
        assert!(err.contains("lc_cubic"), "should list valid names: {err}");
    }

    #[test]
    fn threshold_parse() {
        assert!(matches!(parse_thresholds("all"), Ok(ThresholdChoice::All)));
        assert!(matches!(
            parse_thresholds("17"),
            Ok(ThresholdChoice::Count(17))
        ));
        assert!(parse_thresholds("1").is_err());
        assert!(parse_thresholds("x").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_from(["cognizance", "score", "--scorer", "nope"]), 1);
        assert_eq!(run_from(["cognizance", "no-such-command"]), 1);
        assert_eq!(run_from(["cognizance", "--help"]), 0);
    }
}
