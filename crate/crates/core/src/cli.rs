//! The `rubriclab` command line.
//!
//! Every subcommand reads its inputs, writes one report to `--out` and
//! prints a one-line summary. Paths that are not given fall back to fixed
//! names under `--data-dir` (or `RUBRICLAB_DATA_DIR`); outputs default to
//! `<data-dir>/reports/`.
//!
//! Exit codes: 0 on success, 1 when the input data is invalid or a
//! computation fails, 2 on usage errors.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::classifier::{
    binary_labels, cross_corpus_eval, grid_search, train_final, ClassWeight, DisfluencyDetector,
    EvalReport, GridConfig, GridSearchResult, DEFAULT_FOLDS, DEFAULT_MIN_VARIANCE, DEFAULT_SEED,
};
use crate::gop::{
    default_silence_symbols, estimate_priors, score_corpus, GopVariant, PhonePrior,
    DEFAULT_PRIOR_SMOOTHING,
};
use crate::io::{
    load_pooled_layers, posterior_path, read_alignments, read_annotations, read_annotations_csv,
    read_container, read_embedding_dir, read_labels, read_manifest, read_posteriors, read_scored,
    render_annotations_csv, render_annotations_json, render_eval_csv, render_grid_csv,
    render_score_rows, render_stats_tables, render_summary_csv, write_atomic, write_pooled,
    CorpusManifest, LabelTable, PooledLayers, ScoreRow,
};
use crate::model::{AnnotationRecord, Disfluency, PhoneSet, SpeakerGroup};
use crate::service::{serve, ServiceConfig, STORE_FILE};
use crate::stats::{
    correlate, group_summary, select_for_protocol, utterance_levels, Protocol, StatsReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const DEFAULT_LISTEN: &str = "127.0.0.1:8080";

#[derive(Debug, Parser)]
#[command(
    name = "rubriclab",
    version,
    about = "Rubric annotation, GoP scoring and disfluency classification",
    arg_required_else_help = true
)]
struct Cli {
    /// Base directory for default input and output paths.
    #[arg(long, global = true, env = "RUBRICLAB_DATA_DIR")]
    data_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Goodness-of-pronunciation scoring.
    #[command(subcommand)]
    Gop(GopCommand),
    /// Kendall tau-b between utterance GoP and rubric level.
    Correlate(CorrelateArgs),
    /// Corpus error tables and score distributions from annotations.
    Stats(StatsArgs),
    /// Disfluency classification.
    #[command(subcommand)]
    Clf(ClfCommand),
    /// Check input files without computing anything.
    Validate(ValidateArgs),
    /// Run the annotation HTTP service.
    Serve(ServeArgs),
    /// Write the service's stored annotations in an export format.
    Export(ExportArgs),
}

#[derive(Debug, Subcommand)]
enum GopCommand {
    /// Per-utterance GoP for every aligned utterance.
    Score(ScoreArgs),
    /// Phone priors from alignment frame counts (needed by DNN-GoP).
    Priors(PriorsArgs),
}

#[derive(Debug, Subcommand)]
enum ClfCommand {
    /// Mean-pool frame embeddings into per-layer utterance features.
    Pool(PoolArgs),
    /// Cross-validated grid search over layer, gamma and C.
    Grid(GridArgs),
    /// Refit the best configuration of each grid result on all samples.
    Train(TrainArgs),
    /// Apply trained detectors to another corpus.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Gmm,
    Nn,
    Dnn,
}

impl From<VariantArg> for GopVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Gmm => GopVariant::Gmm,
            VariantArg::Nn => GopVariant::Nn,
            VariantArg::Dnn => GopVariant::Dnn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProtocolArg {
    #[value(name = "3level")]
    Three,
    #[value(name = "4level")]
    Four,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::Three => Protocol::ThreeLevel,
            ProtocolArg::Four => Protocol::FourLevel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClassWeightArg {
    None,
    Balanced,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long, value_enum)]
    variant: VariantArg,
    #[arg(long)]
    alignments: Option<PathBuf>,
    #[arg(long)]
    posteriors_dir: Option<PathBuf>,
    /// Corpus manifest; supplies the phone set and the speaker groups.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Phone priors JSON (DNN-GoP only).
    #[arg(long)]
    priors: Option<PathBuf>,
    /// Annotations (JSON or CSV) supplying each utterance's rubric level;
    /// `<data-dir>/annotations.json` is used when present.
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Comma-separated silence symbols.
    #[arg(long, value_delimiter = ',')]
    silence: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PriorsArgs {
    #[arg(long)]
    alignments: Option<PathBuf>,
    /// Manifest whose phone set indexes the priors.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Fallback phone-set source: the column labels of a posterior file.
    #[arg(long)]
    posteriors_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 20.0)]
    frame_shift_ms: f64,
    #[arg(long, default_value_t = DEFAULT_PRIOR_SMOOTHING)]
    smoothing: f64,
    #[arg(long, value_delimiter = ',')]
    silence: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CorrelateArgs {
    #[arg(long, value_enum)]
    variant: VariantArg,
    #[arg(long, value_enum)]
    protocol: ProtocolArg,
    /// Scored CSV with at least `utterance_id`, `gop` and `level` columns.
    #[arg(long)]
    scores: Option<PathBuf>,
    /// Also write the per-level GoP summary (box-plot statistics) here.
    #[arg(long)]
    summary_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// `csv` writes a directory of tables, `json` a single report.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PoolArgs {
    #[arg(long)]
    embeddings_dir: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Raw per-utterance embeddings or a pooled directory.
    #[arg(long)]
    embeddings_dir: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Disfluencies to search (default: every one in the labels file).
    #[arg(long, value_delimiter = ',')]
    disfluency: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_MIN_VARIANCE)]
    min_variance: f64,
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    cs: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "none")]
    class_weight: ClassWeightArg,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Grid search results (JSON).
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    embeddings_dir: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Trained detectors (JSON).
    #[arg(long)]
    detectors: Option<PathBuf>,
    /// Target corpus embeddings.
    #[arg(long)]
    embeddings_dir: Option<PathBuf>,
    /// Target corpus labels.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    alignments: Option<PathBuf>,
    #[arg(long)]
    posteriors_dir: Option<PathBuf>,
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long)]
    embeddings_dir: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    silence: Option<Vec<String>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "RUBRICLAB_LISTEN", default_value = DEFAULT_LISTEN)]
    listen: SocketAddr,
    #[arg(long, env = "RUBRICLAB_MANIFEST")]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    /// The one-line summary printed on success.
    pub summary: Option<String>,
    /// Where the report was written, if anywhere.
    pub report: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn data(e: impl std::fmt::Display) -> Self {
        Self::Data(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

struct Done {
    summary: String,
    report: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and prints
/// to stdout and stderr.
pub fn run<I, T>(args: I) -> CommandOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

/// Like [`run`], writing the summary to `out` and diagnostics to `err`.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> CommandOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render().ansi());
                    EXIT_USAGE
                }
            };
            return CommandOutcome {
                exit_code: code,
                summary: None,
                report: None,
            };
        }
    };
    let ctx = Ctx {
        data_dir: cli.data_dir,
    };
    let result = match cli.command {
        Command::Gop(GopCommand::Score(a)) => gop_score(&ctx, a),
        Command::Gop(GopCommand::Priors(a)) => gop_priors(&ctx, a),
        Command::Correlate(a) => run_correlate(&ctx, a),
        Command::Stats(a) => run_stats(&ctx, a),
        Command::Clf(ClfCommand::Pool(a)) => clf_pool(&ctx, a),
        Command::Clf(ClfCommand::Grid(a)) => clf_grid(&ctx, a),
        Command::Clf(ClfCommand::Train(a)) => clf_train(&ctx, a),
        Command::Clf(ClfCommand::Eval(a)) => clf_eval(&ctx, a),
        Command::Validate(a) => run_validate(&ctx, a),
        Command::Serve(a) => run_serve(&ctx, a, err),
        Command::Export(a) => run_export(&ctx, a),
    };
    match result {
        Ok(done) => {
            let _ = writeln!(out, "{}", done.summary);
            CommandOutcome {
                exit_code: EXIT_OK,
                summary: Some(done.summary),
                report: done.report,
            }
        }
        Err(CliError::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            CommandOutcome {
                exit_code: EXIT_USAGE,
                summary: None,
                report: None,
            }
        }
        Err(CliError::Data(m)) => {
            let _ = writeln!(err, "error: {m}");
            CommandOutcome {
                exit_code: EXIT_DATA,
                summary: None,
                report: None,
            }
        }
    }
}

struct Ctx {
    data_dir: Option<PathBuf>,
}

impl Ctx {
    /// `given`, or `<data-dir>/<default>`.
    fn path(&self, given: Option<PathBuf>, flag: &str, default: &str) -> CliResult<PathBuf> {
        match (given, &self.data_dir) {
            (Some(p), _) => Ok(p),
            (None, Some(dir)) => Ok(dir.join(default)),
            (None, None) => Err(CliError::Usage(format!(
                "--{flag} is required when no --data-dir is set"
            ))),
        }
    }

    fn output(&self, given: Option<PathBuf>, default: &str) -> CliResult<PathBuf> {
        self.path(given, "out", &format!("reports/{default}"))
    }

    fn data_dir(&self) -> CliResult<&Path> {
        self.data_dir
            .as_deref()
            .ok_or_else(|| CliError::Usage("--data-dir (or RUBRICLAB_DATA_DIR) is required".into()))
    }
}

fn silence_set(list: Option<Vec<String>>) -> BTreeSet<String> {
    match list {
        Some(v) => v.into_iter().filter(|s| !s.is_empty()).collect(),
        None => default_silence_symbols(),
    }
}

fn write_report(path: &Path, bytes: &[u8]) -> CliResult<()> {
    write_atomic(path, bytes).map_err(CliError::data)
}

fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("report serializes");
    v.push(b'\n');
    v
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        CliError::Data(format!("{}: field {}: {}", path.display(), e.path(), e.inner()))
    })
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Annotation records from a JSON export or an annotation CSV.
pub fn load_annotation_records(path: &Path) -> Result<Vec<AnnotationRecord>, crate::io::IoError> {
    if is_csv(path) {
        read_annotations_csv(path)
    } else {
        read_annotations(path).map(|e| e.records)
    }
}

fn load_manifest(path: &Path) -> CliResult<CorpusManifest> {
    let m = read_manifest(path).map_err(CliError::data)?;
    Ok(m)
}

/// The manifest at `given`, or the data-dir default if that file exists.
fn optional_manifest(ctx: &Ctx, given: Option<PathBuf>) -> CliResult<Option<CorpusManifest>> {
    match given {
        Some(p) => load_manifest(&p).map(Some),
        None => match &ctx.data_dir {
            Some(dir) if dir.join("manifest.json").is_file() => {
                load_manifest(&dir.join("manifest.json")).map(Some)
            }
            _ => Ok(None),
        },
    }
}

fn gop_score(ctx: &Ctx, a: ScoreArgs) -> CliResult<Done> {
    let variant = GopVariant::from(a.variant);
    let alignments_path = ctx.path(a.alignments, "alignments", "alignments.csv")?;
    let posteriors_dir = ctx.path(a.posteriors_dir, "posteriors-dir", "posteriors")?;
    let out = ctx.output(
        a.out,
        &format!(
            "scores-{variant}.{}",
            if a.format == Format::Csv { "csv" } else { "json" }
        ),
    )?;
    let priors: Option<PhonePrior> = match (variant, a.priors) {
        (GopVariant::Dnn, Some(p)) => Some(read_json(&p)?),
        (GopVariant::Dnn, None) => match &ctx.data_dir {
            Some(dir) if dir.join("priors.json").is_file() => Some(read_json(&dir.join("priors.json"))?),
            _ => {
                return Err(CliError::Usage(
                    "the dnn variant needs --priors (see `gop priors`)".into(),
                ))
            }
        },
        (_, Some(_)) => {
            return Err(CliError::Usage(format!(
                "--priors only applies to the dnn variant, not {variant}"
            )))
        }
        (_, None) => None,
    };

    let manifest = optional_manifest(ctx, a.manifest)?;
    let phones: Option<Arc<PhoneSet>> = manifest
        .as_ref()
        .and_then(|m| m.phone_set.clone())
        .map(Arc::new);
    let silence = silence_set(a.silence);
    let alignments = read_alignments(&alignments_path, phones.as_deref(), &silence)
        .map_err(CliError::data)?;
    if alignments.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no alignments",
            alignments_path.display()
        )));
    }
    if let Some(m) = &manifest {
        if let Some(al) = alignments.iter().find(|al| m.get(&al.utterance_id).is_none()) {
            return Err(CliError::Data(format!(
                "{}: utterance `{}` is not in the manifest",
                alignments_path.display(),
                al.utterance_id
            )));
        }
    }

    let matrices = alignments
        .iter()
        .map(|al| {
            read_posteriors(
                &posterior_path(&posteriors_dir, &al.utterance_id),
                &al.utterance_id,
                phones.clone(),
            )
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::data)?;
    let pairs: Vec<_> = matrices.iter().zip(&alignments).collect();
    let mut results = Vec::with_capacity(pairs.len());
    for (id, r) in score_corpus(&pairs, variant, priors.as_ref()) {
        results.push(r.map_err(|e| CliError::Data(format!("utterance `{id}`: {e}")))?);
    }

    let skipped: usize = results.iter().map(|r| r.diagnostics.len()).sum();
    let mean = results.iter().map(|r| r.utterance_value).sum::<f64>() / results.len() as f64;
    match a.format {
        Format::Csv => {
            let annotations = a.annotations.or_else(|| {
                ctx.data_dir.as_ref().map(|d| d.join(STORE_FILE)).filter(|p| p.is_file())
            });
            let records = match annotations {
                Some(p) => load_annotation_records(&p).map_err(CliError::data)?,
                None => Vec::new(),
            };
            let reference: Vec<&str> = manifest
                .iter()
                .flat_map(|m| &m.utterances)
                .filter(|u| u.speaker_group == SpeakerGroup::TD)
                .map(|u| u.id.as_str())
                .collect();
            let levels = utterance_levels(&records, reference);
            let rows: Vec<ScoreRow> = results
                .iter()
                .map(|r| ScoreRow {
                    utterance_id: r.utterance_id.clone(),
                    variant,
                    gop: r.utterance_value,
                    phones_scored: r.per_phone.len(),
                    phones_skipped: r.diagnostics.len(),
                    level: levels.get(&r.utterance_id).copied(),
                })
                .collect();
            write_report(&out, &render_score_rows(&rows))?;
        }
        Format::Json => write_report(&out, &json_bytes(&results))?,
    }
    Ok(Done {
        summary: format!(
            "scored {} utterances with {variant}-gop, mean {mean:.4}, {skipped} phones skipped -> {}",
            results.len(),
            out.display()
        ),
        report: Some(out),
    })
}

fn gop_priors(ctx: &Ctx, a: PriorsArgs) -> CliResult<Done> {
    let alignments_path = ctx.path(a.alignments, "alignments", "alignments.csv")?;
    let out = ctx.path(a.out, "out", "priors.json")?;
    let manifest = optional_manifest(ctx, a.manifest)?;
    let silence = silence_set(a.silence);
    let from_manifest = manifest.and_then(|m| m.phone_set);
    let alignments = read_alignments(&alignments_path, from_manifest.as_ref(), &silence)
        .map_err(CliError::data)?;
    let phones = match from_manifest {
        Some(set) => set,
        None => {
            let dir = a.posteriors_dir.or_else(|| ctx.data_dir.as_ref().map(|d| d.join("posteriors")));
            let (Some(dir), Some(first)) = (dir, alignments.first()) else {
                return Err(CliError::Usage(
                    "no phone set: give --manifest with a phone_set or --posteriors-dir".into(),
                ));
            };
            let path = posterior_path(&dir, &first.utterance_id);
            let c = read_container(&path).map_err(CliError::data)?;
            PhoneSet::new(c.header.labels)
                .map_err(|e| CliError::Data(format!("{}: labels: {e}", path.display())))?
        }
    };
    let priors = estimate_priors(&alignments, &phones, a.frame_shift_ms, a.smoothing)
        .map_err(CliError::data)?;
    write_report(&out, &json_bytes(&priors))?;
    Ok(Done {
        summary: format!(
            "priors for {} phones from {} utterances -> {}",
            phones.len(),
            alignments.len(),
            out.display()
        ),
        report: Some(out),
    })
}

fn run_correlate(ctx: &Ctx, a: CorrelateArgs) -> CliResult<Done> {
    let variant = GopVariant::from(a.variant);
    let protocol = Protocol::from(a.protocol);
    let scores = ctx.path(a.scores, "scores", &format!("reports/scores-{variant}.csv"))?;
    let ext = if a.format == Format::Csv { "csv" } else { "json" };
    let out = ctx.output(a.out, &format!("correlation-{variant}-{protocol}.{ext}"))?;
    let scored = read_scored(&scores).map_err(CliError::data)?;
    let selected = select_for_protocol(&scored, protocol);
    let report = correlate(&selected, protocol, variant)
        .map_err(|e| CliError::Data(format!("{}: {e}", scores.display())))?;
    match a.format {
        Format::Json => write_report(&out, &json_bytes(&report))?,
        Format::Csv => {
            let text = format!(
                "variant,protocol,tau,n\n{},{},{},{}\n",
                report.variant, report.protocol, report.tau, report.n
            );
            write_report(&out, text.as_bytes())?;
        }
    }
    if let Some(path) = a.summary_out {
        write_report(&path, &render_summary_csv(&group_summary(&selected)))?;
    }
    Ok(Done {
        summary: format!(
            "tau {:.4} (n={}, {variant}, {protocol}) -> {}",
            report.tau,
            report.n,
            out.display()
        ),
        report: Some(out),
    })
}

fn run_stats(ctx: &Ctx, a: StatsArgs) -> CliResult<Done> {
    let input = ctx.path(a.annotations, "annotations", STORE_FILE)?;
    let records = load_annotation_records(&input).map_err(CliError::data)?;
    let report = StatsReport::from_records(&records);
    let out = match a.format {
        Format::Csv => {
            let dir = ctx.output(a.out, "stats")?;
            for (name, bytes) in render_stats_tables(&report) {
                write_report(&dir.join(name), &bytes)?;
            }
            dir
        }
        Format::Json => {
            let path = ctx.output(a.out, "stats.json")?;
            write_report(&path, &json_bytes(&report))?;
            path
        }
    };
    Ok(Done {
        summary: format!(
            "{} records over {} words -> {}",
            records.len(),
            report.error_tables.words,
            out.display()
        ),
        report: Some(out),
    })
}

fn load_pooled(ctx: &Ctx, given: Option<PathBuf>) -> CliResult<PooledLayers> {
    let dir = ctx.path(given, "embeddings-dir", "embeddings")?;
    load_pooled_layers(&dir).map_err(CliError::data)
}

fn load_label_table(ctx: &Ctx, given: Option<PathBuf>) -> CliResult<LabelTable> {
    let path = ctx.path(given, "labels", "labels.csv")?;
    read_labels(&path).map_err(CliError::data)
}

fn clf_pool(ctx: &Ctx, a: PoolArgs) -> CliResult<Done> {
    let pooled = load_pooled(ctx, a.embeddings_dir)?;
    let out = ctx.path(a.out, "out", "pooled")?;
    write_pooled(&out, &pooled).map_err(CliError::data)?;
    Ok(Done {
        summary: format!(
            "pooled {} utterances over {} layers -> {}",
            pooled.ids.len(),
            pooled.layers.len(),
            out.display()
        ),
        report: Some(out),
    })
}

fn parse_disfluencies(names: &[String], table: &LabelTable) -> CliResult<Vec<Disfluency>> {
    if names.is_empty() {
        return Ok(table.keys().copied().collect());
    }
    let mut out = Vec::new();
    for n in names {
        let d: Disfluency = n.parse().map_err(|e| CliError::Usage(format!("--disfluency: {e}")))?;
        if !out.contains(&d) {
            out.push(d);
        }
    }
    Ok(out)
}

fn clf_grid(ctx: &Ctx, a: GridArgs) -> CliResult<Done> {
    let table = load_label_table(ctx, a.labels)?;
    let disfluencies = parse_disfluencies(&a.disfluency, &table)?;
    let ext = if a.format == Format::Csv { "csv" } else { "json" };
    let out = ctx.output(a.out, &format!("grid.{ext}"))?;
    let pooled = load_pooled(ctx, a.embeddings_dir)?;
    let defaults = GridConfig::default();
    let config = GridConfig {
        gammas: a.gammas.unwrap_or(defaults.gammas),
        cs: a.cs.unwrap_or(defaults.cs),
        folds: a.folds,
        seed: a.seed,
        min_variance: a.min_variance,
        class_weight: match a.class_weight {
            ClassWeightArg::None => ClassWeight::None,
            ClassWeightArg::Balanced => ClassWeight::Balanced,
        },
        ..defaults
    };
    config
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let mut results = Vec::new();
    for d in disfluencies {
        let counts = table
            .get(&d)
            .ok_or_else(|| CliError::Data(format!("no labels for {d}")))?;
        let (ids, labels) = binary_labels(counts);
        let layers = pooled.select(&ids).map_err(CliError::Data)?;
        let r = grid_search(d, &layers, &labels, &config)
            .map_err(|e| CliError::Data(format!("{d}: {e}")))?;
        results.push(r);
    }
    match a.format {
        Format::Json => write_report(&out, &json_bytes(&results))?,
        Format::Csv => write_report(&out, &render_grid_csv(&results))?,
    }
    let best: Vec<String> = results
        .iter()
        .map(|r| format!("{} layer {} f1 {:.3}", r.disfluency, r.best_layer, r.best_f1))
        .collect();
    Ok(Done {
        summary: format!("{} -> {}", best.join("; "), out.display()),
        report: Some(out),
    })
}

fn clf_train(ctx: &Ctx, a: TrainArgs) -> CliResult<Done> {
    let grid_path = ctx.path(a.grid, "grid", "reports/grid.json")?;
    let out = ctx.output(a.out, "detectors.json")?;
    let grids: Vec<GridSearchResult> = read_json(&grid_path)?;
    let table = load_label_table(ctx, a.labels)?;
    let pooled = load_pooled(ctx, a.embeddings_dir)?;
    let config = GridConfig::default();
    let mut detectors = Vec::new();
    for g in &grids {
        let counts = table
            .get(&g.disfluency)
            .ok_or_else(|| CliError::Data(format!("no labels for {}", g.disfluency)))?;
        let (ids, labels) = binary_labels(counts);
        let layers = pooled.select(&ids).map_err(CliError::Data)?;
        let det = train_final(g, &layers, &labels, &config)
            .map_err(|e| CliError::Data(format!("{}: {e}", g.disfluency)))?;
        detectors.push(det);
    }
    write_report(&out, &json_bytes(&detectors))?;
    Ok(Done {
        summary: format!("trained {} detectors -> {}", detectors.len(), out.display()),
        report: Some(out),
    })
}

fn clf_eval(ctx: &Ctx, a: EvalArgs) -> CliResult<Done> {
    let det_path = ctx.path(a.detectors, "detectors", "reports/detectors.json")?;
    let ext = if a.format == Format::Csv { "csv" } else { "json" };
    let out = ctx.output(a.out, &format!("eval.{ext}"))?;
    let detectors: Vec<DisfluencyDetector> = read_json(&det_path)?;
    let table = load_label_table(ctx, a.labels)?;
    let pooled = load_pooled(ctx, a.embeddings_dir)?;
    let mut report = EvalReport::default();
    for det in &detectors {
        let counts = table
            .get(&det.disfluency)
            .ok_or_else(|| CliError::Data(format!("no target labels for {}", det.disfluency)))?;
        let (ids, labels) = binary_labels(counts);
        let layers = pooled.select(&ids).map_err(CliError::Data)?;
        let r = cross_corpus_eval(std::slice::from_ref(det), &layers, &[(det.disfluency, labels)])
            .map_err(|e| CliError::Data(format!("{}: {e}", det.disfluency)))?;
        report.rows.extend(r.rows);
    }
    match a.format {
        Format::Csv => write_report(&out, &render_eval_csv(&report))?,
        Format::Json => write_report(&out, &json_bytes(&report))?,
    }
    let parts: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("{} f1_id {:.3} f1_nid {:.3}", r.disfluency, r.f1_id, r.f1_nid))
        .collect();
    Ok(Done {
        summary: format!("{} -> {}", parts.join("; "), out.display()),
        report: Some(out),
    })
}

#[derive(Debug, Serialize)]
struct Checked {
    input: &'static str,
    path: PathBuf,
    items: usize,
}

fn run_validate(ctx: &Ctx, a: ValidateArgs) -> CliResult<Done> {
    let explicit = a.manifest.is_some()
        || a.alignments.is_some()
        || a.posteriors_dir.is_some()
        || a.annotations.is_some()
        || a.embeddings_dir.is_some()
        || a.labels.is_some();
    // Without explicit inputs, check whichever default files exist.
    let pick = |given: Option<PathBuf>, default: &str| -> Option<PathBuf> {
        if explicit {
            given
        } else {
            ctx.data_dir
                .as_ref()
                .map(|d| d.join(default))
                .filter(|p| p.exists())
        }
    };
    let manifest_path = pick(a.manifest, "manifest.json");
    let alignments_path = pick(a.alignments, "alignments.csv");
    let posteriors_dir = pick(a.posteriors_dir, "posteriors");
    let annotations_path = pick(a.annotations, STORE_FILE);
    let embeddings_dir = pick(a.embeddings_dir, "embeddings");
    let labels_path = pick(a.labels, "labels.csv");
    if [&manifest_path, &alignments_path, &posteriors_dir, &annotations_path, &embeddings_dir, &labels_path]
        .iter()
        .all(|p| p.is_none())
    {
        return Err(CliError::Usage("nothing to validate".into()));
    }

    let mut checked = Vec::new();
    let mut manifest = None;
    if let Some(path) = manifest_path {
        let m = load_manifest(&path)?;
        checked.push(Checked {
            input: "manifest",
            items: m.utterances.len(),
            path,
        });
        manifest = Some(m);
    }
    let phones = manifest.as_ref().and_then(|m| m.phone_set.clone());
    let mut aligned_ids = Vec::new();
    if let Some(path) = alignments_path {
        let al = read_alignments(&path, phones.as_ref(), &silence_set(a.silence))
            .map_err(CliError::data)?;
        if let Some(m) = &manifest {
            if let Some(x) = al.iter().find(|x| m.get(&x.utterance_id).is_none()) {
                return Err(CliError::Data(format!(
                    "{}: utterance `{}` is not in the manifest",
                    path.display(),
                    x.utterance_id
                )));
            }
        }
        aligned_ids = al.iter().map(|x| x.utterance_id.clone()).collect();
        checked.push(Checked {
            input: "alignments",
            items: al.len(),
            path,
        });
    }
    if let Some(dir) = posteriors_dir {
        let shared = phones.clone().map(Arc::new);
        let mut files = BTreeMap::new();
        let entries = std::fs::read_dir(&dir)
            .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        for entry in entries {
            let entry = entry.map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
            let path = entry.path();
            if let Some(id) = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_suffix(".bin"))
            {
                files.insert(id.to_string(), path.clone());
            }
        }
        for (id, path) in &files {
            read_posteriors(path, id, shared.clone()).map_err(CliError::data)?;
        }
        if let Some(missing) = aligned_ids.iter().find(|id| !files.contains_key(*id)) {
            return Err(CliError::Data(format!(
                "{}: no posteriors for aligned utterance `{missing}`",
                dir.display()
            )));
        }
        checked.push(Checked {
            input: "posteriors",
            items: files.len(),
            path: dir,
        });
    }
    if let Some(path) = annotations_path {
        let records = load_annotation_records(&path).map_err(CliError::data)?;
        if let Some(m) = &manifest {
            for (i, r) in records.iter().enumerate() {
                let u = m.get(&r.utterance_id).ok_or_else(|| {
                    CliError::Data(format!(
                        "{}: record {i}: utterance `{}` is not in the manifest",
                        path.display(),
                        r.utterance_id
                    ))
                })?;
                r.validate_for_utterance(u.words.len()).map_err(|e| {
                    CliError::Data(format!("{}: record {i}: {e}", path.display()))
                })?;
            }
        }
        checked.push(Checked {
            input: "annotations",
            items: records.len(),
            path,
        });
    }
    if let Some(dir) = embeddings_dir {
        let items = if dir.join(crate::io::POOLED_INDEX).is_file() {
            load_pooled_layers(&dir).map_err(CliError::data)?.ids.len()
        } else {
            let sets = read_embedding_dir(&dir).map_err(CliError::data)?;
            PooledLayers::from_sets(&sets)
                .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?
                .ids
                .len()
        };
        checked.push(Checked {
            input: "embeddings",
            items,
            path: dir,
        });
    }
    if let Some(path) = labels_path {
        let table = read_labels(&path).map_err(CliError::data)?;
        checked.push(Checked {
            input: "labels",
            items: table.values().map(BTreeMap::len).sum(),
            path,
        });
    }

    let report = match a.out {
        Some(p) => Some(p),
        None => ctx.data_dir.as_ref().map(|d| d.join("reports/validate.json")),
    };
    if let Some(p) = &report {
        write_report(p, &json_bytes(&checked))?;
    }
    let parts: Vec<String> = checked
        .iter()
        .map(|c| format!("{} ({})", c.input, c.items))
        .collect();
    Ok(Done {
        summary: format!("valid: {}", parts.join(", ")),
        report,
    })
}

fn run_serve(ctx: &Ctx, a: ServeArgs, err: &mut dyn Write) -> CliResult<Done> {
    let data_dir = ctx.data_dir()?.to_path_buf();
    let manifest = ctx.path(a.manifest, "manifest", "manifest.json")?;
    let config = ServiceConfig {
        listen: a.listen,
        data_dir: data_dir.clone(),
        manifest,
    };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(CliError::data)?;
    let _ = writeln!(err, "listening on http://{}", a.listen);
    runtime.block_on(serve(config)).map_err(CliError::data)?;
    Ok(Done {
        summary: format!("server on {} stopped", a.listen),
        report: Some(data_dir.join(STORE_FILE)),
    })
}

fn run_export(ctx: &Ctx, a: ExportArgs) -> CliResult<Done> {
    let store = ctx.data_dir()?.join(STORE_FILE);
    let records = if store.exists() {
        read_annotations(&store).map_err(CliError::data)?.records
    } else {
        Vec::new()
    };
    let (bytes, ext) = match a.format {
        Format::Json => (render_annotations_json(&records), "json"),
        Format::Csv => (render_annotations_csv(&records), "csv"),
    };
    let out = ctx.output(a.out, &format!("export.{ext}"))?;
    write_report(&out, &bytes)?;
    Ok(Done {
        summary: format!("exported {} records -> {}", records.len(), out.display()),
        report: Some(out),
    })
}
