use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info, warn};

use sepeval::bss::{EvalMode, Metric};
use sepeval::campaign::{
    aggregate_with, evaluate_estimates, evaluate_track, pairwise_significance, read_report, run_parallel,
    write_report, Aggregation, EvalConfig, TrackScore,
};
use sepeval::dataset::{load_track, scan_corpus, validate_mixture, Corpus, Split, TrackRef, STEMS};
use sepeval::oracle::{oracle_separate, OracleConfig, OracleMethod, DEFAULT_MWF_ITERATIONS};
use sepeval::stft::{StftConfig, WindowKind};
use sepeval::wav::{save_wav, BitDepth};
use sepeval::{Error, Result};

const EXIT_FATAL: u8 = 1;
const EXIT_USAGE: u8 = 2;

/// Oracle source separation and framewise SDR/ISR/SIR/SAR evaluation for
/// stem corpora laid out as `root/{train,test}/<track>/<stem>.wav`.
#[derive(Parser, Debug)]
#[command(name = "sepeval", version, about)]
struct Cli {
    /// Maximum number of tracks processed concurrently (default: available cores).
    #[arg(long, global = true, env = "SEPEVAL_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Separate every track with an oracle mask, write the estimates and score them.
    Oracle(OracleArgs),
    /// Score estimate folders (`<estimates>/<track>/<target>.wav`) against the corpus.
    Eval(EvalArgs),
    /// Median tables from score reports.
    Aggregate(AggregateArgs),
    /// Pairwise significance between methods from score reports.
    Compare(CompareArgs),
    /// Check corpus layout and that each mixture equals the sum of its stems.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    V4,
    V3,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AggregationArg {
    TrackMedians,
    AllFrames,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BitDepthArg {
    Pcm16,
    Pcm24,
    Float32,
}

#[derive(Args, Debug)]
struct CorpusArgs {
    /// Corpus root directory.
    #[arg(long, env = "SEPEVAL_CORPUS")]
    corpus: PathBuf,

    /// Which split to process.
    #[arg(long, value_enum, default_value = "all", env = "SEPEVAL_SPLIT")]
    split: SplitArg,

    /// Only process these tracks (repeatable).
    #[arg(long = "track")]
    tracks: Vec<String>,
}

#[derive(Args, Debug)]
struct MetricArgs {
    /// Evaluation window in seconds.
    #[arg(long, default_value_t = 1.0, env = "SEPEVAL_WINDOW")]
    window: f64,

    /// Evaluation hop in seconds.
    #[arg(long, default_value_t = 1.0, env = "SEPEVAL_HOP")]
    hop: f64,

    /// Distortion filter length in taps.
    #[arg(long, default_value_t = 512, env = "SEPEVAL_FILTER_LEN")]
    filter_len: usize,

    /// v4: one filter set per track; v3: filters refitted in every window.
    #[arg(long, value_enum, default_value = "v4", env = "SEPEVAL_MODE")]
    mode: ModeArg,

    /// Skip the vocals/accompaniment evaluation.
    #[arg(long)]
    no_accompaniment: bool,
}

impl MetricArgs {
    fn config(&self) -> EvalConfig {
        EvalConfig {
            filter_len: self.filter_len,
            window: self.window,
            hop: self.hop,
            mode: match self.mode {
                ModeArg::V4 => EvalMode::V4Global,
                ModeArg::V3 => EvalMode::V3Windowed,
            },
            accompaniment: !self.no_accompaniment,
        }
    }
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[command(flatten)]
    corpus: CorpusArgs,

    /// Output root; estimates go to <output>/<method>/<track>/<target>.wav.
    #[arg(long, env = "SEPEVAL_OUTPUT")]
    output: PathBuf,

    /// IBM1, IBM2, IRM1, IRM2, MWF, or IRM with --alpha.
    #[arg(long, env = "SEPEVAL_METHOD")]
    method: String,

    /// Exponent of the ratio mask when --method IRM.
    #[arg(long, env = "SEPEVAL_ALPHA")]
    alpha: Option<f64>,

    /// Spatial model updates for MWF.
    #[arg(long, default_value_t = DEFAULT_MWF_ITERATIONS, env = "SEPEVAL_ITERATIONS")]
    iterations: usize,

    /// STFT window length in samples.
    #[arg(long, default_value_t = 4096, env = "SEPEVAL_STFT_WINDOW")]
    stft_window: usize,

    /// STFT hop in samples.
    #[arg(long, default_value_t = 1024, env = "SEPEVAL_STFT_HOP")]
    stft_hop: usize,

    /// Sample format of the written estimates.
    #[arg(long, value_enum, default_value = "float32")]
    bit_depth: BitDepthArg,

    /// Write estimates only, without scoring them.
    #[arg(long)]
    no_eval: bool,

    #[command(flatten)]
    metrics: MetricArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    corpus: CorpusArgs,

    /// Folder holding <track>/<target>.wav estimates.
    #[arg(long, env = "SEPEVAL_ESTIMATES")]
    estimates: PathBuf,

    /// Method name recorded in the reports (default: estimates folder name).
    #[arg(long, env = "SEPEVAL_METHOD")]
    method: Option<String>,

    /// Output root; reports go to <output>/<method>/<track>.json.
    #[arg(long, env = "SEPEVAL_OUTPUT")]
    output: PathBuf,

    #[command(flatten)]
    metrics: MetricArgs,
}

#[derive(Args, Debug)]
struct AggregateArgs {
    /// Report files or folders searched recursively for *.json.
    #[arg(required = true)]
    reports: Vec<PathBuf>,

    /// Output CSV path.
    #[arg(long, env = "SEPEVAL_OUTPUT")]
    output: PathBuf,

    /// Campaign value: median of track medians, or median of all frames.
    #[arg(long, value_enum, default_value = "track-medians")]
    aggregation: AggregationArg,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Report files or folders searched recursively for *.json.
    #[arg(required = true)]
    reports: Vec<PathBuf>,

    /// Output folder for significance_<target>_<metric>.{csv,json}.
    #[arg(long, env = "SEPEVAL_OUTPUT")]
    output: PathBuf,

    /// Metrics to compare (repeatable).
    #[arg(long = "metric", default_values_t = vec!["SDR".to_string()])]
    metrics: Vec<String>,

    /// Targets to compare (repeatable; default: every target in the reports).
    #[arg(long = "target")]
    targets: Vec<String>,

    /// P-value below which a pair is reported as significant.
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,

    /// Maximum allowed |mixture - sum of stems|.
    #[arg(long, default_value_t = 1e-2)]
    tolerance: f64,

    /// Also write a JSON manifest of the valid tracks.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

/// A failure that maps to the usage exit code.
#[derive(Debug)]
struct Usage(String);

enum Failure {
    Usage(String),
    Fatal(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Fatal(e)
    }
}

impl From<Usage> for Failure {
    fn from(u: Usage) -> Self {
        Failure::Usage(u.0)
    }
}

fn selected_tracks(args: &CorpusArgs) -> Result<(Corpus, Vec<TrackRef>)> {
    let corpus = scan_corpus(&args.corpus)?;
    let mut tracks: Vec<TrackRef> = corpus
        .tracks
        .iter()
        .filter(|t| match args.split {
            SplitArg::All => true,
            SplitArg::Train => t.split == Split::Train,
            SplitArg::Test => t.split == Split::Test,
        })
        .cloned()
        .collect();
    if !args.tracks.is_empty() {
        for name in &args.tracks {
            if !tracks.iter().any(|t| &t.name == name) {
                return Err(Error::Corpus(format!("track '{name}' not found in the selected split")));
            }
        }
        tracks.retain(|t| args.tracks.contains(&t.name));
    }
    if tracks.is_empty() {
        return Err(Error::Corpus("no tracks selected".into()));
    }
    Ok((corpus, tracks))
}

fn validate_metric_args(m: &MetricArgs) -> std::result::Result<(), Usage> {
    if !(m.window > 0.0 && m.window.is_finite()) || !(m.hop > 0.0 && m.hop.is_finite()) {
        return Err(Usage("--window and --hop must be positive".into()));
    }
    if m.filter_len == 0 {
        return Err(Usage("--filter-len must be at least 1".into()));
    }
    Ok(())
}

/// Writes the reports of one method and its aggregate table.
fn write_outputs(dir: &Path, scores: &[TrackScore]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for s in scores {
        write_report(std::slice::from_ref(s), dir.join(format!("{}.json", s.track)))?;
    }
    aggregate_with(scores, Aggregation::TrackMedians).write_csv(dir.join("summary.csv"))?;
    Ok(())
}

/// Collects successes in track order; fails only when every track failed.
fn collect_results(results: Vec<(String, Result<TrackScore>)>) -> Result<Vec<TrackScore>> {
    let total = results.len();
    let mut ok = Vec::new();
    for (name, r) in results {
        match r {
            Ok(s) => ok.push(s),
            Err(e) => error!("track '{name}': {e}"),
        }
    }
    if ok.is_empty() {
        return Err(Error::Corpus(format!("all {total} tracks failed")));
    }
    if ok.len() < total {
        warn!("{} of {total} tracks failed", total - ok.len());
    }
    Ok(ok)
}

fn cmd_oracle(args: &OracleArgs, workers: usize) -> std::result::Result<(), Failure> {
    let method = OracleMethod::parse(&args.method, args.alpha).map_err(|e| Usage(e.to_string()))?;
    if args.alpha.is_some() && !args.method.eq_ignore_ascii_case("IRM") {
        warn!("--alpha only applies to --method IRM; ignored for {method}");
    }
    validate_metric_args(&args.metrics)?;
    let stft = StftConfig::new(args.stft_window, args.stft_hop, WindowKind::Hann).map_err(|e| Usage(e.to_string()))?;
    let config = OracleConfig {
        stft,
        iterations: args.iterations,
        ..OracleConfig::default()
    };
    let eval = args.metrics.config();
    let bit_depth = match args.bit_depth {
        BitDepthArg::Pcm16 => BitDepth::Pcm16,
        BitDepthArg::Pcm24 => BitDepth::Pcm24,
        BitDepthArg::Float32 => BitDepth::Float32,
    };
    let (_, tracks) = selected_tracks(&args.corpus)?;
    let out_dir = args.output.join(method.name());
    fs::create_dir_all(&out_dir).map_err(Error::from)?;
    info!("{method}: {} tracks, {workers} workers", tracks.len());

    let results = run_parallel(&tracks, workers, |t| {
        let run = || -> Result<Option<TrackScore>> {
            let started = Instant::now();
            let track = load_track(t)?;
            let estimates = oracle_separate(&track.mixture, &track.sources(), method, &config)?;
            let track_dir = out_dir.join(&t.name);
            fs::create_dir_all(&track_dir)?;
            let mut named = BTreeMap::new();
            for (stem, est) in STEMS.iter().zip(estimates) {
                save_wav(track_dir.join(format!("{stem}.wav")), &est, bit_depth)?;
                named.insert(stem.to_string(), est);
            }
            let score = if args.no_eval {
                None
            } else {
                Some(evaluate_estimates(&track, &named, &method.name(), &eval)?)
            };
            info!("{}: done in {:.1} s", t.name, started.elapsed().as_secs_f64());
            Ok(score)
        };
        (t.name.clone(), run())
    });
    if args.no_eval {
        let failed = results.iter().filter(|(_, r)| r.is_err()).count();
        for (name, r) in &results {
            if let Err(e) = r {
                error!("track '{name}': {e}");
            }
        }
        if failed == results.len() {
            return Err(Error::Corpus(format!("all {failed} tracks failed")).into());
        }
        return Ok(());
    }
    let scores = collect_results(
        results
            .into_iter()
            .map(|(n, r)| (n, r.map(|s| s.expect("evaluated"))))
            .collect(),
    )?;
    write_outputs(&out_dir, &scores)?;
    Ok(())
}

fn cmd_eval(args: &EvalArgs, workers: usize) -> std::result::Result<(), Failure> {
    validate_metric_args(&args.metrics)?;
    if !args.estimates.is_dir() {
        return Err(Error::MissingFile(args.estimates.clone()).into());
    }
    let method = match &args.method {
        Some(m) => m.clone(),
        None => args
            .estimates
            .canonicalize()
            .ok()
            .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .ok_or_else(|| Usage("cannot infer a method name; pass --method".into()))?,
    };
    let eval = args.metrics.config();
    let (_, tracks) = selected_tracks(&args.corpus)?;
    info!("{method}: evaluating {} tracks in {} mode, {workers} workers", tracks.len(), eval.mode);
    let started = Instant::now();
    let results = run_parallel(&tracks, workers, |t| {
        (t.name.clone(), evaluate_track(t, args.estimates.join(&t.name), &method, &eval))
    });
    let scores = collect_results(results)?;
    write_outputs(&args.output.join(&method), &scores)?;
    info!("evaluation took {:.1} s", started.elapsed().as_secs_f64());
    Ok(())
}

fn collect_report_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
        entries.sort_by_key(|e| e.path());
        for e in entries {
            let p = e.path();
            if p.is_dir() {
                walk(&p, out)?;
            } else if p.extension().is_some_and(|x| x == "json") {
                out.push(p);
            }
        }
        Ok(())
    }
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            walk(input, &mut files)?;
        } else if input.is_file() {
            files.push(input.clone());
        } else {
            return Err(Error::MissingFile(input.clone()));
        }
    }
    Ok(files)
}

fn load_reports(inputs: &[PathBuf]) -> std::result::Result<Vec<TrackScore>, Failure> {
    let files = collect_report_files(inputs)?;
    let mut scores = Vec::new();
    for f in &files {
        scores.extend(read_report(f)?);
    }
    if scores.is_empty() {
        return Err(Usage("no score reports found in the given inputs".into()).into());
    }
    Ok(scores)
}

fn cmd_aggregate(args: &AggregateArgs) -> std::result::Result<(), Failure> {
    let scores = load_reports(&args.reports)?;
    let mode = match args.aggregation {
        AggregationArg::TrackMedians => Aggregation::TrackMedians,
        AggregationArg::AllFrames => Aggregation::AllFrames,
    };
    let table = aggregate_with(&scores, mode);
    if let Some(dir) = args.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::from)?;
    }
    table.write_csv(&args.output)?;
    info!("aggregated {} track reports into {}", scores.len(), args.output.display());
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> std::result::Result<(), Failure> {
    let metrics: Vec<Metric> = args
        .metrics
        .iter()
        .map(|m| m.parse::<Metric>().map_err(|e| Usage(e.to_string())))
        .collect::<std::result::Result<_, _>>()?;
    if !(args.threshold > 0.0 && args.threshold < 1.0) {
        return Err(Usage("--threshold must lie in (0, 1)".into()).into());
    }
    let scores = load_reports(&args.reports)?;
    let table = aggregate_with(&scores, Aggregation::TrackMedians);
    let methods = table.methods();
    if methods.len() < 2 {
        return Err(Usage(format!("compare needs reports from at least two methods, found {}", methods.len())).into());
    }
    let targets = if args.targets.is_empty() {
        table.targets()
    } else {
        args.targets.clone()
    };
    fs::create_dir_all(&args.output).map_err(Error::from)?;
    for target in &targets {
        for &metric in &metrics {
            let mut medians = table.track_medians(target, metric);
            for m in &methods {
                medians.entry(m.clone()).or_default();
            }
            let matrix = pairwise_significance(&medians, metric, target)?;
            let stem = format!("significance_{target}_{metric}");
            matrix.write(args.output.join(format!("{stem}.csv")), args.output.join(format!("{stem}.json")))?;
            for (i, a) in matrix.methods.iter().enumerate() {
                for (j, b) in matrix.methods.iter().enumerate().skip(i + 1) {
                    if let Some(p) = matrix.p_values[i][j].filter(|p| *p < args.threshold) {
                        info!("{target} {metric}: {a} vs {b} differ (p = {p:.3e})");
                    }
                }
            }
        }
    }
    Ok(())
}

fn cmd_validate(args: &ValidateArgs, workers: usize) -> std::result::Result<(), Failure> {
    let (corpus, tracks) = selected_tracks(&args.corpus)?;
    info!(
        "{} train and {} test tracks, {} folders skipped",
        corpus.count(Split::Train),
        corpus.count(Split::Test),
        corpus.warnings.len()
    );
    if let Some(path) = &args.manifest {
        corpus.manifest().write(path)?;
    }
    let reports = run_parallel(&tracks, workers, |t| (t.name.clone(), validate_mixture(t, args.tolerance)));
    let mut failed = 0;
    for (name, r) in reports {
        match r {
            Ok(rep) if rep.passed => info!("{name}: max deviation {:.3e}", rep.max_abs_deviation),
            Ok(rep) => {
                failed += 1;
                warn!("{name}: max deviation {:.3e} exceeds {:.3e}", rep.max_abs_deviation, rep.tolerance);
            }
            Err(e) => {
                failed += 1;
                error!("{name}: {e}");
            }
        }
    }
    if failed > 0 || !corpus.warnings.is_empty() {
        return Err(Error::Corpus(format!(
            "{failed} tracks failed validation, {} folders malformed",
            corpus.warnings.len()
        ))
        .into());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        eprintln!("error: --workers must be at least 1");
        return ExitCode::from(EXIT_USAGE);
    }
    let outcome = match &cli.command {
        Command::Oracle(a) => cmd_oracle(a, workers),
        Command::Eval(a) => cmd_eval(a, workers),
        Command::Aggregate(a) => cmd_aggregate(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Validate(a) => cmd_validate(a, workers),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Fatal(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FATAL)
        }
    }
}
