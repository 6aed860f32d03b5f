use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use chrono::{DateTime, TimeZone, Utc};
use clap::{Parser, Subcommand};
use pad_eval::corpusgen::{self, CorpusError, CorpusSpec};
use pad_eval::leaderboard::{baseline_name, LeaderboardError, Store, SubmissionRecord, Track};
use pad_eval::manifest::{validate_manifest, Manifest, ManifestError};
use pad_eval::metrics::{evaluate_all, MetricsError, MetricsReport};
use pad_eval::orchestrator::{self, EndpointConfig, OrchestratorError, RunOptions};
use pad_eval::report::{self, ReportError};
use pad_eval::scores::{ScoreSet, ScoresError};
use thiserror::Error;

const WIRE_PROTOCOL: &str = "\
Wire protocol: for every manifest sample the image file is sent as the raw
body of `POST <endpoint>/score` with Content-Type image/png or image/jpeg.
The service answers 200 with `{\"score\": s}`, s a finite number in [0, 1];
higher means more likely bona fide. Any other status, an unparseable body,
a missing or non-finite score, a score outside [0, 1], a transport failure
or a timeout is a processing error. After the configured retries the sample
is recorded as score 0 with error_flag 1, i.e. as a detected attack.";

#[derive(Parser)]
#[command(name = "pad-eval", version, about = "Evaluate ID-card presentation attack detectors", after_help = WIRE_PROTOCOL)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus (images/*.png + manifest.csv).
    GenCorpus {
        /// Corpus spec JSON; defaults to the Track-1-shaped 12,000-image corpus.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a manifest and print its class/country counts.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Score every manifest image against a scoring service.
    #[command(after_help = WIRE_PROTOCOL)]
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// Base URL of the service, e.g. http://127.0.0.1:8080
        #[arg(long)]
        endpoint: String,
        /// Per-request timeout in seconds.
        #[arg(long, default_value_t = orchestrator::DEFAULT_TIMEOUT.as_secs_f64())]
        timeout: f64,
        /// Maximum concurrent requests.
        #[arg(long, default_value_t = orchestrator::DEFAULT_MAX_INFLIGHT)]
        inflight: usize,
        /// Extra attempts after a failed request.
        #[arg(long, default_value_t = orchestrator::DEFAULT_MAX_RETRIES)]
        retries: u32,
        /// Scores CSV of an interrupted run; its samples are not re-scored.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Scores CSV. `<out>.partial` is kept up to date while running.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute metrics; writes the JSON report and DET curve CSVs.
    Metrics {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the leaderboard of one track as CSV.
    Rank {
        #[arg(long)]
        store: PathBuf,
        /// Baseline report JSON, ranked as "Baseline" (or "Baseline-N").
        #[arg(long)]
        baseline: Vec<PathBuf>,
        #[arg(long, default_value = "track1")]
        track: Track,
        #[arg(long)]
        out: PathBuf,
    },
    /// Record a submission in the leaderboard store.
    Submit {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        participant: String,
        #[arg(long)]
        track: Track,
        /// Metrics report JSON as written by `metrics`.
        #[arg(long)]
        report: PathBuf,
        /// Submission id; defaults to the next free `<track>-NNNN`.
        #[arg(long)]
        id: Option<String>,
        /// RFC 3339 timestamp; defaults to now.
        #[arg(long)]
        submitted_at: Option<DateTime<Utc>>,
        /// Path or URL of the scores behind the report.
        #[arg(long)]
        scores_ref: Option<String>,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Scores(#[from] ScoresError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Orchestrator(#[from] OrchestratorError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Leaderboard(#[from] LeaderboardError),
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Manifest(_) | CliError::Scores(_) => 3,
            CliError::Corpus(_) => 4,
            CliError::Orchestrator(_) => 5,
            CliError::Metrics(_) | CliError::Report(_) => 6,
            CliError::Leaderboard(_) => 7,
            CliError::Io { .. } => 8,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn gen_corpus(spec: Option<PathBuf>, out: &Path) -> Result<(), CliError> {
    let spec = match spec {
        Some(p) => read_json::<CorpusSpec>(&p)?,
        None => CorpusSpec::track1_default(),
    };
    let m = corpusgen::gen_corpus(&spec, out)?;
    println!("wrote {} images and {}", m.len(), out.join("manifest.csv").display());
    Ok(())
}

fn validate(manifest: &Path, json: bool) -> Result<(), CliError> {
    let v = validate_manifest(&Manifest::load(manifest)?);
    if json {
        println!("{}", v.to_json());
    } else {
        print!("{}", v.render_text());
    }
    if v.is_valid() {
        Ok(())
    } else {
        Err(CliError::Input(format!("{}: {} violation(s)", manifest.display(), v.violations.len())))
    }
}

fn partial_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".partial");
    out.with_file_name(name)
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    manifest: &Path,
    endpoint: String,
    timeout: f64,
    inflight: usize,
    retries: u32,
    resume: Option<PathBuf>,
    out: &Path,
) -> Result<(), CliError> {
    let m = Manifest::load(manifest)?;
    let timeout = Duration::try_from_secs_f64(timeout)
        .map_err(|_| CliError::Input(format!("invalid timeout {timeout}")))?;
    let cfg = EndpointConfig { base_url: endpoint, timeout, max_retries: retries, max_inflight: inflight };
    let resume = resume.map(|p| ScoreSet::load(&p)).transpose()?;
    let checkpoint = partial_path(out);
    let run_id = out.file_stem().and_then(|s| s.to_str()).unwrap_or("scores").to_string();
    let opts = RunOptions { run_id, checkpoint: Some(checkpoint.clone()), resume };
    let set = orchestrator::run_evaluation_blocking(&m, cfg, opts)?;
    set.save(out)?;
    std::fs::remove_file(&checkpoint).map_err(|source| CliError::Io { path: checkpoint, source })?;
    println!("scored {} samples ({} errors) -> {}", set.len(), set.error_count(), out.display());
    Ok(())
}

fn metrics(manifest: &Path, scores: &Path, out: &Path) -> Result<(), CliError> {
    let m = Manifest::load(manifest)?;
    let set = ScoreSet::load(scores)?;
    let r = evaluate_all(&set, &m)?;
    let files = report::write_all(&r, out)?;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "EER {}%  BPCER10 {}%  BPCER20 {}%  BPCER100 {}%  AVRank {}%  ({} files in {})",
        report::percent(r.eer()),
        report::percent(r.global.bpcer_ap.bpcer10.rate),
        report::percent(r.global.bpcer_ap.bpcer20.rate),
        report::percent(r.global.bpcer_ap.bpcer100.rate),
        report::percent(r.av_rank),
        files.len(),
        out.display()
    );
    Ok(())
}

fn rank(store: &Path, baselines: &[PathBuf], track: Track, out: &Path) -> Result<(), CliError> {
    let store = Store::open(store)?;
    let epoch = Utc.timestamp_opt(0, 0).unwrap();
    let baselines = baselines
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let report: MetricsReport = read_json(p)?;
            report.check()?;
            Ok(SubmissionRecord {
                submission_id: format!("baseline-{}", i + 1),
                participant: baseline_name(i, baselines.len()),
                track,
                submitted_at: epoch,
                report,
                scores_ref: Some(p.display().to_string()),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let table = store.rank_table(track, &baselines);
    let rendered = report::render_rank_table(&table)?;
    std::fs::write(out, &rendered.csv).map_err(|source| CliError::Io { path: out.to_path_buf(), source })?;
    print!("{}", rendered.text);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn submit(
    store: &Path,
    participant: String,
    track: Track,
    report: &Path,
    id: Option<String>,
    submitted_at: Option<DateTime<Utc>>,
    scores_ref: Option<String>,
) -> Result<(), CliError> {
    let participant = participant.trim().to_string();
    if participant.is_empty() {
        return Err(CliError::Input("participant name is empty".into()));
    }
    if participant.starts_with("Baseline") {
        return Err(CliError::Input(format!("participant name '{participant}' is reserved for baselines")));
    }
    let report: MetricsReport = read_json(report)?;
    let mut store = Store::open(store)?;
    let submission_id = id.unwrap_or_else(|| store.next_submission_id(track));
    let record = SubmissionRecord {
        submission_id,
        participant,
        track,
        submitted_at: submitted_at.unwrap_or_else(Utc::now),
        report,
        scores_ref,
    };
    let id = store.record_submission(record)?;
    println!("{id}");
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenCorpus { spec, out } => gen_corpus(spec, &out),
        Command::Validate { manifest, json } => validate(&manifest, json),
        Command::Evaluate { manifest, endpoint, timeout, inflight, retries, resume, out } => {
            evaluate(&manifest, endpoint, timeout, inflight, retries, resume, &out)
        }
        Command::Metrics { manifest, scores, out } => metrics(&manifest, &scores, &out),
        Command::Rank { store, baseline, track, out } => rank(&store, &baseline, track, &out),
        Command::Submit { store, participant, track, report, id, submitted_at, scores_ref } => {
            submit(&store, participant, track, &report, id, submitted_at, scores_ref)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
