//! Runs one evaluation against a candidate scoring service.
//!
//! Wire protocol, per image:
//!
//! * request: `POST {base_url}/score`, body = raw image bytes,
//!   `Content-Type: image/png` or `image/jpeg`;
//! * success: status 200 with JSON body `{"score": <number>}`, the number
//!   finite and in `[0, 1]`.
//!
//! Anything else (other status, invalid JSON, missing field, non-finite or
//! out-of-range score, transport failure, timeout) is a processing error.
//! After `max_retries` further attempts the sample scores 0 with its error
//! flag set, i.e. it is treated as a detected attack. Candidate-side
//! failures never abort a run; evaluator-side faults (unreadable images,
//! unwritable checkpoint) do.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::Utc;
use futures::stream::{self, StreamExt};
use reqwest::header::CONTENT_TYPE;
use reqwest::StatusCode;
use thiserror::Error;

use crate::manifest::{Manifest, SampleRecord};
use crate::scores::{Checkpoint, EndpointEcho, Score, ScoreOutcome, ScoreSet};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(180);
pub const DEFAULT_MAX_RETRIES: u32 = 2;
pub const DEFAULT_MAX_INFLIGHT: usize = 4;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid endpoint config: {0}")]
    Config(String),
    #[error("reading image {path}: {source}")]
    Image { path: PathBuf, source: std::io::Error },
    #[error("checkpoint {path}: {source}")]
    Checkpoint { path: PathBuf, source: std::io::Error },
    #[error("http client: {0}")]
    Client(#[from] reqwest::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndpointConfig {
    pub base_url: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub max_inflight: usize,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            timeout: DEFAULT_TIMEOUT,
            max_retries: DEFAULT_MAX_RETRIES,
            max_inflight: DEFAULT_MAX_INFLIGHT,
        }
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.timeout.is_zero() {
            return Err(OrchestratorError::Config("timeout must be positive".into()));
        }
        if self.max_inflight == 0 {
            return Err(OrchestratorError::Config("max_inflight must be at least 1".into()));
        }
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return Err(OrchestratorError::Config(format!("base_url '{}' is not an http(s) URL", self.base_url)));
        }
        Ok(())
    }

    pub fn score_url(&self) -> String {
        format!("{}/score", self.base_url.trim_end_matches('/'))
    }

    pub fn echo(&self) -> EndpointEcho {
        EndpointEcho {
            base_url: self.base_url.clone(),
            timeout_ms: self.timeout.as_millis() as u64,
            max_retries: self.max_retries,
            max_inflight: self.max_inflight,
        }
    }
}

pub fn content_type_for(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        _ => "application/octet-stream",
    }
}

/// Validates a response body; the error string becomes the outcome detail.
pub fn parse_score_body(body: &[u8]) -> Result<Score, String> {
    let value: serde_json::Value = serde_json::from_slice(body).map_err(|_| "malformed body".to_string())?;
    let raw = value
        .as_object()
        .and_then(|o| o.get("score"))
        .ok_or_else(|| "malformed body: missing score".to_string())?;
    let score = raw.as_f64().ok_or_else(|| "malformed body: score is not a number".to_string())?;
    if !score.is_finite() {
        return Err("non-finite score".into());
    }
    Score::new(score).map_err(|_| "score out of range".into())
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub run_id: String,
    /// Scores CSV rewritten with resumed outcomes and appended as samples
    /// complete.
    pub checkpoint: Option<PathBuf>,
    /// Outcomes of an earlier partial run; their samples are not re-scored.
    pub resume: Option<ScoreSet>,
}

pub struct Orchestrator {
    cfg: EndpointConfig,
    client: reqwest::Client,
}

impl Orchestrator {
    pub fn new(cfg: EndpointConfig) -> Result<Self, OrchestratorError> {
        cfg.validate()?;
        let client = reqwest::Client::builder().no_proxy().build()?;
        Ok(Orchestrator { cfg, client })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    async fn attempt(&self, body: &[u8], content_type: &str) -> Result<Score, String> {
        let transport = |e: reqwest::Error| if e.is_timeout() { "timeout" } else { "transport" }.to_string();
        let resp = self
            .client
            .post(self.cfg.score_url())
            .header(CONTENT_TYPE, content_type)
            .body(body.to_vec())
            .timeout(self.cfg.timeout)
            .send()
            .await
            .map_err(transport)?;
        let status = resp.status();
        let bytes = resp.bytes().await.map_err(transport)?;
        if status != StatusCode::OK {
            return Err(format!("status {}", status.as_u16()));
        }
        parse_score_body(&bytes)
    }

    /// Scores in-memory image bytes. Never fails: errors fold into a zero
    /// score with the error flag.
    pub async fn score_bytes(&self, sample_id: &str, body: &[u8], content_type: &str) -> ScoreOutcome {
        let start = Instant::now();
        let mut detail = String::new();
        for attempt in 0..=self.cfg.max_retries {
            match self.attempt(body, content_type).await {
                Ok(score) => return ScoreOutcome::ok(sample_id, score, start.elapsed()),
                Err(e) => {
                    tracing::debug!(sample_id, attempt, error = %e, "scoring attempt failed");
                    detail = e;
                }
            }
        }
        ScoreOutcome::failed(sample_id, detail, start.elapsed())
    }

    /// Reads the sample's image from the manifest root and scores it.
    pub async fn score_one(&self, root: &Path, sample: &SampleRecord) -> Result<ScoreOutcome, OrchestratorError> {
        let path = root.join(&sample.path);
        let body = tokio::fs::read(&path)
            .await
            .map_err(|source| OrchestratorError::Image { path: path.clone(), source })?;
        Ok(self.score_bytes(&sample.sample_id, &body, content_type_for(&path)).await)
    }

    /// Scores every manifest sample with at most `max_inflight` requests
    /// outstanding. Outcomes are keyed by sample id, so the result does not
    /// depend on completion order.
    pub async fn run(&self, m: &Manifest, opts: RunOptions) -> Result<ScoreSet, OrchestratorError> {
        let mut set = ScoreSet::new(opts.run_id.clone());
        set.endpoint = Some(self.cfg.echo());
        set.started = Some(Utc::now());

        let wanted: HashSet<&str> = m.records.iter().map(|r| r.sample_id.as_str()).collect();
        if let Some(prior) = opts.resume {
            prior
                .outcomes
                .into_values()
                .filter(|o| wanted.contains(o.sample_id.as_str()))
                .for_each(|o| set.insert(o));
        }
        let mut checkpoint = match &opts.checkpoint {
            Some(path) => Some(
                Checkpoint::create(path, set.outcomes.values())
                    .map_err(|source| OrchestratorError::Checkpoint { path: path.clone(), source })?,
            ),
            None => None,
        };

        let pending: Vec<&SampleRecord> =
            m.records.iter().filter(|r| set.get(&r.sample_id).is_none()).collect();
        tracing::info!(total = m.len(), pending = pending.len(), "starting evaluation");

        let mut results = stream::iter(pending.into_iter().map(|r| self.score_one(&m.root, r)))
            .buffer_unordered(self.cfg.max_inflight);
        while let Some(outcome) = results.next().await {
            let outcome = outcome?;
            if let (Some(cp), Some(path)) = (checkpoint.as_mut(), &opts.checkpoint) {
                cp.append(&outcome)
                    .map_err(|source| OrchestratorError::Checkpoint { path: path.clone(), source })?;
            }
            set.insert(outcome);
        }
        set.finished = Some(Utc::now());
        Ok(set)
    }
}

pub async fn run_evaluation(
    m: &Manifest,
    cfg: EndpointConfig,
    opts: RunOptions,
) -> Result<ScoreSet, OrchestratorError> {
    Orchestrator::new(cfg)?.run(m, opts).await
}

/// [`run_evaluation`] on a private tokio runtime.
pub fn run_evaluation_blocking(
    m: &Manifest,
    cfg: EndpointConfig,
    opts: RunOptions,
) -> Result<ScoreSet, OrchestratorError> {
    let rt = tokio::runtime::Runtime::new()
        .map_err(|source| OrchestratorError::Config(format!("tokio runtime: {source}")))?;
    rt.block_on(run_evaluation(m, cfg, opts))
}
