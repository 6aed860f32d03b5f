//! Per-sample scores and the ScoreSet CSV interchange format
//! (`sample_id,score,error_flag,error_detail`).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SCORES_HEADER: &str = "sample_id,score,error_flag,error_detail";

#[derive(Debug, Error)]
pub enum ScoresError {
    #[error("score {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("scores io: {0}")]
    Io(#[from] std::io::Error),
}

/// A candidate's confidence that a sample is bona fide. 0 means total
/// confidence in an attack. An errored sample always carries value 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    value: f64,
    error_flag: bool,
}

impl Score {
    pub fn new(value: f64) -> Result<Self, ScoresError> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Score { value, error_flag: false })
        } else {
            Err(ScoresError::OutOfRange(value))
        }
    }

    pub fn error() -> Self {
        Score { value: 0.0, error_flag: true }
    }

    pub fn value(self) -> f64 {
        self.value
    }

    pub fn is_error(self) -> bool {
        self.error_flag
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreOutcome {
    pub sample_id: String,
    pub score: Score,
    pub latency: Duration,
    /// Present iff the score carries the error flag.
    pub error_detail: Option<String>,
}

impl ScoreOutcome {
    pub fn ok(sample_id: impl Into<String>, score: Score, latency: Duration) -> Self {
        ScoreOutcome { sample_id: sample_id.into(), score, latency, error_detail: None }
    }

    pub fn failed(sample_id: impl Into<String>, detail: impl Into<String>, latency: Duration) -> Self {
        ScoreOutcome {
            sample_id: sample_id.into(),
            score: Score::error(),
            latency,
            error_detail: Some(detail.into()),
        }
    }
}

/// Echo of the endpoint configuration a ScoreSet was produced with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndpointEcho {
    pub base_url: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub max_inflight: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub run_id: String,
    pub endpoint: Option<EndpointEcho>,
    pub outcomes: BTreeMap<String, ScoreOutcome>,
    pub started: Option<DateTime<Utc>>,
    pub finished: Option<DateTime<Utc>>,
}

impl ScoreSet {
    pub fn new(run_id: impl Into<String>) -> Self {
        ScoreSet {
            run_id: run_id.into(),
            endpoint: None,
            outcomes: BTreeMap::new(),
            started: None,
            finished: None,
        }
    }

    pub fn insert(&mut self, outcome: ScoreOutcome) {
        self.outcomes.insert(outcome.sample_id.clone(), outcome);
    }

    pub fn get(&self, sample_id: &str) -> Option<&ScoreOutcome> {
        self.outcomes.get(sample_id)
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn error_count(&self) -> usize {
        self.outcomes.values().filter(|o| o.score.is_error()).count()
    }

    /// Rows sorted by sample_id. Timing is not part of the file.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.outcomes.len() + 1));
        out.push_str(SCORES_HEADER);
        out.push('\n');
        for o in self.outcomes.values() {
            out.push_str(&csv_row(o));
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), ScoresError> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn parse_csv(run_id: impl Into<String>, text: &str) -> Result<Self, ScoresError> {
        let mut set = ScoreSet::new(run_id);
        for outcome in parse_rows(text)? {
            set.insert(outcome);
        }
        Ok(set)
    }

    /// Loads a scores file; the run id is the file stem.
    pub fn load(path: &Path) -> Result<Self, ScoresError> {
        let text = std::fs::read_to_string(path)?;
        let run_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
        ScoreSet::parse_csv(run_id, &text)
    }
}

fn csv_row(o: &ScoreOutcome) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record([
        o.sample_id.as_str(),
        &o.score.value().to_string(),
        if o.score.is_error() { "1" } else { "0" },
        o.error_detail.as_deref().unwrap_or(""),
    ])
    .expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("fields are UTF-8")
}

/// Append-only scores CSV used to checkpoint a run in progress.
pub struct Checkpoint {
    file: std::fs::File,
}

impl Checkpoint {
    /// Atomically replaces `path` with a header plus `completed`, then keeps
    /// it open for appending.
    pub fn create<'a>(
        path: &Path,
        completed: impl IntoIterator<Item = &'a ScoreOutcome>,
    ) -> std::io::Result<Self> {
        let mut text = String::from(SCORES_HEADER);
        text.push('\n');
        for o in completed {
            text.push_str(&csv_row(o));
        }
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, path)?;
        let file = std::fs::OpenOptions::new().append(true).open(path)?;
        Ok(Checkpoint { file })
    }

    pub fn append(&mut self, o: &ScoreOutcome) -> std::io::Result<()> {
        self.file.write_all(csv_row(o).as_bytes())?;
        self.file.flush()
    }
}

fn parse_rows(text: &str) -> Result<Vec<ScoreOutcome>, ScoresError> {
    let err = |line: u64, message: String| ScoresError::Parse { line, message };
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| err(1, e.to_string()))?;
    if header.is_empty() {
        return Err(err(1, "missing header".into()));
    }
    if !header.iter().eq(SCORES_HEADER.split(',')) {
        let found = header.iter().collect::<Vec<_>>().join(",");
        return Err(err(1, format!("expected header '{SCORES_HEADER}', found '{found}'")));
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let fields = row.map_err(|e| err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = fields.position().map_or(0, |p| p.line());
        if fields.len() != 4 {
            return Err(err(line, format!("expected 4 columns, found {}", fields.len())));
        }
        let value: f64 = fields[1]
            .parse()
            .map_err(|_| err(line, format!("invalid score '{}'", &fields[1])))?;
        let flagged = match &fields[2] {
            "0" | "false" => false,
            "1" | "true" => true,
            other => return Err(err(line, format!("invalid error_flag '{other}'"))),
        };
        let outcome = if flagged {
            if value != 0.0 {
                return Err(err(line, format!("errored sample has nonzero score {value}")));
            }
            let detail = if fields[3].is_empty() { "unspecified" } else { &fields[3] };
            ScoreOutcome::failed(&fields[0], detail, Duration::ZERO)
        } else {
            let score = Score::new(value).map_err(|e| err(line, e.to_string()))?;
            ScoreOutcome::ok(&fields[0], score, Duration::ZERO)
        };
        out.push(outcome);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_range_is_enforced() {
        assert!(Score::new(0.0).is_ok());
        assert!(Score::new(1.0).is_ok());
        assert!(Score::new(1.7).is_err());
        assert!(Score::new(-0.1).is_err());
        assert!(Score::new(f64::NAN).is_err());
        let e = Score::error();
        assert_eq!(e.value(), 0.0);
        assert!(e.is_error());
    }

    #[test]
    fn csv_round_trip() {
        let mut set = ScoreSet::new("r");
        set.insert(ScoreOutcome::ok("b", Score::new(0.73).unwrap(), Duration::ZERO));
        set.insert(ScoreOutcome::failed("a", "score out of range", Duration::ZERO));
        set.insert(ScoreOutcome::failed("c", "malformed body: expected ',' at 1:9", Duration::ZERO));
        let text = set.to_csv();
        assert_eq!(
            text,
            "sample_id,score,error_flag,error_detail\na,0,1,score out of range\nb,0.73,0,\n\
             c,0,1,\"malformed body: expected ',' at 1:9\"\n"
        );
        assert_eq!(ScoreSet::parse_csv("r", &text).unwrap(), set);
    }

    #[test]
    fn rejects_inconsistent_rows() {
        let bad = "sample_id,score,error_flag,error_detail\na,0.5,1,transport\n";
        assert!(ScoreSet::parse_csv("r", bad).is_err());
        let bad = "sample_id,score,error_flag,error_detail\na,1.5,0,\n";
        assert!(matches!(ScoreSet::parse_csv("r", bad), Err(ScoresError::Parse { line: 2, .. })));
    }
}
