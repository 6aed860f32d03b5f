//! Submission store and ranked leaderboard tables.
//!
//! The store is an append-only JSON-lines file, one [`SubmissionRecord`]
//! per line. Only the best submission per participant is ranked; the order
//! is ascending AV_Rank, then EER, then earliest submission time.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{Ap, MetricsError, MetricsReport};

#[derive(Debug, Error)]
pub enum LeaderboardError {
    #[error("duplicate submission_id '{0}'")]
    DuplicateSubmission(String),
    #[error("submission '{id}' has an invalid report: {source}")]
    InvalidReport { id: String, source: MetricsError },
    #[error("store {path} line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("store {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Track {
    Track1,
    Track2,
}

impl fmt::Display for Track {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Track::Track1 => "track1",
            Track::Track2 => "track2",
        })
    }
}

impl FromStr for Track {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "track1" | "1" => Ok(Track::Track1),
            "track2" | "2" => Ok(Track::Track2),
            other => Err(format!("unknown track '{other}'; expected track1 or track2")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionRecord {
    pub submission_id: String,
    pub participant: String,
    pub track: Track,
    pub submitted_at: DateTime<Utc>,
    pub report: MetricsReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores_ref: Option<String>,
}

fn rank_order(a: &SubmissionRecord, b: &SubmissionRecord) -> Ordering {
    a.report
        .av_rank
        .total_cmp(&b.report.av_rank)
        .then(a.report.eer().total_cmp(&b.report.eer()))
        .then(a.submitted_at.cmp(&b.submitted_at))
        .then_with(|| a.participant.cmp(&b.participant))
        .then_with(|| a.submission_id.cmp(&b.submission_id))
}

/// Best submission of each participant on `track`, ordered by participant.
pub fn best_per_participant<'a>(
    submissions: impl IntoIterator<Item = &'a SubmissionRecord>,
    track: Track,
) -> Vec<SubmissionRecord> {
    let mut best: BTreeMap<&str, &SubmissionRecord> = BTreeMap::new();
    for s in submissions.into_iter().filter(|s| s.track == track) {
        best.entry(&s.participant)
            .and_modify(|cur| {
                if rank_order(s, cur) == Ordering::Less {
                    *cur = s;
                }
            })
            .or_insert(s);
    }
    best.into_values().cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRow {
    pub rank: usize,
    pub participant: String,
    pub submission_id: String,
    pub eer: f64,
    pub bpcer10: f64,
    pub bpcer20: f64,
    pub bpcer100: f64,
    pub av_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTable {
    pub track: Track,
    pub rows: Vec<RankedRow>,
}

/// Ranks the best submission per participant together with baseline
/// records (ordinary submissions under reserved names such as "Baseline-1").
pub fn rank_table(track: Track, submissions: &[SubmissionRecord], baselines: &[SubmissionRecord]) -> RankedTable {
    let baselines = baselines.iter().map(|b| SubmissionRecord { track, ..b.clone() }).collect::<Vec<_>>();
    let mut best = best_per_participant(submissions.iter().chain(&baselines), track);
    best.sort_by(rank_order);
    let rows = best
        .into_iter()
        .enumerate()
        .map(|(i, s)| RankedRow {
            rank: i + 1,
            eer: s.report.eer(),
            bpcer10: s.report.bpcer(Ap::Ten),
            bpcer20: s.report.bpcer(Ap::Twenty),
            bpcer100: s.report.bpcer(Ap::Hundred),
            av_rank: s.report.av_rank,
            participant: s.participant,
            submission_id: s.submission_id,
        })
        .collect();
    RankedTable { track, rows }
}

/// Reserved participant name for the `i`-th (0-based) of `n` baselines.
pub fn baseline_name(i: usize, n: usize) -> String {
    if n == 1 {
        "Baseline".into()
    } else {
        format!("Baseline-{}", i + 1)
    }
}

/// JSON-lines submission store. Single writer; readers tolerate a torn
/// final line left by an in-progress append.
#[derive(Debug)]
pub struct Store {
    path: PathBuf,
    records: Vec<SubmissionRecord>,
}

impl Store {
    /// Opens `path`, creating an empty store if the file does not exist.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, LeaderboardError> {
        let path = path.into();
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(source) => return Err(LeaderboardError::Io { path, source }),
        };
        let complete = text.ends_with('\n');
        let lines: Vec<&str> = text.lines().collect();
        let mut records = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<SubmissionRecord>(line) {
                Ok(r) => records.push(r),
                Err(_) if i + 1 == lines.len() && !complete => {
                    tracing::warn!(path = %path.display(), "ignoring torn final line");
                }
                Err(e) => {
                    return Err(LeaderboardError::Corrupt { path, line: i + 1, message: e.to_string() })
                }
            }
        }
        Ok(Store { path, records })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn records(&self) -> &[SubmissionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn tracks(&self) -> Vec<Track> {
        let mut t: Vec<Track> = self.records.iter().map(|r| r.track).collect();
        t.sort();
        t.dedup();
        t
    }

    /// Appends a submission and syncs it to disk.
    pub fn record_submission(&mut self, r: SubmissionRecord) -> Result<String, LeaderboardError> {
        let ids: HashSet<&str> = self.records.iter().map(|s| s.submission_id.as_str()).collect();
        if ids.contains(r.submission_id.as_str()) {
            return Err(LeaderboardError::DuplicateSubmission(r.submission_id));
        }
        r.report
            .check()
            .map_err(|source| LeaderboardError::InvalidReport { id: r.submission_id.clone(), source })?;
        let mut line = serde_json::to_string(&r).expect("submission serializes");
        line.push('\n');
        let io = |source| LeaderboardError::Io { path: self.path.clone(), source };
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(&self.path).map_err(io)?;
        f.write_all(line.as_bytes()).map_err(io)?;
        f.sync_data().map_err(io)?;
        let id = r.submission_id.clone();
        self.records.push(r);
        Ok(id)
    }

    /// Next free id of the form `<track>-<n>`.
    pub fn next_submission_id(&self, track: Track) -> String {
        let ids: HashSet<&str> = self.records.iter().map(|s| s.submission_id.as_str()).collect();
        (self.records.len() + 1..)
            .map(|n| format!("{track}-{n:04}"))
            .find(|id| !ids.contains(id.as_str()))
            .expect("unbounded search")
    }

    pub fn best_per_participant(&self, track: Track) -> Vec<SubmissionRecord> {
        best_per_participant(&self.records, track)
    }

    pub fn rank_table(&self, track: Track, baselines: &[SubmissionRecord]) -> RankedTable {
        rank_table(track, &self.records, baselines)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn sub(id: &str, who: &str, eer: f64, av: f64, minute: u32) -> SubmissionRecord {
        // pick bpcers so that av_rank comes out at `av`
        let report = MetricsReport::from_summary(id, eer, av, av, av).unwrap();
        SubmissionRecord {
            submission_id: id.into(),
            participant: who.into(),
            track: Track::Track1,
            submitted_at: Utc.with_ymd_and_hms(2025, 3, 1, 12, minute, 0).unwrap(),
            report,
            scores_ref: None,
        }
    }

    #[test]
    fn store_keeps_history_and_rejects_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t1.jsonl");
        let mut store = Store::open(&path).unwrap();
        store.record_submission(sub("a", "dragons", 0.1, 0.5, 0)).unwrap();
        assert_eq!(store.len(), 1);
        store.record_submission(sub("b", "dragons", 0.1, 0.41, 1)).unwrap();
        assert_eq!(store.len(), 2);
        assert!(matches!(
            store.record_submission(sub("a", "x", 0.1, 0.3, 2)),
            Err(LeaderboardError::DuplicateSubmission(_))
        ));
        let reopened = Store::open(&path).unwrap();
        assert_eq!(reopened.records(), store.records());
    }

    #[test]
    fn rejects_inconsistent_report() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path().join("s.jsonl")).unwrap();
        let mut s = sub("a", "x", 0.1, 0.5, 0);
        s.report.av_rank = 0.9;
        assert!(matches!(store.record_submission(s), Err(LeaderboardError::InvalidReport { .. })));
    }

    #[test]
    fn torn_final_line_is_ignored() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.jsonl");
        let mut store = Store::open(&path).unwrap();
        store.record_submission(sub("a", "x", 0.1, 0.5, 0)).unwrap();
        let mut f = std::fs::OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"submission_id\":\"b\",\"partic").unwrap();
        assert_eq!(Store::open(&path).unwrap().len(), 1);

        std::fs::write(&path, "garbage\n").unwrap();
        assert!(matches!(Store::open(&path), Err(LeaderboardError::Corrupt { line: 1, .. })));
    }

    #[test]
    fn best_is_minimum_av_rank() {
        let subs = [sub("a", "t", 0.2, 0.50, 0), sub("b", "t", 0.2, 0.41, 1), sub("c", "t", 0.2, 0.47, 2)];
        let best = best_per_participant(&subs, Track::Track1);
        assert_eq!(best.len(), 1);
        assert_eq!(best[0].submission_id, "b");
    }

    #[test]
    fn ties_break_on_eer_then_time() {
        let subs = [sub("a", "t", 0.12, 0.41, 0), sub("b", "t", 0.11, 0.41, 5)];
        assert_eq!(best_per_participant(&subs, Track::Track1)[0].submission_id, "b");
        let subs = [sub("late", "t", 0.11, 0.41, 9), sub("early", "t", 0.11, 0.41, 3)];
        assert_eq!(best_per_participant(&subs, Track::Track1)[0].submission_id, "early");
    }

    #[test]
    fn empty_track_has_no_rows() {
        assert!(best_per_participant(&[], Track::Track2).is_empty());
        let subs = [sub("a", "t", 0.1, 0.4, 0)];
        assert!(best_per_participant(&subs, Track::Track2).is_empty());
        let t = rank_table(Track::Track1, &subs, &[]);
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].rank, 1);
    }

    #[test]
    fn baselines_rank_alongside_teams() {
        let teams = [sub("a", "Incode", 0.0636, 0.1476, 0), sub("b", "Idiap", 0.3194, 0.7636, 0)];
        let baselines = [sub("x", &baseline_name(0, 1), 0.0607, 0.1480, 0)];
        let t = rank_table(Track::Track1, &teams, &baselines);
        let order: Vec<_> = t.rows.iter().map(|r| (r.rank, r.participant.as_str())).collect();
        assert_eq!(order, [(1, "Incode"), (2, "Baseline"), (3, "Idiap")]);
        assert_eq!(baseline_name(1, 3), "Baseline-2");
    }

    #[test]
    fn track_parsing() {
        assert_eq!("track1".parse::<Track>().unwrap(), Track::Track1);
        assert_eq!("2".parse::<Track>().unwrap(), Track::Track2);
        assert!("track3".parse::<Track>().is_err());
    }
}
