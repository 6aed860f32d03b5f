//! Evaluation machinery for presentation attack detection (PAD) challenges.
//!
//! * [`manifest`]: labeled dataset manifests and their validation.
//! * [`corpusgen`]: synthetic marker-coded corpora and parametric score sets.
//! * [`orchestrator`]: scoring every image through a candidate HTTP service.
//! * [`scores`]: per-sample scores and the ScoreSet CSV format.
//! * [`metrics`]: APCER, BPCER, DET curves, EER, BPCER_AP and AV_Rank.
//! * [`leaderboard`]: submission store and ranked tables.
//! * [`report`]: table rendering, DET CSVs and JSON reports.

pub mod corpusgen;
pub mod exec;
pub mod leaderboard;
pub mod manifest;
pub mod metrics;
pub mod orchestrator;
pub mod report;
pub mod scores;

pub use exec::Execution;
pub use manifest::{Manifest, PaisKind, SampleClass, SampleRecord};
pub use metrics::{evaluate_all, MetricsReport, ScorePartition};
pub use scores::{Score, ScoreOutcome, ScoreSet};
