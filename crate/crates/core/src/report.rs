//! Rendering of leaderboard tables, DET curve data and full JSON reports.
//!
//! Rounding happens only here: table cells are percentages rounded half-up
//! to two decimals, with an exact 100% shown as `100`. JSON exports keep
//! full-precision fractions.

use std::path::{Path, PathBuf};

use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::leaderboard::RankedTable;
use crate::metrics::{DetPoint, MetricsError, MetricsReport, Scope, SubReport};

pub const RANK_COLUMNS: [&str; 7] = ["Rank", "Team", "EER", "BPCER10", "BPCER20", "BPCER100", "AVRank"];
pub const DET_HEADER: &str = "threshold,apcer,bpcer,apcer_probit,bpcer_probit";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot render an empty table")]
    EmptyTable,
    #[error("row {rank} has an empty team name")]
    EmptyTeam { rank: usize },
    #[error("scope '{requested}' not in report; available: {available}")]
    MissingScope { requested: String, available: String },
    #[error("report has no DET points for scope '{0}'")]
    NoCurve(String),
    #[error("report failed its self-check: {0}")]
    Inconsistent(#[from] MetricsError),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

/// Fraction as a percentage, half-up to two decimals.
pub fn percent(fraction: f64) -> String {
    // the epsilon absorbs binary representation error on decimal ties
    let hundredths = (fraction * 10_000.0 + 0.5 + 1e-6).floor() as i64;
    if hundredths == 10_000 {
        "100".into()
    } else {
        format!("{}.{:02}", hundredths / 100, hundredths % 100)
    }
}

pub struct RenderedTable {
    pub text: String,
    pub csv: String,
}

pub fn render_rank_table(t: &RankedTable) -> Result<RenderedTable, ReportError> {
    if t.rows.is_empty() {
        return Err(ReportError::EmptyTable);
    }
    let mut cells: Vec<[String; 7]> = Vec::with_capacity(t.rows.len());
    for r in &t.rows {
        if r.participant.trim().is_empty() {
            return Err(ReportError::EmptyTeam { rank: r.rank });
        }
        cells.push([
            r.rank.to_string(),
            r.participant.clone(),
            percent(r.eer),
            percent(r.bpcer10),
            percent(r.bpcer20),
            percent(r.bpcer100),
            percent(r.av_rank),
        ]);
    }

    let mut csv = RANK_COLUMNS.join(",");
    csv.push('\n');
    for row in &cells {
        csv.push_str(&row.join(","));
        csv.push('\n');
    }

    let mut widths = RANK_COLUMNS.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |row: &[&str]| {
        let mut s = row
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 1 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ");
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut text = format!("{} (all values in %)\n", t.track);
    text.push_str(&line(&RANK_COLUMNS));
    for row in &cells {
        text.push_str(&line(&row.iter().map(String::as_str).collect::<Vec<_>>()));
    }
    Ok(RenderedTable { text, csv })
}

/// Standard-normal quantile of a rate measured over `n` samples, with 0 and
/// 1 pulled in to `1/(2n)` and `1 - 1/(2n)`.
pub fn probit(rate: f64, n: usize) -> f64 {
    let n = n.max(1) as f64;
    let lo = 1.0 / (2.0 * n);
    Normal::standard().inverse_cdf(rate.clamp(lo, 1.0 - lo))
}

/// DET curve rows, probit columns included.
pub fn det_csv(points: &[DetPoint], n_bonafide: usize, n_attack: usize) -> String {
    let mut out = String::from(DET_HEADER);
    out.push('\n');
    for p in points {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.threshold,
            p.apcer,
            p.bpcer,
            probit(p.apcer, n_attack),
            probit(p.bpcer, n_bonafide)
        ));
    }
    out
}

/// Which family of DET curves to export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetScope {
    Global,
    Pais,
    Country,
}

impl std::str::FromStr for DetScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "global" => Ok(DetScope::Global),
            "pais" => Ok(DetScope::Pais),
            "country" => Ok(DetScope::Country),
            other => Err(format!("unknown DET scope '{other}'")),
        }
    }
}

pub fn det_file_name(scope: &Scope) -> String {
    format!("det_{scope}.csv")
}

fn curves(report: &MetricsReport) -> Vec<(Scope, &SubReport)> {
    let mut out = vec![(Scope::Global, &report.global)];
    out.extend(report.per_pais.iter().map(|(p, s)| (Scope::Pais(*p), s)));
    out.extend(report.per_country.iter().map(|(c, s)| (Scope::Country(c.clone()), s)));
    out
}

/// One `(file name, CSV)` pair per curve in the requested family.
pub fn export_det(report: &MetricsReport, scope: DetScope) -> Result<Vec<(String, String)>, ReportError> {
    let all = curves(report);
    let selected: Vec<_> = all
        .iter()
        .filter(|(s, _)| {
            matches!(
                (scope, s),
                (DetScope::Global, Scope::Global) | (DetScope::Pais, Scope::Pais(_)) | (DetScope::Country, Scope::Country(_))
            )
        })
        .collect();
    if selected.is_empty() {
        return Err(ReportError::MissingScope {
            requested: format!("{scope:?}").to_lowercase(),
            available: all.iter().map(|(s, _)| s.to_string()).collect::<Vec<_>>().join(", "),
        });
    }
    selected
        .into_iter()
        .map(|(s, sub)| {
            if sub.det.is_empty() {
                return Err(ReportError::NoCurve(s.to_string()));
            }
            Ok((det_file_name(s), det_csv(&sub.det, sub.n_bonafide, sub.n_attack)))
        })
        .collect()
}

/// Pretty JSON of the full report. The AV_Rank is recomputed from the
/// exported BPCER values and must agree with the stored one.
pub fn export_report(report: &MetricsReport) -> Result<String, ReportError> {
    report.check()?;
    if let Some(w) = &report.worst_case_pais {
        let expected = w.bpcer_ap.av_rank()?;
        if (expected - w.av_rank).abs() > 1e-12 {
            return Err(MetricsError::InconsistentAvRank { stored: w.av_rank, expected }.into());
        }
    }
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    Ok(s)
}

pub fn report_file_name(run_id: &str) -> String {
    format!("report_{run_id}.json")
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf, ReportError> {
    std::fs::write(&path, contents).map_err(|source| ReportError::Io { path: path.clone(), source })?;
    Ok(path)
}

/// Writes the JSON report and every available DET curve into `dir`.
pub fn write_all(report: &MetricsReport, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    std::fs::create_dir_all(dir).map_err(|source| ReportError::Io { path: dir.to_path_buf(), source })?;
    let mut written = vec![write(dir.join(report_file_name(&report.run_id)), &export_report(report)?)?];
    for scope in [DetScope::Global, DetScope::Pais, DetScope::Country] {
        match export_det(report, scope) {
            Ok(files) => {
                for (name, csv) in files {
                    written.push(write(dir.join(name), &csv)?);
                }
            }
            Err(ReportError::MissingScope { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(written)
}

pub fn rank_file_name(table: &RankedTable) -> String {
    format!("rank_{}.csv", table.track)
}
