//! ISO/IEC 30107-3 presentation attack detection metrics.
//!
//! Scores are bona fide confidences in `[0, 1]`. At a decision threshold
//! `τ` a sample is accepted as bona fide iff `score >= τ`, so:
//!
//! * APCER(τ) = fraction of attack scores `>= τ` (attacks accepted),
//! * BPCER(τ) = fraction of bona fide scores `< τ` (bona fide rejected).
//!
//! Both are step functions that only change at observed scores. Every curve
//! is therefore evaluated exactly on the candidate set made of the distinct
//! observed scores plus the sentinels `0` and [`THRESHOLD_CEILING`]. At
//! `τ = 0` everything is accepted (APCER 1, BPCER 0); at the ceiling
//! everything is rejected (APCER 0, BPCER 1).
//!
//! Operating points:
//!
//! * EER: the smallest candidate with APCER = BPCER if one exists, otherwise
//!   the linear interpolation between the two neighbouring candidates where
//!   `APCER - BPCER` changes sign.
//! * BPCER_AP: BPCER at the smallest candidate with APCER `<= 1/AP`.
//! * AV_Rank: `0.2 * BPCER10 + 0.3 * BPCER20 + 0.5 * BPCER100`.
//!
//! All rates are fractions; percentages only appear when rendering.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::manifest::{Manifest, PaisKind, SampleClass};
use crate::scores::ScoreSet;

/// Upper sentinel threshold: rejects every score in `[0, 1]`.
pub const THRESHOLD_CEILING: f64 = 1.0 + f64::EPSILON;

/// AV_Rank weights for BPCER10, BPCER20 and BPCER100.
pub const AV_RANK_WEIGHTS: [f64; 3] = [0.2, 0.3, 0.5];

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no attack samples for PAIS")]
    NoAttackSamples,
    #[error("no bona fide samples")]
    NoBonaFideSamples,
    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("{name} = {value} is not a fraction in [0, 1]")]
    RateOutOfRange { name: &'static str, value: f64 },
    #[error("no score for sample '{0}'")]
    MissingScore(String),
    #[error("av_rank {stored} does not match weighted BPCER sum {expected}")]
    InconsistentAvRank { stored: f64, expected: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    BonaFide,
    Attack,
}

pub fn decide(score: f64, threshold: f64) -> Decision {
    if score >= threshold {
        Decision::BonaFide
    } else {
        Decision::Attack
    }
}

/// Fraction of attack presentations accepted as bona fide at `threshold`.
pub fn apcer(attack_scores: &[f64], threshold: f64) -> Result<f64, MetricsError> {
    if attack_scores.is_empty() {
        return Err(MetricsError::NoAttackSamples);
    }
    let accepted = attack_scores
        .iter()
        .filter(|&&s| decide(s, threshold) == Decision::BonaFide)
        .count();
    Ok(accepted as f64 / attack_scores.len() as f64)
}

/// Fraction of bona fide presentations rejected as attacks at `threshold`.
pub fn bpcer(bonafide_scores: &[f64], threshold: f64) -> Result<f64, MetricsError> {
    if bonafide_scores.is_empty() {
        return Err(MetricsError::NoBonaFideSamples);
    }
    let rejected = bonafide_scores
        .iter()
        .filter(|&&s| decide(s, threshold) == Decision::Attack)
        .count();
    Ok(rejected as f64 / bonafide_scores.len() as f64)
}

/// BPCER_AP operating points: APCER target `1/AP`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ap {
    Ten,
    Twenty,
    Hundred,
}

impl Ap {
    pub const ALL: [Ap; 3] = [Ap::Ten, Ap::Twenty, Ap::Hundred];

    pub fn value(self) -> u32 {
        match self {
            Ap::Ten => 10,
            Ap::Twenty => 20,
            Ap::Hundred => 100,
        }
    }

    pub fn apcer_target(self) -> f64 {
        1.0 / self.value() as f64
    }
}

impl TryFrom<u32> for Ap {
    type Error = String;

    fn try_from(v: u32) -> Result<Self, Self::Error> {
        match v {
            10 => Ok(Ap::Ten),
            20 => Ok(Ap::Twenty),
            100 => Ok(Ap::Hundred),
            other => Err(format!("unsupported AP {other}; expected 10, 20 or 100")),
        }
    }
}

/// Which attacks a curve is computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackSelector {
    Pooled,
    Pais(PaisKind),
}

/// Bona fide scores and attack scores grouped by species.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScorePartition {
    bonafide: Vec<f64>,
    attacks: BTreeMap<PaisKind, Vec<f64>>,
}

fn check_score(s: f64) -> Result<f64, MetricsError> {
    if s.is_finite() && (0.0..=1.0).contains(&s) {
        // folds -0.0 into 0.0
        Ok(s + 0.0)
    } else {
        Err(MetricsError::ScoreOutOfRange(s))
    }
}

impl ScorePartition {
    pub fn new(
        bonafide: Vec<f64>,
        attacks: BTreeMap<PaisKind, Vec<f64>>,
    ) -> Result<Self, MetricsError> {
        let bonafide = bonafide.into_iter().map(check_score).collect::<Result<_, _>>()?;
        let attacks = attacks
            .into_iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| Ok((k, v.into_iter().map(check_score).collect::<Result<_, _>>()?)))
            .collect::<Result<_, MetricsError>>()?;
        Ok(ScorePartition { bonafide, attacks })
    }

    /// Convenience for a single attack species.
    pub fn binary(bonafide: Vec<f64>, attacks: Vec<f64>) -> Result<Self, MetricsError> {
        ScorePartition::new(bonafide, BTreeMap::from([(PaisKind::Print, attacks)]))
    }

    pub fn bonafide(&self) -> &[f64] {
        &self.bonafide
    }

    pub fn attacks(&self) -> &BTreeMap<PaisKind, Vec<f64>> {
        &self.attacks
    }

    pub fn n_attack(&self) -> usize {
        self.attacks.values().map(Vec::len).sum()
    }

    pub fn selected(&self, selector: AttackSelector) -> Vec<f64> {
        match selector {
            AttackSelector::Pooled => self.attacks.values().flatten().copied().collect(),
            AttackSelector::Pais(p) => self.attacks.get(&p).cloned().unwrap_or_default(),
        }
    }

    fn push(&mut self, class: SampleClass, score: f64) {
        match class {
            SampleClass::BonaFide => self.bonafide.push(score),
            SampleClass::Attack(p) => self.attacks.entry(p).or_default().push(score),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub apcer: f64,
    pub bpcer: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetCurve {
    pub points: Vec<DetPoint>,
    pub n_bonafide: usize,
    pub n_attack: usize,
}

/// Exact error counts at every candidate threshold.
struct Sweep {
    thresholds: Vec<f64>,
    accepted_attacks: Vec<usize>,
    rejected_bonafide: Vec<usize>,
    n_bonafide: usize,
    n_attack: usize,
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn candidate_thresholds<'a>(groups: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut t: Vec<f64> = groups.into_iter().flatten().copied().collect();
    t.extend([0.0, THRESHOLD_CEILING]);
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

/// Number of sorted scores strictly below `threshold`.
fn count_below(sorted_scores: &[f64], threshold: f64) -> usize {
    sorted_scores.partition_point(|&s| s < threshold)
}

impl Sweep {
    fn new(bonafide: &[f64], attacks: &[f64]) -> Result<Self, MetricsError> {
        if bonafide.is_empty() {
            return Err(MetricsError::NoBonaFideSamples);
        }
        if attacks.is_empty() {
            return Err(MetricsError::NoAttackSamples);
        }
        let bf = sorted(bonafide);
        let atk = sorted(attacks);
        let thresholds = candidate_thresholds([bf.as_slice(), atk.as_slice()]);
        let accepted_attacks = thresholds.iter().map(|&t| atk.len() - count_below(&atk, t)).collect();
        let rejected_bonafide = thresholds.iter().map(|&t| count_below(&bf, t)).collect();
        Ok(Sweep {
            thresholds,
            accepted_attacks,
            rejected_bonafide,
            n_bonafide: bf.len(),
            n_attack: atk.len(),
        })
    }

    fn apcer(&self, i: usize) -> f64 {
        self.accepted_attacks[i] as f64 / self.n_attack as f64
    }

    fn bpcer(&self, i: usize) -> f64 {
        self.rejected_bonafide[i] as f64 / self.n_bonafide as f64
    }

    /// Sign of APCER - BPCER at candidate `i`, computed on integers.
    fn gap_sign(&self, i: usize) -> std::cmp::Ordering {
        let lhs = self.accepted_attacks[i] as u128 * self.n_bonafide as u128;
        let rhs = self.rejected_bonafide[i] as u128 * self.n_attack as u128;
        lhs.cmp(&rhs)
    }

    fn curve(&self) -> DetCurve {
        let points = (0..self.thresholds.len())
            .map(|i| DetPoint { threshold: self.thresholds[i], apcer: self.apcer(i), bpcer: self.bpcer(i) })
            .collect();
        DetCurve { points, n_bonafide: self.n_bonafide, n_attack: self.n_attack }
    }

    fn eer(&self) -> OperatingPoint {
        use std::cmp::Ordering::*;
        let n = self.thresholds.len();
        if let Some(i) = (0..n).find(|&i| self.gap_sign(i) == Equal) {
            return OperatingPoint::at(self.apcer(i), self.thresholds[i]);
        }
        // APCER - BPCER is non-increasing, +1 at τ = 0 and -1 at the ceiling
        let i = (0..n - 1)
            .find(|&i| self.gap_sign(i) == Greater && self.gap_sign(i + 1) == Less)
            .expect("APCER - BPCER changes sign between the sentinels");
        let (a0, b0, a1, b1) = (self.apcer(i), self.bpcer(i), self.apcer(i + 1), self.bpcer(i + 1));
        let (d0, d1) = (a0 - b0, a1 - b1);
        let t = d0 / (d0 - d1);
        let rate = (a0 + t * (a1 - a0)).clamp(0.0, 1.0);
        let threshold = self.thresholds[i] + t * (self.thresholds[i + 1] - self.thresholds[i]);
        OperatingPoint::at(rate, threshold)
    }

    fn bpcer_at(&self, ap: Ap) -> OperatingPoint {
        let ap = ap.value() as u128;
        let i = (0..self.thresholds.len())
            .find(|&i| self.accepted_attacks[i] as u128 * ap <= self.n_attack as u128)
            .expect("APCER reaches 0 at the ceiling");
        OperatingPoint::at(self.bpcer(i), self.thresholds[i])
    }
}

pub fn det_curve(p: &ScorePartition, selector: AttackSelector) -> Result<DetCurve, MetricsError> {
    Ok(Sweep::new(&p.bonafide, &p.selected(selector))?.curve())
}

pub fn eer(p: &ScorePartition, selector: AttackSelector) -> Result<OperatingPoint, MetricsError> {
    Ok(Sweep::new(&p.bonafide, &p.selected(selector))?.eer())
}

pub fn bpcer_at_apcer(
    p: &ScorePartition,
    selector: AttackSelector,
    ap: Ap,
) -> Result<OperatingPoint, MetricsError> {
    Ok(Sweep::new(&p.bonafide, &p.selected(selector))?.bpcer_at(ap))
}

/// BPCER at the smallest threshold where the worst (maximum) per-species
/// APCER is at most `1/AP`.
pub fn bpcer_at_worst_case_apcer(p: &ScorePartition, ap: Ap) -> Result<OperatingPoint, MetricsError> {
    if p.bonafide.is_empty() {
        return Err(MetricsError::NoBonaFideSamples);
    }
    if p.attacks.is_empty() {
        return Err(MetricsError::NoAttackSamples);
    }
    let bf = sorted(&p.bonafide);
    let species: Vec<Vec<f64>> = p.attacks.values().map(|v| sorted(v)).collect();
    let thresholds =
        candidate_thresholds(std::iter::once(bf.as_slice()).chain(species.iter().map(Vec::as_slice)));
    let ap = ap.value() as u128;
    let t = thresholds
        .into_iter()
        .find(|&t| {
            species
                .iter()
                .all(|s| (s.len() - count_below(s, t)) as u128 * ap <= s.len() as u128)
        })
        .expect("every APCER reaches 0 at the ceiling");
    Ok(OperatingPoint::at(count_below(&bf, t) as f64 / bf.len() as f64, t))
}

pub fn av_rank(b10: f64, b20: f64, b100: f64) -> Result<f64, MetricsError> {
    for (name, value) in [("bpcer10", b10), ("bpcer20", b20), ("bpcer100", b100)] {
        if !(value.is_finite() && (0.0..=1.0).contains(&value)) {
            return Err(MetricsError::RateOutOfRange { name, value });
        }
    }
    let [w10, w20, w100] = AV_RANK_WEIGHTS;
    Ok(b10 * w10 + b20 * w20 + b100 * w100)
}

/// An error rate together with the threshold it was read at. Summary
/// entries transcribed from published tables carry no threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl OperatingPoint {
    pub fn at(rate: f64, threshold: f64) -> Self {
        OperatingPoint { rate, threshold: Some(threshold) }
    }

    pub fn summary(rate: f64) -> Self {
        OperatingPoint { rate, threshold: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpcerAp {
    pub bpcer10: OperatingPoint,
    pub bpcer20: OperatingPoint,
    pub bpcer100: OperatingPoint,
}

impl BpcerAp {
    pub fn get(&self, ap: Ap) -> OperatingPoint {
        match ap {
            Ap::Ten => self.bpcer10,
            Ap::Twenty => self.bpcer20,
            Ap::Hundred => self.bpcer100,
        }
    }

    fn from_fn(mut f: impl FnMut(Ap) -> Result<OperatingPoint, MetricsError>) -> Result<Self, MetricsError> {
        Ok(BpcerAp { bpcer10: f(Ap::Ten)?, bpcer20: f(Ap::Twenty)?, bpcer100: f(Ap::Hundred)? })
    }

    pub fn av_rank(&self) -> Result<f64, MetricsError> {
        av_rank(self.bpcer10.rate, self.bpcer20.rate, self.bpcer100.rate)
    }
}

/// Metrics for one population (global, one species, or one country).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubReport {
    pub n_bonafide: usize,
    pub n_attack: usize,
    pub eer: OperatingPoint,
    pub bpcer_ap: BpcerAp,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub det: Vec<DetPoint>,
}

impl SubReport {
    pub fn from_partition(p: &ScorePartition) -> Result<Self, MetricsError> {
        let sweep = Sweep::new(&p.bonafide, &p.selected(AttackSelector::Pooled))?;
        Ok(SubReport {
            n_bonafide: sweep.n_bonafide,
            n_attack: sweep.n_attack,
            eer: sweep.eer(),
            bpcer_ap: BpcerAp::from_fn(|ap| Ok(sweep.bpcer_at(ap)))?,
            det: sweep.curve().points,
        })
    }
}

/// Ranking quantities under the worst-case-species APCER reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCasePais {
    pub bpcer_ap: BpcerAp,
    pub av_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub run_id: String,
    /// Bona fide versus all attacks pooled.
    pub global: SubReport,
    pub av_rank: f64,
    #[serde(default)]
    pub attack_counts: BTreeMap<PaisKind, usize>,
    #[serde(default)]
    pub error_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_case_pais: Option<WorstCasePais>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_pais: BTreeMap<PaisKind, SubReport>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_country: BTreeMap<String, SubReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl MetricsReport {
    /// A report built from already-known summary rates, e.g. a published
    /// leaderboard row. No curves, thresholds or breakdowns.
    pub fn from_summary(
        run_id: impl Into<String>,
        eer: f64,
        b10: f64,
        b20: f64,
        b100: f64,
    ) -> Result<Self, MetricsError> {
        if !(eer.is_finite() && (0.0..=1.0).contains(&eer)) {
            return Err(MetricsError::RateOutOfRange { name: "eer", value: eer });
        }
        let av_rank = av_rank(b10, b20, b100)?;
        Ok(MetricsReport {
            run_id: run_id.into(),
            global: SubReport {
                n_bonafide: 0,
                n_attack: 0,
                eer: OperatingPoint::summary(eer),
                bpcer_ap: BpcerAp {
                    bpcer10: OperatingPoint::summary(b10),
                    bpcer20: OperatingPoint::summary(b20),
                    bpcer100: OperatingPoint::summary(b100),
                },
                det: Vec::new(),
            },
            av_rank,
            attack_counts: BTreeMap::new(),
            error_count: 0,
            worst_case_pais: None,
            per_pais: BTreeMap::new(),
            per_country: BTreeMap::new(),
            warnings: Vec::new(),
        })
    }

    pub fn eer(&self) -> f64 {
        self.global.eer.rate
    }

    pub fn bpcer(&self, ap: Ap) -> f64 {
        self.global.bpcer_ap.get(ap).rate
    }

    /// Checks rate ranges and that `av_rank` is the weighted BPCER sum.
    pub fn check(&self) -> Result<(), MetricsError> {
        let eer = self.global.eer.rate;
        if !(eer.is_finite() && (0.0..=1.0).contains(&eer)) {
            return Err(MetricsError::RateOutOfRange { name: "eer", value: eer });
        }
        let expected = self.global.bpcer_ap.av_rank()?;
        if (expected - self.av_rank).abs() > 1e-12 {
            return Err(MetricsError::InconsistentAvRank { stored: self.av_rank, expected });
        }
        Ok(())
    }
}

/// Population a DET curve or sub-report refers to.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scope {
    Global,
    Pais(PaisKind),
    Country(String),
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Global => f.write_str("global"),
            Scope::Pais(p) => write!(f, "pais_{p}"),
            Scope::Country(c) => write!(f, "country_{c}"),
        }
    }
}

pub fn evaluate_all(scores: &ScoreSet, m: &Manifest) -> Result<MetricsReport, MetricsError> {
    evaluate_all_with(scores, m, Execution::default())
}

/// Global, per-species and per-country metrics of one scored manifest.
/// Species or countries lacking attacks (or bona fide samples) are left
/// out of the breakdowns with a warning.
pub fn evaluate_all_with(
    scores: &ScoreSet,
    m: &Manifest,
    exec: Execution,
) -> Result<MetricsReport, MetricsError> {
    let mut rows = Vec::with_capacity(m.len());
    let mut error_count = 0;
    for r in &m.records {
        let outcome = scores
            .get(&r.sample_id)
            .ok_or_else(|| MetricsError::MissingScore(r.sample_id.clone()))?;
        error_count += usize::from(outcome.score.is_error());
        rows.push((r.class, r.country.as_str(), check_score(outcome.score.value())?));
    }

    let partition_for = |scope: &Scope| {
        let mut p = ScorePartition::default();
        for &(class, country, score) in &rows {
            let keep = match scope {
                Scope::Global => true,
                Scope::Pais(want) => class.pais().is_none_or(|got| got == *want),
                Scope::Country(c) => c == country,
            };
            if keep {
                p.push(class, score);
            }
        }
        p
    };

    let global = partition_for(&Scope::Global);
    if global.bonafide.is_empty() {
        return Err(MetricsError::NoBonaFideSamples);
    }
    if global.attacks.is_empty() {
        return Err(MetricsError::NoAttackSamples);
    }

    let mut warnings = Vec::new();
    let mut scopes = vec![Scope::Global];
    for p in PaisKind::ALL {
        if global.attacks.contains_key(&p) {
            scopes.push(Scope::Pais(p));
        } else {
            warnings.push(format!("no {p} attacks; omitted from per-PAIS breakdown"));
        }
    }
    for country in m.countries() {
        let (mut bf, mut atk) = (0usize, 0usize);
        for &(class, c, _) in &rows {
            if c == country {
                if class.is_bona_fide() { bf += 1 } else { atk += 1 }
            }
        }
        match (bf, atk) {
            (_, 0) => warnings.push(format!("country {country} has no attacks; omitted from breakdown")),
            (0, _) => warnings.push(format!("country {country} has no bona fide samples; omitted from breakdown")),
            _ => scopes.push(Scope::Country(country.to_string())),
        }
    }
    for w in &warnings {
        tracing::warn!("{w}");
    }

    let reports = exec.try_map(&scopes, |scope| SubReport::from_partition(&partition_for(scope)))?;
    let mut reports = scopes.into_iter().zip(reports);
    let (_, global_report) = reports.next().expect("global scope is first");
    let mut per_pais = BTreeMap::new();
    let mut per_country = BTreeMap::new();
    for (scope, sub) in reports {
        match scope {
            Scope::Pais(p) => {
                per_pais.insert(p, sub);
            }
            Scope::Country(c) => {
                per_country.insert(c, sub);
            }
            Scope::Global => unreachable!(),
        }
    }

    let worst_bpcer_ap = BpcerAp::from_fn(|ap| bpcer_at_worst_case_apcer(&global, ap))?;
    let worst_case_pais = WorstCasePais { av_rank: worst_bpcer_ap.av_rank()?, bpcer_ap: worst_bpcer_ap };

    Ok(MetricsReport {
        run_id: scores.run_id.clone(),
        av_rank: global_report.bpcer_ap.av_rank()?,
        global: global_report,
        attack_counts: global.attacks.iter().map(|(k, v)| (*k, v.len())).collect(),
        error_count,
        worst_case_pais: Some(worst_case_pais),
        per_pais,
        per_country,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BF: [f64; 3] = [0.9, 0.8, 0.4];
    const ATK: [f64; 3] = [0.6, 0.2, 0.1];

    fn part(bf: &[f64], atk: &[f64]) -> ScorePartition {
        ScorePartition::binary(bf.to_vec(), atk.to_vec()).unwrap()
    }

    #[test]
    fn decision_boundary_accepts_equal_scores() {
        assert_eq!(decide(0.9, 0.5), Decision::BonaFide);
        assert_eq!(decide(0.5, 0.5), Decision::BonaFide);
        assert_eq!(decide(0.0, 0.5), Decision::Attack);
    }

    #[test]
    fn apcer_examples() {
        assert_eq!(apcer(&[0.0, 0.0, 0.0], 0.5).unwrap(), 0.0);
        assert_eq!(apcer(&ATK, 0.5).unwrap(), 1.0 / 3.0);
        assert_eq!(apcer(&ATK, 0.0).unwrap(), 1.0);
        assert_eq!(apcer(&[], 0.5), Err(MetricsError::NoAttackSamples));
    }

    #[test]
    fn bpcer_examples() {
        assert_eq!(bpcer(&[1.0, 1.0], 0.5).unwrap(), 0.0);
        assert_eq!(bpcer(&BF, 0.6).unwrap(), 1.0 / 3.0);
        assert_eq!(bpcer(&BF, 0.0).unwrap(), 0.0);
        assert_eq!(bpcer(&[], 0.5), Err(MetricsError::NoBonaFideSamples));
    }

    #[test]
    fn det_curve_examples() {
        let c = det_curve(&part(&[1.0], &[0.0]), AttackSelector::Pooled).unwrap();
        assert!(c.points.iter().any(|p| p.apcer == 0.0 && p.bpcer == 0.0 && p.threshold > 0.0));

        let c = det_curve(&part(&BF, &ATK), AttackSelector::Pooled).unwrap();
        // 6 distinct scores plus the two sentinels
        assert_eq!(c.points.len(), 8);
        let at_06 = c.points.iter().find(|p| p.threshold == 0.6).unwrap();
        assert_eq!((at_06.apcer, at_06.bpcer), (1.0 / 3.0, 1.0 / 3.0));
        assert_eq!(c.points[0], DetPoint { threshold: 0.0, apcer: 1.0, bpcer: 0.0 });
        let last = c.points.last().unwrap();
        assert_eq!((last.threshold, last.apcer, last.bpcer), (THRESHOLD_CEILING, 0.0, 1.0));
    }

    #[test]
    fn empty_selection_is_an_error() {
        let p = part(&BF, &ATK);
        assert_eq!(
            det_curve(&p, AttackSelector::Pais(PaisKind::Screen)),
            Err(MetricsError::NoAttackSamples)
        );
        let p = ScorePartition::new(vec![], BTreeMap::from([(PaisKind::Print, vec![0.1])])).unwrap();
        assert_eq!(eer(&p, AttackSelector::Pooled), Err(MetricsError::NoBonaFideSamples));
    }

    #[test]
    fn eer_examples() {
        let e = eer(&part(&[1.0, 1.0], &[0.0, 0.0]), AttackSelector::Pooled).unwrap();
        assert_eq!(e.rate, 0.0);

        let e = eer(&part(&BF, &ATK), AttackSelector::Pooled).unwrap();
        assert_eq!(e, OperatingPoint::at(1.0 / 3.0, 0.6));
    }

    #[test]
    fn constant_scorer_interpolates_to_half() {
        let p = part(&[0.5; 4], &[0.5; 6]);
        let c = det_curve(&p, AttackSelector::Pooled).unwrap();
        for pt in &c.points {
            if pt.threshold <= 0.5 {
                assert_eq!((pt.apcer, pt.bpcer), (1.0, 0.0));
            } else {
                assert_eq!((pt.apcer, pt.bpcer), (0.0, 1.0));
            }
        }
        let e = eer(&p, AttackSelector::Pooled).unwrap();
        assert_eq!(e.rate, 0.5);
        let t = e.threshold.unwrap();
        assert!(t > 0.5 && t < THRESHOLD_CEILING);
    }

    #[test]
    fn bpcer_ap_examples() {
        let b = bpcer_at_apcer(&part(&BF, &ATK), AttackSelector::Pooled, Ap::Ten).unwrap();
        assert_eq!(b, OperatingPoint::at(1.0 / 3.0, 0.8));

        for ap in Ap::ALL {
            let b = bpcer_at_apcer(&part(&[1.0, 1.0], &[0.0]), AttackSelector::Pooled, ap).unwrap();
            assert_eq!(b.rate, 0.0);
        }

        let b = bpcer_at_apcer(&part(&[0.0; 5], &[0.0; 5]), AttackSelector::Pooled, Ap::Hundred).unwrap();
        assert_eq!(b.rate, 1.0);
        assert!(b.threshold.unwrap() > 0.0);
    }

    #[test]
    fn av_rank_examples() {
        assert!((av_rank(0.1321, 0.2439, 0.6104).unwrap() - 0.40479).abs() < 1e-12);
        assert!((av_rank(0.0256, 0.0908, 0.2304).unwrap() - 0.14756).abs() < 1e-12);
        assert_eq!(av_rank(0.0, 0.0, 0.0).unwrap(), 0.0);
        assert!(matches!(av_rank(1.2, 0.0, 0.0), Err(MetricsError::RateOutOfRange { .. })));
        assert!(av_rank(0.0, f64::NAN, 0.0).is_err());
        assert_eq!(AV_RANK_WEIGHTS.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn worst_case_is_never_better_than_pooled() {
        let p = ScorePartition::new(
            vec![0.9, 0.8, 0.7, 0.95],
            BTreeMap::from([(PaisKind::Print, vec![0.1, 0.2]), (PaisKind::Screen, vec![0.85, 0.3, 0.1])]),
        )
        .unwrap();
        for ap in Ap::ALL {
            let pooled = bpcer_at_apcer(&p, AttackSelector::Pooled, ap).unwrap();
            let worst = bpcer_at_worst_case_apcer(&p, ap).unwrap();
            assert!(worst.rate >= pooled.rate);
        }
        // screen needs τ above 0.85, rejecting 0.8 and 0.7
        assert_eq!(bpcer_at_worst_case_apcer(&p, Ap::Ten).unwrap(), OperatingPoint::at(0.5, 0.9));
    }

    #[test]
    fn partition_rejects_out_of_range() {
        assert_eq!(ScorePartition::binary(vec![1.5], vec![0.0]), Err(MetricsError::ScoreOutOfRange(1.5)));
        assert!(ScorePartition::binary(vec![0.5], vec![f64::NAN]).is_err());
    }
}
