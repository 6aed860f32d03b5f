//! Dataset ground truth: PAIS taxonomy, labeled sample records, and the
//! manifest CSV format.
//!
//! A manifest is a UTF-8 CSV file with the fixed header
//! `sample_id,path,label,detail,country,subject_id`. An optional seventh
//! column `document_version` is accepted when present in the header.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HEADER: [&str; 6] = ["sample_id", "path", "label", "detail", "country", "subject_id"];
const VERSION_COLUMN: &str = "document_version";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("manifest io: {0}")]
    Io(#[from] std::io::Error),
}

impl ManifestError {
    fn at(line: u64, message: impl Into<String>) -> Self {
        ManifestError::Parse { line, message: message.into() }
    }
}

/// Attack instrument species used for metric breakdowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PaisKind {
    Print,
    Screen,
    Composite,
}

impl PaisKind {
    pub const ALL: [PaisKind; 3] = [PaisKind::Print, PaisKind::Screen, PaisKind::Composite];

    pub fn as_str(self) -> &'static str {
        match self {
            PaisKind::Print => "print",
            PaisKind::Screen => "screen",
            PaisKind::Composite => "composite",
        }
    }

    /// Sub-type details that are reserved for this species.
    pub fn known_details(self) -> &'static [&'static str] {
        match self {
            PaisKind::Print => &["gray_print", "colour_print", "pvc", "paper_print"],
            PaisKind::Screen => &[],
            PaisKind::Composite => &["physical_composite", "digital_composite"],
        }
    }

    /// The species a reserved detail string belongs to, if any.
    pub fn owning_detail(detail: &str) -> Option<PaisKind> {
        PaisKind::ALL
            .into_iter()
            .find(|p| p.known_details().contains(&detail))
    }
}

impl fmt::Display for PaisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PaisKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "print" => Ok(PaisKind::Print),
            "screen" => Ok(PaisKind::Screen),
            "composite" => Ok(PaisKind::Composite),
            other => Err(format!("unknown PAIS '{other}'")),
        }
    }
}

/// Ground-truth class of a presentation. Serialized as its manifest label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SampleClass {
    BonaFide,
    Attack(PaisKind),
}

impl SampleClass {
    pub const ALL: [SampleClass; 4] = [
        SampleClass::BonaFide,
        SampleClass::Attack(PaisKind::Print),
        SampleClass::Attack(PaisKind::Screen),
        SampleClass::Attack(PaisKind::Composite),
    ];

    pub fn label(self) -> &'static str {
        match self {
            SampleClass::BonaFide => "bonafide",
            SampleClass::Attack(p) => p.as_str(),
        }
    }

    pub fn is_bona_fide(self) -> bool {
        matches!(self, SampleClass::BonaFide)
    }

    pub fn pais(self) -> Option<PaisKind> {
        match self {
            SampleClass::BonaFide => None,
            SampleClass::Attack(p) => Some(p),
        }
    }
}

impl fmt::Display for SampleClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl From<SampleClass> for String {
    fn from(c: SampleClass) -> String {
        c.label().to_string()
    }
}

impl TryFrom<String> for SampleClass {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl FromStr for SampleClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bonafide" => Ok(SampleClass::BonaFide),
            other => other
                .parse::<PaisKind>()
                .map(SampleClass::Attack)
                .map_err(|_| format!("unknown label '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    /// Relative to the manifest root.
    pub path: String,
    pub class: SampleClass,
    /// Free-text sub-type such as `gray_print` or `digital_composite`.
    pub detail: Option<String>,
    /// ISO-3166 alpha-3.
    pub country: String,
    pub subject_id: String,
    pub document_version: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub name: String,
    pub root: PathBuf,
    pub records: Vec<SampleRecord>,
}

/// Record selector for per-PAIS and per-country splits.
///
/// A PAIS selector keeps every bona fide record plus the attacks of that
/// species, so the result is a bona fide-vs-one-attack population.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ManifestFilter {
    pub pais: Option<PaisKind>,
    pub country: Option<String>,
}

impl ManifestFilter {
    pub fn pais(pais: PaisKind) -> Self {
        ManifestFilter { pais: Some(pais), country: None }
    }

    pub fn country(country: impl Into<String>) -> Self {
        ManifestFilter { pais: None, country: Some(country.into()) }
    }

    pub fn matches(&self, record: &SampleRecord) -> bool {
        let pais_ok = match (self.pais, record.class) {
            (None, _) | (_, SampleClass::BonaFide) => true,
            (Some(want), SampleClass::Attack(got)) => want == got,
        };
        let country_ok = self.country.as_deref().is_none_or(|c| c == record.country);
        pais_ok && country_ok
    }
}

impl Manifest {
    pub fn new(name: impl Into<String>, root: impl Into<PathBuf>, records: Vec<SampleRecord>) -> Self {
        Manifest { name: name.into(), root: root.into(), records }
    }

    /// Reads a manifest file; the root is the file's parent directory.
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path)?;
        let mut m = parse_manifest(&text)?;
        m.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), ManifestError> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn image_path(&self, record: &SampleRecord) -> PathBuf {
        self.root.join(&record.path)
    }

    pub fn filter(&self, filter: &ManifestFilter) -> Manifest {
        Manifest {
            name: self.name.clone(),
            root: self.root.clone(),
            records: self.records.iter().filter(|r| filter.matches(r)).cloned().collect(),
        }
    }

    /// Countries in sorted order.
    pub fn countries(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.country.as_str()).collect()
    }

    /// Serializes to the manifest CSV format. The `document_version` column
    /// is emitted only when some record carries one.
    pub fn to_csv(&self) -> String {
        let with_version = self.records.iter().any(|r| r.document_version.is_some());
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = HEADER.to_vec();
        if with_version {
            header.push(VERSION_COLUMN);
        }
        w.write_record(&header).expect("in-memory write");
        for r in &self.records {
            let mut fields = vec![
                r.sample_id.as_str(),
                r.path.as_str(),
                r.class.label(),
                r.detail.as_deref().unwrap_or(""),
                r.country.as_str(),
                r.subject_id.as_str(),
            ];
            if with_version {
                fields.push(r.document_version.as_deref().unwrap_or(""));
            }
            w.write_record(&fields).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("fields are UTF-8")
    }
}

pub fn filter_manifest(m: &Manifest, filter: &ManifestFilter) -> Manifest {
    m.filter(filter)
}

/// Parses manifest CSV text. Structural problems (column count, unknown
/// label, duplicate id) are hard errors; content invariants are left to
/// [`validate_manifest`].
pub fn parse_manifest(text: &str) -> Result<Manifest, ManifestError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let columns = reader.headers().map_err(|e| csv_error(1, e))?.clone();
    let with_version = if columns.is_empty() {
        return Err(ManifestError::at(1, "missing header"));
    } else if columns.iter().eq(HEADER) {
        false
    } else if columns.len() == 7 && columns.iter().take(6).eq(HEADER) && &columns[6] == VERSION_COLUMN {
        true
    } else {
        return Err(ManifestError::at(
            1,
            format!("expected header '{}', found '{}'", HEADER.join(","), columns.iter().collect::<Vec<_>>().join(",")),
        ));
    };
    let width = if with_version { 7 } else { 6 };

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for row in reader.records() {
        let fields = row.map_err(|e| csv_error(0, e))?;
        let line = fields.position().map_or(0, |p| p.line());
        if fields.len() != width {
            return Err(ManifestError::at(
                line,
                format!("expected {width} columns, found {}", fields.len()),
            ));
        }
        let class: SampleClass = fields[2].parse().map_err(|e| ManifestError::at(line, e))?;
        if !seen.insert(fields[0].to_string()) {
            return Err(ManifestError::at(line, format!("duplicate sample_id '{}'", &fields[0])));
        }
        let optional = |s: &str| (!s.is_empty()).then(|| s.to_string());
        records.push(SampleRecord {
            sample_id: fields[0].to_string(),
            path: fields[1].to_string(),
            class,
            detail: optional(&fields[3]),
            country: fields[4].to_string(),
            subject_id: fields[5].to_string(),
            document_version: if with_version { optional(&fields[6]) } else { None },
        });
    }
    Ok(Manifest::new("", "", records))
}

fn csv_error(fallback_line: u64, e: csv::Error) -> ManifestError {
    let line = e.position().map_or(fallback_line, |p| p.line());
    ManifestError::at(line, e.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// Offending record, or `None` for manifest-level violations.
    pub sample_id: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub bonafide: usize,
    pub print: usize,
    pub screen: usize,
    pub composite: usize,
}

impl ClassCounts {
    fn bump(&mut self, class: SampleClass) {
        match class {
            SampleClass::BonaFide => self.bonafide += 1,
            SampleClass::Attack(PaisKind::Print) => self.print += 1,
            SampleClass::Attack(PaisKind::Screen) => self.screen += 1,
            SampleClass::Attack(PaisKind::Composite) => self.composite += 1,
        }
    }

    pub fn attacks(&self) -> usize {
        self.print + self.screen + self.composite
    }

    pub fn total(&self) -> usize {
        self.bonafide + self.attacks()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub name: String,
    pub total: usize,
    pub per_class: ClassCounts,
    /// Counts per `label/detail` (detail `-` when absent).
    pub per_detail: BTreeMap<String, usize>,
    pub per_country: BTreeMap<String, ClassCounts>,
    pub unique_subjects: usize,
    pub unique_subjects_per_class: BTreeMap<String, usize>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("validation report serializes")
    }

    pub fn render_text(&self) -> String {
        let mut s = format!("manifest {}: {} records\n", self.name, self.total);
        let c = &self.per_class;
        s += &format!(
            "  bonafide {}  print {}  screen {}  composite {}\n",
            c.bonafide, c.print, c.screen, c.composite
        );
        for (detail, n) in &self.per_detail {
            s += &format!("  {detail:<28} {n}\n");
        }
        for (country, c) in &self.per_country {
            s += &format!(
                "  {country}: bonafide {} print {} screen {} composite {}\n",
                c.bonafide, c.print, c.screen, c.composite
            );
        }
        s += &format!("  unique subjects {}\n", self.unique_subjects);
        if self.violations.is_empty() {
            s += "  no violations\n";
        } else {
            s += &format!("  {} violation(s):\n", self.violations.len());
            for v in &self.violations {
                match &v.sample_id {
                    Some(id) => s += &format!("    {id}: {}\n", v.message),
                    None => s += &format!("    {}\n", v.message),
                }
            }
        }
        s
    }
}

fn is_country_code(s: &str) -> bool {
    s.len() == 3 && s.bytes().all(|b| b.is_ascii_uppercase())
}

pub fn validate_manifest(m: &Manifest) -> ValidationReport {
    let mut report = ValidationReport { name: m.name.clone(), total: m.len(), ..Default::default() };
    let mut subjects = BTreeSet::new();
    let mut subjects_per_class: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut ids = HashSet::new();

    for r in &m.records {
        report.per_class.bump(r.class);
        report.per_country.entry(r.country.clone()).or_default().bump(r.class);
        let detail_key = format!("{}/{}", r.class.label(), r.detail.as_deref().unwrap_or("-"));
        *report.per_detail.entry(detail_key).or_default() += 1;
        subjects.insert(r.subject_id.as_str());
        subjects_per_class
            .entry(r.class.label())
            .or_default()
            .insert(r.subject_id.as_str());

        let mut flag = |message: String| {
            report.violations.push(Violation { sample_id: Some(r.sample_id.clone()), message })
        };
        if r.sample_id.is_empty() {
            flag("empty sample_id".into());
        }
        if !ids.insert(r.sample_id.as_str()) {
            flag("duplicate sample_id".into());
        }
        if r.path.is_empty() {
            flag("empty path".into());
        }
        if !is_country_code(&r.country) {
            flag(format!("country '{}' not 3 uppercase letters", r.country));
        }
        if let Some(detail) = r.detail.as_deref() {
            if let Some(owner) = PaisKind::owning_detail(detail) {
                if r.class != SampleClass::Attack(owner) {
                    flag(format!("detail '{detail}' inconsistent with label '{}'", r.class));
                }
            }
        }
        let fields = [&r.sample_id, &r.path, &r.country, &r.subject_id];
        let extra = [r.detail.as_ref(), r.document_version.as_ref()];
        if fields.into_iter().chain(extra.into_iter().flatten()).any(|f| f.contains([',', '\n', '\r'])) {
            flag("field contains a comma or line break".into());
        }
    }

    if report.per_class.bonafide == 0 {
        report.violations.push(Violation { sample_id: None, message: "no bona fide records".into() });
    }
    report.unique_subjects = subjects.len();
    report.unique_subjects_per_class = subjects_per_class
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.len()))
        .collect();
    report
}
