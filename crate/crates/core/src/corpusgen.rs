//! Synthetic test assets: marker-coded pseudo-image corpora and parametric
//! score sets with a known EER.
//!
//! Every generated PNG (8-bit RGB) is seeded block noise with a solid
//! [`MARKER_SIZE`]-pixel square in the top-left corner. All marker pixels
//! equal `(0xA5, code, 0x5A)` where `code` identifies the class:
//!
//! | class     | code   |
//! |-----------|--------|
//! | bonafide  | `0x20` |
//! | print     | `0x60` |
//! | screen    | `0xA0` |
//! | composite | `0xE0` |
//!
//! Randomness comes from ChaCha20 seeded with the spec seed; image `k` reads
//! stream `k`, so output does not depend on generation order.

use std::collections::BTreeMap;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};
use thiserror::Error;

use crate::exec::Execution;
use crate::manifest::{Manifest, PaisKind, SampleClass, SampleRecord};
use crate::metrics::{self, AttackSelector, MetricsError, ScorePartition};

pub const MARKER_SIZE: u32 = 16;
const MARKER_RED: u8 = 0xA5;
const MARKER_BLUE: u8 = 0x5A;
const NOISE_CELL: u32 = 16;

/// Countries of the default corpus.
pub const DEFAULT_COUNTRIES: [&str; 4] = ["CHL", "GTM", "MEX", "PAN"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid corpus spec: {0}")]
    InvalidSpec(String),
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("png encoding: {0}")]
    Png(#[from] png::EncodingError),
    #[error("png decoding: {0}")]
    Decode(#[from] png::DecodingError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.to_path_buf(), source }
}

pub fn marker_code(class: SampleClass) -> u8 {
    match class {
        SampleClass::BonaFide => 0x20,
        SampleClass::Attack(PaisKind::Print) => 0x60,
        SampleClass::Attack(PaisKind::Screen) => 0xA0,
        SampleClass::Attack(PaisKind::Composite) => 0xE0,
    }
}

fn class_for_code(code: u8) -> Option<SampleClass> {
    SampleClass::ALL.into_iter().find(|&c| marker_code(c) == code)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountEntry {
    pub label: SampleClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub country: String,
    pub count: usize,
}

fn default_image_size() -> u32 {
    384
}

fn default_subject_pool() -> usize {
    155
}

fn default_name() -> String {
    "corpus".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub counts: Vec<CountEntry>,
    /// Square edge length in pixels.
    #[serde(default = "default_image_size")]
    pub image_size: u32,
    pub seed: u64,
    /// Synthetic subject ids are cycled per class through this many values.
    #[serde(default = "default_subject_pool")]
    pub subject_pool: usize,
}

impl CorpusSpec {
    /// Track-1-shaped corpus: 3,000 bona fide, 3,000 screen, 1,000 gray and
    /// 2,000 colour print, 1,500 physical and 1,500 digital composite,
    /// spread evenly over four countries, 155 subjects.
    pub fn track1_default() -> Self {
        let per_country: [(SampleClass, Option<&str>, usize); 6] = [
            (SampleClass::BonaFide, None, 3000),
            (SampleClass::Attack(PaisKind::Screen), None, 3000),
            (SampleClass::Attack(PaisKind::Print), Some("gray_print"), 1000),
            (SampleClass::Attack(PaisKind::Print), Some("colour_print"), 2000),
            (SampleClass::Attack(PaisKind::Composite), Some("physical_composite"), 1500),
            (SampleClass::Attack(PaisKind::Composite), Some("digital_composite"), 1500),
        ];
        let counts = per_country
            .iter()
            .flat_map(|&(label, detail, total)| {
                DEFAULT_COUNTRIES.iter().map(move |c| CountEntry {
                    label,
                    detail: detail.map(str::to_string),
                    country: c.to_string(),
                    count: total / DEFAULT_COUNTRIES.len(),
                })
            })
            .collect();
        CorpusSpec {
            name: "track1".into(),
            counts,
            image_size: default_image_size(),
            seed: 2025,
            subject_pool: default_subject_pool(),
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().map(|c| c.count).sum()
    }

    fn check(&self) -> Result<(), CorpusError> {
        if self.total() == 0 {
            return Err(CorpusError::InvalidSpec("at least one class count must be positive".into()));
        }
        if self.image_size < MARKER_SIZE {
            return Err(CorpusError::InvalidSpec(format!(
                "image_size {} smaller than the {MARKER_SIZE}px marker",
                self.image_size
            )));
        }
        if self.subject_pool == 0 {
            return Err(CorpusError::InvalidSpec("subject_pool must be positive".into()));
        }
        Ok(())
    }

    /// Manifest records in generation order; ids are `<label>_<country>_<index>`.
    pub fn records(&self) -> Vec<SampleRecord> {
        let mut per_class: BTreeMap<SampleClass, usize> = BTreeMap::new();
        let mut out = Vec::with_capacity(self.total());
        for entry in &self.counts {
            for _ in 0..entry.count {
                let k = out.len();
                let seq = per_class.entry(entry.label).or_default();
                let subject = *seq % self.subject_pool;
                *seq += 1;
                let sample_id = format!("{}_{}_{k:05}", entry.label, entry.country);
                out.push(SampleRecord {
                    path: format!("images/{sample_id}.png"),
                    sample_id,
                    class: entry.label,
                    detail: entry.detail.clone(),
                    country: entry.country.clone(),
                    subject_id: format!("subj{subject:03}"),
                    document_version: None,
                });
            }
        }
        out
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Renders image `index` of a corpus as PNG bytes.
pub fn render_image(class: SampleClass, size: u32, seed: u64, index: u64) -> Result<Vec<u8>, CorpusError> {
    let mut rng = stream_rng(seed, index);
    let cells = size.div_ceil(NOISE_CELL) as usize;
    let palette: Vec<[u8; 3]> = (0..cells * cells)
        .map(|_| [rng.random_range(48..208), rng.random_range(48..208), rng.random_range(48..208)])
        .collect();

    let marker = [MARKER_RED, marker_code(class), MARKER_BLUE];
    let stride = size as usize * 3;
    let mut pixels = Vec::with_capacity(stride * size as usize);
    let mut row = Vec::with_capacity(stride);
    for y in 0..size {
        // rows only change at cell boundaries and at the marker's edge
        if y % NOISE_CELL == 0 || y == MARKER_SIZE {
            row.clear();
            for x in 0..size {
                let px = if x < MARKER_SIZE && y < MARKER_SIZE {
                    marker
                } else {
                    palette[(y / NOISE_CELL) as usize * cells + (x / NOISE_CELL) as usize]
                };
                row.extend_from_slice(&px);
            }
        }
        pixels.extend_from_slice(&row);
    }

    let mut out = Vec::new();
    let mut encoder = png::Encoder::new(&mut out, size, size);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    encoder.set_compression(png::Compression::Fast);
    let mut writer = encoder.write_header()?;
    writer.write_image_data(&pixels)?;
    writer.finish()?;
    Ok(out)
}

/// Reads the corner marker of a generated image. `Ok(None)` when the image
/// carries no valid marker.
pub fn decode_marker(png_bytes: &[u8]) -> Result<Option<SampleClass>, CorpusError> {
    let mut decoder = png::Decoder::new(Cursor::new(png_bytes));
    decoder.set_transformations(png::Transformations::EXPAND | png::Transformations::STRIP_16);
    let mut reader = decoder.read_info()?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let info = reader.next_frame(&mut buf)?;
    let channels = match info.color_type {
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        _ => return Ok(None),
    };
    if info.width < MARKER_SIZE || info.height < MARKER_SIZE {
        return Ok(None);
    }
    let pixel = |x: u32, y: u32| {
        let at = y as usize * info.line_size + x as usize * channels;
        [buf[at], buf[at + 1], buf[at + 2]]
    };
    let first = pixel(0, 0);
    if first[0] != MARKER_RED || first[2] != MARKER_BLUE {
        return Ok(None);
    }
    let uniform = (0..MARKER_SIZE).all(|y| (0..MARKER_SIZE).all(|x| pixel(x, y) == first));
    Ok(if uniform { class_for_code(first[1]) } else { None })
}

pub fn gen_corpus(spec: &CorpusSpec, out_dir: &Path) -> Result<Manifest, CorpusError> {
    gen_corpus_with(spec, out_dir, Execution::default())
}

/// Writes `images/*.png` and `manifest.csv` under `out_dir`.
pub fn gen_corpus_with(spec: &CorpusSpec, out_dir: &Path, exec: Execution) -> Result<Manifest, CorpusError> {
    spec.check()?;
    let images = out_dir.join("images");
    std::fs::create_dir_all(&images).map_err(io_err(&images))?;

    let records = spec.records();
    let indexed: Vec<(u64, &SampleRecord)> = (0u64..).zip(&records).collect();
    exec.try_map(&indexed, |&(k, r)| {
        let bytes = render_image(r.class, spec.image_size, spec.seed, k)?;
        let path = out_dir.join(&r.path);
        std::fs::write(&path, bytes).map_err(io_err(&path))
    })?;

    let manifest = Manifest::new(spec.name.clone(), out_dir, records);
    let path = out_dir.join("manifest.csv");
    std::fs::write(&path, manifest.to_csv()).map_err(io_err(&path))?;
    Ok(manifest)
}

/// Two normal score populations, clipped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistSpec {
    pub bonafide: (f64, f64),
    pub attack: (f64, f64),
    pub n_bonafide: usize,
    pub n_attack: usize,
    pub seed: u64,
}

impl ScoreDistSpec {
    fn check(&self) -> Result<(), CorpusError> {
        for (name, (mean, sd)) in [("bonafide", self.bonafide), ("attack", self.attack)] {
            if !(0.0..=1.0).contains(&mean) || !(sd > 0.0 && sd.is_finite()) {
                return Err(CorpusError::InvalidSpec(format!(
                    "{name} distribution needs mean in [0, 1] and stddev > 0, got ({mean}, {sd})"
                )));
            }
        }
        if self.n_bonafide == 0 || self.n_attack == 0 {
            return Err(CorpusError::InvalidSpec("sample counts must be at least 1".into()));
        }
        Ok(())
    }
}

fn draw(rng: &mut ChaCha20Rng, (mean, sd): (f64, f64), n: usize) -> Vec<f64> {
    let dist = Normal::new(mean, sd).expect("validated stddev");
    (0..n).map(|_| dist.sample(rng).clamp(0.0, 1.0)).collect()
}

/// Draws a score partition; attacks are dealt round-robin over the three
/// species so per-species breakdowns are populated.
pub fn gen_scores(spec: &ScoreDistSpec) -> Result<ScorePartition, CorpusError> {
    spec.check()?;
    let bonafide = draw(&mut stream_rng(spec.seed, 0), spec.bonafide, spec.n_bonafide);
    let attack = draw(&mut stream_rng(spec.seed, 1), spec.attack, spec.n_attack);

    let mut attacks: BTreeMap<PaisKind, Vec<f64>> = BTreeMap::new();
    for (i, s) in attack.into_iter().enumerate() {
        attacks.entry(PaisKind::ALL[i % 3]).or_default().push(s);
    }
    Ok(ScorePartition::new(bonafide, attacks)?)
}

/// Closed-form EER of two equal-variance normals, ignoring clipping.
pub fn analytic_eer(spec: &ScoreDistSpec) -> Result<f64, CorpusError> {
    let ((mu_bf, sd_bf), (mu_atk, sd_atk)) = (spec.bonafide, spec.attack);
    if sd_bf != sd_atk {
        return Err(CorpusError::InvalidSpec(
            "closed-form EER needs equal stddevs; estimate unequal ones by simulation".into(),
        ));
    }
    if sd_bf.is_nan() || sd_bf <= 0.0 {
        return Err(CorpusError::InvalidSpec("stddev must be positive".into()));
    }
    let z = -(mu_bf - mu_atk).abs() / (2.0 * sd_bf);
    Ok(StdNormal::standard().cdf(z))
}

/// Pooled EER of [`gen_scores`] for each seed.
pub fn eer_trials(spec: &ScoreDistSpec, seeds: &[u64], exec: Execution) -> Result<Vec<f64>, CorpusError> {
    exec.try_map(seeds, |&seed| {
        let p = gen_scores(&ScoreDistSpec { seed, ..*spec })?;
        Ok(metrics::eer(&p, AttackSelector::Pooled)?.rate)
    })
}
