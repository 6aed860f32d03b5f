#![allow(dead_code)]

pub mod brute_force;
pub mod stub;

use pad_eval::corpusgen::{CorpusSpec, CountEntry};
use pad_eval::manifest::{PaisKind, SampleClass};

/// Small corpus with every class in two countries.
pub fn small_corpus_spec(per_cell: usize, image_size: u32, seed: u64) -> CorpusSpec {
    let classes = [
        SampleClass::BonaFide,
        SampleClass::Attack(PaisKind::Print),
        SampleClass::Attack(PaisKind::Screen),
        SampleClass::Attack(PaisKind::Composite),
    ];
    let counts = classes
        .iter()
        .flat_map(|&label| {
            ["CHL", "PAN"].map(|c| CountEntry { label, detail: None, country: c.into(), count: per_cell })
        })
        .collect();
    CorpusSpec { name: "small".into(), counts, image_size, seed, subject_pool: 155 }
}
