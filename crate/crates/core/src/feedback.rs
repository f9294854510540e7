//! Wise-feedback sentences tied to the difficulty slider.
//!
//! The slider range is split into five buckets, `[0.0, 0.2)`, `[0.2, 0.4)`,
//! `[0.4, 0.6)`, `[0.6, 0.8)` and `[0.8, 1.0]`, each holding three
//! motivational sentences. Sentences live in a tab-separated catalog file
//! (`data/wise_feedback.tsv`) that is embedded at build time; other catalogs
//! can be loaded with [`Catalog::parse`].

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recommender::SliderValue;

pub const BUCKETS: usize = 5;
pub const SENTENCES_PER_BUCKET: usize = 3;

/// The bundled catalog, byte-for-byte.
pub const BUILTIN_CATALOG: &str = include_str!("../data/wise_feedback.tsv");

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeedbackSentence {
    pub bucket_index: u8,
    pub sentence_index: u8,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("line {line}: expected 4 tab-separated fields")]
    Fields { line: usize },
    #[error("line {line}: bad bucket bounds {lower}..{upper}")]
    Bounds {
        line: usize,
        lower: String,
        upper: String,
    },
    #[error("line {line}: bad sentence index `{index}`")]
    Index { line: usize, index: String },
    #[error("line {line}: duplicate sentence {sentence} in bucket {bucket}")]
    Duplicate { line: usize, bucket: u8, sentence: u8 },
    #[error("bucket {bucket} has {found} sentence(s), expected {SENTENCES_PER_BUCKET}")]
    Incomplete { bucket: u8, found: usize },
}

/// Index of the bucket containing `slider`.
pub fn bucket_for(slider: SliderValue) -> usize {
    (usize::from(slider.tenths()) / 2).min(BUCKETS - 1)
}

fn bucket_from_bounds(lower: &str, upper: &str) -> Option<u8> {
    let lo: f64 = lower.trim().parse().ok()?;
    let hi: f64 = upper.trim().parse().ok()?;
    let bucket = (lo * 5.0).round();
    let width_ok = ((hi - lo) - 0.2).abs() < 1e-9;
    let aligned = (lo * 5.0 - bucket).abs() < 1e-9;
    (width_ok && aligned && (0.0..BUCKETS as f64).contains(&bucket)).then_some(bucket as u8)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    buckets: [[FeedbackSentence; SENTENCES_PER_BUCKET]; BUCKETS],
}

impl Catalog {
    pub fn parse(text: &str) -> Result<Self, CatalogError> {
        let mut slots: Vec<Vec<Option<FeedbackSentence>>> =
            vec![vec![None; SENTENCES_PER_BUCKET]; BUCKETS];
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.splitn(4, '\t').collect();
            let [lower, upper, index, sentence] = fields[..] else {
                return Err(CatalogError::Fields { line: line_no });
            };
            let bucket = bucket_from_bounds(lower, upper).ok_or_else(|| CatalogError::Bounds {
                line: line_no,
                lower: lower.into(),
                upper: upper.into(),
            })?;
            let sentence_index = index
                .trim()
                .parse::<u8>()
                .ok()
                .filter(|i| usize::from(*i) < SENTENCES_PER_BUCKET)
                .ok_or_else(|| CatalogError::Index {
                    line: line_no,
                    index: index.into(),
                })?;
            let slot = &mut slots[usize::from(bucket)][usize::from(sentence_index)];
            if slot.is_some() {
                return Err(CatalogError::Duplicate {
                    line: line_no,
                    bucket,
                    sentence: sentence_index,
                });
            }
            *slot = Some(FeedbackSentence {
                bucket_index: bucket,
                sentence_index,
                text: sentence.to_owned(),
            });
        }

        let mut buckets = Vec::with_capacity(BUCKETS);
        for (b, row) in slots.into_iter().enumerate() {
            let found = row.iter().flatten().count();
            let row: Vec<FeedbackSentence> = row.into_iter().flatten().collect();
            let row: [FeedbackSentence; SENTENCES_PER_BUCKET] = row
                .try_into()
                .map_err(|_| CatalogError::Incomplete { bucket: b as u8, found })?;
            buckets.push(row);
        }
        let buckets = buckets.try_into().expect("exactly BUCKETS rows");
        Ok(Self { buckets })
    }

    pub fn builtin() -> &'static Catalog {
        static CATALOG: OnceLock<Catalog> = OnceLock::new();
        CATALOG.get_or_init(|| Catalog::parse(BUILTIN_CATALOG).expect("bundled catalog is valid"))
    }

    pub fn bucket(&self, index: usize) -> &[FeedbackSentence; SENTENCES_PER_BUCKET] {
        &self.buckets[index]
    }

    pub fn sentences(&self) -> impl Iterator<Item = &FeedbackSentence> {
        self.buckets.iter().flatten()
    }

    /// Uniform seeded choice among the slider's bucket sentences.
    pub fn pick(&self, slider: SliderValue, seed: u64) -> &FeedbackSentence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let choice = rng.random_range(0..SENTENCES_PER_BUCKET);
        &self.buckets[bucket_for(slider)][choice]
    }
}

/// [`Catalog::pick`] on the bundled catalog.
pub fn pick_sentence(slider: SliderValue, seed: u64) -> FeedbackSentence {
    Catalog::builtin().pick(slider, seed).clone()
}

/// Keeps the shown sentence while the slider stays in one bucket and draws a
/// fresh one only when the bucket changes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StickyPicker {
    base_seed: u64,
    draws: u64,
    current: Option<FeedbackSentence>,
}

impl StickyPicker {
    pub fn new(base_seed: u64) -> Self {
        Self {
            base_seed,
            draws: 0,
            current: None,
        }
    }

    pub fn current(&self) -> Option<&FeedbackSentence> {
        self.current.as_ref()
    }

    pub fn pick(&mut self, catalog: &Catalog, slider: SliderValue) -> &FeedbackSentence {
        let bucket = bucket_for(slider);
        let stale = self
            .current
            .as_ref()
            .is_none_or(|s| usize::from(s.bucket_index) != bucket);
        if stale {
            let seed = self.base_seed.wrapping_add(self.draws);
            self.draws += 1;
            self.current = Some(catalog.pick(slider, seed).clone());
        }
        self.current.as_ref().expect("set above")
    }
}
