//! Exercise bank and its line-delimited record format.
//!
//! One JSON object per line:
//!
//! ```text
//! {"id":"frac-01","topic_id":"fractions","difficulty":-0.4,"prompt":"1/2 + 1/4 = ?","answer_key":"3/4"}
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. `difficulty` may be a
//! number or a numeric string; it must be finite.

use std::collections::{BTreeMap, HashMap};
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{ExerciseId, TopicId};
use crate::mastery::Rating;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Exercise<S> {
    pub id: ExerciseId,
    pub topic_id: TopicId,
    pub difficulty: Rating<S>,
    pub prompt: String,
    pub answer_key: String,
}

#[derive(Debug, Error)]
pub enum BankError {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate exercise id `{id}`")]
    DuplicateId { line: usize, id: ExerciseId },
    #[error("line {line}: exercise `{id}` has non-finite difficulty")]
    NonFinite { line: usize, id: ExerciseId },
    #[error("duplicate exercise id `{0}`")]
    Duplicate(ExerciseId),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// What `read_jsonl` found besides the bank itself.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub item_count: usize,
    pub topic_counts: BTreeMap<TopicId, usize>,
    pub warnings: Vec<String>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: ExerciseId,
    topic_id: TopicId,
    difficulty: serde_json::Value,
    prompt: String,
    answer_key: String,
}

fn parse_difficulty(value: &serde_json::Value) -> Option<f64> {
    match value {
        serde_json::Value::Number(n) => n.as_f64(),
        serde_json::Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

/// Exercises indexed by id and grouped by topic.
#[derive(Debug, Clone, PartialEq)]
pub struct ExerciseBank<S> {
    items: Vec<Exercise<S>>,
    by_id: HashMap<ExerciseId, usize>,
    by_topic: BTreeMap<TopicId, Vec<usize>>,
}

impl<S: Scalar> Default for ExerciseBank<S> {
    fn default() -> Self {
        Self {
            items: Vec::new(),
            by_id: HashMap::new(),
            by_topic: BTreeMap::new(),
        }
    }
}

impl<S: Scalar> ExerciseBank<S> {
    pub fn new(exercises: impl IntoIterator<Item = Exercise<S>>) -> Result<Self, BankError> {
        let mut bank = Self::default();
        for exercise in exercises {
            bank.insert(exercise)?;
        }
        Ok(bank)
    }

    pub fn insert(&mut self, exercise: Exercise<S>) -> Result<(), BankError> {
        if self.by_id.contains_key(&exercise.id) {
            return Err(BankError::Duplicate(exercise.id));
        }
        let index = self.items.len();
        self.by_id.insert(exercise.id.clone(), index);
        self.by_topic
            .entry(exercise.topic_id.clone())
            .or_default()
            .push(index);
        self.items.push(exercise);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: &ExerciseId) -> Option<&Exercise<S>> {
        self.by_id.get(id).map(|&i| &self.items[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Exercise<S>> {
        self.items.iter()
    }

    pub fn has_topic(&self, topic: &TopicId) -> bool {
        self.by_topic.contains_key(topic)
    }

    /// Exercises of one topic in insertion order, or `None` for an unknown topic.
    pub fn topic(&self, topic: &TopicId) -> Option<impl Iterator<Item = &Exercise<S>> + '_> {
        self.by_topic
            .get(topic)
            .map(|indices| indices.iter().map(|&i| &self.items[i]))
    }

    pub fn topic_len(&self, topic: &TopicId) -> usize {
        self.by_topic.get(topic).map_or(0, Vec::len)
    }

    /// Topics in lexicographic order with their exercise counts.
    pub fn topics(&self) -> impl Iterator<Item = (&TopicId, usize)> {
        self.by_topic.iter().map(|(t, v)| (t, v.len()))
    }

    /// Overwrites an exercise's difficulty; returns false for an unknown id.
    pub fn set_difficulty(&mut self, id: &ExerciseId, difficulty: Rating<S>) -> bool {
        match self.by_id.get(id) {
            Some(&i) => {
                self.items[i].difficulty = difficulty;
                true
            }
            None => false,
        }
    }

    pub fn read_jsonl(reader: impl BufRead) -> Result<(Self, IngestReport), BankError> {
        let mut bank = Self::default();
        let mut first_line = HashMap::new();
        for (index, line) in reader.lines().enumerate() {
            let line_no = index + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let raw: RawRecord =
                serde_json::from_str(trimmed).map_err(|e| BankError::Malformed {
                    line: line_no,
                    message: e.to_string(),
                })?;
            let Some(value) = parse_difficulty(&raw.difficulty) else {
                return Err(BankError::Malformed {
                    line: line_no,
                    message: format!("difficulty is not a number: {}", raw.difficulty),
                });
            };
            let difficulty = S::from_f64(value)
                .and_then(|v| Rating::new(v).ok())
                .ok_or_else(|| BankError::NonFinite {
                    line: line_no,
                    id: raw.id.clone(),
                })?;
            if first_line.insert(raw.id.clone(), line_no).is_some() {
                return Err(BankError::DuplicateId {
                    line: line_no,
                    id: raw.id,
                });
            }
            bank.insert(Exercise {
                id: raw.id,
                topic_id: raw.topic_id,
                difficulty,
                prompt: raw.prompt,
                answer_key: raw.answer_key,
            })?;
        }

        let mut report = IngestReport {
            item_count: bank.len(),
            topic_counts: bank.topics().map(|(t, n)| (t.clone(), n)).collect(),
            warnings: Vec::new(),
        };
        if bank.is_empty() {
            report.warnings.push("bank file contains no exercises".into());
        }
        for (topic, count) in &report.topic_counts {
            if *count < crate::recommender::SERIES_LEN {
                report.warnings.push(format!(
                    "topic `{topic}` has {count} exercise(s); a series needs {}",
                    crate::recommender::SERIES_LEN
                ));
            }
        }
        Ok((bank, report))
    }

    pub fn write_jsonl(&self, mut writer: impl Write) -> io::Result<()> {
        for exercise in &self.items {
            serde_json::to_writer(&mut writer, exercise)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }
}
