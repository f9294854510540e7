//! Persistent practice state.
//!
//! The attempt log is the source of truth. Learner-topic ratings and current
//! item difficulties are derived by folding the log over the bank as it was
//! ingested; [`Store::audit`] re-runs that fold and reports every value that
//! disagrees with what is held in memory.
//!
//! On disk the log is one JSON [`Attempt`](steerpath_core::Attempt) per line.
//! Each record is written and flushed before memory is updated. A trailing
//! partial line left by an abrupt stop is cut off when the log is reopened.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use steerpath_core::{
    Attempt64, ExerciseBank64, ExerciseId, LearnerId, LearnerTopicState64, ModelError, ModelParams64,
    Rating64, TopicId,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("attempt log {path}: line {line}: {message}")]
    CorruptLog {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("attempt {seq} refers to unknown exercise `{exercise}`")]
    UnknownExercise { seq: u64, exercise: ExerciseId },
    #[error("exercise `{exercise}` is not in topic `{topic}`")]
    WrongTopic { exercise: ExerciseId, topic: TopicId },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

type PairKey = (LearnerId, TopicId);

/// Derived state at some log position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub log_len: usize,
    pub states: Vec<LearnerTopicState64>,
    pub item_difficulties: BTreeMap<ExerciseId, Rating64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mismatch {
    LearnerRating {
        learner_id: LearnerId,
        topic_id: TopicId,
        stored: Option<f64>,
        replayed: Option<f64>,
    },
    ItemDifficulty {
        exercise_id: ExerciseId,
        stored: f64,
        replayed: f64,
    },
    AttemptRecord {
        seq: u64,
        field: &'static str,
        recorded: f64,
        replayed: f64,
    },
    UnknownExercise {
        seq: u64,
        exercise_id: ExerciseId,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub attempts_checked: usize,
    pub pairs_checked: usize,
    pub mismatches: Vec<Mismatch>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// What reopening a log found.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Recovery {
    pub attempts: usize,
    /// Bytes of an incomplete final record that were discarded.
    pub truncated_bytes: u64,
}

/// Folds `log` over the initial bank, returning current item difficulties and
/// learner-topic states.
pub fn replay(
    initial: &ExerciseBank64,
    log: &[Attempt64],
    model: &ModelParams64,
) -> Result<(ExerciseBank64, BTreeMap<PairKey, LearnerTopicState64>), StoreError> {
    let mut bank = initial.clone();
    let mut states = BTreeMap::new();
    for attempt in log {
        apply_to(&mut bank, &mut states, attempt, model)?;
    }
    Ok((bank, states))
}

fn apply_to(
    bank: &mut ExerciseBank64,
    states: &mut BTreeMap<PairKey, LearnerTopicState64>,
    attempt: &Attempt64,
    model: &ModelParams64,
) -> Result<(Rating64, Rating64, Rating64, Rating64), StoreError> {
    let difficulty = bank
        .get(&attempt.exercise_id)
        .ok_or_else(|| StoreError::UnknownExercise {
            seq: attempt.seq,
            exercise: attempt.exercise_id.clone(),
        })?
        .difficulty;
    let key = (attempt.learner_id.clone(), attempt.topic_id.clone());
    let state = states
        .entry(key)
        .or_insert_with(|| LearnerTopicState64::initial(attempt.learner_id.clone(), attempt.topic_id.clone(), model));
    let before = state.rating;
    let (after, difficulty_after) = model.apply(before, difficulty, attempt.correct)?;
    state.rating = after;
    state.attempt_count += 1;
    bank.set_difficulty(&attempt.exercise_id, difficulty_after);
    Ok((before, after, difficulty, difficulty_after))
}

/// Reads a log file. A final line without its newline terminator, or one that
/// does not parse, is treated as a torn write and reported as truncated.
pub fn read_log(path: &Path) -> Result<(Vec<Attempt64>, Recovery), StoreError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let mut attempts: Vec<Attempt64> = Vec::new();
    let mut offset = 0usize;
    let mut line_no = 0;
    while offset < bytes.len() {
        line_no += 1;
        let rest = &bytes[offset..];
        let Some(end) = rest.iter().position(|b| *b == b'\n') else {
            break;
        };
        let line = &rest[..end];
        let is_last = offset + end + 1 == bytes.len();
        match serde_json::from_slice::<Attempt64>(line) {
            Ok(attempt) => {
                if let Some(prev) = attempts.last() {
                    if attempt.seq <= prev.seq {
                        return Err(StoreError::CorruptLog {
                            path: path.into(),
                            line: line_no,
                            message: format!("sequence {} after {}", attempt.seq, prev.seq),
                        });
                    }
                }
                attempts.push(attempt);
            }
            Err(_) if is_last => break,
            Err(e) => {
                return Err(StoreError::CorruptLog {
                    path: path.into(),
                    line: line_no,
                    message: e.to_string(),
                })
            }
        }
        offset += end + 1;
    }
    let recovery = Recovery {
        attempts: attempts.len(),
        truncated_bytes: (bytes.len() - offset) as u64,
    };
    Ok((attempts, recovery))
}

#[derive(Debug)]
struct LogSink {
    file: File,
}

impl LogSink {
    fn append(&mut self, attempt: &Attempt64) -> io::Result<()> {
        let mut line = serde_json::to_vec(attempt).map_err(io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()
    }
}

#[derive(Debug)]
pub struct Store {
    model: ModelParams64,
    initial_bank: ExerciseBank64,
    bank: ExerciseBank64,
    log: Vec<Attempt64>,
    by_pair: HashMap<PairKey, Vec<usize>>,
    states: BTreeMap<PairKey, LearnerTopicState64>,
    sink: Option<LogSink>,
}

impl Store {
    pub fn in_memory(bank: ExerciseBank64, model: ModelParams64) -> Self {
        Self {
            model,
            initial_bank: bank.clone(),
            bank,
            log: Vec::new(),
            by_pair: HashMap::new(),
            states: BTreeMap::new(),
            sink: None,
        }
    }

    /// Opens (or creates) a file-backed log and rebuilds state by replaying it.
    pub fn open(bank: ExerciseBank64, model: ModelParams64, log_path: &Path) -> Result<(Self, Recovery), StoreError> {
        let (log, recovery) = if log_path.exists() {
            read_log(log_path)?
        } else {
            (Vec::new(), Recovery::default())
        };
        let mut file = OpenOptions::new().create(true).read(true).write(true).truncate(false).open(log_path)?;
        if recovery.truncated_bytes > 0 {
            let keep = file.metadata()?.len() - recovery.truncated_bytes;
            file.set_len(keep)?;
            file.sync_all()?;
        }
        file.seek(SeekFrom::End(0))?;
        let mut store = Self::from_log(bank, model, log)?;
        store.sink = Some(LogSink { file });
        Ok((store, recovery))
    }

    /// In-memory store whose derived state comes from replaying `log`.
    pub fn from_log(bank: ExerciseBank64, model: ModelParams64, log: Vec<Attempt64>) -> Result<Self, StoreError> {
        let (current, states) = replay(&bank, &log, &model)?;
        let mut store = Self::in_memory(bank, model);
        store.bank = current;
        store.states = states;
        store.log = log;
        store.reindex();
        Ok(store)
    }

    /// Store whose derived state is taken from a snapshot instead of the log;
    /// log records past the snapshot position are folded on top.
    pub fn restore(
        bank: ExerciseBank64,
        model: ModelParams64,
        log: Vec<Attempt64>,
        snapshot: Snapshot,
    ) -> Result<Self, StoreError> {
        let mut store = Self::in_memory(bank, model);
        for (id, difficulty) in &snapshot.item_difficulties {
            store.bank.set_difficulty(id, *difficulty);
        }
        store.states = snapshot
            .states
            .into_iter()
            .map(|s| ((s.learner_id.clone(), s.topic_id.clone()), s))
            .collect();
        for attempt in log.iter().skip(snapshot.log_len) {
            apply_to(&mut store.bank, &mut store.states, attempt, &store.model)?;
        }
        store.log = log;
        store.reindex();
        Ok(store)
    }

    fn reindex(&mut self) {
        self.by_pair.clear();
        for (i, attempt) in self.log.iter().enumerate() {
            self.by_pair
                .entry((attempt.learner_id.clone(), attempt.topic_id.clone()))
                .or_default()
                .push(i);
        }
    }

    pub fn model(&self) -> &ModelParams64 {
        &self.model
    }

    pub fn bank(&self) -> &ExerciseBank64 {
        &self.bank
    }

    pub fn initial_bank(&self) -> &ExerciseBank64 {
        &self.initial_bank
    }

    pub fn log(&self) -> &[Attempt64] {
        &self.log
    }

    /// Current estimate, or the initial one if the learner never practised the topic.
    pub fn state(&self, learner: &LearnerId, topic: &TopicId) -> LearnerTopicState64 {
        self.states
            .get(&(learner.clone(), topic.clone()))
            .cloned()
            .unwrap_or_else(|| LearnerTopicState64::initial(learner.clone(), topic.clone(), &self.model))
    }

    pub fn states(&self) -> impl Iterator<Item = &LearnerTopicState64> {
        self.states.values()
    }

    /// The learner's attempts on one topic, oldest first.
    pub fn history(&self, learner: &LearnerId, topic: &TopicId) -> Vec<Attempt64> {
        self.by_pair
            .get(&(learner.clone(), topic.clone()))
            .map(|indices| indices.iter().map(|&i| self.log[i].clone()).collect())
            .unwrap_or_default()
    }

    pub fn has_learner(&self, learner: &LearnerId) -> bool {
        self.states.keys().any(|(l, _)| l == learner)
    }

    /// Grades are decided by the caller; this persists the attempt and applies
    /// the rating update to learner and item.
    pub fn record_attempt(
        &mut self,
        learner: &LearnerId,
        topic: &TopicId,
        exercise: &ExerciseId,
        correct: bool,
    ) -> Result<Attempt64, StoreError> {
        let item = self.bank.get(exercise).ok_or_else(|| StoreError::UnknownExercise {
            seq: self.next_seq(),
            exercise: exercise.clone(),
        })?;
        if &item.topic_id != topic {
            return Err(StoreError::WrongTopic {
                exercise: exercise.clone(),
                topic: topic.clone(),
            });
        }
        let difficulty = item.difficulty;
        let before = self.state(learner, topic).rating;
        let (after, difficulty_after) = self.model.apply(before, difficulty, correct)?;
        let attempt = Attempt64 {
            seq: self.next_seq(),
            learner_id: learner.clone(),
            topic_id: topic.clone(),
            exercise_id: exercise.clone(),
            correct,
            learner_rating_before: before,
            learner_rating_after: after,
            exercise_difficulty_before: difficulty,
            exercise_difficulty_after: difficulty_after,
        };
        if let Some(sink) = &mut self.sink {
            sink.append(&attempt)?;
        }
        apply_to(&mut self.bank, &mut self.states, &attempt, &self.model)?;
        self.by_pair
            .entry((learner.clone(), topic.clone()))
            .or_default()
            .push(self.log.len());
        self.log.push(attempt.clone());
        Ok(attempt)
    }

    fn next_seq(&self) -> u64 {
        self.log.last().map_or(1, |a| a.seq + 1)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            log_len: self.log.len(),
            states: self.states.values().cloned().collect(),
            item_difficulties: self.bank.iter().map(|e| (e.id.clone(), e.difficulty)).collect(),
        }
    }

    /// Canonical serialisation of everything mastery-related: log, states and
    /// item difficulties. Equal bytes mean an unchanged store.
    pub fn fingerprint(&self) -> Vec<u8> {
        serde_json::to_vec(&(&self.log, self.snapshot())).expect("store serialises")
    }

    pub fn audit(&self) -> AuditReport {
        let mut mismatches = Vec::new();
        let mut bank = self.initial_bank.clone();
        let mut states = BTreeMap::new();
        for attempt in &self.log {
            match apply_to(&mut bank, &mut states, attempt, &self.model) {
                Ok((before, after, d_before, d_after)) => {
                    let fields = [
                        ("learner_rating_before", attempt.learner_rating_before, before),
                        ("learner_rating_after", attempt.learner_rating_after, after),
                        ("exercise_difficulty_before", attempt.exercise_difficulty_before, d_before),
                        ("exercise_difficulty_after", attempt.exercise_difficulty_after, d_after),
                    ];
                    for (field, recorded, replayed) in fields {
                        if recorded.value().to_bits() != replayed.value().to_bits() {
                            mismatches.push(Mismatch::AttemptRecord {
                                seq: attempt.seq,
                                field,
                                recorded: recorded.value(),
                                replayed: replayed.value(),
                            });
                        }
                    }
                }
                Err(_) => mismatches.push(Mismatch::UnknownExercise {
                    seq: attempt.seq,
                    exercise_id: attempt.exercise_id.clone(),
                }),
            }
        }

        let mut keys: Vec<&PairKey> = self.states.keys().chain(states.keys()).collect();
        keys.sort();
        keys.dedup();
        for key in &keys {
            let stored = self.states.get(*key).map(|s| s.rating.value());
            let replayed = states.get(*key).map(|s| s.rating.value());
            if stored.map(f64::to_bits) != replayed.map(f64::to_bits) {
                mismatches.push(Mismatch::LearnerRating {
                    learner_id: key.0.clone(),
                    topic_id: key.1.clone(),
                    stored,
                    replayed,
                });
            }
        }
        for item in self.bank.iter() {
            if let Some(replayed) = bank.get(&item.id) {
                if item.difficulty.value().to_bits() != replayed.difficulty.value().to_bits() {
                    mismatches.push(Mismatch::ItemDifficulty {
                        exercise_id: item.id.clone(),
                        stored: item.difficulty.value(),
                        replayed: replayed.difficulty.value(),
                    });
                }
            }
        }
        AuditReport {
            attempts_checked: self.log.len(),
            pairs_checked: keys.len(),
            mismatches,
        }
    }
}

/// Reads a snapshot written by [`write_snapshot`].
pub fn read_snapshot(path: &Path) -> Result<Snapshot, StoreError> {
    let reader = BufReader::new(File::open(path)?);
    let mut text = String::new();
    for line in reader.lines() {
        text.push_str(&line?);
        text.push('\n');
    }
    serde_json::from_str(&text).map_err(|e| StoreError::CorruptLog {
        path: path.into(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn write_snapshot(path: &Path, snapshot: &Snapshot) -> Result<(), StoreError> {
    let mut file = File::create(path)?;
    serde_json::to_writer_pretty(&mut file, snapshot).map_err(io::Error::other)?;
    file.write_all(b"\n")?;
    file.sync_all()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use steerpath_core::{Exercise64, Rating};

    fn bank() -> ExerciseBank64 {
        ExerciseBank64::new((0..4).map(|i| Exercise64 {
            id: format!("e{i}").into(),
            topic_id: if i < 3 { "t" } else { "u" }.into(),
            difficulty: Rating::new(i as f64 * 0.5 - 0.5).unwrap(),
            prompt: String::new(),
            answer_key: "x".into(),
        }))
        .unwrap()
    }

    fn ids() -> (LearnerId, TopicId) {
        ("amy".into(), "t".into())
    }

    #[test]
    fn fresh_store_audits_clean() {
        let store = Store::in_memory(bank(), ModelParams64::default());
        let report = store.audit();
        assert!(report.is_clean());
        assert_eq!(report.attempts_checked, 0);
    }

    #[test]
    fn recorded_attempt_matches_update_rule() {
        let mut store = Store::in_memory(bank(), ModelParams64::default());
        let (l, t) = ids();
        let a = store.record_attempt(&l, &t, &"e1".into(), true).unwrap();
        assert_eq!(a.seq, 1);
        assert_eq!(a.learner_rating_after.value(), 0.2);
        assert_eq!(a.exercise_difficulty_after.value(), -0.1);
        assert_eq!(store.state(&l, &t).rating.value(), 0.2);
        assert_eq!(store.bank().get(&"e1".into()).unwrap().difficulty.value(), -0.1);
        assert_eq!(store.initial_bank().get(&"e1".into()).unwrap().difficulty.value(), 0.0);
        assert_eq!(store.history(&l, &t), vec![a]);
        assert!(store.audit().is_clean());
    }

    #[test]
    fn attempts_must_match_topic_and_bank() {
        let mut store = Store::in_memory(bank(), ModelParams64::default());
        let (l, t) = ids();
        assert!(matches!(
            store.record_attempt(&l, &t, &"e3".into(), true),
            Err(StoreError::WrongTopic { .. })
        ));
        assert!(matches!(
            store.record_attempt(&l, &t, &"nope".into(), true),
            Err(StoreError::UnknownExercise { .. })
        ));
        assert!(store.log().is_empty());
    }

    #[test]
    fn corrupted_snapshot_is_flagged_once() {
        let mut store = Store::in_memory(bank(), ModelParams64::default());
        let (l, t) = ids();
        for (e, c) in [("e0", true), ("e1", false), ("e2", true)] {
            store.record_attempt(&l, &t, &e.into(), c).unwrap();
        }
        store.record_attempt(&"bob".into(), &t, &"e0".into(), false).unwrap();
        let mut snapshot = store.snapshot();
        let clean = Store::restore(bank(), ModelParams64::default(), store.log().to_vec(), snapshot.clone()).unwrap();
        assert!(clean.audit().is_clean());

        snapshot.states[0].rating = Rating::new(snapshot.states[0].rating.value() + 0.25).unwrap();
        let restored = Store::restore(bank(), ModelParams64::default(), store.log().to_vec(), snapshot).unwrap();
        let report = restored.audit();
        assert_eq!(report.mismatches.len(), 1, "{report:?}");
        assert!(matches!(report.mismatches[0], Mismatch::LearnerRating { .. }));
    }

    #[test]
    fn tampered_attempt_record_is_flagged() {
        let mut store = Store::in_memory(bank(), ModelParams64::default());
        let (l, t) = ids();
        store.record_attempt(&l, &t, &"e0".into(), true).unwrap();
        let mut log = store.log().to_vec();
        log[0].learner_rating_after = Rating::new(9.0).unwrap();
        let report = Store::from_log(bank(), ModelParams64::default(), log).unwrap().audit();
        assert_eq!(report.mismatches.len(), 1);
        assert!(matches!(
            report.mismatches[0],
            Mismatch::AttemptRecord { field: "learner_rating_after", .. }
        ));
    }

    #[test]
    fn file_log_survives_reopen_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("attempts.jsonl");
        let (l, t) = ids();
        let (mut store, recovery) = Store::open(bank(), ModelParams64::default(), &path).unwrap();
        assert_eq!(recovery, Recovery::default());
        for (e, c) in [("e0", true), ("e1", false), ("e2", true)] {
            store.record_attempt(&l, &t, &e.into(), c).unwrap();
        }
        let after_two = {
            let log = &store.log()[..2];
            replay(&bank(), log, &ModelParams64::default()).unwrap().1
        };
        let full = store.fingerprint();
        drop(store);

        let (store, recovery) = Store::open(bank(), ModelParams64::default(), &path).unwrap();
        assert_eq!(recovery.attempts, 3);
        assert_eq!(store.fingerprint(), full);
        drop(store);

        // Cut the last record in half.
        let len = std::fs::metadata(&path).unwrap().len();
        let file = OpenOptions::new().write(true).open(&path).unwrap();
        file.set_len(len - 20).unwrap();
        drop(file);
        let (mut store, recovery) = Store::open(bank(), ModelParams64::default(), &path).unwrap();
        assert_eq!(recovery.attempts, 2);
        assert!(recovery.truncated_bytes > 0);
        assert_eq!(store.state(&l, &t), after_two[&(l.clone(), t.clone())]);
        assert!(store.audit().is_clean());

        // Appending after recovery produces a well-formed log again.
        store.record_attempt(&l, &t, &"e2".into(), true).unwrap();
        let (log, recovery) = read_log(&path).unwrap();
        assert_eq!((log.len(), recovery.truncated_bytes), (3, 0));
    }

    #[test]
    fn garbage_in_the_middle_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("attempts.jsonl");
        std::fs::write(&path, "not json\n{}\n").unwrap();
        assert!(matches!(read_log(&path), Err(StoreError::CorruptLog { line: 1, .. })));
    }

    #[test]
    fn snapshot_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::in_memory(bank(), ModelParams64::default());
        let (l, t) = ids();
        store.record_attempt(&l, &t, &"e0".into(), true).unwrap();
        let path = dir.path().join("snap.json");
        write_snapshot(&path, &store.snapshot()).unwrap();
        assert_eq!(read_snapshot(&path).unwrap(), store.snapshot());
    }
}
