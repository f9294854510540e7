#![allow(dead_code)]

use std::sync::Arc;

use steerpath_core::{EngineConfig64, Exercise64, ExerciseBank64, Rating};
use steerpath_service::{PracticeService, Store};

pub const FRACTIONS: [f64; 6] = [-1.5, -1.0, -0.5, 0.0, 0.5, 1.0];

/// Topic `fractions` with six exercises (answer key `k<i>`), topic `tiny` with two.
pub fn bank() -> ExerciseBank64 {
    let fractions = FRACTIONS.iter().enumerate().map(|(i, d)| Exercise64 {
        id: format!("f{i}").into(),
        topic_id: "fractions".into(),
        difficulty: Rating::new(*d).unwrap(),
        prompt: format!("fraction question {i}"),
        answer_key: format!("k{i}"),
    });
    let tiny = (0..2).map(|i| Exercise64 {
        id: format!("t{i}").into(),
        topic_id: "tiny".into(),
        difficulty: Rating::zero(),
        prompt: String::new(),
        answer_key: "x".into(),
    });
    ExerciseBank64::new(fractions.chain(tiny)).unwrap()
}

pub fn service() -> Arc<PracticeService> {
    let config = EngineConfig64::default();
    Arc::new(PracticeService::new(Store::in_memory(bank(), config.model()), config))
}

/// Answer key of a fixture exercise id.
pub fn key(id: &str) -> String {
    format!("k{}", &id[1..])
}
