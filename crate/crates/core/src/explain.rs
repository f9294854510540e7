//! Explanations built on top of a series plan.
//!
//! The learner sees a *what-if* projection: where their mastery would land if
//! they solved the whole planned series. Teachers get a *why* payload: every
//! exercise of the topic in rising difficulty, with the planned ones flagged
//! and per-exercise attempt history.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bank::ExerciseBank;
use crate::ids::{ExerciseId, LearnerId, TopicId};
use crate::mastery::{learner_after, Attempt, LearnerTopicState, MasteryBand, MasteryScore, ModelParams, Rating};
use crate::recommender::{SeriesPlan, SliderValue, SERIES_LEN};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExplainError {
    #[error("plan is for {plan_learner}/{plan_topic}, state is for {state_learner}/{state_topic}")]
    Mismatch {
        plan_learner: LearnerId,
        plan_topic: TopicId,
        state_learner: LearnerId,
        state_topic: TopicId,
    },
    #[error("exercise `{0}` is not in the bank")]
    UnknownExercise(ExerciseId),
    #[error("unknown topic `{0}`")]
    UnknownTopic(TopicId),
    #[error("k_learner must be positive and finite")]
    BadRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct WhatIfProjection<S> {
    pub current_rating: Rating<S>,
    pub projected_rating: Rating<S>,
    pub current_score: MasteryScore<S>,
    pub projected_score: MasteryScore<S>,
    pub current_band: MasteryBand,
    pub projected_band: MasteryBand,
    pub slider: SliderValue,
    pub series_exercise_ids: [ExerciseId; SERIES_LEN],
}

impl<S> WhatIfProjection<S> {
    /// True when solving the series would not move the learner to a new band.
    pub fn band_unchanged(&self) -> bool {
        self.current_band == self.projected_band
    }
}

fn check_plan<S: Scalar>(state: &LearnerTopicState<S>, plan: &SeriesPlan<S>) -> Result<(), ExplainError> {
    if state.is_for(&plan.learner_id, &plan.topic_id) {
        Ok(())
    } else {
        Err(ExplainError::Mismatch {
            plan_learner: plan.learner_id.clone(),
            plan_topic: plan.topic_id.clone(),
            state_learner: state.learner_id.clone(),
            state_topic: state.topic_id.clone(),
        })
    }
}

/// Projects the learner's mastery after answering the planned series
/// correctly, in plan order, with item difficulties held at their current
/// values. Nothing is written anywhere.
pub fn project_what_if<S: Scalar>(
    state: &LearnerTopicState<S>,
    plan: &SeriesPlan<S>,
    bank: &ExerciseBank<S>,
    params: &ModelParams<S>,
) -> Result<WhatIfProjection<S>, ExplainError> {
    check_plan(state, plan)?;
    if !(params.k_learner > S::zero() && params.k_learner.is_finite()) {
        return Err(ExplainError::BadRate);
    }
    let mut rating = state.rating;
    for id in &plan.exercise_ids {
        let exercise = bank
            .get(id)
            .ok_or_else(|| ExplainError::UnknownExercise(id.clone()))?;
        rating = learner_after(rating, exercise.difficulty, true, params.k_learner);
    }
    Ok(WhatIfProjection {
        current_rating: state.rating,
        projected_rating: rating,
        current_score: state.score(),
        projected_score: rating.score(),
        current_band: params.band(state.rating),
        projected_band: params.band(rating),
        slider: plan.slider,
        series_exercise_ids: plan.exercise_ids.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct WhyItem<S> {
    pub exercise_id: ExerciseId,
    pub difficulty: Rating<S>,
    pub recommended: bool,
    pub attempt_count: u64,
    pub last_correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct WhyPayload<S> {
    pub topic_id: TopicId,
    pub learner_id: LearnerId,
    pub learner_band: MasteryBand,
    pub learner_score: MasteryScore<S>,
    /// Ascending difficulty.
    pub items: Vec<WhyItem<S>>,
}

impl<S> WhyPayload<S> {
    pub fn recommended_count(&self) -> usize {
        self.items.iter().filter(|i| i.recommended).count()
    }
}

/// Lays out every exercise of the learner's topic by difficulty, flags the
/// plan's exercises and summarises the learner's attempts on each.
pub fn build_why<S: Scalar>(
    state: &LearnerTopicState<S>,
    plan: Option<&SeriesPlan<S>>,
    bank: &ExerciseBank<S>,
    history: &[Attempt<S>],
    params: &ModelParams<S>,
) -> Result<WhyPayload<S>, ExplainError> {
    if let Some(plan) = plan {
        check_plan(state, plan)?;
    }
    let exercises = bank
        .topic(&state.topic_id)
        .ok_or_else(|| ExplainError::UnknownTopic(state.topic_id.clone()))?;

    let mut attempts: HashMap<&ExerciseId, (u64, bool)> = HashMap::new();
    for attempt in history.iter().filter(|a| state.is_for(&a.learner_id, &a.topic_id)) {
        let entry = attempts.entry(&attempt.exercise_id).or_insert((0, false));
        entry.0 += 1;
        entry.1 = attempt.correct;
    }

    let mut items: Vec<WhyItem<S>> = exercises
        .map(|exercise| {
            let seen = attempts.get(&exercise.id);
            WhyItem {
                exercise_id: exercise.id.clone(),
                difficulty: exercise.difficulty,
                recommended: plan.is_some_and(|p| p.contains(&exercise.id)),
                attempt_count: seen.map_or(0, |s| s.0),
                last_correct: seen.map(|s| s.1),
            }
        })
        .collect();
    items.sort_by(|a, b| {
        a.difficulty
            .partial_cmp(&b.difficulty)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.exercise_id.cmp(&b.exercise_id))
    });

    Ok(WhyPayload {
        topic_id: state.topic_id.clone(),
        learner_id: state.learner_id.clone(),
        learner_band: params.band(state.rating),
        learner_score: state.score(),
        items,
    })
}
