//! Practice-cycle session state machine.
//!
//! ```text
//! ChoosingDifficulty --commit--> Practising --third answer--> Completed
//! ```
//!
//! Previews are only allowed while choosing; answers only while practising.
//! A completed session is final; the learner restarts by opening a new one.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use steerpath_core::{ExerciseId, LearnerId, SeriesPlan64, SliderValue, StickyPicker, TopicId, SERIES_LEN};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    ChoosingDifficulty,
    Practising,
    Completed,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Phase::ChoosingDifficulty => "ChoosingDifficulty",
            Phase::Practising => "Practising",
            Phase::Completed => "Completed",
        };
        f.write_str(name)
    }
}

/// Which explanation accompanies the slider; fixed for the session's lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ExplanationVariant {
    #[default]
    WhatIf,
    Feedback,
    SliderOnly,
    /// No slider: the next series is announced at the default difficulty.
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("session is {actual}, operation needs {expected}")]
    Phase { expected: Phase, actual: Phase },
    #[error("no series has been previewed yet")]
    NothingPreviewed,
    #[error("exercise `{0}` is not part of this series")]
    NotInPlan(ExerciseId),
    #[error("exercise `{0}` was already answered")]
    AlreadyAnswered(ExerciseId),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SessionId(pub String);

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Session {
    pub session_id: SessionId,
    pub learner_id: LearnerId,
    pub topic_id: TopicId,
    pub variant: ExplanationVariant,
    pub phase: Phase,
    /// Latest previewed slider position.
    pub slider: Option<SliderValue>,
    pub plan: Option<SeriesPlan64>,
    pub answered: BTreeMap<ExerciseId, bool>,
    #[serde(skip)]
    pub(crate) picker: StickyPicker,
}

impl Session {
    pub fn new(
        session_id: SessionId,
        learner_id: LearnerId,
        topic_id: TopicId,
        variant: ExplanationVariant,
        feedback_seed: u64,
    ) -> Self {
        Self {
            session_id,
            learner_id,
            topic_id,
            variant,
            phase: Phase::ChoosingDifficulty,
            slider: None,
            plan: None,
            answered: BTreeMap::new(),
            picker: StickyPicker::new(feedback_seed),
        }
    }

    fn expect(&self, expected: Phase) -> Result<(), SessionError> {
        if self.phase == expected {
            Ok(())
        } else {
            Err(SessionError::Phase {
                expected,
                actual: self.phase,
            })
        }
    }

    pub fn check_preview(&self) -> Result<(), SessionError> {
        self.expect(Phase::ChoosingDifficulty)
    }

    pub fn record_preview(&mut self, slider: SliderValue) -> Result<(), SessionError> {
        self.check_preview()?;
        self.slider = Some(slider);
        Ok(())
    }

    /// Slider to plan with at commit time.
    pub fn commit_slider(&self) -> Result<SliderValue, SessionError> {
        self.expect(Phase::ChoosingDifficulty)?;
        self.slider.ok_or(SessionError::NothingPreviewed)
    }

    pub fn commit(&mut self, plan: SeriesPlan64) -> Result<(), SessionError> {
        self.commit_slider()?;
        self.plan = Some(plan);
        self.phase = Phase::Practising;
        Ok(())
    }

    pub fn check_answer(&self, exercise: &ExerciseId) -> Result<(), SessionError> {
        self.expect(Phase::Practising)?;
        let plan = self.plan.as_ref().expect("practising sessions hold a plan");
        if !plan.contains(exercise) {
            return Err(SessionError::NotInPlan(exercise.clone()));
        }
        if self.answered.contains_key(exercise) {
            return Err(SessionError::AlreadyAnswered(exercise.clone()));
        }
        Ok(())
    }

    pub fn record_answer(&mut self, exercise: &ExerciseId, correct: bool) -> Result<(), SessionError> {
        self.check_answer(exercise)?;
        self.answered.insert(exercise.clone(), correct);
        if self.answered.len() == SERIES_LEN {
            self.phase = Phase::Completed;
        }
        Ok(())
    }
}
