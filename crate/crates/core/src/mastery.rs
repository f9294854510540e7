//! Latent-skill estimation and mastery bands.
//!
//! Learners and exercises share one logit scale. The probability that a
//! learner solves an exercise is `logistic(learner - difficulty)`, and every
//! graded attempt moves both ratings Elo-style by `k * (outcome - expected)`.
//! The learner-facing mastery score is the logistic transform of the rating,
//! cut into five ordered bands.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::ids::{ExerciseId, LearnerId, TopicId};
use crate::scalar::{logistic, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{what} must be finite, got {value}")]
    NonFinite { what: &'static str, value: f64 },
    #[error("{name} must be positive and finite, got {value}")]
    NonPositiveRate { name: &'static str, value: f64 },
    #[error("band thresholds must be strictly increasing inside (0, 1), got {0:?}")]
    BadThresholds(Vec<f64>),
    #[error("attempt {seq} belongs to {learner}/{topic}, not the state being folded")]
    ForeignAttempt {
        seq: u64,
        learner: LearnerId,
        topic: TopicId,
    },
}

/// A finite position on the shared logit scale (learner skill or item difficulty).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize)]
#[serde(transparent)]
pub struct Rating<S>(S);

impl<S: Scalar> Rating<S> {
    pub fn new(value: S) -> Result<Self, ModelError> {
        if value.is_finite() {
            Ok(Self(value))
        } else {
            Err(ModelError::NonFinite {
                what: "rating",
                value: value.to_f64_lossy(),
            })
        }
    }

    pub fn zero() -> Self {
        Self(S::zero())
    }

    pub fn value(self) -> S {
        self.0
    }

    /// Mastery score implied by this rating.
    pub fn score(self) -> MasteryScore<S> {
        MasteryScore::from_rating(self)
    }

    // Arithmetic on finite operands with finite coefficients.
    pub(crate) fn from_finite(value: S) -> Self {
        debug_assert!(value.is_finite());
        Self(value)
    }
}

impl<'de, S: Scalar> Deserialize<'de> for Rating<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = S::deserialize(deserializer)?;
        Rating::new(raw).map_err(serde::de::Error::custom)
    }
}

impl<S: Scalar> fmt::Display for Rating<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Continuous mastery in (0, 1); always `logistic(rating)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MasteryScore<S>(S);

impl<S: Scalar> MasteryScore<S> {
    pub fn from_rating(rating: Rating<S>) -> Self {
        Self(logistic(rating.value()))
    }

    /// Accepts a raw score strictly inside (0, 1).
    pub fn new(value: S) -> Option<Self> {
        (value > S::zero() && value < S::one()).then_some(Self(value))
    }

    pub fn value(self) -> S {
        self.0
    }
}

/// The five ordered competence stages shown to learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MasteryBand {
    Novice,
    AdvancedBeginner,
    Competent,
    Proficient,
    Expert,
}

impl MasteryBand {
    pub const ALL: [MasteryBand; 5] = [
        MasteryBand::Novice,
        MasteryBand::AdvancedBeginner,
        MasteryBand::Competent,
        MasteryBand::Proficient,
        MasteryBand::Expert,
    ];

    pub fn ordinal(self) -> u8 {
        self as u8
    }

    pub fn from_ordinal(ordinal: u8) -> Option<Self> {
        Self::ALL.get(ordinal as usize).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            MasteryBand::Novice => "Novice",
            MasteryBand::AdvancedBeginner => "Advanced beginner",
            MasteryBand::Competent => "Competent",
            MasteryBand::Proficient => "Proficient",
            MasteryBand::Expert => "Expert",
        }
    }
}

impl fmt::Display for MasteryBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Score cut points between consecutive bands. Each cell is closed below and
/// open above, so a score equal to a threshold lands in the upper band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct BandThresholds<S>([S; 4]);

impl<S: Scalar> BandThresholds<S> {
    pub fn new(cuts: [S; 4]) -> Result<Self, ModelError> {
        let inside = cuts.iter().all(|c| *c > S::zero() && *c < S::one());
        let increasing = cuts.windows(2).all(|w| w[0] < w[1]);
        if inside && increasing {
            Ok(Self(cuts))
        } else {
            Err(ModelError::BadThresholds(
                cuts.iter().map(|c| c.to_f64_lossy()).collect(),
            ))
        }
    }

    pub fn cuts(&self) -> [S; 4] {
        self.0
    }

    pub fn band(&self, score: MasteryScore<S>) -> MasteryBand {
        let passed = self.0.iter().filter(|cut| score.value() >= **cut).count();
        MasteryBand::ALL[passed]
    }
}

impl<S: Scalar> Default for BandThresholds<S> {
    fn default() -> Self {
        Self([S::lit(0.2), S::lit(0.4), S::lit(0.6), S::lit(0.8)])
    }
}

impl<'de, S: Scalar> Deserialize<'de> for BandThresholds<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let cuts = <[S; 4]>::deserialize(deserializer)?;
        BandThresholds::new(cuts).map_err(serde::de::Error::custom)
    }
}

/// Band under the default 0.2 / 0.4 / 0.6 / 0.8 cut points.
pub fn to_band<S: Scalar>(score: MasteryScore<S>) -> MasteryBand {
    BandThresholds::default().band(score)
}

/// Probability that a learner at `learner` solves an item at `difficulty`.
pub fn predict_correct<S: Scalar>(learner: Rating<S>, difficulty: Rating<S>) -> S {
    logistic(learner.value() - difficulty.value())
}

/// Like [`predict_correct`] but for unvalidated inputs.
pub fn try_predict_correct<S: Scalar>(learner: S, difficulty: S) -> Result<S, ModelError> {
    Ok(predict_correct(Rating::new(learner)?, Rating::new(difficulty)?))
}

fn check_rate<S: Scalar>(name: &'static str, k: S) -> Result<(), ModelError> {
    if k > S::zero() && k.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonPositiveRate {
            name,
            value: k.to_f64_lossy(),
        })
    }
}

fn outcome<S: Scalar>(correct: bool) -> S {
    if correct {
        S::one()
    } else {
        S::zero()
    }
}

/// Learner side of an update. Shared with the what-if projection so that a
/// projected rating and the rating produced by real answers are bit-identical.
pub(crate) fn learner_after<S: Scalar>(
    learner: Rating<S>,
    difficulty: Rating<S>,
    correct: bool,
    k_learner: S,
) -> Rating<S> {
    let surprise = outcome::<S>(correct) - predict_correct(learner, difficulty);
    Rating::from_finite(learner.value() + k_learner * surprise)
}

/// Elo-style update of both ratings after one graded attempt.
///
/// Returns `(learner', difficulty')`. The two deltas always have opposite
/// signs and `learner_delta / k_learner == -difficulty_delta / k_item`.
pub fn update_rating<S: Scalar>(
    learner: Rating<S>,
    difficulty: Rating<S>,
    correct: bool,
    k_learner: S,
    k_item: S,
) -> Result<(Rating<S>, Rating<S>), ModelError> {
    check_rate("k_learner", k_learner)?;
    check_rate("k_item", k_item)?;
    let surprise = outcome::<S>(correct) - predict_correct(learner, difficulty);
    let learner_next = Rating::new(learner.value() + k_learner * surprise)?;
    let difficulty_next = Rating::new(difficulty.value() - k_item * surprise)?;
    Ok((learner_next, difficulty_next))
}

/// Parameters of the skill model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ModelParams<S> {
    pub initial_rating: Rating<S>,
    pub k_learner: S,
    pub k_item: S,
    /// When false, item difficulties stay at their bank values.
    pub adapt_items: bool,
    pub thresholds: BandThresholds<S>,
}

impl<S: Scalar> ModelParams<S> {
    pub fn validate(&self) -> Result<(), ModelError> {
        check_rate("k_learner", self.k_learner)?;
        check_rate("k_item", self.k_item)
    }

    pub fn band(&self, rating: Rating<S>) -> MasteryBand {
        self.thresholds.band(rating.score())
    }

    /// Applies one graded attempt, honouring `adapt_items`.
    pub fn apply(
        &self,
        learner: Rating<S>,
        difficulty: Rating<S>,
        correct: bool,
    ) -> Result<(Rating<S>, Rating<S>), ModelError> {
        let (learner_next, difficulty_next) =
            update_rating(learner, difficulty, correct, self.k_learner, self.k_item)?;
        let difficulty_next = if self.adapt_items {
            difficulty_next
        } else {
            difficulty
        };
        Ok((learner_next, difficulty_next))
    }
}

impl<S: Scalar> Default for ModelParams<S> {
    fn default() -> Self {
        Self {
            initial_rating: Rating::zero(),
            k_learner: S::lit(0.4),
            k_item: S::lit(0.2),
            adapt_items: true,
            thresholds: BandThresholds::default(),
        }
    }
}

/// One graded answer, with the ratings on both sides of the update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Attempt<S> {
    /// Logical event time; strictly increasing across the whole log.
    pub seq: u64,
    pub learner_id: LearnerId,
    pub topic_id: TopicId,
    pub exercise_id: ExerciseId,
    pub correct: bool,
    pub learner_rating_before: Rating<S>,
    pub learner_rating_after: Rating<S>,
    pub exercise_difficulty_before: Rating<S>,
    pub exercise_difficulty_after: Rating<S>,
}

/// A learner's estimate for a single topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct LearnerTopicState<S> {
    pub learner_id: LearnerId,
    pub topic_id: TopicId,
    pub rating: Rating<S>,
    pub attempt_count: u64,
}

impl<S: Scalar> LearnerTopicState<S> {
    pub fn initial(learner_id: LearnerId, topic_id: TopicId, params: &ModelParams<S>) -> Self {
        Self {
            learner_id,
            topic_id,
            rating: params.initial_rating,
            attempt_count: 0,
        }
    }

    pub fn score(&self) -> MasteryScore<S> {
        self.rating.score()
    }

    pub fn is_for(&self, learner: &LearnerId, topic: &TopicId) -> bool {
        &self.learner_id == learner && &self.topic_id == topic
    }

    /// Folds one attempt into the state, recomputing the rating from the
    /// attempt's pre-update item difficulty.
    pub fn apply(&mut self, attempt: &Attempt<S>, params: &ModelParams<S>) -> Result<(), ModelError> {
        if !self.is_for(&attempt.learner_id, &attempt.topic_id) {
            return Err(ModelError::ForeignAttempt {
                seq: attempt.seq,
                learner: attempt.learner_id.clone(),
                topic: attempt.topic_id.clone(),
            });
        }
        let (rating, _) = update_rating(
            self.rating,
            attempt.exercise_difficulty_before,
            attempt.correct,
            params.k_learner,
            params.k_item,
        )?;
        self.rating = rating;
        self.attempt_count += 1;
        Ok(())
    }

    /// Rebuilds the state from the initial rating by folding every attempt of
    /// this learner and topic found in `log`; other attempts are skipped.
    pub fn replay<'a>(
        learner_id: LearnerId,
        topic_id: TopicId,
        log: impl IntoIterator<Item = &'a Attempt<S>>,
        params: &ModelParams<S>,
    ) -> Result<Self, ModelError> {
        let mut state = Self::initial(learner_id, topic_id, params);
        for attempt in log {
            if state.is_for(&attempt.learner_id, &attempt.topic_id) {
                state.apply(attempt, params)?;
            }
        }
        Ok(state)
    }
}
