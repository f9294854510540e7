//! Slider-steered series composition.
//!
//! The learner's slider value shifts the target difficulty around an offset
//! below their rating; the three exercises closest to that target form the
//! next series.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::bank::{Exercise, ExerciseBank};
use crate::ids::{ExerciseId, LearnerId, TopicId};
use crate::mastery::{Attempt, LearnerTopicState, Rating};
use crate::scalar::Scalar;

/// Number of exercises in every series.
pub const SERIES_LEN: usize = 3;

const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SliderError {
    #[error("slider value {0} is not one of 0.0, 0.1, ..., 1.0")]
    OffGrid(f64),
}

/// Difficulty preference on the 11-point grid 0.0, 0.1, ..., 1.0
/// (0 = very easy, 1 = very hard). Stored as tenths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SliderValue(u8);

impl SliderValue {
    pub const MIN: SliderValue = SliderValue(0);
    pub const MID: SliderValue = SliderValue(5);
    pub const MAX: SliderValue = SliderValue(10);

    pub fn from_tenths(tenths: u8) -> Option<Self> {
        (tenths <= 10).then_some(Self(tenths))
    }

    /// Accepts a real only if it is a grid point up to rounding noise of the
    /// scalar type.
    pub fn from_real<S: Scalar>(value: S) -> Result<Self, SliderError> {
        let v = value.to_f64_lossy();
        let scaled = v * 10.0;
        let nearest = scaled.round();
        let tolerance = GRID_TOLERANCE.max(64.0 * S::epsilon().to_f64_lossy());
        if v.is_finite() && (0.0..=10.0).contains(&nearest) && (scaled - nearest).abs() <= tolerance {
            Ok(Self(nearest as u8))
        } else {
            Err(SliderError::OffGrid(v))
        }
    }

    pub fn tenths(self) -> u8 {
        self.0
    }

    pub fn value<S: Scalar>(self) -> S {
        S::lit(f64::from(self.0)) / S::lit(10.0)
    }

    /// All eleven legal values, ascending.
    pub fn grid() -> impl Iterator<Item = SliderValue> {
        (0..=10).map(SliderValue)
    }

    pub fn legal_values() -> Vec<f64> {
        Self::grid().map(|s| s.value()).collect()
    }
}

impl fmt::Display for SliderValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}", self.value::<f64>())
    }
}

impl Serialize for SliderValue {
    fn serialize<Ser: Serializer>(&self, serializer: Ser) -> Result<Ser::Ok, Ser::Error> {
        serializer.serialize_f64(self.value())
    }
}

impl<'de> Deserialize<'de> for SliderValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = f64::deserialize(deserializer)?;
        SliderValue::from_real(raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecommendError {
    #[error("unknown topic `{0}`")]
    UnknownTopic(TopicId),
    #[error("topic `{topic}` has {available} exercise(s), a series needs {SERIES_LEN}")]
    InsufficientBank { topic: TopicId, available: usize },
    #[error("recommender parameter {name} is invalid: {value}")]
    BadParameter { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct RecommenderParams<S> {
    /// Rating span covered by the whole slider range.
    pub beta: S,
    /// How far below the learner's rating the midpoint target sits.
    pub delta: S,
    /// Attempts looked back over when preferring unseen exercises.
    pub recency_window: usize,
}

impl<S: Scalar> Default for RecommenderParams<S> {
    fn default() -> Self {
        Self {
            beta: S::lit(2.0),
            delta: S::lit(0.85),
            recency_window: 10,
        }
    }
}

impl<S: Scalar> RecommenderParams<S> {
    pub fn validate(&self) -> Result<(), RecommendError> {
        if !(self.beta > S::zero() && self.beta.is_finite()) {
            return Err(RecommendError::BadParameter {
                name: "beta",
                value: self.beta.to_f64_lossy(),
            });
        }
        if !self.delta.is_finite() {
            return Err(RecommendError::BadParameter {
                name: "delta",
                value: self.delta.to_f64_lossy(),
            });
        }
        Ok(())
    }
}

/// `learner - delta + beta * (slider - 0.5)`.
pub fn target_difficulty<S: Scalar>(
    learner: Rating<S>,
    slider: SliderValue,
    beta: S,
    delta: S,
) -> Rating<S> {
    let shift = beta * (slider.value::<S>() - S::lit(0.5));
    Rating::from_finite(learner.value() - delta + shift)
}

/// The exercises chosen for one practice cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct SeriesPlan<S> {
    pub series_id: String,
    pub learner_id: LearnerId,
    pub topic_id: TopicId,
    pub slider: SliderValue,
    /// Ascending difficulty.
    pub exercise_ids: [ExerciseId; SERIES_LEN],
    pub target_difficulty: Rating<S>,
    /// Event time of the snapshot the plan was computed from.
    pub created_at: u64,
}

impl<S> SeriesPlan<S> {
    pub fn contains(&self, id: &ExerciseId) -> bool {
        self.exercise_ids.contains(id)
    }
}

struct Candidate<'a, S> {
    exercise: &'a Exercise<S>,
    distance: S,
    attempts: usize,
}

fn rank<S: Scalar>(a: &Candidate<'_, S>, b: &Candidate<'_, S>) -> Ordering {
    a.distance
        .partial_cmp(&b.distance)
        .unwrap_or(Ordering::Equal)
        .then(a.attempts.cmp(&b.attempts))
        .then_with(|| a.exercise.id.cmp(&b.exercise.id))
}

/// The `k`-th smallest value, or infinity when there are at most `k` values.
fn kth_smallest<S: Scalar>(values: impl Iterator<Item = S>, k: usize) -> S {
    let mut smallest: Vec<S> = Vec::with_capacity(k + 1);
    let mut count = 0;
    for v in values {
        count += 1;
        if smallest.len() == k && v >= smallest[k - 1] {
            continue;
        }
        let at = smallest.partition_point(|x| *x <= v);
        smallest.insert(at, v);
        smallest.truncate(k);
    }
    if count > k {
        smallest[k - 1]
    } else {
        S::infinity()
    }
}

/// Keeps the `SERIES_LEN` best candidates seen so far, in rank order.
struct Best<'a, S>(Vec<Candidate<'a, S>>);

impl<'a, S: Scalar> Best<'a, S> {
    fn new() -> Self {
        Self(Vec::with_capacity(SERIES_LEN + 1))
    }

    fn offer(&mut self, candidate: Candidate<'a, S>) {
        if self.0.len() == SERIES_LEN && rank(&candidate, &self.0[SERIES_LEN - 1]) != Ordering::Less {
            return;
        }
        let at = self.0.partition_point(|c| rank(c, &candidate) == Ordering::Less);
        self.0.insert(at, candidate);
        self.0.truncate(SERIES_LEN);
    }
}

/// Picks the three topic exercises closest to the slider's target difficulty.
///
/// Ranking is by distance to the target, then by fewer prior attempts, then by
/// exercise id. Exercises the learner met within the last
/// `recency_window` attempts on this topic are only used when fewer than three
/// fresh ones exist. Reads its inputs only.
pub fn compose_series<S: Scalar>(
    state: &LearnerTopicState<S>,
    slider: SliderValue,
    bank: &ExerciseBank<S>,
    history: &[Attempt<S>],
    params: &RecommenderParams<S>,
) -> Result<SeriesPlan<S>, RecommendError> {
    params.validate()?;
    let topic = &state.topic_id;
    let exercises = bank
        .topic(topic)
        .ok_or_else(|| RecommendError::UnknownTopic(topic.clone()))?;
    let available = bank.topic_len(topic);
    if available < SERIES_LEN {
        return Err(RecommendError::InsufficientBank {
            topic: topic.clone(),
            available,
        });
    }

    let own: Vec<&Attempt<S>> = history
        .iter()
        .filter(|a| state.is_for(&a.learner_id, &a.topic_id))
        .collect();
    let mut attempt_counts: BTreeMap<&ExerciseId, usize> = BTreeMap::new();
    for attempt in &own {
        *attempt_counts.entry(&attempt.exercise_id).or_default() += 1;
    }
    let recent: BTreeSet<&ExerciseId> = own
        .iter()
        .rev()
        .take(params.recency_window)
        .map(|a| &a.exercise_id)
        .collect();

    let target = target_difficulty(state.rating, slider, params.beta, params.delta);
    let distances: Vec<(&Exercise<S>, S)> = exercises
        .map(|e| (e, (e.difficulty.value() - target.value()).abs()))
        .collect();
    // The best fresh picks lie within the (SERIES_LEN + |recent|)-th smallest
    // distance, so only those candidates need their history looked up.
    let cutoff = kth_smallest(distances.iter().map(|(_, d)| *d), SERIES_LEN + recent.len());
    let (mut fresh, mut seen) = (Best::new(), Best::new());
    for (exercise, distance) in distances {
        if distance > cutoff {
            continue;
        }
        let candidate = Candidate {
            exercise,
            distance,
            attempts: attempt_counts.get(&exercise.id).copied().unwrap_or(0),
        };
        if recent.contains(&exercise.id) {
            seen.offer(candidate);
        } else {
            fresh.offer(candidate);
        }
    }

    let mut chosen: Vec<&Exercise<S>> = fresh
        .0
        .iter()
        .chain(seen.0.iter())
        .take(SERIES_LEN)
        .map(|c| c.exercise)
        .collect();
    chosen.sort_by(|a, b| {
        a.difficulty
            .partial_cmp(&b.difficulty)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.id.cmp(&b.id))
    });
    let exercise_ids = [chosen[0].id.clone(), chosen[1].id.clone(), chosen[2].id.clone()];

    Ok(SeriesPlan {
        series_id: format!(
            "{}/{}/{}/{}",
            state.learner_id,
            state.topic_id,
            state.attempt_count,
            slider.tenths()
        ),
        learner_id: state.learner_id.clone(),
        topic_id: state.topic_id.clone(),
        slider,
        exercise_ids,
        target_difficulty: target,
        created_at: own.last().map_or(0, |a| a.seq),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mastery::ModelParams;
    use proptest::prelude::*;

    fn bank(difficulties: &[f64]) -> ExerciseBank<f64> {
        ExerciseBank::new(difficulties.iter().enumerate().map(|(i, d)| Exercise {
            id: format!("e{i:02}").into(),
            topic_id: "t".into(),
            difficulty: Rating::new(*d).unwrap(),
            prompt: String::new(),
            answer_key: String::new(),
        }))
        .unwrap()
    }

    fn state(rating: f64) -> LearnerTopicState<f64> {
        LearnerTopicState {
            rating: Rating::new(rating).unwrap(),
            ..LearnerTopicState::initial("l".into(), "t".into(), &ModelParams::default())
        }
    }

    fn attempt(seq: u64, exercise: &str) -> Attempt<f64> {
        Attempt {
            seq,
            learner_id: "l".into(),
            topic_id: "t".into(),
            exercise_id: exercise.into(),
            correct: true,
            learner_rating_before: Rating::zero(),
            learner_rating_after: Rating::zero(),
            exercise_difficulty_before: Rating::zero(),
            exercise_difficulty_after: Rating::zero(),
        }
    }

    fn ids(plan: &SeriesPlan<f64>) -> Vec<&str> {
        plan.exercise_ids.iter().map(|e| e.as_str()).collect()
    }

    fn slider(v: f64) -> SliderValue {
        SliderValue::from_real(v).unwrap()
    }

    #[test]
    fn grid_has_eleven_points() {
        let grid: Vec<_> = SliderValue::grid().collect();
        assert_eq!(grid.len(), 11);
        for (i, s) in grid.iter().enumerate() {
            assert_eq!(SliderValue::from_real(i as f64 / 10.0).unwrap(), *s);
            assert_eq!(SliderValue::from_real(i as f32 / 10.0).unwrap(), *s);
        }
        assert_eq!(SliderValue::from_real(0.7).unwrap().value::<f64>(), 0.7);
        assert_eq!(SliderValue::from_real(0.1 + 0.2).unwrap().tenths(), 3);
        for bad in [0.35, -0.1, 1.1, 0.05, f64::NAN, f64::INFINITY, 0.70001] {
            assert!(SliderValue::from_real(bad).is_err(), "{bad}");
        }
        assert!(serde_json::from_str::<SliderValue>("0.35").is_err());
        assert_eq!(serde_json::to_string(&SliderValue::MID).unwrap(), "0.5");
    }

    #[test]
    fn target_examples() {
        let t = |learner: f64, s: f64| {
            target_difficulty(Rating::new(learner).unwrap(), slider(s), 2.0, 0.85).value()
        };
        for theta in [-1.5, 0.0, 3.0] {
            assert!((t(theta, 0.5) - (theta - 0.85)).abs() < 1e-12);
        }
        assert!((t(0.0, 1.0) - 0.15).abs() < 1e-12);
        assert!((t(0.0, 0.0) - -1.85).abs() < 1e-12);
        let targets: Vec<f64> = SliderValue::grid()
            .map(|s| target_difficulty(Rating::zero(), s, 2.0, 0.85).value())
            .collect();
        assert!(targets.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn bank_of_three_is_taken_whole() {
        let plan = compose_series(
            &state(0.85),
            SliderValue::MID,
            &bank(&[1.0, -1.0, 0.0]),
            &[],
            &RecommenderParams::default(),
        )
        .unwrap();
        assert_eq!(plan.target_difficulty.value(), 0.0);
        assert_eq!(ids(&plan), ["e01", "e02", "e00"]);
    }

    #[test]
    fn nearest_three_to_target() {
        let plan = compose_series(
            &state(0.85),
            SliderValue::MID,
            &bank(&[-2.0, -1.0, 0.0, 1.0, 2.0]),
            &[],
            &RecommenderParams::default(),
        )
        .unwrap();
        assert_eq!(ids(&plan), ["e01", "e02", "e03"]);
    }

    #[test]
    fn ties_prefer_fewer_attempts_then_smaller_id() {
        // e00 and e02 are both 1.0 away from the target 0.0.
        let b = bank(&[-1.0, 0.0, 1.0, 5.0]);
        let params = RecommenderParams {
            recency_window: 0,
            ..RecommenderParams::default()
        };
        let plan = compose_series(&state(0.85), SliderValue::MID, &b, &[], &params).unwrap();
        assert_eq!(ids(&plan), ["e00", "e01", "e02"]);

        // Only one slot left for the two tied items: smaller id wins.
        // Distances to 0.0: e01 = 0, e03 = 0.05, e00 = e02 = 1.
        let b = bank(&[1.0, 0.0, -1.0, 0.05]);
        let plan = compose_series(&state(0.85), SliderValue::MID, &b, &[], &params).unwrap();
        assert_eq!(ids(&plan), ["e01", "e03", "e00"]);

        // Same distance, but e00 has been practised more often.
        let history = vec![attempt(1, "e00"), attempt(2, "e00")];
        let plan = compose_series(&state(0.85), SliderValue::MID, &b, &history, &params).unwrap();
        assert_eq!(ids(&plan), ["e02", "e01", "e03"]);
    }

    #[test]
    fn recent_exercises_are_avoided_until_the_bank_runs_short() {
        let b = bank(&[-2.0, -1.0, 0.0, 1.0, 2.0]);
        let params = RecommenderParams::default();
        let history = vec![attempt(1, "e02")];
        let plan = compose_series(&state(0.85), SliderValue::MID, &b, &history, &params).unwrap();
        assert!(!plan.contains(&"e02".into()));
        assert_eq!(plan.created_at, 1);

        // Four of five seen recently: one fresh item plus the two closest seen ones.
        let history: Vec<_> = ["e00", "e01", "e02", "e03"]
            .iter()
            .enumerate()
            .map(|(i, e)| attempt(i as u64 + 1, e))
            .collect();
        let plan = compose_series(&state(0.85), SliderValue::MID, &b, &history, &params).unwrap();
        assert_eq!(ids(&plan), ["e01", "e02", "e04"]);

        // With no look-back window only distance and attempt counts matter.
        let blind = RecommenderParams {
            recency_window: 0,
            ..params
        };
        let plan = compose_series(&state(0.85), SliderValue::MID, &b, &history, &blind).unwrap();
        assert_eq!(ids(&plan), ["e01", "e02", "e03"]);
    }

    #[test]
    fn errors_for_unknown_or_small_topics() {
        let b = bank(&[0.0, 1.0]);
        let err = compose_series(&state(0.0), SliderValue::MID, &b, &[], &RecommenderParams::default());
        assert_eq!(
            err.unwrap_err(),
            RecommendError::InsufficientBank {
                topic: "t".into(),
                available: 2
            }
        );
        let mut other = state(0.0);
        other.topic_id = "nope".into();
        let err = compose_series(&other, SliderValue::MID, &bank(&[0.0, 1.0, 2.0]), &[], &RecommenderParams::default());
        assert_eq!(err.unwrap_err(), RecommendError::UnknownTopic("nope".into()));
    }

    #[test]
    fn mean_difficulty_rises_with_slider_on_arithmetic_grid() {
        let grid: Vec<f64> = (0..30).map(|i| -3.0 + 0.2 * i as f64).collect();
        let b = bank(&grid);
        let means: Vec<f64> = SliderValue::grid()
            .map(|s| {
                let plan = compose_series(&state(0.3), s, &b, &[], &RecommenderParams::default()).unwrap();
                plan.exercise_ids
                    .iter()
                    .map(|id| b.get(id).unwrap().difficulty.value())
                    .sum::<f64>()
                    / 3.0
            })
            .collect();
        assert!(means.windows(2).all(|w| w[0] <= w[1]), "{means:?}");
        assert!(means[10] > means[0]);
    }

    /// Full sort of every candidate; no pruning.
    fn reference_series(state: &LearnerTopicState<f64>, s: SliderValue, b: &ExerciseBank<f64>, history: &[Attempt<f64>], window: usize) -> Vec<String> {
        let target = target_difficulty(state.rating, s, 2.0, 0.85).value();
        let recent: Vec<&str> = history.iter().rev().take(window).map(|a| a.exercise_id.as_str()).collect();
        let mut ranked: Vec<(bool, f64, usize, String, f64)> = b
            .iter()
            .map(|e| {
                let count = history.iter().filter(|a| a.exercise_id == e.id).count();
                (recent.contains(&e.id.as_str()), (e.difficulty.value() - target).abs(), count, e.id.to_string(), e.difficulty.value())
            })
            .collect();
        ranked.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.cmp(&y.2)).then(x.3.cmp(&y.3)));
        let mut top: Vec<(f64, String)> = ranked.into_iter().take(SERIES_LEN).map(|r| (r.4, r.3)).collect();
        top.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        top.into_iter().map(|t| t.1).collect()
    }

    proptest! {
        #[test]
        fn matches_a_full_sort(
            // Coarse difficulties force many distance ties.
            steps in proptest::collection::vec(-8i32..8, 3..40),
            rating_steps in -6i32..6,
            tenths in 0u8..=10,
            seen in proptest::collection::vec(0usize..40, 0..30),
            window in 0usize..12,
        ) {
            let diffs: Vec<f64> = steps.iter().map(|k| f64::from(*k) * 0.25).collect();
            let b = bank(&diffs);
            let history: Vec<_> = seen
                .iter()
                .enumerate()
                .map(|(i, e)| attempt(i as u64 + 1, &format!("e{:02}", e % diffs.len())))
                .collect();
            let st = state(f64::from(rating_steps) * 0.25);
            let s = SliderValue::from_tenths(tenths).unwrap();
            let params = RecommenderParams { recency_window: window, ..RecommenderParams::default() };
            let plan = compose_series(&st, s, &b, &history, &params).unwrap();
            let got: Vec<String> = plan.exercise_ids.iter().map(|e| e.to_string()).collect();
            prop_assert_eq!(got, reference_series(&st, s, &b, &history, window));
        }

        #[test]
        fn composition_is_pure_and_well_formed(
            diffs in proptest::collection::vec(-4.0..4.0f64, 3..25),
            rating in -3.0..3.0f64,
            tenths in 0u8..=10,
            seen in proptest::collection::vec(0usize..25, 0..15),
        ) {
            let b = bank(&diffs);
            let history: Vec<_> = seen
                .iter()
                .enumerate()
                .map(|(i, e)| attempt(i as u64, &format!("e{:02}", e % diffs.len())))
                .collect();
            let s = SliderValue::from_tenths(tenths).unwrap();
            let params = RecommenderParams::default();
            let first = compose_series(&state(rating), s, &b, &history, &params).unwrap();
            let second = compose_series(&state(rating), s, &b, &history, &params).unwrap();
            prop_assert_eq!(&first, &second);
            let unique: BTreeSet<_> = first.exercise_ids.iter().collect();
            prop_assert_eq!(unique.len(), SERIES_LEN);
            let d: Vec<f64> = first.exercise_ids.iter().map(|id| b.get(id).unwrap().difficulty.value()).collect();
            prop_assert!(d.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn off_grid_reals_are_rejected(v in -5.0..5.0f64) {
            let scaled = v * 10.0;
            prop_assume!((scaled - scaled.round()).abs() > 1e-6);
            prop_assert!(SliderValue::from_real(v).is_err());
        }
    }
}
