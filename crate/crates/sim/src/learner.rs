use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use steerpath_core::{logistic, FeedbackSentence, Rating64, SliderValue};
use steerpath_service::ExplanationVariant;

/// How a simulated learner moves the slider between series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Policy {
    /// Always the same grid value.
    FixedSlider(SliderValue),
    /// Starts at 0.5; one step up after two or more correct answers in a
    /// series, one step down after none.
    GreedyHarder,
    /// Starts at 0.5 under the feedback variant; steps up while the shown
    /// sentence comes from the lower three buckets, holds otherwise.
    FeedbackFollower,
}

impl Policy {
    pub fn variant(self) -> ExplanationVariant {
        match self {
            Policy::FeedbackFollower => ExplanationVariant::Feedback,
            _ => ExplanationVariant::WhatIf,
        }
    }

    pub fn initial_slider(self) -> SliderValue {
        match self {
            Policy::FixedSlider(v) => v,
            _ => SliderValue::MID,
        }
    }

    pub fn next_slider(self, current: SliderValue, correct_in_series: usize, shown: Option<&FeedbackSentence>) -> SliderValue {
        let step = |delta: i8| {
            let tenths = (current.tenths() as i8 + delta).clamp(0, 10);
            SliderValue::from_tenths(tenths as u8).expect("clamped to the grid")
        };
        match self {
            Policy::FixedSlider(v) => v,
            Policy::GreedyHarder if correct_in_series >= 2 => step(1),
            Policy::GreedyHarder if correct_in_series == 0 => step(-1),
            Policy::GreedyHarder => current,
            Policy::FeedbackFollower => match shown {
                Some(s) if s.bucket_index < 3 => step(1),
                _ => current,
            },
        }
    }
}

/// A simulated learner with a hidden true skill.
#[derive(Debug, Clone, Serialize)]
pub struct SimLearner {
    pub true_skill: Rating64,
    pub policy: Policy,
    pub seed: u64,
}

impl SimLearner {
    /// Probability of a correct answer. `noise_inflation > 0` flattens the
    /// response curve so the world no longer matches the estimator.
    pub fn p_correct(&self, true_difficulty: f64, noise_inflation: f64) -> f64 {
        logistic((self.true_skill.value() - true_difficulty) / (1.0 + noise_inflation))
    }

    pub fn answers_correctly(&self, true_difficulty: f64, noise_inflation: f64, rng: &mut ChaCha8Rng) -> bool {
        rng.random::<f64>() < self.p_correct(true_difficulty, noise_inflation)
    }
}
