//! Steerable exercise practice: skill model, series recommender and the
//! explanations shown around the difficulty slider.
//!
//! All model arithmetic is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` and `*32` aliases below fix the scalar type.

pub mod bank;
pub mod config;
pub mod explain;
pub mod feedback;
pub mod ids;
pub mod mastery;
pub mod recommender;
pub mod scalar;

pub use bank::{BankError, Exercise, ExerciseBank, IngestReport};
pub use config::{ConfigError, EngineConfig};
pub use explain::{build_why, project_what_if, ExplainError, WhatIfProjection, WhyItem, WhyPayload};
pub use feedback::{bucket_for, pick_sentence, Catalog, FeedbackSentence, StickyPicker};
pub use ids::{ExerciseId, LearnerId, TopicId};
pub use mastery::{
    predict_correct, to_band, update_rating, Attempt, BandThresholds, LearnerTopicState, MasteryBand,
    MasteryScore, ModelError, ModelParams, Rating,
};
pub use recommender::{
    compose_series, target_difficulty, RecommendError, RecommenderParams, SeriesPlan, SliderError,
    SliderValue, SERIES_LEN,
};
pub use scalar::{logistic, logit, Scalar};

pub type Rating64 = Rating<f64>;
pub type MasteryScore64 = MasteryScore<f64>;
pub type BandThresholds64 = BandThresholds<f64>;
pub type ModelParams64 = ModelParams<f64>;
pub type Exercise64 = Exercise<f64>;
pub type ExerciseBank64 = ExerciseBank<f64>;
pub type Attempt64 = Attempt<f64>;
pub type LearnerTopicState64 = LearnerTopicState<f64>;
pub type RecommenderParams64 = RecommenderParams<f64>;
pub type SeriesPlan64 = SeriesPlan<f64>;
pub type WhatIfProjection64 = WhatIfProjection<f64>;
pub type WhyPayload64 = WhyPayload<f64>;
pub type EngineConfig64 = EngineConfig<f64>;

pub type Rating32 = Rating<f32>;
pub type MasteryScore32 = MasteryScore<f32>;
pub type ModelParams32 = ModelParams<f32>;
pub type ExerciseBank32 = ExerciseBank<f32>;
pub type LearnerTopicState32 = LearnerTopicState<f32>;
pub type SeriesPlan32 = SeriesPlan<f32>;
pub type WhatIfProjection32 = WhatIfProjection<f32>;
