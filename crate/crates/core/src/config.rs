//! Engine configuration file.
//!
//! A flat TOML key-value file. Every key is optional; missing keys take the
//! defaults shown here:
//!
//! ```toml
//! initial_rating = 0.0
//! k_learner = 0.4
//! k_item = 0.2
//! adapt_items = true
//! band_thresholds = [0.2, 0.4, 0.6, 0.8]
//! beta = 2.0
//! delta = 0.85
//! recency_window = 10
//! seed = 42
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mastery::{BandThresholds, ModelError, ModelParams, Rating};
use crate::recommender::{RecommendError, RecommenderParams};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Recommender(#[from] RecommendError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, bound = "S: Scalar")]
pub struct EngineConfig<S> {
    pub initial_rating: Rating<S>,
    pub k_learner: S,
    pub k_item: S,
    pub adapt_items: bool,
    pub band_thresholds: BandThresholds<S>,
    pub beta: S,
    pub delta: S,
    pub recency_window: usize,
    /// Base seed for feedback sentence draws.
    pub seed: u64,
}

impl<S: Scalar> Default for EngineConfig<S> {
    fn default() -> Self {
        let model = ModelParams::default();
        let rec = RecommenderParams::default();
        Self {
            initial_rating: model.initial_rating,
            k_learner: model.k_learner,
            k_item: model.k_item,
            adapt_items: model.adapt_items,
            band_thresholds: model.thresholds,
            beta: rec.beta,
            delta: rec.delta,
            recency_window: rec.recency_window,
            seed: 42,
        }
    }
}

impl<S: Scalar> EngineConfig<S> {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model().validate()?;
        self.recommender().validate()?;
        Ok(())
    }

    pub fn model(&self) -> ModelParams<S> {
        ModelParams {
            initial_rating: self.initial_rating,
            k_learner: self.k_learner,
            k_item: self.k_item,
            adapt_items: self.adapt_items,
            thresholds: self.band_thresholds,
        }
    }

    pub fn recommender(&self) -> RecommenderParams<S> {
        RecommenderParams {
            beta: self.beta,
            delta: self.delta,
            recency_window: self.recency_window,
        }
    }
}
