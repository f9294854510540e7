use std::collections::{HashMap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;
use steerpath_core::{
    logistic, ConfigError, EngineConfig64, ExerciseBank64, ExerciseId, LearnerId, Rating64, SliderValue,
    TopicId, SERIES_LEN,
};
use steerpath_service::{Explanation, PracticeService, ServiceError, Store};
use thiserror::Error;

use crate::learner::{Policy, SimLearner};
use crate::report::{LearnerMetrics, SimReport, StepRow};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] ConfigError),
    #[error(transparent)]
    Service(#[from] ServiceError),
}

#[derive(Debug, Clone, Serialize)]
pub struct SimConfig {
    pub population: usize,
    pub attempts: usize,
    pub engine: EngineConfig64,
    pub policy: Policy,
    pub seed: u64,
    /// 0 simulates answers with the estimator's own response curve.
    pub noise_inflation: f64,
    pub skill_mean: f64,
    pub skill_sd: f64,
    /// Practised topic; defaults to the first topic with a full series.
    pub topic: Option<TopicId>,
    /// One service shared by all learners (sequential, round-robin per
    /// series) instead of a private store per learner (parallel).
    pub shared_bank: bool,
    /// Trailing attempts used for the success rate.
    pub window: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            population: 100,
            attempts: 200,
            engine: EngineConfig64::default(),
            policy: Policy::FixedSlider(SliderValue::MID),
            seed: 7,
            noise_inflation: 0.0,
            skill_mean: 0.0,
            skill_sd: 1.0,
            topic: None,
            shared_bank: false,
            window: 50,
        }
    }
}

impl SimConfig {
    fn validate(&self, bank: &ExerciseBank64) -> Result<TopicId, SimError> {
        self.engine.validate()?;
        if self.population == 0 {
            return Err(SimError::Config("population must be positive".into()));
        }
        if self.window == 0 {
            return Err(SimError::Config("success-rate window must be positive".into()));
        }
        if !(self.noise_inflation.is_finite() && self.noise_inflation >= 0.0) {
            return Err(SimError::Config(format!("noise inflation {} must be >= 0", self.noise_inflation)));
        }
        if !(self.skill_mean.is_finite() && self.skill_sd.is_finite() && self.skill_sd >= 0.0) {
            return Err(SimError::Config("skill distribution must be finite with sd >= 0".into()));
        }
        let topic = match &self.topic {
            Some(t) => t.clone(),
            None => bank
                .topics()
                .find(|(_, n)| *n >= SERIES_LEN)
                .map(|(t, _)| t.clone())
                .ok_or_else(|| SimError::Config("bank has no topic with a full series".into()))?,
        };
        let available = bank.topic_len(&topic);
        if available < SERIES_LEN {
            return Err(SimError::Config(format!("topic `{topic}` has {available} exercise(s)")));
        }
        Ok(topic)
    }

    /// Learner `index` of the population; skills and answer streams depend
    /// only on `(seed, index)`.
    pub fn learner(&self, index: usize) -> SimLearner {
        let seed = self.seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let skill = Normal::new(self.skill_mean, self.skill_sd).expect("validated").sample(&mut rng);
        SimLearner {
            true_skill: Rating64::new(skill).expect("finite"),
            policy: self.policy,
            seed,
        }
    }
}

/// Ground-truth difficulties: the bank as loaded, before any adaptation.
pub fn truth_table(bank: &ExerciseBank64) -> HashMap<ExerciseId, f64> {
    bank.iter().map(|e| (e.id.clone(), e.difficulty.value())).collect()
}

/// Per-learner progress, advanced one series at a time.
struct Walker {
    id: LearnerId,
    learner: SimLearner,
    rng: ChaCha8Rng,
    slider: SliderValue,
    done: usize,
    series: usize,
    recent: VecDeque<bool>,
    trajectory: Vec<steerpath_core::MasteryBand>,
    steps: Vec<StepRow>,
}

impl Walker {
    fn new(index: usize, learner: SimLearner, service: &PracticeService, topic: &TopicId) -> Result<Self, SimError> {
        let id = LearnerId::from(format!("learner-{index:04}"));
        let start = service.mastery(&id, topic)?.band;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(learner.seed.rotate_left(17)),
            slider: learner.policy.initial_slider(),
            learner,
            id,
            done: 0,
            series: 0,
            recent: VecDeque::new(),
            trajectory: vec![start],
            steps: Vec::new(),
        })
    }

    /// Runs one series (or its truncated tail at the attempt budget).
    fn step_series(
        &mut self,
        service: &PracticeService,
        topic: &TopicId,
        truth: &HashMap<ExerciseId, f64>,
        config: &SimConfig,
    ) -> Result<(), SimError> {
        let policy = self.learner.policy;
        let session = service.start_session(self.id.clone(), topic.clone(), policy.variant())?.session.session_id;
        let preview = service.preview(&session, Some(self.slider.value()))?;
        let shown = match preview.explanation {
            Explanation::Feedback { sentence } => Some(sentence),
            _ => None,
        };
        let plan = service.commit_series(&session)?.session.plan.expect("committed sessions hold a plan");
        let mut correct_in_series = 0;
        for exercise in &plan.exercise_ids {
            if self.done == config.attempts {
                break;
            }
            let (key, estimated) = service.with_store(|s| {
                let e = s.bank().get(exercise).expect("planned exercises exist");
                (e.answer_key.clone(), e.difficulty.value())
            });
            let true_difficulty = truth[exercise];
            let p_true = self.learner.p_correct(true_difficulty, config.noise_inflation);
            let correct = self.learner.answers_correctly(true_difficulty, config.noise_inflation, &mut self.rng);
            let answer = if correct { key } else { format!("not {key}") };
            let outcome = service.submit_answer(&session, exercise, &answer)?;
            debug_assert_eq!(outcome.correct, correct);
            correct_in_series += usize::from(correct);
            self.done += 1;
            self.recent.push_back(correct);
            if self.recent.len() > config.window {
                self.recent.pop_front();
            }
            self.steps.push(StepRow {
                learner_id: self.id.to_string(),
                step: self.done,
                series: self.series + 1,
                slider: self.slider.value(),
                exercise_id: exercise.to_string(),
                true_difficulty,
                estimated_difficulty: estimated,
                p_true,
                correct,
                rating_after: outcome.rating.value(),
                score_after: outcome.score.value(),
                band_after: outcome.band,
                true_skill: self.learner.true_skill.value(),
                rating_error: (outcome.rating.value() - self.learner.true_skill.value()).abs(),
            });
        }
        self.series += 1;
        self.trajectory.push(service.mastery(&self.id, topic)?.band);
        self.slider = policy.next_slider(self.slider, correct_in_series, shown.as_ref());
        Ok(())
    }

    fn finish(self, service: &PracticeService, topic: &TopicId, window: usize) -> Result<(LearnerMetrics, Vec<StepRow>), SimError> {
        let mastery = service.mastery(&self.id, topic)?;
        let truth = self.learner.true_skill.value();
        let rate = (!self.recent.is_empty())
            .then(|| self.recent.iter().filter(|c| **c).count() as f64 / self.recent.len() as f64);
        let metrics = LearnerMetrics {
            learner_id: self.id.to_string(),
            true_skill: truth,
            final_rating: mastery.rating.value(),
            attempts: self.done,
            rating_error: (mastery.rating.value() - truth).abs(),
            score_error: (mastery.score.value() - logistic(truth)).abs(),
            success_rate: rate,
            window,
            band_trajectory: self.trajectory,
        };
        Ok((metrics, self.steps))
    }
}

/// Drives one learner for `config.attempts` answers through `service`.
pub fn simulate_learner(
    service: &PracticeService,
    topic: &TopicId,
    index: usize,
    truth: &HashMap<ExerciseId, f64>,
    config: &SimConfig,
) -> Result<(LearnerMetrics, Vec<StepRow>), SimError> {
    let mut walker = Walker::new(index, config.learner(index), service, topic)?;
    while walker.done < config.attempts {
        walker.step_series(service, topic, truth, config)?;
    }
    walker.finish(service, topic, config.window)
}

fn engine_for(config: &SimConfig, learner_seed: u64) -> EngineConfig64 {
    EngineConfig64 {
        seed: learner_seed,
        ..config.engine
    }
}

/// Runs the population. Output is a pure function of `(bank, config)`.
pub fn run_simulation(bank: &ExerciseBank64, config: &SimConfig) -> Result<SimReport, SimError> {
    let topic = config.validate(bank)?;
    let truth = truth_table(bank);

    let per_learner: Vec<(LearnerMetrics, Vec<StepRow>)> = if config.shared_bank {
        let service = PracticeService::new(Store::in_memory(bank.clone(), config.engine.model()), config.engine);
        let mut walkers = (0..config.population)
            .map(|i| Walker::new(i, config.learner(i), &service, &topic))
            .collect::<Result<Vec<_>, _>>()?;
        while walkers.iter().any(|w| w.done < config.attempts) {
            for w in walkers.iter_mut().filter(|w| w.done < config.attempts) {
                w.step_series(&service, &topic, &truth, config)?;
            }
        }
        walkers
            .into_iter()
            .map(|w| w.finish(&service, &topic, config.window))
            .collect::<Result<_, _>>()?
    } else {
        (0..config.population)
            .into_par_iter()
            .map(|i| {
                let engine = engine_for(config, config.learner(i).seed);
                let service = PracticeService::new(Store::in_memory(bank.clone(), engine.model()), engine);
                simulate_learner(&service, &topic, i, &truth, config)
            })
            .collect::<Result<_, _>>()?
    };

    let mut report = SimReport {
        learners: Vec::with_capacity(per_learner.len()),
        steps: Vec::new(),
    };
    for (metrics, steps) in per_learner {
        report.learners.push(metrics);
        report.steps.extend(steps);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::grid_bank;

    fn small(population: usize, attempts: usize) -> SimConfig {
        SimConfig {
            population,
            attempts,
            ..SimConfig::default()
        }
    }

    #[test]
    fn zero_attempts_gives_the_prior_baseline() {
        let bank = grid_bank("t", 21, -2.0, 2.0);
        let report = run_simulation(&bank, &small(1, 0)).unwrap();
        let m = &report.learners[0];
        assert!(report.steps.is_empty());
        assert_eq!(m.final_rating, 0.0);
        assert_eq!(m.score_error, (logistic(0.0) - logistic(m.true_skill)).abs());
        assert_eq!(m.success_rate, None);
        assert_eq!(m.band_trajectory.len(), 1);
    }

    #[test]
    fn bad_config_is_rejected() {
        let bank = grid_bank("t", 21, -2.0, 2.0);
        assert!(matches!(run_simulation(&bank, &small(0, 5)), Err(SimError::Config(_))));
        let mut c = small(1, 5);
        c.engine.k_learner = -1.0;
        assert!(matches!(run_simulation(&bank, &c), Err(SimError::Engine(_))));
        let mut c = small(1, 5);
        c.noise_inflation = f64::NAN;
        assert!(run_simulation(&bank, &c).is_err());
        let mut c = small(1, 5);
        c.topic = Some("missing".into());
        assert!(run_simulation(&bank, &c).is_err());
        assert!(run_simulation(&grid_bank("t", 2, 0.0, 1.0), &small(1, 5)).is_err());
    }

    #[test]
    fn attempt_budget_is_exact() {
        let bank = grid_bank("t", 41, -2.0, 2.0);
        let report = run_simulation(&bank, &small(3, 7)).unwrap();
        assert_eq!(report.steps.len(), 21);
        assert!(report.learners.iter().all(|m| m.attempts == 7 && m.band_trajectory.len() == 4));
    }

    #[test]
    fn shared_mode_runs_everyone() {
        let bank = grid_bank("t", 41, -2.0, 2.0);
        let mut c = small(4, 9);
        c.shared_bank = true;
        c.policy = Policy::GreedyHarder;
        let report = run_simulation(&bank, &c).unwrap();
        assert_eq!(report.steps.len(), 36);
        assert_eq!(report.learners.len(), 4);
        assert_eq!(run_simulation(&bank, &c).unwrap(), report);
    }

    #[test]
    fn feedback_follower_only_climbs() {
        let bank = grid_bank("t", 41, -2.0, 2.0);
        let mut c = small(2, 30);
        c.policy = Policy::FeedbackFollower;
        let report = run_simulation(&bank, &c).unwrap();
        for id in ["learner-0000", "learner-0001"] {
            let sliders: Vec<f64> = report.steps.iter().filter(|s| s.learner_id == id).map(|s| s.slider).collect();
            assert!(sliders.windows(2).all(|w| w[0] <= w[1]));
            assert!(*sliders.last().unwrap() >= 0.6);
        }
    }
}
