//! The practice cycle: pick a topic, steer the next series with the slider,
//! answer it, start again.
//!
//! All writes go through one store write lock, so updates to any
//! learner-topic pair are serialised. Previews, projections and teacher views
//! only take the read lock. Lock order is sessions, then store, then plans.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, MutexGuard, RwLock, RwLockReadGuard, RwLockWriteGuard};

use serde::{Deserialize, Serialize};
use steerpath_core::{
    build_why, compose_series, project_what_if, Catalog, EngineConfig64, ExerciseId, FeedbackSentence,
    LearnerId, MasteryBand, MasteryScore64, Rating64, RecommendError, SeriesPlan64, SliderValue,
    TopicId, WhatIfProjection64, WhyPayload64, SERIES_LEN,
};
use thiserror::Error;

use crate::session::{ExplanationVariant, Phase, Session, SessionError, SessionId};
use crate::store::{AuditReport, Store, StoreError};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0} not found")]
    NotFound(String),
    #[error("topic `{topic}` has {available} exercise(s), a series needs {SERIES_LEN}")]
    InsufficientBank { topic: TopicId, available: usize },
    #[error("slider value {0} is not on the grid 0.0, 0.1, ..., 1.0")]
    InvalidSlider(f64),
    #[error("a slider value is required for this session")]
    MissingSlider,
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl ServiceError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "not_found",
            ServiceError::InsufficientBank { .. } => "insufficient_bank",
            ServiceError::InvalidSlider(_) | ServiceError::MissingSlider => "invalid_slider",
            ServiceError::Session(SessionError::Phase { .. } | SessionError::NothingPreviewed) => "wrong_phase",
            ServiceError::Session(SessionError::NotInPlan(_)) => "validation",
            ServiceError::Session(SessionError::AlreadyAnswered(_)) => "conflict",
            ServiceError::Validation(_) => "validation",
            ServiceError::Store(_) => "storage",
        }
    }
}

impl From<RecommendError> for ServiceError {
    fn from(err: RecommendError) -> Self {
        match err {
            RecommendError::UnknownTopic(t) => ServiceError::NotFound(format!("topic `{t}`")),
            RecommendError::InsufficientBank { topic, available } => {
                ServiceError::InsufficientBank { topic, available }
            }
            other => ServiceError::Validation(other.to_string()),
        }
    }
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub topic_id: TopicId,
    pub exercise_count: usize,
}

/// An exercise as shown to a learner; the answer key stays server-side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExerciseView {
    pub exercise_id: ExerciseId,
    pub prompt: String,
    pub difficulty: Rating64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionView {
    #[serde(flatten)]
    pub session: Session,
    pub exercises: Vec<ExerciseView>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Explanation {
    WhatIf { projection: WhatIfProjection64 },
    Feedback { sentence: FeedbackSentence },
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Preview {
    pub session_id: SessionId,
    pub plan: SeriesPlan64,
    pub exercises: Vec<ExerciseView>,
    pub explanation: Explanation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasteryView {
    pub learner_id: LearnerId,
    pub topic_id: TopicId,
    pub rating: Rating64,
    pub score: MasteryScore64,
    pub band: MasteryBand,
    pub attempt_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerOutcome {
    pub correct: bool,
    pub rating: Rating64,
    pub score: MasteryScore64,
    pub band: MasteryBand,
    pub phase: Phase,
}

/// Exact match after trimming and case-folding.
pub fn grade(answer: &str, key: &str) -> bool {
    answer.trim().to_lowercase() == key.trim().to_lowercase()
}

#[derive(Debug)]
pub struct PracticeService {
    config: EngineConfig64,
    catalog: Catalog,
    store: RwLock<Store>,
    sessions: Mutex<HashMap<SessionId, Session>>,
    latest_plans: Mutex<HashMap<(LearnerId, TopicId), SeriesPlan64>>,
    next_session: AtomicU64,
}

impl PracticeService {
    pub fn new(store: Store, config: EngineConfig64) -> Self {
        Self::with_catalog(store, config, Catalog::builtin().clone())
    }

    pub fn with_catalog(store: Store, config: EngineConfig64, catalog: Catalog) -> Self {
        Self {
            config,
            catalog,
            store: RwLock::new(store),
            sessions: Mutex::new(HashMap::new()),
            latest_plans: Mutex::new(HashMap::new()),
            next_session: AtomicU64::new(1),
        }
    }

    pub fn config(&self) -> &EngineConfig64 {
        &self.config
    }

    fn read_store(&self) -> RwLockReadGuard<'_, Store> {
        self.store.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write_store(&self) -> RwLockWriteGuard<'_, Store> {
        self.store.write().unwrap_or_else(|e| e.into_inner())
    }

    fn sessions(&self) -> MutexGuard<'_, HashMap<SessionId, Session>> {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn latest_plans(&self) -> MutexGuard<'_, HashMap<(LearnerId, TopicId), SeriesPlan64>> {
        self.latest_plans.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Runs `f` with shared access to the store.
    pub fn with_store<T>(&self, f: impl FnOnce(&Store) -> T) -> T {
        f(&self.read_store())
    }

    pub fn store_fingerprint(&self) -> Vec<u8> {
        self.read_store().fingerprint()
    }

    pub fn topics(&self) -> Vec<TopicSummary> {
        self.read_store()
            .bank()
            .topics()
            .map(|(topic_id, exercise_count)| TopicSummary {
                topic_id: topic_id.clone(),
                exercise_count,
            })
            .collect()
    }

    fn session(&self, id: &SessionId) -> Result<Session> {
        self.sessions()
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("session `{id}`")))
    }

    fn view(&self, session: Session, store: &Store) -> SessionView {
        let exercises = session
            .plan
            .as_ref()
            .map(|p| exercise_views(store, p))
            .unwrap_or_default();
        SessionView { session, exercises }
    }

    pub fn get_session(&self, id: &SessionId) -> Result<SessionView> {
        let session = self.session(id)?;
        Ok(self.view(session, &self.read_store()))
    }

    pub fn start_session(
        &self,
        learner: LearnerId,
        topic: TopicId,
        variant: ExplanationVariant,
    ) -> Result<SessionView> {
        if learner.as_str().trim().is_empty() {
            return Err(ServiceError::Validation("learner_id must not be empty".into()));
        }
        let store = self.read_store();
        if !store.bank().has_topic(&topic) {
            return Err(ServiceError::NotFound(format!("topic `{topic}`")));
        }
        let available = store.bank().topic_len(&topic);
        if available < SERIES_LEN {
            return Err(ServiceError::InsufficientBank { topic, available });
        }
        let number = self.next_session.fetch_add(1, Ordering::Relaxed);
        let seed = self
            .config
            .seed
            .wrapping_add(number.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        drop(store);
        let session = Session::new(SessionId(format!("s{number}")), learner, topic, variant, seed);
        self.sessions().insert(session.session_id.clone(), session.clone());
        Ok(SessionView {
            session,
            exercises: Vec::new(),
        })
    }

    /// Plans the series for `slider` and builds the session's explanation.
    /// Only the slider position is remembered.
    pub fn preview(&self, id: &SessionId, slider: Option<f64>) -> Result<Preview> {
        let requested = slider
            .map(|v| SliderValue::from_real(v).map_err(|_| ServiceError::InvalidSlider(v)))
            .transpose()?;
        let mut session = self.session(id)?;
        session.check_preview()?;
        let slider = match session.variant {
            ExplanationVariant::None => SliderValue::MID,
            _ => requested.ok_or(ServiceError::MissingSlider)?,
        };

        let store = self.read_store();
        let (plan, projection) = self.plan(&store, &session, slider)?;
        let exercises = exercise_views(&store, &plan);
        drop(store);

        let mut sessions = self.sessions();
        let stored = sessions
            .get_mut(id)
            .ok_or_else(|| ServiceError::NotFound(format!("session `{id}`")))?;
        stored.record_preview(slider)?;
        let explanation = match session.variant {
            ExplanationVariant::WhatIf => Explanation::WhatIf { projection },
            ExplanationVariant::Feedback => Explanation::Feedback {
                sentence: stored.picker.pick(&self.catalog, slider).clone(),
            },
            ExplanationVariant::SliderOnly | ExplanationVariant::None => Explanation::None,
        };
        session = stored.clone();
        Ok(Preview {
            session_id: session.session_id,
            plan,
            exercises,
            explanation,
        })
    }

    fn plan(&self, store: &Store, session: &Session, slider: SliderValue) -> Result<(SeriesPlan64, WhatIfProjection64)> {
        let state = store.state(&session.learner_id, &session.topic_id);
        let history = store.history(&session.learner_id, &session.topic_id);
        let mut plan = compose_series(&state, slider, store.bank(), &history, &self.config.recommender())?;
        plan.series_id = format!("{}:{}", session.session_id, plan.series_id);
        let projection = project_what_if(&state, &plan, store.bank(), store.model())
            .map_err(|e| ServiceError::Validation(e.to_string()))?;
        Ok((plan, projection))
    }

    /// Freezes the plan for the latest previewed slider.
    pub fn commit_series(&self, id: &SessionId) -> Result<SessionView> {
        let mut sessions = self.sessions();
        let session = sessions
            .get_mut(id)
            .ok_or_else(|| ServiceError::NotFound(format!("session `{id}`")))?;
        let slider = session.commit_slider()?;
        let store = self.read_store();
        let (plan, _) = self.plan(&store, session, slider)?;
        session.commit(plan.clone())?;
        let session = session.clone();
        drop(sessions);
        self.latest_plans()
            .insert((session.learner_id.clone(), session.topic_id.clone()), plan);
        Ok(self.view(session, &store))
    }

    /// Grades an answer, records the attempt and updates learner and item.
    pub fn submit_answer(&self, id: &SessionId, exercise: &ExerciseId, answer: &str) -> Result<AnswerOutcome> {
        let mut sessions = self.sessions();
        let session = sessions
            .get_mut(id)
            .ok_or_else(|| ServiceError::NotFound(format!("session `{id}`")))?;
        session.check_answer(exercise)?;

        let mut store = self.write_store();
        let key = store
            .bank()
            .get(exercise)
            .map(|e| e.answer_key.clone())
            .ok_or_else(|| ServiceError::NotFound(format!("exercise `{exercise}`")))?;
        let correct = grade(answer, &key);
        let attempt = store.record_attempt(&session.learner_id, &session.topic_id, exercise, correct)?;
        session.record_answer(exercise, correct)?;

        let rating = attempt.learner_rating_after;
        Ok(AnswerOutcome {
            correct,
            rating,
            score: rating.score(),
            band: store.model().band(rating),
            phase: session.phase,
        })
    }

    pub fn mastery(&self, learner: &LearnerId, topic: &TopicId) -> Result<MasteryView> {
        let store = self.read_store();
        if !store.bank().has_topic(topic) {
            return Err(ServiceError::NotFound(format!("topic `{topic}`")));
        }
        let state = store.state(learner, topic);
        Ok(MasteryView {
            learner_id: state.learner_id.clone(),
            topic_id: state.topic_id.clone(),
            rating: state.rating,
            score: state.score(),
            band: store.model().band(state.rating),
            attempt_count: state.attempt_count,
        })
    }

    /// Why-payload for a teacher: the learner's latest committed plan on the
    /// topic is flagged, if there is one.
    pub fn teacher_why(&self, teacher: &str, learner: &LearnerId, topic: &TopicId) -> Result<WhyPayload64> {
        if teacher.trim().is_empty() {
            return Err(ServiceError::Validation("teacher id must not be empty".into()));
        }
        let has_session = self.sessions().values().any(|s| &s.learner_id == learner);
        let store = self.read_store();
        if !store.bank().has_topic(topic) {
            return Err(ServiceError::NotFound(format!("topic `{topic}`")));
        }
        if !(has_session || store.has_learner(learner)) {
            return Err(ServiceError::NotFound(format!("learner `{learner}`")));
        }
        let state = store.state(learner, topic);
        let plan = self.latest_plans().get(&(learner.clone(), topic.clone())).cloned();
        let history = store.history(learner, topic);
        build_why(&state, plan.as_ref(), store.bank(), &history, store.model())
            .map_err(|e| ServiceError::Validation(e.to_string()))
    }

    pub fn audit(&self) -> AuditReport {
        self.read_store().audit()
    }
}

fn exercise_views(store: &Store, plan: &SeriesPlan64) -> Vec<ExerciseView> {
    plan.exercise_ids
        .iter()
        .filter_map(|id| store.bank().get(id))
        .map(|e| ExerciseView {
            exercise_id: e.id.clone(),
            prompt: e.prompt.clone(),
            difficulty: e.difficulty,
        })
        .collect()
}
