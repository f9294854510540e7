//! JSON-over-HTTP front end.
//!
//! | Method | Path                                   | Body / query                              |
//! |--------|----------------------------------------|-------------------------------------------|
//! | GET    | `/topics`                              |                                           |
//! | POST   | `/sessions`                            | `{"learner_id", "topic_id", "variant"?}`  |
//! | GET    | `/sessions/{id}`                       |                                           |
//! | POST   | `/sessions/{id}/preview`               | `{"slider": 0.7}`                         |
//! | POST   | `/sessions/{id}/commit`                |                                           |
//! | POST   | `/sessions/{id}/answers`               | `{"exercise_id", "answer"}`               |
//! | GET    | `/learners/{id}/topics/{t}/mastery`    |                                           |
//! | GET    | `/teacher/why`                         | `?learner=&topic=&teacher=`               |
//! | GET    | `/admin/audit`                         |                                           |
//!
//! Errors come back as `{"code", "message"}`; slider errors also carry
//! `legal_slider_values` with the eleven accepted values.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use steerpath_core::{ExerciseId, LearnerId, SliderValue, TopicId};

use crate::practice::{PracticeService, ServiceError};
use crate::session::{ExplanationVariant, SessionId};

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legal_slider_values: Option<Vec<f64>>,
}

pub struct ApiError(ServiceError);

impl From<ServiceError> for ApiError {
    fn from(err: ServiceError) -> Self {
        Self(err)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(rejection: JsonRejection) -> Self {
        Self(ServiceError::Validation(rejection.body_text()))
    }
}

impl From<QueryRejection> for ApiError {
    fn from(rejection: QueryRejection) -> Self {
        Self(ServiceError::Validation(rejection.body_text()))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let code = self.0.code();
        let status = match code {
            "not_found" => StatusCode::NOT_FOUND,
            "wrong_phase" | "conflict" => StatusCode::CONFLICT,
            "storage" => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        let body = ErrorBody {
            code: code.into(),
            message: self.0.to_string(),
            legal_slider_values: (code == "invalid_slider").then(SliderValue::legal_values),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;
type Shared = State<Arc<PracticeService>>;

#[derive(Debug, Deserialize)]
pub struct StartSession {
    pub learner_id: LearnerId,
    pub topic_id: TopicId,
    #[serde(default)]
    pub variant: ExplanationVariant,
}

#[derive(Debug, Default, Deserialize)]
pub struct PreviewRequest {
    #[serde(default)]
    pub slider: Option<f64>,
}

#[derive(Debug, Deserialize)]
pub struct AnswerRequest {
    pub exercise_id: ExerciseId,
    pub answer: String,
}

#[derive(Debug, Deserialize)]
pub struct WhyQuery {
    pub learner: LearnerId,
    pub topic: TopicId,
    #[serde(default = "anonymous_teacher")]
    pub teacher: String,
}

fn anonymous_teacher() -> String {
    "teacher".into()
}

pub fn router(service: Arc<PracticeService>) -> Router {
    Router::new()
        .route("/topics", get(topics))
        .route("/sessions", post(start_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/preview", post(preview))
        .route("/sessions/{id}/commit", post(commit))
        .route("/sessions/{id}/answers", post(answer))
        .route("/learners/{learner}/topics/{topic}/mastery", get(mastery))
        .route("/teacher/why", get(teacher_why))
        .route("/admin/audit", get(audit))
        .with_state(service)
}

async fn topics(State(service): Shared) -> impl IntoResponse {
    Json(service.topics())
}

async fn start_session(
    State(service): Shared,
    body: Result<Json<StartSession>, JsonRejection>,
) -> Result<(StatusCode, Json<crate::SessionView>), ApiError> {
    let Json(req) = body?;
    let view = service.start_session(req.learner_id, req.topic_id, req.variant)?;
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_session(State(service): Shared, Path(id): Path<String>) -> ApiResult<crate::SessionView> {
    Ok(Json(service.get_session(&SessionId(id))?))
}

async fn preview(
    State(service): Shared,
    Path(id): Path<String>,
    body: Result<Json<PreviewRequest>, JsonRejection>,
) -> ApiResult<crate::Preview> {
    let req = match body {
        Ok(Json(req)) => req,
        Err(JsonRejection::MissingJsonContentType(_)) => PreviewRequest::default(),
        Err(e) => return Err(e.into()),
    };
    Ok(Json(service.preview(&SessionId(id), req.slider)?))
}

async fn commit(State(service): Shared, Path(id): Path<String>) -> ApiResult<crate::SessionView> {
    Ok(Json(service.commit_series(&SessionId(id))?))
}

async fn answer(
    State(service): Shared,
    Path(id): Path<String>,
    body: Result<Json<AnswerRequest>, JsonRejection>,
) -> ApiResult<crate::AnswerOutcome> {
    let Json(req) = body?;
    Ok(Json(service.submit_answer(&SessionId(id), &req.exercise_id, &req.answer)?))
}

async fn mastery(
    State(service): Shared,
    Path((learner, topic)): Path<(String, String)>,
) -> ApiResult<crate::MasteryView> {
    Ok(Json(service.mastery(&learner.into(), &topic.into())?))
}

async fn teacher_why(
    State(service): Shared,
    query: Result<Query<WhyQuery>, QueryRejection>,
) -> ApiResult<steerpath_core::WhyPayload64> {
    let Query(q) = query?;
    Ok(Json(service.teacher_why(&q.teacher, &q.learner, &q.topic)?))
}

async fn audit(State(service): Shared) -> impl IntoResponse {
    Json(service.audit())
}

/// Serves the API until Ctrl-C.
pub async fn serve(service: Arc<PracticeService>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
