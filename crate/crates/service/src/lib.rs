//! Practice-cycle service over the steerpath skill model.

pub mod http;
pub mod practice;
pub mod session;
pub mod store;

pub use practice::{
    AnswerOutcome, ExerciseView, Explanation, MasteryView, PracticeService, Preview, ServiceError,
    SessionView, TopicSummary,
};
pub use http::{router, serve};
pub use session::{ExplanationVariant, Phase, Session, SessionError, SessionId};
pub use store::{AuditReport, Mismatch, Recovery, Snapshot, Store, StoreError};
