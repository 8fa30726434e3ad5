//! Hard-question funnel: scene scripts, generation clients, scoring and
//! threshold selection.

mod client;
mod funnel;
pub mod prompts;
mod scene;

use thiserror::Error;

pub use client::{
    extract_program, parse_question_drafts, ClientError, GenerationClient, HttpClient, HttpClientConfig,
    QuestionDraft, StubClient, StubFixture,
};
pub use funnel::{
    apply_review, apply_threshold, calibrate_threshold, read_store, run_funnel, write_store, CandidateQuestion,
    Decision, FunnelCounts, FunnelOptions, FunnelOutput, Provenance, RejectedVideo, ReviewDecision, Scorer,
    SelectionRule, Status, N_OPTIONS,
};
pub use scene::{format_time, render_script, Activity, Actor, Event, EventKind, RelationChange, SceneGraph, SubActivity};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("video {video_id}: actor id `{actor_id}` names several classes {classes:?}")]
    InconsistentActorId {
        video_id: String,
        actor_id: String,
        classes: Vec<String>,
    },
    #[error("catalog mismatch: expected {expected}, found {found}")]
    CatalogMismatch { expected: String, found: String },
    #[error("{0}")]
    InvalidParams(String),
    #[error("candidate store line {line}: {message}")]
    Store { line: usize, message: String },
    #[error("unknown candidate {0}")]
    UnknownCandidate(String),
    #[error("video {0} listed twice")]
    DuplicateVideo(String),
}
