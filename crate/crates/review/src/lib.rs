//! Blinded case-review backend. Reviewers pull their queue head, submit a
//! grade, and the exporter downloads the panel ratings file.

pub mod blinding;
pub mod http;
pub mod payload;
pub mod service;
pub mod wal;

pub use blinding::audit_payload;
pub use payload::{guideline, CasePayload, Guideline};
pub use service::{AccessConfig, GradeSubmission, Next, ReviewService, ReviewerProgress, SubmitOutcome};
pub use wal::{GradeEntry, GradeLog};

#[derive(Debug, thiserror::Error)]
pub enum ReviewError {
    #[error("missing or unknown token")]
    Unauthorized,
    #[error("invalid submission: {0}")]
    Validation(String),
    #[error("presentation is not the queue head (head is {head})")]
    OutOfOrder { head: String },
    #[error("queue already complete")]
    QueueDone,
    #[error("study is incomplete; request a partial export")]
    Incomplete,
    #[error("unknown study {0}")]
    UnknownStudy(String),
    #[error("plan: {0}")]
    Plan(String),
    #[error("payload failed the blinding audit: {0:?}")]
    Blinding(Vec<String>),
    #[error("grade log: {0}")]
    Corrupt(String),
    #[error("{0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
