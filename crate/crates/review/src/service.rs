use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Mutex;

use chrono::Utc;
use rand::distr::{Alphanumeric, SampleString};
use serde::{Deserialize, Serialize};
use triage_core::agreement::RatingRecord;
use triage_core::rater::RaterCase;
use triage_core::study::AssignmentPlan;
use triage_core::vitals::{ActionType, SeverityLevel};

use crate::blinding::audit_payload;
use crate::payload::{CasePayload, QueuePosition};
use crate::wal::{GradeEntry, GradeLog};
use crate::ReviewError;

/// Upper bound on a reported grading duration.
pub const MAX_DURATION_SECS: f64 = 86_400.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessConfig {
    pub study_id: String,
    /// Reviewer id -> bearer token.
    pub reviewer_tokens: BTreeMap<String, String>,
    pub exporter_token: String,
}

impl AccessConfig {
    /// Fresh random tokens for every reviewer in `plan`.
    pub fn generate(study_id: impl Into<String>, plan: &AssignmentPlan) -> Self {
        let mut rng = rand::rng();
        let mut token = || Alphanumeric.sample_string(&mut rng, 32);
        Self {
            study_id: study_id.into(),
            reviewer_tokens: plan.reviewers.iter().map(|r| (r.clone(), token())).collect(),
            exporter_token: token(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeSubmission {
    pub reviewer_id: String,
    pub presentation_id: String,
    /// Severity code 0..=3.
    pub severity: i64,
    #[serde(default)]
    pub action: Option<ActionType>,
    #[serde(default)]
    pub duration_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Next {
    Case { case: Box<CasePayload> },
    Done { graded: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SubmitOutcome {
    Accepted {
        graded: usize,
        remaining: usize,
    },
    /// The presentation was graded before; the stored grade is unchanged.
    Duplicate {
        severity: SeverityLevel,
        graded: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewerProgress {
    pub reviewer_id: String,
    pub graded: usize,
    pub total: usize,
    pub started: Option<chrono::DateTime<Utc>>,
    pub updated: Option<chrono::DateTime<Utc>>,
}

#[derive(Debug, Default)]
struct Session {
    /// Accepted grades in queue order; the cursor is its length.
    grades: Vec<GradeEntry>,
}

/// The grading backend. Each reviewer's queue operations are serialized by
/// that reviewer's lock; log appends are serialized by the log lock.
#[derive(Debug)]
pub struct ReviewService {
    access: AccessConfig,
    plan: AssignmentPlan,
    cases: BTreeMap<String, RaterCase>,
    sessions: BTreeMap<String, Mutex<Session>>,
    log: Mutex<GradeLog>,
    /// Strings no payload may mention.
    blind_values: Vec<String>,
}

impl ReviewService {
    /// Opens the service over `plan`, replaying any grades already in the
    /// log at `log_path`.
    pub fn open(
        plan: AssignmentPlan,
        cases: Vec<RaterCase>,
        access: AccessConfig,
        log_path: impl AsRef<Path>,
        rater_ids: &[&str],
    ) -> Result<Self, ReviewError> {
        let problems = plan.audit();
        if !problems.is_empty() {
            return Err(ReviewError::Plan(problems.join("; ")));
        }
        let cases: BTreeMap<String, RaterCase> = cases.into_iter().map(|c| (c.case_id.clone(), c)).collect();
        let missing: Vec<&String> = plan.assignments.keys().filter(|s| !cases.contains_key(*s)).collect();
        if !missing.is_empty() {
            return Err(ReviewError::Plan(format!("{} planned samples have no case, e.g. {}", missing.len(), missing[0])));
        }
        for r in &plan.reviewers {
            if !access.reviewer_tokens.contains_key(r) {
                return Err(ReviewError::Plan(format!("no token for reviewer {r}")));
            }
        }
        let tokens: BTreeSet<&String> = access.reviewer_tokens.values().chain([&access.exporter_token]).collect();
        if tokens.len() != access.reviewer_tokens.len() + 1 {
            return Err(ReviewError::Plan("tokens must be distinct".into()));
        }

        let mut blind_values: Vec<String> = plan.reviewers.clone();
        blind_values.extend(rater_ids.iter().map(|s| s.to_string()));
        blind_values.extend(cases.keys().cloned());

        let (log, entries) = GradeLog::open(log_path)?;
        let sessions = plan.reviewers.iter().map(|r| (r.clone(), Mutex::new(Session::default()))).collect();
        let svc = Self { access, plan, cases, sessions, log: Mutex::new(log), blind_values };
        for e in entries {
            svc.replay(e)?;
        }
        Ok(svc)
    }

    fn replay(&self, e: GradeEntry) -> Result<(), ReviewError> {
        let mut s = self.session(&e.reviewer_id)?.lock().expect("session lock");
        let queue = &self.plan.queues[&e.reviewer_id];
        match queue.get(s.grades.len()) {
            Some(head) if head.presentation_id == e.presentation_id && head.sample_id == e.sample_id => {
                s.grades.push(e);
                Ok(())
            }
            _ => Err(ReviewError::Corrupt(format!("logged grade {} for {} is not at the queue head", e.presentation_id, e.reviewer_id))),
        }
    }

    fn session(&self, reviewer: &str) -> Result<&Mutex<Session>, ReviewError> {
        self.sessions.get(reviewer).ok_or(ReviewError::Unauthorized)
    }

    pub fn study_id(&self) -> &str {
        &self.access.study_id
    }

    pub fn plan(&self) -> &AssignmentPlan {
        &self.plan
    }

    /// Reviewer id for a bearer token.
    pub fn authenticate(&self, token: &str) -> Result<&str, ReviewError> {
        self.access.reviewer_tokens.iter().find(|(_, t)| t.as_str() == token).map(|(r, _)| r.as_str()).ok_or(ReviewError::Unauthorized)
    }

    fn payload(&self, reviewer: &str, cursor: usize) -> Result<CasePayload, ReviewError> {
        let queue = &self.plan.queues[reviewer];
        let head = &queue[cursor];
        let case = &self.cases[&head.sample_id];
        let pos = QueuePosition { position: cursor + 1, total: queue.len() };
        let payload = CasePayload::build(&head.presentation_id, pos, case);
        let value = serde_json::to_value(&payload)?;
        let problems = audit_payload(&value, &self.blind_values);
        if !problems.is_empty() {
            return Err(ReviewError::Blinding(problems));
        }
        Ok(payload)
    }

    /// The reviewer's queue head, or `Done` once the queue is exhausted.
    pub fn next_case(&self, token: &str) -> Result<Next, ReviewError> {
        let reviewer = self.authenticate(token)?;
        let s = self.session(reviewer)?.lock().expect("session lock");
        let cursor = s.grades.len();
        if cursor == self.plan.queues[reviewer].len() {
            return Ok(Next::Done { graded: cursor });
        }
        Ok(Next::Case { case: Box::new(self.payload(reviewer, cursor)?) })
    }

    pub fn submit(&self, token: &str, sub: &GradeSubmission) -> Result<SubmitOutcome, ReviewError> {
        let reviewer = self.authenticate(token)?;
        if sub.reviewer_id != reviewer {
            return Err(ReviewError::Unauthorized);
        }
        let mut s = self.session(reviewer)?.lock().expect("session lock");
        if let Some(prev) = s.grades.iter().find(|g| g.presentation_id == sub.presentation_id) {
            return Ok(SubmitOutcome::Duplicate { severity: prev.severity, graded: s.grades.len() });
        }
        let severity = SeverityLevel::from_code(sub.severity)
            .map_err(|_| ReviewError::Validation(format!("severity code {} is not 0..=3", sub.severity)))?;
        let queue = &self.plan.queues[reviewer];
        let cursor = s.grades.len();
        let Some(head) = queue.get(cursor) else {
            return Err(ReviewError::QueueDone);
        };
        if head.presentation_id != sub.presentation_id {
            return Err(ReviewError::OutOfOrder { head: head.presentation_id.clone() });
        }
        let duration_secs = if sub.duration_secs.is_finite() { sub.duration_secs.clamp(0.0, MAX_DURATION_SECS) } else { 0.0 };
        let entry = GradeEntry {
            reviewer_id: reviewer.to_string(),
            presentation_id: head.presentation_id.clone(),
            sample_id: head.sample_id.clone(),
            presentation_index: head.presentation_index,
            severity,
            action: sub.action,
            duration_secs,
            accepted_at: Utc::now(),
        };
        self.log.lock().expect("log lock").append(&entry)?;
        s.grades.push(entry);
        Ok(SubmitOutcome::Accepted { graded: s.grades.len(), remaining: queue.len() - s.grades.len() })
    }

    pub fn progress(&self) -> Vec<ReviewerProgress> {
        self.plan
            .reviewers
            .iter()
            .map(|r| {
                let s = self.sessions[r].lock().expect("session lock");
                ReviewerProgress {
                    reviewer_id: r.clone(),
                    graded: s.grades.len(),
                    total: self.plan.queues[r].len(),
                    started: s.grades.first().map(|g| g.accepted_at),
                    updated: s.grades.last().map(|g| g.accepted_at),
                }
            })
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.progress().iter().all(|p| p.graded == p.total)
    }

    /// Accepted grades as ratings rows, reviewer by reviewer in queue order.
    /// Fails on an incomplete study unless `partial` is set.
    pub fn export(&self, token: &str, study_id: &str, partial: bool) -> Result<Vec<RatingRecord>, ReviewError> {
        if token != self.access.exporter_token {
            return Err(ReviewError::Unauthorized);
        }
        if study_id != self.access.study_id {
            return Err(ReviewError::UnknownStudy(study_id.to_string()));
        }
        if !partial && !self.is_complete() {
            return Err(ReviewError::Incomplete);
        }
        let mut rows = Vec::new();
        for r in &self.plan.reviewers {
            let s = self.sessions[r].lock().expect("session lock");
            rows.extend(s.grades.iter().map(|g| RatingRecord {
                item_id: g.sample_id.clone(),
                rater_id: g.reviewer_id.clone(),
                label: g.severity,
                duration_secs: g.duration_secs,
                presentation_index: g.presentation_index,
            }));
        }
        Ok(rows)
    }
}
