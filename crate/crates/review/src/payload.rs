use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use triage_core::rater::RaterCase;
use triage_core::sim::{Condition, Demographics, Encounter, Medication, NoteSummary};
use triage_core::vitals::{ActionType, DeviceKind, SeverityLevel};

/// Days of history drawn in the trend charts.
pub const TREND_DAYS: u32 = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub measure: String,
    pub value: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadingView {
    pub device: DeviceKind,
    pub timestamp: DateTime<Utc>,
    pub values: Vec<Measurement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub t: DateTime<Utc>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelGuide {
    pub level: String,
    pub code: u8,
    pub timeframe: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Guideline {
    pub levels: Vec<LevelGuide>,
    pub tie_breakers: Vec<String>,
    pub guardrail: String,
    pub actions: Vec<String>,
}

/// Position in the reviewer's queue, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueuePosition {
    pub position: usize,
    pub total: usize,
}

/// Everything a reviewer sees for one presentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasePayload {
    pub presentation_id: String,
    pub queue: QueuePosition,
    pub reading: ReadingView,
    /// Per sub-measurement, the points in the 30 days before the reading.
    pub trends: BTreeMap<String, Vec<TrendPoint>>,
    pub demographics: Demographics,
    pub conditions: Vec<Condition>,
    pub medications: Vec<Medication>,
    pub encounters: Vec<Encounter>,
    pub notes: Vec<NoteSummary>,
    pub calls: Vec<NoteSummary>,
    pub guideline: Guideline,
}

fn describe(level: SeverityLevel) -> &'static str {
    match level {
        SeverityLevel::Emergency => {
            "Immediate threat to life or organ function: values far outside the patient's usual range with signs of acute decompensation."
        }
        SeverityLevel::Urgent => {
            "Clinically significant change that needs a clinician the same day, such as a sustained rise or a clear departure from baseline."
        }
        SeverityLevel::Monitor => {
            "Abnormal or borderline but stable, or explained by known context. Worth a look at the next routine review."
        }
        SeverityLevel::NotAnIssue => {
            "Within the patient's expected range, or an obvious measurement artefact with no clinical concern."
        }
    }
}

pub fn guideline() -> Guideline {
    Guideline {
        levels: SeverityLevel::ALL
            .iter()
            .rev()
            .map(|&l| LevelGuide {
                level: l.label().to_string(),
                code: l.code(),
                timeframe: l.response_timeframe().to_string(),
                description: describe(l).to_string(),
            })
            .collect(),
        tie_breakers: vec![
            "When torn between two levels, pick MONITOR unless the reading itself shows danger.".into(),
            "Judge against this patient's own history and conditions, not population norms alone.".into(),
            "A single implausible value from a device is an equipment problem, not a clinical one.".into(),
        ],
        guardrail: "Do not raise the level on a single abnormal number if the trend and context explain it.".into(),
        actions: ActionType::ALL.iter().map(|a| a.as_str().to_string()).collect(),
    }
}

impl CasePayload {
    pub fn build(presentation_id: &str, queue: QueuePosition, case: &RaterCase) -> Self {
        let r = &case.reading;
        let values =
            r.values().map(|(m, v)| Measurement { measure: m.as_str().to_string(), value: v, unit: m.unit().to_string() }).collect();
        let trends = r
            .values()
            .map(|(m, _)| {
                let points = case
                    .history
                    .window(m.series(), r.timestamp, TREND_DAYS)
                    .iter()
                    .map(|p| TrendPoint { t: p.t, value: p.value })
                    .collect();
                (m.as_str().to_string(), points)
            })
            .collect();
        let s = &case.snapshot;
        Self {
            presentation_id: presentation_id.to_string(),
            queue,
            reading: ReadingView { device: r.device, timestamp: r.timestamp, values },
            trends,
            demographics: s.demographics.clone(),
            conditions: s.conditions.clone(),
            medications: s.medications.clone(),
            encounters: s.encounters.clone(),
            notes: s.notes.clone(),
            calls: s.calls.clone(),
            guideline: guideline(),
        }
    }
}
