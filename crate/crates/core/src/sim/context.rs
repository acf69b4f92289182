use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{PatientProfile, Sex, SimConfig};
use crate::rng::named_rng;
use crate::vitals::{truncate_to_second, PatientFlags};

#[derive(Debug, thiserror::Error)]
pub enum ContextError {
    #[error("unknown patient {0}")]
    UnknownPatient(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographics {
    pub age: u32,
    pub sex: Sex,
    pub enrollment: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub code: String,
    pub name: String,
    /// Flag tag (`copd`, `heart_failure`, `home_o2`, ...).
    pub tag: String,
    pub recorded: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Medication {
    pub name: String,
    pub started: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Encounter {
    pub kind: String,
    pub admitted: DateTime<Utc>,
    pub discharged: DateTime<Utc>,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteSummary {
    pub at: DateTime<Utc>,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientContext {
    pub demographics: Demographics,
    pub conditions: Vec<Condition>,
    pub medications: Vec<Medication>,
    pub encounters: Vec<Encounter>,
    pub notes: Vec<NoteSummary>,
    pub calls: Vec<NoteSummary>,
}

/// Per-patient clinical context, queried as of an instant.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextStore {
    pub patients: BTreeMap<String, PatientContext>,
}

/// Everything known about a patient at `as_of`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSnapshot {
    pub patient_id: String,
    pub as_of: DateTime<Utc>,
    pub demographics: Demographics,
    pub conditions: Vec<Condition>,
    pub medications: Vec<Medication>,
    /// Encounters discharged at or before `as_of`.
    pub encounters: Vec<Encounter>,
    pub notes: Vec<NoteSummary>,
    pub calls: Vec<NoteSummary>,
    pub last_contact: Option<DateTime<Utc>>,
}

impl ContextSnapshot {
    pub fn flags(&self) -> PatientFlags {
        let has = |t: &str| self.conditions.iter().any(|c| c.tag == t);
        PatientFlags {
            copd: has("copd"),
            heart_failure: has("heart_failure"),
            home_o2: has("home_o2"),
            hypertension: has("hypertension"),
            diabetes: has("diabetes"),
            ckd: has("ckd"),
            cad: has("cad"),
            obesity: has("obesity"),
        }
    }

    /// Latest timestamp of any dated datum (demographics excluded).
    pub fn latest_datum(&self) -> Option<DateTime<Utc>> {
        let c = self.conditions.iter().map(|c| c.recorded);
        let m = self.medications.iter().map(|m| m.started);
        let e = self.encounters.iter().flat_map(|e| [e.admitted, e.discharged]);
        let n = self.notes.iter().chain(&self.calls).map(|n| n.at);
        c.chain(m).chain(e).chain(n).chain(self.last_contact).max()
    }

    /// Number of dated entries, for subset checks.
    pub fn len(&self) -> usize {
        self.conditions.len() + self.medications.len() + self.encounters.len() + self.notes.len() + self.calls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ContextStore {
    pub fn as_of(&self, patient_id: &str, t: DateTime<Utc>) -> Result<ContextSnapshot, ContextError> {
        let p = self.patients.get(patient_id).ok_or_else(|| ContextError::UnknownPatient(patient_id.to_string()))?;
        let notes: Vec<NoteSummary> = p.notes.iter().filter(|n| n.at <= t).cloned().collect();
        let calls: Vec<NoteSummary> = p.calls.iter().filter(|n| n.at <= t).cloned().collect();
        let last_contact = notes.iter().chain(&calls).map(|n| n.at).max();
        Ok(ContextSnapshot {
            patient_id: patient_id.to_string(),
            as_of: t,
            demographics: p.demographics.clone(),
            conditions: p.conditions.iter().filter(|c| c.recorded <= t).cloned().collect(),
            medications: p.medications.iter().filter(|m| m.started <= t).cloned().collect(),
            encounters: p.encounters.iter().filter(|e| e.discharged <= t).cloned().collect(),
            notes,
            calls,
            last_contact,
        })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, super::SimError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

const CONDITIONS: [(&str, &str, &str, Option<&str>); 8] = [
    ("hypertension", "I10", "Essential hypertension", Some("lisinopril")),
    ("heart_failure", "I50.9", "Heart failure", Some("furosemide")),
    ("diabetes", "E11.9", "Type 2 diabetes", Some("metformin")),
    ("cad", "I25.10", "Coronary artery disease", Some("atorvastatin")),
    ("copd", "J44.9", "Chronic obstructive pulmonary disease", Some("tiotropium inhaler")),
    ("obesity", "E66.9", "Obesity", None),
    ("ckd", "N18.3", "Chronic kidney disease stage 3", None),
    ("home_o2", "Z99.81", "Dependence on supplemental oxygen", Some("home oxygen 2 L/min")),
];

fn flag(f: &PatientFlags, tag: &str) -> bool {
    match tag {
        "hypertension" => f.hypertension,
        "heart_failure" => f.heart_failure,
        "diabetes" => f.diabetes,
        "cad" => f.cad,
        "copd" => f.copd,
        "obesity" => f.obesity,
        "ckd" => f.ckd,
        "home_o2" => f.home_o2,
        _ => false,
    }
}

const NOTE_TEMPLATES: [&str; 5] = [
    "Routine RPM review; readings reviewed, no changes to plan.",
    "Medication reconciliation completed; adherence discussed.",
    "Patient reports feeling well; continue current monitoring.",
    "Reviewed recent trend with patient; advised repeat readings at rest.",
    "Care plan updated after specialist follow-up.",
];

const CALL_TEMPLATES: [&str; 3] = [
    "Outreach call; patient reachable, no new symptoms.",
    "Voicemail left regarding missed readings.",
    "Patient called about device pairing; resolved.",
];

fn uniform_time(rng: &mut impl Rng, from: DateTime<Utc>, to: DateTime<Utc>) -> DateTime<Utc> {
    let span = (to - from).num_seconds().max(1);
    truncate_to_second(from + Duration::seconds(rng.random_range(0..span)))
}

/// Context for every patient. All dated entries fall at or after enrollment;
/// some fall after the sample window so as-of filtering is exercised.
pub fn build_context_store(cohort: &[PatientProfile], config: &SimConfig) -> ContextStore {
    let horizon = config.end + Duration::days(10);
    let mut patients = BTreeMap::new();
    for (i, p) in cohort.iter().enumerate() {
        let mut rng = named_rng(config.seed, "context", i as u64);
        let enrolled = p.enrollment;
        let mut conditions = Vec::new();
        let mut medications = Vec::new();
        for (tag, code, name, med) in CONDITIONS {
            if !flag(&p.flags, tag) {
                continue;
            }
            conditions.push(Condition { code: code.into(), name: name.into(), tag: tag.into(), recorded: enrolled });
            if let Some(med) = med {
                let started = enrolled + Duration::days(rng.random_range(0..30));
                medications.push(Medication { name: med.into(), started });
            }
        }
        let mut encounters = Vec::new();
        for _ in 0..rng.random_range(0..=3) {
            let admitted = uniform_time(&mut rng, enrolled, horizon);
            let stay = Duration::hours(rng.random_range(4..6 * 24));
            let (kind, summary) = if stay > Duration::hours(24) {
                ("inpatient", "Admission for symptom exacerbation; discharged home with follow-up.")
            } else {
                ("emergency", "Emergency department visit; treated and released.")
            };
            encounters.push(Encounter { kind: kind.into(), admitted, discharged: admitted + stay, summary: summary.into() });
        }
        encounters.sort_by_key(|e| e.discharged);
        let mut notes: Vec<NoteSummary> = (0..rng.random_range(2..=6))
            .map(|_| NoteSummary {
                at: uniform_time(&mut rng, enrolled, config.end + Duration::days(5)),
                summary: NOTE_TEMPLATES[rng.random_range(0..NOTE_TEMPLATES.len())].into(),
            })
            .collect();
        notes.sort_by_key(|n| n.at);
        let mut calls: Vec<NoteSummary> = (0..rng.random_range(1..=4))
            .map(|_| NoteSummary {
                at: uniform_time(&mut rng, enrolled, config.end + Duration::days(5)),
                summary: CALL_TEMPLATES[rng.random_range(0..CALL_TEMPLATES.len())].into(),
            })
            .collect();
        calls.sort_by_key(|n| n.at);
        patients.insert(
            p.patient_id.clone(),
            PatientContext {
                demographics: Demographics { age: p.age, sex: p.sex, enrollment: enrolled },
                conditions,
                medications,
                encounters,
                notes,
                calls,
            },
        );
    }
    ContextStore { patients }
}
