use serde::{Deserialize, Serialize};

use super::{RaterRun, StudyError};
use crate::agreement::{loo_reference, Assignments, RatingMatrix, StatsError};
use crate::scalar::Proportion;
use crate::vitals::{collapse_actionable, SeverityLevel};

/// Performance on one leave-one-out subset. `n` counts the subset items
/// where the two partners agreed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LooRow {
    pub reviewer: String,
    pub assigned: u64,
    pub n: u64,
    pub exact: Proportion,
    pub emergency_sensitivity: Proportion,
    pub actionable_sensitivity: Proportion,
    pub overtriage: Proportion,
}

impl LooRow {
    fn from_pairs(reviewer: &str, assigned: u64, pairs: &[(SeverityLevel, SeverityLevel)]) -> Self {
        let n = pairs.len() as u64;
        let count = |f: &dyn Fn(SeverityLevel, SeverityLevel) -> bool| pairs.iter().filter(|(p, r)| f(*p, *r)).count() as u64;
        let emergencies = count(&|_, r| r == SeverityLevel::Emergency);
        let actionable = count(&|_, r| collapse_actionable(r));
        Self {
            reviewer: reviewer.to_string(),
            assigned,
            n,
            exact: Proportion::new(count(&|p, r| p == r), n),
            emergency_sensitivity: Proportion::new(
                count(&|p, r| r == SeverityLevel::Emergency && p == SeverityLevel::Emergency),
                emergencies,
            ),
            actionable_sensitivity: Proportion::new(count(&|p, r| collapse_actionable(r) && collapse_actionable(p)), actionable),
            overtriage: Proportion::new(count(&|p, r| p > r), n),
        }
    }

    /// Sums counts over rows; duplicated items stay duplicated.
    pub fn pooled(label: &str, rows: &[LooRow]) -> Self {
        let sum = |f: fn(&LooRow) -> Proportion| {
            rows.iter().map(f).fold(Proportion::new(0, 0), |a, b| Proportion::new(a.num + b.num, a.den + b.den))
        };
        Self {
            reviewer: label.to_string(),
            assigned: rows.iter().map(|r| r.assigned).sum(),
            n: rows.iter().map(|r| r.n).sum(),
            exact: sum(|r| r.exact),
            emergency_sensitivity: sum(|r| r.emergency_sensitivity),
            actionable_sensitivity: sum(|r| r.actionable_sensitivity),
            overtriage: sum(|r| r.overtriage),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LooSection {
    pub rater_id: String,
    pub clinicians: Vec<LooRow>,
    /// The rater on each clinician's subset, scored against the same
    /// two-partner reference.
    pub rater_rows: Vec<LooRow>,
    pub rater_pooled: LooRow,
    pub clinician_pooled: LooRow,
}

/// Each reviewer against the consensus of their two partners, and the rater
/// against the identical references.
pub fn run_loo(panel: &RatingMatrix, assignments: &Assignments, run: &RaterRun) -> Result<LooSection, StudyError> {
    let mut reviewers: Vec<String> = assignments.values().flatten().cloned().collect();
    reviewers.sort();
    reviewers.dedup();
    let mut clinicians = Vec::new();
    let mut rater_rows = Vec::new();
    for reviewer in &reviewers {
        let reference = loo_reference(assignments, panel, reviewer)?;
        let assigned = reference.entries.len() as u64;
        let mut own = Vec::new();
        let mut theirs = Vec::new();
        let mut missing = Vec::new();
        for (item, label) in &reference.entries {
            let Some(r) = label.label() else { continue };
            let h = panel
                .label(item, reviewer)
                .ok_or_else(|| StatsError::Structural { item: item.clone(), detail: format!("{reviewer} assigned but has no rating") })?;
            own.push((h, r));
            match run.verdicts.get(item) {
                Some(a) => theirs.push((*a, r)),
                None => missing.push(item.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(StudyError::MissingVerdicts { rater: run.rater_id.clone(), ids: missing });
        }
        clinicians.push(LooRow::from_pairs(reviewer, assigned, &own));
        rater_rows.push(LooRow::from_pairs(reviewer, assigned, &theirs));
    }
    Ok(LooSection {
        rater_id: run.rater_id.clone(),
        rater_pooled: LooRow::pooled(&run.rater_id, &rater_rows),
        clinician_pooled: LooRow::pooled("clinicians", &clinicians),
        clinicians,
        rater_rows,
    })
}
