//! Study orchestration: assignment plans, mock panels, the per-table
//! analyses and the rendered report.

mod adjudication;
mod assignment;
mod desk;
mod irr;
mod loo;
mod panel;
mod report;
mod validation;

#[cfg(test)]
mod tests;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agreement::StatsError;
use crate::rater::{FailureKind, Rater, RaterCase, RaterError, TrialResult};
use crate::vitals::SeverityLevel;

pub use adjudication::{
    classify_adjudication, run_adjudication, select_severe_overtriage, simulate_adjudicators, AdjudicationCase, AdjudicationColumn,
    AdjudicationSection, AdjudicationVerdict,
};
pub use assignment::{build_assignment, default_reviewers, AssignmentMethod, AssignmentParams, AssignmentPlan, QueueEntry};
pub use desk::{run_desk_study, DeskStudy, StudyConfig, AGENT_ID};
pub use irr::{run_irr, CategoryKappa, DeviceIrr, IrrConfig, IrrSection};
pub use loo::{run_loo, LooRow, LooSection};
pub use panel::{intra_rater_consistency, simulate_panel, IntraRow, IntraSection, PanelConfig, ReviewerProfile};
pub use report::{Cell, StudyReport, Table};
pub use validation::{
    run_baseline_comparison, run_validation, AlertRow, ComparisonSection, PanelAgreement, RaterValidation, ReviewerRaterRow,
    ValidationSection,
};

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error("infeasible assignment: {0}")]
    Assignment(String),
    #[error("invalid study input: {0}")]
    Invalid(String),
    #[error("missing verdicts from {rater} for {ids:?}")]
    MissingVerdicts { rater: String, ids: Vec<String> },
    #[error("report failed {} internal-consistency audit(s): {}", .0.len(), .0.join("; "))]
    Audit(Vec<String>),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Rater(#[from] RaterError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One pass of a rater over a case set: the label per case plus failures.
/// Wall-clock durations are deliberately not kept so reports stay
/// reproducible.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaterRun {
    pub rater_id: String,
    pub deterministic: bool,
    pub verdicts: BTreeMap<String, SeverityLevel>,
    #[serde(default)]
    pub failures: BTreeMap<String, FailureKind>,
}

impl RaterRun {
    pub fn n(&self) -> usize {
        self.verdicts.len() + self.failures.len()
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, StudyError> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Rates every (case, run) pair in parallel. Results come back in case-major
/// order regardless of scheduling.
pub fn rate_all(rater: &dyn Rater, cases: &[RaterCase], runs: u32) -> Vec<Vec<TrialResult>> {
    cases.par_iter().map(|c| (0..runs).into_par_iter().map(|r| rater.rate(c, r)).collect()).collect()
}

/// Single-run verdicts (run 0) for every case.
pub fn collect_run(rater: &dyn Rater, cases: &[RaterCase]) -> RaterRun {
    let results = rate_all(rater, cases, 1);
    let mut run = RaterRun { rater_id: rater.id().to_string(), deterministic: rater.is_deterministic(), ..RaterRun::default() };
    for (c, mut r) in cases.iter().zip(results) {
        match r.remove(0) {
            Ok(v) => {
                run.verdicts.insert(c.case_id.clone(), v.severity());
            }
            Err(f) => {
                run.failures.insert(c.case_id.clone(), f.kind);
            }
        }
    }
    run
}
