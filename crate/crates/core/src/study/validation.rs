use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{collect_run, RaterRun, StudyError};
use crate::agreement::{
    binary_metrics, majority_reference, max_severity_standard, metrics4, paired, pairwise_agreement, qwk_estimate, BinaryMetrics,
    ConfusionMatrix4, KappaEstimate, Metrics4, RatingMatrix, StatsError,
};
use crate::rater::{Rater, RaterCase};
use crate::rng::named_rng;
use crate::scalar::Proportion;
use crate::vitals::{collapse_actionable, within_one, SeverityLevel};

/// Alert-rate row for one rater.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlertRow {
    pub rater_id: String,
    pub n: u64,
    pub actionable: Proportion,
    pub emergency: Proportion,
    pub urgent: Proportion,
    pub monitor: Proportion,
    pub not_an_issue: Proportion,
    pub failed: Proportion,
}

impl AlertRow {
    pub fn from_run(run: &RaterRun) -> Self {
        let n = run.n() as u64;
        let count = |l: SeverityLevel| run.verdicts.values().filter(|v| **v == l).count() as u64;
        let p = |x| Proportion::new(x, n);
        Self {
            rater_id: run.rater_id.clone(),
            n,
            actionable: p(count(SeverityLevel::Emergency) + count(SeverityLevel::Urgent)),
            emergency: p(count(SeverityLevel::Emergency)),
            urgent: p(count(SeverityLevel::Urgent)),
            monitor: p(count(SeverityLevel::Monitor)),
            not_an_issue: p(count(SeverityLevel::NotAnIssue)),
            failed: p(run.failures.len() as u64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonSection {
    pub rows: Vec<AlertRow>,
}

impl ComparisonSection {
    pub fn from_runs(runs: &[RaterRun]) -> Self {
        Self { rows: runs.iter().map(AlertRow::from_run).collect() }
    }

    pub fn row(&self, rater_id: &str) -> Option<&AlertRow> {
        self.rows.iter().find(|r| r.rater_id == rater_id)
    }
}

/// Rates every case once with each rater and tabulates alert rates.
pub fn run_baseline_comparison(raters: &[&dyn Rater], cases: &[RaterCase]) -> (ComparisonSection, Vec<RaterRun>) {
    let runs: Vec<RaterRun> = raters.iter().map(|r| collect_run(*r, cases)).collect();
    (ComparisonSection::from_runs(&runs), runs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelAgreement {
    pub reviewers: Vec<String>,
    /// Exact agreement per reviewer pair over co-rated samples.
    pub pairs: Vec<(String, String, Proportion)>,
    pub pairwise_mean: Option<f64>,
    pub pairwise_min: Option<f64>,
    pub pairwise_max: Option<f64>,
    pub unanimous: Proportion,
    /// Samples with a strict majority (unanimous included).
    pub majority: Proportion,
    pub no_majority: Proportion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewerRaterRow {
    pub reviewer: String,
    pub exact: Proportion,
    pub binary: Proportion,
    pub within_one: Proportion,
}

/// A rater scored against a reference standard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterValidation {
    pub rater_id: String,
    pub confusion: ConfusionMatrix4,
    pub metrics: Metrics4,
    pub binary: BinaryMetrics,
    pub qwk: Option<KappaEstimate<f64>>,
    /// Binary metrics against the max-severity reference over all samples.
    pub max_severity: Option<BinaryMetrics>,
}

impl RaterValidation {
    pub fn from_pairs(rater_id: impl Into<String>, pairs: &[(SeverityLevel, SeverityLevel)], resamples: usize, seed: u64) -> Self {
        let rater_id = rater_id.into();
        let confusion = ConfusionMatrix4::from_pairs(pairs.iter().copied());
        let seed = named_rng(seed, &format!("validation/qwk/{rater_id}"), 0).random::<u64>();
        Self {
            metrics: metrics4(&confusion),
            binary: binary_metrics(&confusion),
            qwk: qwk_estimate(pairs, resamples, seed).ok(),
            confusion,
            rater_id,
            max_severity: None,
        }
    }

    /// Same analysis starting from a published confusion matrix.
    pub fn from_confusion(rater_id: impl Into<String>, c: &ConfusionMatrix4, resamples: usize, seed: u64) -> Self {
        let mut pairs = Vec::with_capacity(c.total() as usize);
        for p in SeverityLevel::ALL {
            for r in SeverityLevel::ALL {
                pairs.extend(std::iter::repeat_n((p, r), c.get(p, r) as usize));
            }
        }
        Self::from_pairs(rater_id, &pairs, resamples, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSection {
    pub samples: usize,
    pub evaluable: usize,
    pub excluded: Vec<String>,
    pub primary: String,
    pub panel: PanelAgreement,
    /// Rater id -> per-reviewer agreement rows.
    pub reviewer_vs: BTreeMap<String, Vec<ReviewerRaterRow>>,
    pub raters: Vec<RaterValidation>,
}

impl ValidationSection {
    pub fn rater(&self, id: &str) -> Option<&RaterValidation> {
        self.raters.iter().find(|r| r.rater_id == id)
    }
}

fn panel_agreement(m: &RatingMatrix) -> PanelAgreement {
    let pw = pairwise_agreement(m);
    let summary = pw.summary();
    let n = m.n_items() as u64;
    let mut unanimous = 0;
    let mut majority = 0;
    for i in 0..m.n_items() {
        let counts = m.category_counts(i);
        let k: u64 = counts.iter().sum();
        let top = counts.iter().copied().max().unwrap_or(0);
        unanimous += u64::from(top == k);
        majority += u64::from(2 * top > k);
    }
    PanelAgreement {
        reviewers: m.raters().to_vec(),
        pairs: pw.off_diagonal().into_iter().map(|(a, b, p)| (pw.raters[a].clone(), pw.raters[b].clone(), p)).collect(),
        pairwise_mean: summary.map(|s| s.0),
        pairwise_min: summary.map(|s| s.1),
        pairwise_max: summary.map(|s| s.2),
        unanimous: Proportion::new(unanimous, n),
        majority: Proportion::new(majority, n),
        no_majority: Proportion::new(n - majority, n),
    }
}

fn reviewer_rows(m: &RatingMatrix, run: &RaterRun) -> Vec<ReviewerRaterRow> {
    m.raters()
        .iter()
        .enumerate()
        .map(|(j, reviewer)| {
            let (mut n, mut exact, mut binary, mut near) = (0, 0, 0, 0);
            for (i, item) in m.items().iter().enumerate() {
                if let (Some(h), Some(a)) = (m.row(i)[j], run.verdicts.get(item)) {
                    n += 1;
                    exact += u64::from(h == *a);
                    binary += u64::from(collapse_actionable(h) == collapse_actionable(*a));
                    near += u64::from(within_one(h, *a));
                }
            }
            ReviewerRaterRow {
                reviewer: reviewer.clone(),
                exact: Proportion::new(exact, n),
                binary: Proportion::new(binary, n),
                within_one: Proportion::new(near, n),
            }
        })
        .collect()
}

/// Scores every rater run against the panel. `panel` holds first-pass
/// grades only; `primary` names the rater given the full per-reviewer
/// breakdown.
pub fn run_validation(
    panel: &RatingMatrix,
    runs: &[RaterRun],
    primary: &str,
    resamples: usize,
    seed: u64,
) -> Result<ValidationSection, StudyError> {
    if panel.n_items() == 0 {
        return Err(StudyError::Invalid("empty panel".into()));
    }
    let k = panel.labels(0).len();
    for i in 0..panel.n_items() {
        let n = panel.labels(i).len();
        if n != k || n < 2 {
            return Err(StatsError::Structural {
                item: panel.items()[i].clone(),
                detail: format!("{n} panel ratings, expected {k} (at least 2)"),
            }
            .into());
        }
    }
    if !runs.iter().any(|r| r.rater_id == primary) {
        return Err(StudyError::Invalid(format!("primary rater {primary} has no run")));
    }
    for run in runs {
        let missing: Vec<String> = panel.items().iter().filter(|i| !run.verdicts.contains_key(*i)).cloned().collect();
        if !missing.is_empty() {
            return Err(StudyError::MissingVerdicts { rater: run.rater_id.clone(), ids: missing });
        }
    }
    let majority = majority_reference(panel);
    let max_ref = max_severity_standard(panel);
    let mut raters = Vec::new();
    let mut reviewer_vs = BTreeMap::new();
    for run in runs {
        let pairs = paired(&run.verdicts, &majority)?;
        let mut v = RaterValidation::from_pairs(&run.rater_id, &pairs, resamples, seed);
        v.max_severity = Some(binary_metrics(&ConfusionMatrix4::from_pairs(paired(&run.verdicts, &max_ref)?)));
        raters.push(v);
        reviewer_vs.insert(run.rater_id.clone(), reviewer_rows(panel, run));
    }
    Ok(ValidationSection {
        samples: panel.n_items(),
        evaluable: majority.evaluable(),
        excluded: majority.entries.iter().filter(|(_, l)| l.label().is_none()).map(|(i, _)| i.clone()).collect(),
        primary: primary.to_string(),
        panel: panel_agreement(panel),
        reviewer_vs,
        raters,
    })
}
