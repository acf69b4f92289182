use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ratings::RatingMatrix;
use super::StatsError;
use crate::scalar::Proportion;
use crate::vitals::SeverityLevel;

/// Item id -> raters assigned to it.
pub type Assignments = BTreeMap<String, Vec<String>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefLabel {
    Label(SeverityLevel),
    /// No strict majority; never enters accuracy metrics.
    Excluded,
}

impl RefLabel {
    pub fn label(self) -> Option<SeverityLevel> {
        match self {
            RefLabel::Label(l) => Some(l),
            RefLabel::Excluded => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Majority,
    MaxSeverity,
    Loo { left_out: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceStandard {
    pub provenance: Provenance,
    pub entries: BTreeMap<String, RefLabel>,
}

impl ReferenceStandard {
    pub fn evaluable(&self) -> usize {
        self.entries.values().filter(|l| l.label().is_some()).count()
    }

    pub fn excluded(&self) -> usize {
        self.entries.len() - self.evaluable()
    }

    pub fn exclusion_rate(&self) -> Proportion {
        Proportion::new(self.excluded() as u64, self.entries.len() as u64)
    }

    pub fn get(&self, item: &str) -> Option<RefLabel> {
        self.entries.get(item).copied()
    }
}

/// Strict-majority label, or `Excluded` when no label holds more than half.
pub fn majority_vote(labels: &[SeverityLevel]) -> RefLabel {
    let mut counts = [0usize; 4];
    for l in labels {
        counts[l.index()] += 1;
    }
    SeverityLevel::ALL.into_iter().find(|l| counts[l.index()] * 2 > labels.len()).map_or(RefLabel::Excluded, RefLabel::Label)
}

pub fn max_severity_reference(labels: &[SeverityLevel]) -> Result<SeverityLevel, StatsError> {
    labels.iter().copied().max().ok_or(StatsError::EmptyLabels)
}

pub fn majority_reference(m: &RatingMatrix) -> ReferenceStandard {
    let entries = (0..m.n_items()).map(|i| (m.items()[i].clone(), majority_vote(&m.labels(i)))).collect();
    ReferenceStandard { provenance: Provenance::Majority, entries }
}

/// Highest label per item; items with no labels are skipped.
pub fn max_severity_standard(m: &RatingMatrix) -> ReferenceStandard {
    let entries = (0..m.n_items())
        .filter_map(|i| max_severity_reference(&m.labels(i)).ok().map(|l| (m.items()[i].clone(), RefLabel::Label(l))))
        .collect();
    ReferenceStandard { provenance: Provenance::MaxSeverity, entries }
}

/// Reference from the two co-reviewers on every item `left_out` was assigned
/// to. The left-out rater's labels are never read.
pub fn loo_reference(assignments: &Assignments, ratings: &RatingMatrix, left_out: &str) -> Result<ReferenceStandard, StatsError> {
    let mut entries = BTreeMap::new();
    for (item, raters) in assignments {
        if !raters.iter().any(|r| r == left_out) {
            continue;
        }
        let others: Vec<&String> = raters.iter().filter(|r| *r != left_out).collect();
        let labels: Vec<SeverityLevel> = others.iter().filter_map(|r| ratings.label(item, r)).collect();
        if others.len() != 2 || labels.len() != 2 {
            return Err(StatsError::Structural {
                item: item.clone(),
                detail: format!("expected 2 remaining ratings, found {}", labels.len()),
            });
        }
        let label = if labels[0] == labels[1] { RefLabel::Label(labels[0]) } else { RefLabel::Excluded };
        entries.insert(item.clone(), label);
    }
    Ok(ReferenceStandard { provenance: Provenance::Loo { left_out: left_out.to_string() }, entries })
}

/// Exact-match agreement between every rater pair over co-rated items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseAgreement {
    pub raters: Vec<String>,
    /// `None` where a pair shares no items. The diagonal is 1 by convention.
    pub cells: Vec<Vec<Option<Proportion>>>,
}

impl PairwiseAgreement {
    pub fn off_diagonal(&self) -> Vec<(usize, usize, Proportion)> {
        let mut out = Vec::new();
        for i in 0..self.raters.len() {
            for j in i + 1..self.raters.len() {
                if let Some(p) = self.cells[i][j] {
                    out.push((i, j, p));
                }
            }
        }
        out
    }

    /// Mean, min and max over defined off-diagonal pairs.
    pub fn summary(&self) -> Option<(f64, f64, f64)> {
        let vals: Vec<f64> = self.off_diagonal().iter().filter_map(|(_, _, p)| p.ratio()).collect();
        if vals.is_empty() {
            return None;
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some((mean, min, max))
    }
}

pub fn pairwise_agreement(m: &RatingMatrix) -> PairwiseAgreement {
    let k = m.raters().len();
    let mut cells = vec![vec![None; k]; k];
    for (a, row) in cells.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            if a == b {
                *cell = Some(Proportion::new(1, 1));
                continue;
            }
            let (mut shared, mut same) = (0, 0);
            for i in 0..m.n_items() {
                if let (Some(x), Some(y)) = (m.row(i)[a], m.row(i)[b]) {
                    shared += 1;
                    same += u64::from(x == y);
                }
            }
            if shared > 0 {
                *cell = Some(Proportion::new(same, shared));
            }
        }
    }
    PairwiseAgreement { raters: m.raters().to_vec(), cells }
}
