use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::StudyError;
use crate::agreement::{RatingMatrix, ReferenceStandard, StatsError};
use crate::rater::NoiseKernel;
use crate::rng::named_rng;
use crate::scalar::Proportion;
use crate::vitals::SeverityLevel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AdjudicationVerdict {
    TrueOvertriage,
    Debatable,
    Justified,
}

impl AdjudicationVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Justified => "JUSTIFIED",
            Self::Debatable => "DEBATABLE",
            Self::TrueOvertriage => "TRUE_OVERTRIAGE",
        }
    }
}

/// Verdict for one re-grade. Total over all inputs and monotone in
/// `regrade`; a re-grade below the original majority counts as true
/// overtriage.
pub fn classify_adjudication(agent: SeverityLevel, majority: SeverityLevel, regrade: SeverityLevel) -> AdjudicationVerdict {
    if regrade >= agent {
        AdjudicationVerdict::Justified
    } else if regrade > majority {
        AdjudicationVerdict::Debatable
    } else {
        AdjudicationVerdict::TrueOvertriage
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicationCase {
    pub sample_id: String,
    pub agent: SeverityLevel,
    pub majority: SeverityLevel,
    pub gap: u8,
    #[serde(default)]
    pub regrades: BTreeMap<String, SeverityLevel>,
    #[serde(default)]
    pub verdicts: BTreeMap<String, AdjudicationVerdict>,
}

/// Cases where the rater sits at least `min_gap` levels above the reference,
/// largest gap first, then by sample id.
pub fn select_severe_overtriage(
    pred: &BTreeMap<String, SeverityLevel>,
    reference: &ReferenceStandard,
    min_gap: u8,
) -> Vec<AdjudicationCase> {
    let mut out: Vec<AdjudicationCase> = reference
        .entries
        .iter()
        .filter_map(|(id, l)| {
            let majority = l.label()?;
            let agent = *pred.get(id)?;
            let gap = agent.code().checked_sub(majority.code())?;
            (gap >= min_gap).then(|| AdjudicationCase {
                sample_id: id.clone(),
                agent,
                majority,
                gap,
                regrades: BTreeMap::new(),
                verdicts: BTreeMap::new(),
            })
        })
        .collect();
    out.sort_by(|a, b| b.gap.cmp(&a.gap).then_with(|| a.sample_id.cmp(&b.sample_id)));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicationColumn {
    pub adjudicator: String,
    pub justified: Proportion,
    pub debatable: Proportion,
    pub true_overtriage: Proportion,
    pub non_overtriage: Proportion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjudicationSection {
    pub rater_id: String,
    pub min_gap: u8,
    pub cases: Vec<AdjudicationCase>,
    pub columns: Vec<AdjudicationColumn>,
    /// Cases whose original majority was NOT AN ISSUE.
    pub majority_not_an_issue: Proportion,
}

/// Attaches re-grades and verdicts. Every adjudicator must have graded
/// every case.
pub fn run_adjudication(
    rater_id: &str,
    mut cases: Vec<AdjudicationCase>,
    regrades: &RatingMatrix,
    adjudicators: &[String],
    min_gap: u8,
) -> Result<AdjudicationSection, StudyError> {
    let n = cases.len() as u64;
    let mut tally: Vec<[u64; 3]> = vec![[0; 3]; adjudicators.len()];
    for c in &mut cases {
        for (k, adj) in adjudicators.iter().enumerate() {
            let g = regrades
                .label(&c.sample_id, adj)
                .ok_or_else(|| StatsError::Structural { item: c.sample_id.clone(), detail: format!("no re-grade from {adj}") })?;
            let v = classify_adjudication(c.agent, c.majority, g);
            tally[k][v as usize] += 1;
            c.regrades.insert(adj.clone(), g);
            c.verdicts.insert(adj.clone(), v);
        }
    }
    let columns = adjudicators
        .iter()
        .zip(&tally)
        .map(|(adj, t)| AdjudicationColumn {
            adjudicator: adj.clone(),
            true_overtriage: Proportion::new(t[0], n),
            debatable: Proportion::new(t[1], n),
            justified: Proportion::new(t[2], n),
            non_overtriage: Proportion::new(t[1] + t[2], n),
        })
        .collect();
    let ni = cases.iter().filter(|c| c.majority == SeverityLevel::NotAnIssue).count() as u64;
    Ok(AdjudicationSection { rater_id: rater_id.to_string(), min_gap, cases, columns, majority_not_an_issue: Proportion::new(ni, n) })
}

/// Mock re-grades: each adjudicator perturbs the latent label through
/// `kernel`; a `final` column takes the higher of the first two.
pub fn simulate_adjudicators(
    cases: &[AdjudicationCase],
    latent: &BTreeMap<String, SeverityLevel>,
    adjudicators: &[String],
    kernel: &NoiseKernel,
    seed: u64,
) -> Result<RatingMatrix, StudyError> {
    let mut m = RatingMatrix::new();
    for c in cases {
        let l = *latent.get(&c.sample_id).ok_or_else(|| StudyError::Invalid(format!("no latent label for {}", c.sample_id)))?;
        let mut grades = Vec::new();
        for adj in adjudicators {
            let mut rng = named_rng(seed, &format!("adjudicator/{adj}/{}", c.sample_id), 0);
            let g = kernel.sample(l, rng.random::<f64>());
            m.set(&c.sample_id, adj, g);
            grades.push(g);
        }
        if let Some(top) = grades.iter().take(2).max() {
            m.set(&c.sample_id, "final", *top);
        }
    }
    Ok(m)
}
