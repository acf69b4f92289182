use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::{AssignmentPlan, StudyError};
use crate::agreement::RatingRecord;
use crate::rater::NoiseKernel;
use crate::rng::named_rng;
use crate::scalar::Proportion;
use crate::vitals::SeverityLevel;

/// A simulated reviewer: a noise kernel around the latent label and the
/// chance that an anchor repeat reproduces the first-pass grade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewerProfile {
    pub id: String,
    pub kernel: NoiseKernel,
    pub consistency: f64,
    pub median_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelConfig {
    pub seed: u64,
    pub reviewers: Vec<ReviewerProfile>,
}

impl PanelConfig {
    /// Six reviewers with differing accuracy, lean and self-consistency.
    pub fn default_six(seed: u64) -> Self {
        let spec = [
            ("MD1", 0.74, 0.5, 0.86, 14.0),
            ("MD2", 0.80, 0.4, 0.975, 9.0),
            ("MD3", 0.78, 0.4, 0.96, 12.0),
            ("NP1", 0.70, 0.5, 0.88, 20.0),
            ("NP2", 0.62, 0.85, 0.915, 28.0),
            ("NP3", 0.76, 0.5, 0.987, 7.0),
        ];
        let reviewers = spec
            .iter()
            .map(|&(id, stay, up, consistency, median_secs)| ReviewerProfile {
                id: id.into(),
                kernel: NoiseKernel::banded(stay, up).expect("valid constants"),
                consistency,
                median_secs,
            })
            .collect();
        Self { seed, reviewers }
    }
}

/// Grades every queue entry of the plan. Records come out reviewer by
/// reviewer in queue order.
pub fn simulate_panel(
    plan: &AssignmentPlan,
    latent: &BTreeMap<String, SeverityLevel>,
    cfg: &PanelConfig,
) -> Result<Vec<RatingRecord>, StudyError> {
    let mut out = Vec::new();
    for reviewer in &plan.reviewers {
        let p = cfg
            .reviewers
            .iter()
            .find(|p| &p.id == reviewer)
            .ok_or_else(|| StudyError::Invalid(format!("no profile for reviewer {reviewer}")))?;
        if !(0.0..=1.0).contains(&p.consistency) || p.median_secs <= 0.0 {
            return Err(StudyError::Invalid(format!("reviewer {reviewer}: bad consistency or median time")));
        }
        let durations = LogNormal::new(p.median_secs.ln(), 0.6).map_err(|e| StudyError::Invalid(e.to_string()))?;
        for e in plan.queues.get(reviewer).map(Vec::as_slice).unwrap_or(&[]) {
            let l = *latent.get(&e.sample_id).ok_or_else(|| StudyError::Invalid(format!("no latent label for {}", e.sample_id)))?;
            let stream = format!("panel/{reviewer}/{}", e.sample_id);
            let first = p.kernel.sample(l, named_rng(cfg.seed, &stream, 1).random::<f64>());
            let mut rng = named_rng(cfg.seed, &stream, u64::from(e.presentation_index));
            let label = if e.presentation_index <= 1 || rng.random::<f64>() < p.consistency {
                first
            } else {
                p.kernel.sample(l, rng.random::<f64>())
            };
            let secs: f64 = durations.sample(&mut rng);
            out.push(RatingRecord {
                item_id: e.sample_id.clone(),
                rater_id: reviewer.clone(),
                label,
                duration_secs: (secs * 10.0).round() / 10.0,
                presentation_index: e.presentation_index,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntraRow {
    pub reviewer: String,
    pub anchors: usize,
    /// Anchors with every presentation identical, over complete anchors.
    pub consistent: Proportion,
    pub incomplete: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntraSection {
    pub presentations: u8,
    pub rows: Vec<IntraRow>,
    pub mean: Option<f64>,
    pub pooled: Proportion,
}

/// Fraction of each reviewer's anchors graded identically on all
/// presentations. Anchors missing a presentation are listed, not scored.
pub fn intra_rater_consistency(records: &[RatingRecord], anchors: &BTreeMap<String, Vec<String>>, presentations: u8) -> IntraSection {
    let mut grades: BTreeMap<(&str, &str), BTreeMap<u8, SeverityLevel>> = BTreeMap::new();
    for r in records {
        grades.entry((r.rater_id.as_str(), r.item_id.as_str())).or_default().entry(r.presentation_index.max(1)).or_insert(r.label);
    }
    let rows: Vec<IntraRow> = anchors
        .iter()
        .map(|(reviewer, items)| {
            let mut same = 0;
            let mut complete = 0;
            let mut incomplete = Vec::new();
            for item in items {
                let g = grades.get(&(reviewer.as_str(), item.as_str()));
                let labels: Option<Vec<SeverityLevel>> = (1..=presentations).map(|k| g.and_then(|g| g.get(&k)).copied()).collect();
                match labels {
                    Some(l) => {
                        complete += 1;
                        same += u64::from(l.windows(2).all(|w| w[0] == w[1]));
                    }
                    None => incomplete.push(item.clone()),
                }
            }
            IntraRow { reviewer: reviewer.clone(), anchors: items.len(), consistent: Proportion::new(same, complete), incomplete }
        })
        .collect();
    let rates: Vec<f64> = rows.iter().filter_map(|r| r.consistent.ratio()).collect();
    let pooled = rows.iter().fold(Proportion::new(0, 0), |a, r| Proportion::new(a.num + r.consistent.num, a.den + r.consistent.den));
    IntraSection { presentations, mean: (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64), rows, pooled }
}
