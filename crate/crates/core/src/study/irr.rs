use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{rate_all, StudyError};
use crate::agreement::{bootstrap, fleiss_detail, fleiss_per_category, kappa_estimate, KappaEstimate, KappaMethod, RatingMatrix};
use crate::rater::{FailureKind, Rater, RaterCase};
use crate::rng::named_rng;
use crate::scalar::Proportion;
use crate::vitals::{DeviceKind, SeverityLevel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IrrConfig {
    pub runs: u32,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for IrrConfig {
    fn default() -> Self {
        Self { runs: 5, resamples: 2000, seed: 20240601 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryKappa {
    pub level: SeverityLevel,
    pub kappa: Option<f64>,
    pub ci: Option<(f64, f64)>,
    /// Labels in this category over all labels on complete items.
    pub share: Proportion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceIrr {
    pub device: DeviceKind,
    pub items: usize,
    pub kappa: Option<f64>,
    pub perfect: Proportion,
}

/// Repeated-run self-agreement of one rater.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrrSection {
    pub rater_id: String,
    pub deterministic: bool,
    pub runs: u32,
    pub items: usize,
    /// Items with a verdict on every run; the rest are excluded.
    pub items_used: usize,
    pub items_excluded: Vec<String>,
    pub failed_trials: BTreeMap<FailureKind, u64>,
    pub overall: Option<KappaEstimate<f64>>,
    pub weighted: Option<KappaEstimate<f64>>,
    pub per_category: Vec<CategoryKappa>,
    pub perfect: Proportion,
    pub by_device: Vec<DeviceIrr>,
}

fn perfect(m: &RatingMatrix, runs: u32) -> Proportion {
    let complete: Vec<usize> = (0..m.n_items()).filter(|&i| m.labels(i).len() == runs as usize).collect();
    let same = complete.iter().filter(|&&i| m.category_counts(i).contains(&u64::from(runs))).count();
    Proportion::new(same as u64, complete.len() as u64)
}

/// Runs `rater` `runs` times on every case and measures self-agreement.
pub fn run_irr(rater: &dyn Rater, cases: &[RaterCase], cfg: &IrrConfig) -> Result<IrrSection, StudyError> {
    if cfg.runs < 2 {
        return Err(StudyError::Invalid(format!("self-agreement needs at least 2 runs, got {}", cfg.runs)));
    }
    if cases.is_empty() {
        return Err(StudyError::Invalid("no cases".into()));
    }
    let results = rate_all(rater, cases, cfg.runs);
    let mut m = RatingMatrix::new();
    let mut failed_trials = BTreeMap::new();
    let mut items_excluded = Vec::new();
    let run_ids: Vec<String> = (0..cfg.runs).map(|r| format!("run{r}")).collect();
    let mut complete = Vec::new();
    for (c, rs) in cases.iter().zip(&results) {
        let mut ok = true;
        for r in rs {
            if let Err(f) = r {
                *failed_trials.entry(f.kind).or_insert(0) += 1;
                ok = false;
            }
        }
        if ok {
            for (rid, r) in run_ids.iter().zip(rs) {
                m.set(&c.case_id, rid, r.as_ref().expect("checked").severity());
            }
            complete.push(c);
        } else {
            items_excluded.push(c.case_id.clone());
        }
    }

    let overall = kappa_estimate::<f64>(&m, KappaMethod::Fleiss, cfg.resamples, cfg.seed).ok();
    let weighted = kappa_estimate::<f64>(&m, KappaMethod::FleissLinearWeighted, cfg.resamples, cfg.seed).ok();
    let point = fleiss_per_category::<f64>(&m).unwrap_or([None; 4]);
    let mut counts = [0u64; 4];
    for i in 0..m.n_items() {
        for (k, c) in m.category_counts(i).iter().enumerate() {
            counts[k] += c;
        }
    }
    let total: u64 = counts.iter().sum();
    let per_category = SeverityLevel::ALL
        .iter()
        .rev()
        .map(|&level| {
            let k = level.index();
            let seed = named_rng(cfg.seed, "irr/category", k as u64).random::<u64>();
            let ci = point[k].and_then(|_| {
                bootstrap(m.n_items(), cfg.resamples, seed, |idx| fleiss_per_category::<f64>(&m.select_items(idx)).ok().and_then(|v| v[k]))
                    .ok()
                    .map(|b| (b.low, b.high))
            });
            CategoryKappa { level, kappa: point[k], ci, share: Proportion::new(counts[k], total) }
        })
        .collect();

    let by_device = DeviceKind::ALL
        .iter()
        .filter_map(|&device| {
            let idx: Vec<usize> = complete.iter().enumerate().filter(|(_, c)| c.reading.device == device).map(|(i, _)| i).collect();
            if idx.is_empty() {
                return None;
            }
            let sub = m.select_items(&idx);
            Some(DeviceIrr {
                device,
                items: idx.len(),
                kappa: fleiss_detail::<f64>(&sub, KappaMethod::Fleiss).ok().map(|d| d.kappa),
                perfect: perfect(&sub, cfg.runs),
            })
        })
        .collect();

    Ok(IrrSection {
        rater_id: rater.id().to_string(),
        deterministic: rater.is_deterministic(),
        runs: cfg.runs,
        items: cases.len(),
        items_used: complete.len(),
        items_excluded,
        failed_trials,
        overall,
        weighted,
        per_category,
        perfect: perfect(&m, cfg.runs),
        by_device,
    })
}
