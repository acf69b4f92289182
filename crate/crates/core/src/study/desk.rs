use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{
    build_assignment, intra_rater_consistency, run_adjudication, run_baseline_comparison, run_irr, run_loo, run_validation,
    select_severe_overtriage, simulate_adjudicators, simulate_panel, AssignmentParams, AssignmentPlan, IrrConfig, PanelConfig, RaterRun,
    StudyError, StudyReport,
};
use crate::adaptive::AdaptiveConfig;
use crate::agreement::{majority_reference, RatingMatrix, RatingRecord};
use crate::fixed::FixedConfig;
use crate::rater::{build_cases, AdaptiveRater, FixedRater, MockRater, NoiseKernel, Rater, RaterCase};
use crate::rng::named_rng;
use crate::sim::SimDataset;
use crate::vitals::SeverityLevel;

pub const AGENT_ID: &str = "mock_agent";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub seed: u64,
    /// Cases drawn for the self-agreement study.
    pub irr_items: usize,
    pub irr: IrrConfig,
    pub resamples: usize,
    pub assignment: AssignmentParams,
    pub agent_kernel: NoiseKernel,
    pub panel: PanelConfig,
    pub adjudicators: Vec<String>,
    pub adjudicator_kernel: NoiseKernel,
    pub min_gap: u8,
    pub fixed: FixedConfig,
    pub adaptive: AdaptiveConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        let seed = 20240601;
        Self {
            seed,
            irr_items: 100,
            irr: IrrConfig { seed, ..IrrConfig::default() },
            resamples: 2000,
            assignment: AssignmentParams { seed, ..AssignmentParams::default() },
            agent_kernel: NoiseKernel::adjacent(0.965).expect("valid constant"),
            panel: PanelConfig::default_six(seed),
            adjudicators: vec!["expert1".into(), "expert2".into()],
            adjudicator_kernel: NoiseKernel::banded(0.6, 0.8).expect("valid constant"),
            min_gap: 2,
            fixed: FixedConfig::default(),
            adaptive: AdaptiveConfig::default(),
        }
    }
}

impl StudyConfig {
    /// Same settings with every seed replaced by `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.irr.seed = seed;
        self.assignment.seed = seed;
        self.panel.seed = seed;
        self
    }
}

/// Everything a desk-scale study produced, for writing out alongside the
/// report.
#[derive(Debug, Clone)]
pub struct DeskStudy {
    pub report: StudyReport,
    pub plan: AssignmentPlan,
    pub panel: Vec<RatingRecord>,
    pub runs: Vec<RaterRun>,
    pub adjudication_grades: RatingMatrix,
}

/// Seeded subset of `n` case indices, in case order.
fn irr_subset(cases: &[RaterCase], n: usize, seed: u64) -> Vec<RaterCase> {
    let mut idx: Vec<usize> = (0..cases.len()).collect();
    idx.shuffle(&mut named_rng(seed, "irr/subset", 0));
    let mut idx = idx[..n.min(cases.len())].to_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| cases[i].clone()).collect()
}

/// Runs all three studies on a simulated dataset: self-agreement of the
/// mock agent, baseline alert rates, and validation against a mock panel
/// with leave-one-out and adjudication.
pub fn run_desk_study(ds: &SimDataset, cfg: &StudyConfig) -> Result<DeskStudy, StudyError> {
    let cases = build_cases(&ds.samples, &ds.readings, &ds.context)?;
    let latent: BTreeMap<String, SeverityLevel> = ds.samples.iter().map(|s| (s.sample_id.clone(), s.latent)).collect();

    let agent = MockRater::new(AGENT_ID, cfg.agent_kernel, latent.clone(), cfg.seed);
    let fixed = FixedRater::new(cfg.fixed.clone());
    let adaptive = AdaptiveRater::new(cfg.adaptive.clone());
    let raters: [&dyn Rater; 3] = [&fixed, &adaptive, &agent];
    let (comparison, runs) = run_baseline_comparison(&raters, &cases);

    let irr = run_irr(&agent, &irr_subset(&cases, cfg.irr_items, cfg.seed), &cfg.irr)?;

    let sample_ids: Vec<String> = ds.samples.iter().map(|s| s.sample_id.clone()).collect();
    let reviewers: Vec<String> = cfg.panel.reviewers.iter().map(|r| r.id.clone()).collect();
    let plan = build_assignment(&sample_ids, &reviewers, &cfg.assignment)?;
    let panel = simulate_panel(&plan, &latent, &cfg.panel)?;
    let matrix = RatingMatrix::from_records(&panel);
    let intra = intra_rater_consistency(&panel, &plan.anchors, plan.presentations);

    let validation = run_validation(&matrix, &runs, AGENT_ID, cfg.resamples, cfg.seed)?;
    let agent_run = runs.iter().find(|r| r.rater_id == AGENT_ID).expect("agent run");
    let loo = run_loo(&matrix, &plan.assignments, agent_run)?;

    let severe = select_severe_overtriage(&agent_run.verdicts, &majority_reference(&matrix), cfg.min_gap);
    let adjudication_grades = simulate_adjudicators(&severe, &latent, &cfg.adjudicators, &cfg.adjudicator_kernel, cfg.seed)?;
    let mut columns = cfg.adjudicators.clone();
    if columns.len() >= 2 {
        columns.push("final".into());
    }
    let adjudication = run_adjudication(AGENT_ID, severe, &adjudication_grades, &columns, cfg.min_gap)?;

    let report = StudyReport {
        seed: cfg.seed,
        irr: Some(irr),
        comparison: Some(comparison),
        intra: Some(intra),
        validation: Some(validation),
        loo: Some(loo),
        adjudication: Some(adjudication),
    };
    Ok(DeskStudy { report, plan, panel, runs, adjudication_grades })
}
