use std::collections::BTreeMap;

use super::*;
use crate::adaptive::AdaptiveConfig;
use crate::agreement::{majority_reference, Assignments, RatingMatrix, RatingRecord};
use crate::fixed::FixedConfig;
use crate::rater::{build_cases, AdaptiveRater, FixedRater, MockRater, NoiseKernel, RaterCase};
use crate::sim::{simulate, Prevalence, ScenarioQuotas, SimConfig, SimDataset};
use crate::vitals::SeverityLevel::{self, *};

fn small_sim(seed: u64) -> SimDataset {
    simulate(&SimConfig {
        seed,
        patients: 60,
        readings: 80,
        scenarios: ScenarioQuotas {
            hypertensive_surge: 3,
            exercise_bp_decline: 2,
            hf_weight_surge: 2,
            chronic_hypoxemia: 2,
            device_glitch: 1,
            stable_baseline: 4,
        },
        ..SimConfig::default()
    })
    .unwrap()
}

fn cases(ds: &SimDataset) -> Vec<RaterCase> {
    build_cases(&ds.samples, &ds.readings, &ds.context).unwrap()
}

fn latent(ds: &SimDataset) -> BTreeMap<String, SeverityLevel> {
    ds.samples.iter().map(|s| (s.sample_id.clone(), s.latent)).collect()
}

fn quick() -> StudyConfig {
    let mut c = StudyConfig { irr_items: 40, resamples: 200, ..StudyConfig::default() };
    c.irr.resamples = 200;
    c
}

#[test]
fn deterministic_rater_self_agreement_is_perfect() {
    let ds = small_sim(1);
    let s = run_irr(&FixedRater::new(FixedConfig::default()), &cases(&ds), &IrrConfig { resamples: 100, ..IrrConfig::default() }).unwrap();
    assert!(s.deterministic);
    assert_eq!(s.perfect, crate::Proportion::new(80, 80));
    assert_eq!(s.overall.unwrap().point, 1.0);
}

#[test]
fn single_run_irr_is_rejected() {
    let ds = small_sim(1);
    let cfg = IrrConfig { runs: 1, ..IrrConfig::default() };
    assert!(matches!(run_irr(&FixedRater::new(FixedConfig::default()), &cases(&ds), &cfg), Err(StudyError::Invalid(_))));
}

#[test]
fn mock_perfect_rate_tracks_its_kernel() {
    let ds = small_sim(2);
    let k = NoiseKernel::adjacent(0.8).unwrap();
    let lat = latent(&ds);
    let m = MockRater::new("m", k, lat.clone(), 4);
    let cs = cases(&ds);
    let s = run_irr(&m, &cs, &IrrConfig { resamples: 100, ..IrrConfig::default() }).unwrap();
    let mut mix = [0.0; 4];
    for l in lat.values() {
        mix[l.index()] += 1.0 / lat.len() as f64;
    }
    let expected = k.perfect_agreement_rate(&mix, 5);
    let got = s.perfect.ratio().unwrap();
    // 80 items: binomial sd is about 0.055.
    assert!((got - expected).abs() < 0.2, "{got} vs {expected}");
    assert!(!s.deterministic);
}

#[test]
fn failed_trials_exclude_items_and_are_counted() {
    let ds = small_sim(3);
    let mut lat = latent(&ds);
    lat.remove("S0001");
    let m = MockRater::new("m", NoiseKernel::identity(), lat, 1);
    let s = run_irr(&m, &cases(&ds), &IrrConfig { resamples: 50, ..IrrConfig::default() }).unwrap();
    assert_eq!(s.items_excluded, vec!["S0001".to_string()]);
    assert_eq!(s.failed_trials.values().sum::<u64>(), 5);
    assert_eq!(s.items_used, 79);
}

#[test]
fn fixed_baseline_never_emits_emergency() {
    let ds = small_sim(4);
    let (cmp, _) = run_baseline_comparison(&[&FixedRater::new(FixedConfig::default())], &cases(&ds));
    assert_eq!(cmp.rows[0].emergency.num, 0);
}

#[test]
fn healthy_cohort_rarely_alerts() {
    let none = Prevalence {
        hypertension: 0.0,
        heart_failure: 0.0,
        diabetes: 0.0,
        cad: 0.0,
        copd: 0.0,
        obesity: 0.0,
        ckd: 0.0,
        home_o2_given_copd: 0.0,
    };
    let ds = simulate(&SimConfig {
        patients: 60,
        readings: 60,
        prevalence: none,
        scenarios: ScenarioQuotas {
            hypertensive_surge: 0,
            exercise_bp_decline: 0,
            hf_weight_surge: 0,
            chronic_hypoxemia: 0,
            device_glitch: 0,
            stable_baseline: 60,
        },
        ..SimConfig::default()
    })
    .unwrap();
    let fixed = FixedRater::new(FixedConfig::default());
    let adaptive = AdaptiveRater::new(AdaptiveConfig::default());
    let (cmp, _) = run_baseline_comparison(&[&fixed, &adaptive], &cases(&ds));
    for r in &cmp.rows {
        assert!(r.actionable.ratio().unwrap() < 0.05, "{}: {}", r.rater_id, r.actionable);
    }
}

fn panel3(rows: &[[SeverityLevel; 3]]) -> (RatingMatrix, Assignments) {
    let mut m = RatingMatrix::new();
    let mut a = Assignments::new();
    for (i, row) in rows.iter().enumerate() {
        let id = format!("i{i:03}");
        for (j, l) in row.iter().enumerate() {
            m.set(&id, &format!("r{j}"), *l);
        }
        a.insert(id, vec!["r0".into(), "r1".into(), "r2".into()]);
    }
    (m, a)
}

fn run_of(id: &str, m: &RatingMatrix, f: impl Fn(&str) -> SeverityLevel) -> RaterRun {
    RaterRun {
        rater_id: id.into(),
        deterministic: true,
        verdicts: m.items().iter().map(|i| (i.clone(), f(i))).collect(),
        failures: BTreeMap::new(),
    }
}

#[test]
fn rater_equal_to_majority_is_exact() {
    let (m, _) = panel3(&[[Urgent, Urgent, Monitor], [NotAnIssue; 3], [Emergency, Monitor, NotAnIssue], [Monitor, Emergency, Monitor]]);
    let reference = majority_reference(&m);
    let run = run_of("oracle", &m, |i| reference.get(i).and_then(|l| l.label()).unwrap_or(NotAnIssue));
    let v = run_validation(&m, &[run], "oracle", 50, 1).unwrap();
    assert_eq!(v.excluded, vec!["i002".to_string()]);
    let r = v.rater("oracle").unwrap();
    assert_eq!(r.metrics.exact, crate::Proportion::new(3, 3));
    assert_eq!(r.binary.accuracy, crate::Proportion::new(3, 3));
}

#[test]
fn constructed_three_way_splits_are_excluded() {
    let mut rows = Vec::new();
    for i in 0..30 {
        rows.push(if i % 5 == 0 { [Emergency, Urgent, NotAnIssue] } else { [Monitor, Monitor, Urgent] });
    }
    let (m, _) = panel3(&rows);
    let v = run_validation(&m, &[run_of("a", &m, |_| Monitor)], "a", 50, 1).unwrap();
    assert_eq!(v.excluded.len(), 6);
    assert_eq!(v.panel.no_majority.num, 6);
    assert_eq!(v.evaluable, 24);
}

#[test]
fn missing_verdicts_are_named() {
    let (m, _) = panel3(&[[Urgent; 3], [Monitor; 3]]);
    let mut run = run_of("a", &m, |_| Urgent);
    run.verdicts.remove("i001");
    match run_validation(&m, &[run], "a", 10, 1) {
        Err(StudyError::MissingVerdicts { ids, .. }) => assert_eq!(ids, vec!["i001".to_string()]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn loo_identical_clinicians() {
    let rows: Vec<[SeverityLevel; 3]> = SeverityLevel::ALL.iter().cycle().take(12).map(|&l| [l; 3]).collect();
    let (m, a) = panel3(&rows);
    let s = run_loo(&m, &a, &run_of("a", &m, |_| Monitor)).unwrap();
    for r in &s.clinicians {
        assert_eq!(r.exact, crate::Proportion::new(12, 12));
        assert_eq!(r.n, r.assigned);
    }
}

#[test]
fn loo_undertriaging_reviewer_trails_the_rater() {
    let mut rows = Vec::new();
    for i in 0..40 {
        let truth = SeverityLevel::ALL[i % 4];
        let r0 = if truth == Emergency { Urgent } else { truth };
        rows.push([r0, truth, truth]);
    }
    let (m, a) = panel3(&rows);
    let truth: BTreeMap<String, SeverityLevel> =
        m.items().iter().enumerate().map(|(i, id)| (id.clone(), SeverityLevel::ALL[i % 4])).collect();
    let s = run_loo(&m, &a, &run_of("a", &m, |i| truth[i])).unwrap();
    let c0 = &s.clinicians[0];
    let a0 = &s.rater_rows[0];
    assert!(c0.emergency_sensitivity.ratio().unwrap() < a0.emergency_sensitivity.ratio().unwrap());
    assert_eq!(s.rater_pooled.n, s.clinicians.iter().map(|r| r.n).sum::<u64>());
}

#[test]
fn severe_overtriage_selection() {
    let (m, _) = panel3(&[[Monitor; 3], [Monitor; 3], [NotAnIssue; 3], [Urgent; 3]]);
    let reference = majority_reference(&m);
    let pred: BTreeMap<String, SeverityLevel> =
        [("i000", Emergency), ("i001", Urgent), ("i002", Urgent), ("i003", NotAnIssue)].map(|(k, v)| (k.to_string(), v)).into();
    let sel = select_severe_overtriage(&pred, &reference, 2);
    let ids: Vec<&str> = sel.iter().map(|c| c.sample_id.as_str()).collect();
    assert_eq!(ids, ["i000", "i002"]);
}

#[test]
fn adjudication_taxonomy() {
    use AdjudicationVerdict::*;
    assert_eq!(classify_adjudication(Emergency, Monitor, Emergency), Justified);
    assert_eq!(classify_adjudication(Emergency, NotAnIssue, Urgent), Debatable);
    assert_eq!(classify_adjudication(Urgent, NotAnIssue, NotAnIssue), TrueOvertriage);
    assert_eq!(classify_adjudication(Emergency, Monitor, NotAnIssue), TrueOvertriage);
    for a in SeverityLevel::ALL {
        for m in SeverityLevel::ALL {
            let verdicts: Vec<_> = SeverityLevel::ALL.iter().map(|&g| classify_adjudication(a, m, g)).collect();
            assert!(verdicts.windows(2).all(|w| w[0] <= w[1]), "{a} {m}");
        }
    }
}

fn anchor_records(reviewer: &str, grades: &[[SeverityLevel; 5]]) -> (Vec<RatingRecord>, BTreeMap<String, Vec<String>>) {
    let mut recs = Vec::new();
    let mut ids = Vec::new();
    for (i, g) in grades.iter().enumerate() {
        let id = format!("a{i:02}");
        for (k, l) in g.iter().enumerate() {
            recs.push(RatingRecord {
                item_id: id.clone(),
                rater_id: reviewer.into(),
                label: *l,
                duration_secs: 1.0,
                presentation_index: k as u8 + 1,
            });
        }
        ids.push(id);
    }
    (recs, BTreeMap::from([(reviewer.to_string(), ids)]))
}

#[test]
fn intra_rater_counts() {
    let mut grades = vec![[Monitor; 5]; 20];
    let (recs, anchors) = anchor_records("R", &grades);
    assert_eq!(intra_rater_consistency(&recs, &anchors, 5).rows[0].consistent, crate::Proportion::new(20, 20));
    grades[3][4] = Urgent;
    let (recs, anchors) = anchor_records("R", &grades);
    assert_eq!(intra_rater_consistency(&recs, &anchors, 5).rows[0].consistent, crate::Proportion::new(19, 20));
    let (mut recs, anchors) = anchor_records("R", &grades);
    recs.retain(|r| !(r.item_id == "a05" && r.presentation_index == 3));
    let s = intra_rater_consistency(&recs, &anchors, 5);
    assert_eq!(s.rows[0].consistent, crate::Proportion::new(18, 19));
    assert_eq!(s.rows[0].incomplete, vec!["a05".to_string()]);
}

#[test]
fn random_grading_matches_analytic_consistency() {
    let samples: Vec<String> = (0..4000).map(|i| format!("S{i:05}")).collect();
    let reviewers: Vec<String> = ["A", "B", "C"].map(String::from).to_vec();
    let params = AssignmentParams { anchors_per_reviewer: 4000, ..AssignmentParams::default() };
    let plan = build_assignment(&samples, &reviewers, &params).unwrap();
    let lat: BTreeMap<String, SeverityLevel> = samples.iter().map(|s| (s.clone(), Monitor)).collect();
    let cfg = PanelConfig {
        seed: 3,
        reviewers: reviewers
            .iter()
            .map(|id| ReviewerProfile { id: id.clone(), kernel: NoiseKernel::uniform(), consistency: 0.0, median_secs: 10.0 })
            .collect(),
    };
    let recs = simulate_panel(&plan, &lat, &cfg).unwrap();
    let s = intra_rater_consistency(&recs, &plan.anchors, 5);
    let rate = s.pooled.ratio().unwrap();
    assert!((rate - 0.25f64.powi(4)).abs() < 0.002, "{rate}");
}

#[test]
fn desk_study_is_consistent_and_reproducible() {
    let ds = small_sim(7);
    let a = run_desk_study(&ds, &quick()).unwrap();
    assert_eq!(a.report.audit(), Vec::<String>::new());
    let b = run_desk_study(&ds, &quick()).unwrap();
    assert_eq!(a.report.to_markdown(), b.report.to_markdown());
    assert_eq!(a.report.to_json().unwrap(), b.report.to_json().unwrap());
    let keys: Vec<String> = a.report.tables().into_iter().map(|t| t.key).collect();
    for k in ["3", "4", "5", "6", "7", "8", "9", "10", "11", "12", "A4", "13"] {
        assert!(keys.iter().any(|x| x == k), "table {k} missing from {keys:?}");
    }
    assert_eq!(a.panel.len(), 6 * (40 + 20 * 4));
}

#[test]
fn audit_catches_tampering() {
    let ds = small_sim(8);
    let mut r = run_desk_study(&ds, &quick()).unwrap().report;
    r.comparison.as_mut().unwrap().rows[0].monitor.num += 1;
    let v = r.validation.as_mut().unwrap();
    v.raters[0].metrics.exact.num += 1;
    let problems = r.audit();
    assert!(problems.iter().any(|p| p.contains("table 4")), "{problems:?}");
    assert!(problems.iter().any(|p| p.contains("exact")), "{problems:?}");
    assert!(matches!(r.verify(), Err(StudyError::Audit(_))));
}
