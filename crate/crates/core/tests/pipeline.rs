use triage_core::agreement::ConfusionMatrix4;
use triage_core::sim::{simulate, ScenarioQuotas, SimConfig};
use triage_core::study::{run_desk_study, RaterValidation, StudyConfig};
use triage_core::Proportion;

fn fixture(name: &str) -> ConfusionMatrix4 {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    ConfusionMatrix4::parse_grid(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn fixed_fixture_through_validation() {
    let v = RaterValidation::from_confusion("fixed_threshold", &fixture("a1.txt"), 500, 3);
    assert_eq!(v.binary.ppv, Proportion::new(102, 250));
    assert_eq!(v.metrics.exact, Proportion::new(250, 467));
    let q = v.qwk.unwrap();
    assert!((q.point - 0.573).abs() < 0.01);
    assert!(q.ci_low <= q.point && q.point <= q.ci_high);
}

#[test]
fn adaptive_fixture_through_validation() {
    let v = RaterValidation::from_confusion("adaptive", &fixture("a2.txt"), 500, 3);
    assert_eq!(v.binary.npv, Proportion::new(341, 426));
    assert_eq!(v.metrics.exact, Proportion::new(234, 467));
    assert!((v.qwk.unwrap().point - 0.235).abs() < 0.02);
}

fn small() -> SimConfig {
    SimConfig {
        seed: 17,
        patients: 48,
        readings: 60,
        scenarios: ScenarioQuotas {
            hypertensive_surge: 2,
            exercise_bp_decline: 1,
            hf_weight_surge: 2,
            chronic_hypoxemia: 2,
            device_glitch: 1,
            stable_baseline: 4,
        },
        ..SimConfig::default()
    }
}

fn quick() -> StudyConfig {
    let mut cfg = StudyConfig { irr_items: 20, resamples: 100, ..StudyConfig::default() }.with_seed(17);
    cfg.irr.resamples = 100;
    cfg.assignment.anchors_per_reviewer = 4;
    cfg
}

#[test]
fn report_is_reproducible_and_written() {
    let ds = simulate(&small()).unwrap();
    let a = run_desk_study(&ds, &quick()).unwrap();
    let b = run_desk_study(&ds, &quick()).unwrap();
    assert_eq!(a.report.to_json().unwrap(), b.report.to_json().unwrap());
    a.report.verify().unwrap();

    let dir = tempfile::tempdir().unwrap();
    a.report.write_dir(dir.path()).unwrap();
    let md = std::fs::read_to_string(dir.path().join("report.md")).unwrap();
    assert!(md.contains("audit"), "{md}");
    assert!(dir.path().join("tables/table_11.json").exists());

    let other = run_desk_study(&ds, &quick().with_seed(18)).unwrap();
    assert_ne!(a.report.to_json().unwrap(), other.report.to_json().unwrap());
}
