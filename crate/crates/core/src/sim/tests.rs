use super::*;
use crate::vitals::VitalHistory;

fn small(seed: u64) -> SimConfig {
    SimConfig {
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
    }
}

const NO_SCENARIOS: ScenarioQuotas = ScenarioQuotas {
    hypertensive_surge: 0,
    exercise_bp_decline: 0,
    hf_weight_surge: 0,
    chronic_hypoxemia: 0,
    device_glitch: 0,
    stable_baseline: 0,
};

fn baselines(weight: f64) -> VitalBaselines {
    VitalBaselines {
        systolic: Baseline { mean: 130.0, sd: 6.0 },
        diastolic: Baseline { mean: 80.0, sd: 4.0 },
        pulse: Baseline { mean: 72.0, sd: 4.0 },
        spo2: Baseline { mean: 95.0, sd: 1.0 },
        weight: Baseline { mean: weight, sd: 0.4 },
    }
}

fn profile(weight: f64) -> PatientProfile {
    PatientProfile {
        patient_id: "P1".into(),
        age: 70,
        sex: Sex::Female,
        flags: PatientFlags::default(),
        baseline: baselines(weight),
        enrollment: Utc.with_ymd_and_hms(2024, 6, 1, 0, 0, 0).unwrap(),
    }
}

fn series(device: DeviceKind, seed: u64) -> Vec<Reading> {
    let cfg = SimConfig { adherence: 1.0, ..SimConfig::default() };
    let mut rng = named_rng(seed, "test-series", 0);
    generate_series(&cfg, &profile(67.5), device, "T", cfg.end - Duration::hours(3), &mut rng)
}

#[test]
fn cohort_is_deterministic() {
    let a = serde_json::to_string(&generate_cohort(&small(3)).unwrap()).unwrap();
    let b = serde_json::to_string(&generate_cohort(&small(3)).unwrap()).unwrap();
    assert_eq!(a, b);
    let c = serde_json::to_string(&generate_cohort(&small(4)).unwrap()).unwrap();
    assert_ne!(a, c);
}

#[test]
fn zero_patients_gives_empty_cohort() {
    let cfg = SimConfig { patients: 0, readings: 0, scenarios: NO_SCENARIOS, ..SimConfig::default() };
    assert!(generate_cohort(&cfg).unwrap().is_empty());
}

#[test]
fn large_cohort_tracks_marginals() {
    let cfg = SimConfig { patients: 10_000, ..SimConfig::default() };
    let cohort = generate_cohort(&cfg).unwrap();
    let frac = |f: fn(&PatientProfile) -> bool| cohort.iter().filter(|p| f(p)).count() as f64 / 10_000.0;
    assert!((frac(|p| p.flags.hypertension) - 0.451).abs() < 0.02);
    assert!((frac(|p| p.flags.copd) - 0.242).abs() < 0.02);
    assert!((frac(|p| p.sex == Sex::Female) - 0.602).abs() < 0.02);
    assert!(cohort.iter().all(|p| (32..=91).contains(&p.age)));
    let mean_age = cohort.iter().map(|p| p.age as f64).sum::<f64>() / 10_000.0;
    assert!((mean_age - 70.3).abs() < 0.5, "{mean_age}");
}

#[test]
fn device_mix_is_allocated_exactly() {
    assert_eq!(DeviceMix::default().allocate(500), [228, 195, 77]);
    let cfg = SimConfig { patients: 10_000, readings: 10_000, adherence: 0.0, scenarios: NO_SCENARIOS, ..SimConfig::default() };
    let cohort = generate_cohort(&cfg).unwrap();
    let (_, samples) = generate_readings(&cohort, &cfg).unwrap();
    let bp = samples.iter().filter(|s| s.device == DeviceKind::BloodPressureCuff).count();
    assert!((bp as f64 / 10_000.0 - 0.456).abs() < 0.02);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut c = SimConfig::default();
    c.device_mix.weight_scale = 0.3;
    assert!(matches!(generate_cohort(&c), Err(SimError::Config(_))));
    let c = SimConfig { patients: 100, ..SimConfig::default() };
    assert!(c.validate().is_err());
    let mut c = SimConfig::default();
    c.prevalence.copd = 1.5;
    assert!(c.validate().is_err());
}

#[test]
fn config_round_trips_through_toml() {
    let c = SimConfig::default();
    assert_eq!(SimConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    let partial = SimConfig::from_toml_str("seed = 9\npatients = 400\n").unwrap();
    assert_eq!(partial.seed, 9);
    assert_eq!(partial.readings, 500);
}

#[test]
fn thirty_one_daily_weights_make_a_usable_history() {
    let cfg = SimConfig { adherence: 1.0, span_days: 30, ..SimConfig::default() };
    let mut rng = named_rng(1, "w", 0);
    let t = cfg.end - Duration::hours(1);
    let s = generate_series(&cfg, &profile(70.0), DeviceKind::WeightScale, "W", t, &mut rng);
    assert_eq!(s.len(), 31);
    let h = VitalHistory::from_readings("P1", &s).before(t);
    assert_eq!(h.window(crate::vitals::Series::Bodyweight, t, 30).len(), 30);
}

#[test]
fn every_scenario_carries_its_signature() {
    for seed in 0..40 {
        for kind in ScenarioKind::ALL {
            let device = kind.device().unwrap_or(DeviceKind::BloodPressureCuff);
            let s = series(device, seed);
            let out = inject_scenario(&s, &ScenarioSpec::new(kind), &baselines(67.5), seed).unwrap();
            assert!(scenario_signature_holds(&out, kind, &baselines(67.5)), "{kind} seed {seed}");
            assert!(out.windows(2).all(|w| w[0].timestamp < w[1].timestamp), "{kind} order");
            assert_eq!(out.last().unwrap().reading_id, "T");
        }
    }
}

#[test]
fn hf_weight_surge_lands_in_the_expected_window() {
    for seed in 0..50 {
        let s = series(DeviceKind::WeightScale, seed);
        let out = inject_scenario(&s, &ScenarioSpec::new(ScenarioKind::HfWeightSurge), &baselines(67.5), seed).unwrap();
        let w = out.last().unwrap().value(Measure::Bodyweight).unwrap();
        assert!((72.05 - 1e-9..=72.7 + 1e-9).contains(&w), "{w}");
    }
}

#[test]
fn glitch_is_at_least_ten_times_baseline() {
    let b = baselines(70.0);
    let s = series(DeviceKind::WeightScale, 1);
    let out = inject_scenario(&s, &ScenarioSpec::new(ScenarioKind::DeviceGlitch), &b, 1).unwrap();
    assert!(out.last().unwrap().value(Measure::Bodyweight).unwrap() >= 700.0);
}

#[test]
fn short_series_are_rejected() {
    let s = series(DeviceKind::BloodPressureCuff, 2);
    let tail = &s[s.len() - 1..];
    let b = baselines(70.0);
    assert!(matches!(
        inject_scenario(tail, &ScenarioSpec::new(ScenarioKind::HypertensiveSurge), &b, 1),
        Err(SimError::SeriesTooShort { .. })
    ));
    let ox = series(DeviceKind::PulseOximeter, 2);
    assert!(matches!(
        inject_scenario(&ox[ox.len() - 5..], &ScenarioSpec::new(ScenarioKind::ChronicHypoxemia), &b, 1),
        Err(SimError::SeriesTooShort { .. })
    ));
    assert!(inject_scenario(&[], &ScenarioSpec::new(ScenarioKind::StableBaseline), &b, 1).is_err());
}

#[test]
fn simulated_dataset_meets_quotas_and_signatures() {
    let cfg = SimConfig::default();
    let ds = simulate(&cfg).unwrap();
    assert_eq!(ds.samples.len(), 500);
    for kind in ScenarioKind::ALL {
        let n = ds.samples.iter().filter(|s| s.scenario == Some(kind)).count();
        assert_eq!(n, cfg.scenarios.get(kind), "{kind}");
    }
    for s in ds.samples.iter().filter(|s| s.scenario.is_some()) {
        let series: Vec<Reading> = ds
            .readings
            .iter()
            .filter(|r| r.patient_id == s.patient_id && r.device == s.device && r.timestamp <= s.timestamp)
            .cloned()
            .collect();
        let p = ds.profile(&s.patient_id).unwrap();
        assert!(scenario_signature_holds(&series, s.scenario.unwrap(), &p.baseline), "{}", s.sample_id);
    }
    let chronic = ds.samples.iter().filter(|s| s.chronic_abnormal).count();
    assert!(chronic as f64 / 500.0 >= 0.30, "{chronic}");
    let ids: std::collections::BTreeSet<_> = ds.readings.iter().map(|r| &r.reading_id).collect();
    assert_eq!(ids.len(), ds.readings.len());
}

#[test]
fn dataset_round_trips_through_a_directory() {
    let ds = simulate(&small(5)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    ds.write_dir(dir.path()).unwrap();
    assert_eq!(SimDataset::read_dir(dir.path()).unwrap(), ds);
    let again = simulate(&small(5)).unwrap();
    let dir2 = tempfile::tempdir().unwrap();
    again.write_dir(dir2.path()).unwrap();
    for f in ["readings.jsonl", "samples.json", "cohort.json", "context.json"] {
        assert_eq!(std::fs::read(dir.path().join(f)).unwrap(), std::fs::read(dir2.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn as_of_respects_time() {
    let ds = simulate(&small(6)).unwrap();
    let store = &ds.context;
    for p in &ds.cohort {
        let early = store.as_of(&p.patient_id, p.enrollment - Duration::seconds(1)).unwrap();
        assert!(early.is_empty());
        assert_eq!(early.last_contact, None);
        let mut prev = early;
        for d in [0, 20, 60, 200, 400, 600] {
            let t = p.enrollment + Duration::days(d);
            let snap = store.as_of(&p.patient_id, t).unwrap();
            assert!(snap.latest_datum().is_none_or(|x| x <= t));
            assert!(prev.encounters.iter().all(|e| snap.encounters.contains(e)));
            assert!(prev.notes.iter().all(|e| snap.notes.contains(e)));
            assert!(snap.len() >= prev.len());
            prev = snap;
        }
    }
    assert!(matches!(store.as_of("nobody", ds.config.end), Err(ContextError::UnknownPatient(_))));
}

#[test]
fn encounter_visibility_follows_discharge() {
    let ds = simulate(&small(7)).unwrap();
    let (pid, e) = ds
        .context
        .patients
        .iter()
        .find_map(|(pid, c)| c.encounters.first().map(|e| (pid.clone(), e.clone())))
        .expect("some patient has an encounter");
    let before = ds.context.as_of(&pid, e.discharged - Duration::days(1)).unwrap();
    let after = ds.context.as_of(&pid, e.discharged + Duration::days(1)).unwrap();
    assert!(!before.encounters.contains(&e));
    assert!(after.encounters.contains(&e));
}

#[test]
fn snapshot_flags_mirror_profile() {
    let ds = simulate(&small(8)).unwrap();
    for p in &ds.cohort {
        let snap = ds.context.as_of(&p.patient_id, ds.config.end).unwrap();
        assert_eq!(snap.flags(), p.flags);
    }
}
