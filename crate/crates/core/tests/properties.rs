use std::collections::BTreeMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use proptest::prelude::*;

use triage_core::adaptive::{evaluate_series, AdaptiveConfig, AdaptiveRule, SigmaBand, SigmaFloors};
use triage_core::agreement::{
    binary_metrics, bootstrap, fleiss_kappa, fleiss_kappa_weighted, kappa_estimate, loo_reference, metrics4, quadratic_weighted_kappa,
    ConfusionMatrix4, KappaMethod, RatingMatrix,
};
use triage_core::fixed::{criteria1_classify, news2_score, FixedConfig};
use triage_core::rater::{MockRater, NoiseKernel};
use triage_core::vitals::{PatientFlags, Reading, Series, SeverityLevel, VitalHistory};

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 1, 8, 0, 0).unwrap()
}

fn level() -> impl Strategy<Value = SeverityLevel> {
    (0u8..4).prop_map(|c| SeverityLevel::ALL[c as usize])
}

fn matrix(max_items: usize, max_raters: usize) -> impl Strategy<Value = Vec<Vec<u8>>> {
    (1..=max_raters).prop_flat_map(move |r| prop::collection::vec(prop::collection::vec(0u8..4, r.max(2)), 1..=max_items))
}

fn confusion() -> impl Strategy<Value = ConfusionMatrix4> {
    prop::collection::vec((level(), level()), 1..120).prop_map(ConfusionMatrix4::from_pairs)
}

fn oximeter_flags() -> [PatientFlags; 2] {
    [PatientFlags::default(), PatientFlags { copd: true, ..Default::default() }]
}

proptest! {
    #[test]
    fn spo2_points_never_fall_as_saturation_drops(hi in 0u32..=100, drop in 0u32..=40, pulse in 30.0..150.0f64) {
        let cfg = FixedConfig::default();
        let lo = hi.saturating_sub(drop);
        for flags in oximeter_flags() {
            let a = Reading::oximeter("a", "p", t0(), hi as f64, pulse).unwrap();
            let b = Reading::oximeter("b", "p", t0(), lo as f64, pulse).unwrap();
            let sa = news2_score(&a, &flags, &cfg.news2).spo2.unwrap();
            let sb = news2_score(&b, &flags, &cfg.news2).spo2.unwrap();
            prop_assert!(sb >= sa, "{flags:?}: {hi}->{sa}, {lo}->{sb}");
        }
    }

    #[test]
    fn sbp_points_never_fall_away_from_normal(sbp in 0u32..=320, step in 0u32..60) {
        let cfg = FixedConfig::default();
        let score = |s: u32| {
            let r = Reading::blood_pressure("r", "p", t0(), s as f64, 80.0, 70.0).unwrap();
            news2_score(&r, &PatientFlags::default(), &cfg.news2).sbp.unwrap()
        };
        let away = if sbp <= 165 { sbp.saturating_sub(step) } else { sbp + step };
        prop_assert!(score(away) >= score(sbp));
    }

    #[test]
    fn history_never_removes_history_free_rules(
        sys in 60.0..230.0f64,
        dia in 30.0..140.0f64,
        past in prop::collection::vec((1i64..40 * 24, 60.0..230.0f64, 30.0..140.0f64), 0..12),
        weight in 40.0..160.0f64,
        past_weights in prop::collection::vec((1i64..40 * 24, 40.0..160.0f64), 0..12),
        hf in any::<bool>(),
    ) {
        let cfg = FixedConfig::default();
        let flags = PatientFlags { heart_failure: hf, ..Default::default() };
        let mut readings = Vec::new();
        for (i, (h, s, d)) in past.iter().enumerate() {
            readings.push(Reading::blood_pressure(format!("b{i}"), "p", t0() - Duration::hours(*h), *s, *d, 70.0).unwrap());
        }
        for (i, (h, w)) in past_weights.iter().enumerate() {
            readings.push(Reading::weight(format!("w{i}"), "p", t0() - Duration::hours(*h), *w).unwrap());
        }
        let history = VitalHistory::from_readings("p", &readings);
        let empty = VitalHistory::new("p");
        for r in [
            Reading::blood_pressure("c", "p", t0(), sys, dia, 70.0).unwrap(),
            Reading::weight("c", "p", t0(), weight).unwrap(),
        ] {
            let bare = criteria1_classify(&r, &flags, &empty, &cfg);
            let full = criteria1_classify(&r, &flags, &history, &cfg);
            for id in &bare.fired {
                prop_assert!(full.fired.contains(id), "{id} lost with history");
            }
            prop_assert!(full.severity >= bare.severity);
        }
    }

    #[test]
    fn deviation_band_is_affine_equivariant(
        values in prop::collection::vec(-50i32..50, 10..30),
        v in -400i32..400,
        scale in prop::sample::select(vec![0.5f64, 2.0, 4.0, 8.0]),
        shift in -100i32..100,
    ) {
        let cfg = AdaptiveConfig { sigma_floors: SigmaFloors::zero(), ..AdaptiveConfig::default() };
        let n = values.len() as f64;
        let mu = values.iter().map(|&x| x as f64).sum::<f64>() / n;
        let sd = (values.iter().map(|&x| (x as f64 - mu).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        prop_assume!(sd > 0.0);
        let ratio = (v as f64 - mu).abs() / sd;
        prop_assume!([2.0, 3.0, 4.0].iter().all(|k| (ratio - k).abs() > 1e-6));

        let band = |f: &dyn Fn(f64) -> f64| {
            let readings: Vec<Reading> = values
                .iter()
                .enumerate()
                .map(|(i, &x)| Reading::weight(format!("w{i}"), "p", t0() - Duration::hours(i as i64 + 1), f(x as f64)).unwrap())
                .collect();
            let h = VitalHistory::from_readings("p", &readings);
            let e = evaluate_series::<f64>(f(v as f64), &h, Series::Bodyweight, t0(), &cfg);
            e.outcomes.iter().find(|o| o.rule == AdaptiveRule::Deviation).map(|o| o.band)
        };
        let plain = band(&|x| x);
        let mapped = band(&|x| scale * x + shift as f64);
        prop_assert_eq!(plain, mapped);
    }

    #[test]
    fn fleiss_ignores_rater_order(rows in matrix(15, 6), seed in any::<u64>()) {
        let m = RatingMatrix::from_codes(&rows).unwrap();
        let k = m.raters().len();
        let mut order: Vec<usize> = (0..k).collect();
        let mut s = seed;
        for i in (1..k).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let p = m.permute_raters(&order);
        for (a, b) in [
            (fleiss_kappa::<f64>(&m).ok(), fleiss_kappa::<f64>(&p).ok()),
            (fleiss_kappa_weighted::<f64>(&m).ok(), fleiss_kappa_weighted::<f64>(&p).ok()),
        ] {
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
                (None, None) => {}
                other => prop_assert!(false, "{other:?}"),
            }
        }
    }

    #[test]
    fn qwk_is_symmetric_under_transpose(c in confusion()) {
        let a = quadratic_weighted_kappa::<f64>(&c).ok();
        let b = quadratic_weighted_kappa::<f64>(&c.transpose()).ok();
        match (a, b) {
            (Some(a), Some(b)) => {
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&a));
            }
            (None, None) => {}
            other => prop_assert!(false, "{other:?}"),
        }
    }

    #[test]
    fn metric_identities(c in confusion()) {
        let m = metrics4(&c);
        let b = binary_metrics(&c);
        prop_assert_eq!(m.exact.num + m.overtriage.num + m.undertriage.num, m.n);
        prop_assert!(m.exact.num <= m.within_one.num);
        prop_assert_eq!(b.tp + b.fp + b.tn + b.fn_, c.total());
        prop_assert_eq!(b.sensitivity.num + b.fnr.num, b.sensitivity.den);
        prop_assert_eq!(b.specificity.num + b.fpr.num, b.specificity.den);
        let recall_den: u64 = m.per_category.iter().map(|p| p.recall.den).sum();
        prop_assert_eq!(recall_den, c.total());
    }

    #[test]
    fn loo_reference_ignores_left_out_labels(
        rows in prop::collection::vec(prop::collection::vec(0u8..4, 3), 1..40),
        replacement in prop::collection::vec(0u8..4, 40),
        who in 0usize..3,
    ) {
        let raters = ["a", "b", "c"];
        let mut m = RatingMatrix::new();
        let mut assignments = BTreeMap::new();
        for (i, row) in rows.iter().enumerate() {
            let id = format!("i{i}");
            for (r, &code) in raters.iter().zip(row) {
                m.set(&id, r, SeverityLevel::ALL[code as usize]);
            }
            assignments.insert(id, raters.map(String::from).to_vec());
        }
        let before = loo_reference(&assignments, &m, raters[who]).unwrap();
        for (i, &code) in replacement.iter().take(rows.len()).enumerate() {
            m.set(&format!("i{i}"), raters[who], SeverityLevel::ALL[code as usize]);
        }
        let after = loo_reference(&assignments, &m, raters[who]).unwrap();
        prop_assert_eq!(before.entries, after.entries);
    }

    #[test]
    fn kappa_interval_brackets_point(rows in matrix(25, 5), seed in any::<u64>()) {
        let m = RatingMatrix::from_codes(&rows).unwrap();
        if let Ok(e) = kappa_estimate::<f64>(&m, KappaMethod::Fleiss, 200, seed) {
            prop_assert!(e.ci_low <= e.ci_high);
            let again = kappa_estimate::<f64>(&m, KappaMethod::Fleiss, 200, seed).unwrap();
            prop_assert_eq!(e, again);
        }
    }

    #[test]
    fn mock_labels_are_reproducible(seed in any::<u64>(), case in "[a-z0-9]{1,12}", run in 0u32..10, latent in level()) {
        let kernel = NoiseKernel::adjacent(0.8).unwrap();
        let map = BTreeMap::from([(case.clone(), latent)]);
        let a = MockRater::new("m", kernel, map.clone(), seed);
        let b = MockRater::new("m", kernel, map, seed);
        let la = a.label_for(&case, run).unwrap();
        prop_assert_eq!(Some(la), b.label_for(&case, run));
        prop_assert!(la.code().abs_diff(latent.code()) <= 1);
    }
}

#[test]
fn bootstrap_is_deterministic_across_thread_counts() {
    let data: Vec<f64> = (0..60).map(|i| ((i * 37) % 11) as f64).collect();
    let mean = |idx: &[usize]| Some(idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64);
    let a = bootstrap(data.len(), 500, 11, mean).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| bootstrap(data.len(), 500, 11, mean).unwrap());
    assert_eq!(a, b);
    assert!(a.low < a.high);
}

#[test]
fn band_severity_mapping() {
    assert_eq!(SigmaBand::classify(2.0f64, 1.0), SigmaBand::None);
    assert_eq!(SigmaBand::classify(2.0001f64, 1.0).severity(), SeverityLevel::Monitor);
    assert_eq!(SigmaBand::classify(3.5f64, 1.0).severity(), SeverityLevel::Urgent);
    assert_eq!(SigmaBand::classify(4.5f64, 1.0).severity(), SeverityLevel::Emergency);
}
