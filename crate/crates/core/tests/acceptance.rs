//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use chrono::{DateTime, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use triage_core::adaptive::{self, adaptive_classify, AdaptiveConfig};
use triage_core::agreement::{
    binary_metrics, fleiss_kappa, fleiss_kappa_weighted, loo_reference, majority_reference, metrics4, quadratic_weighted_kappa,
    ConfusionMatrix4, RatingMatrix, RefLabel,
};
use triage_core::fixed::{self, fixed_classify, FixedConfig};
use triage_core::rater::build_cases;
use triage_core::sim::{simulate, SimConfig};
use triage_core::study::{
    build_assignment, classify_adjudication, default_reviewers, run_desk_study, run_loo, select_severe_overtriage, AdjudicationVerdict,
    AssignmentParams, RaterRun, StudyConfig,
};
use triage_core::vitals::{PatientFlags, Reading, SeverityLevel, VitalHistory};
use triage_core::Proportion;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let held: bool = $cond;
        if !held {
            return Err(format!($($msg)+));
        }
    };
}

const LEVELS: [SeverityLevel; 4] = SeverityLevel::ALL;

fn fixture(name: &str) -> ConfusionMatrix4 {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    ConfusionMatrix4::parse_grid(&text).expect("fixture grid")
}

struct Expected {
    qwk: f64,
    tol: f64,
    sensitivity: (u64, u64),
    specificity: (u64, u64),
    ppv: (u64, u64),
    npv: (u64, u64),
    accuracy: (u64, u64),
}

fn check_fixture(name: &str, e: &Expected, budget: Option<Duration>) -> Outcome {
    let c = fixture(name);
    let start = Instant::now();
    let b = binary_metrics(&c);
    let exact = metrics4(&c).exact;
    let qwk: f64 = quadratic_weighted_kappa(&c).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure!(c.total() == 467, "n = {}", c.total());
    for (label, got, want) in [
        ("sensitivity", b.sensitivity, e.sensitivity),
        ("specificity", b.specificity, e.specificity),
        ("ppv", b.ppv, e.ppv),
        ("npv", b.npv, e.npv),
        ("four-level accuracy", exact, e.accuracy),
    ] {
        ensure!(got == Proportion::new(want.0, want.1), "{label} {}/{} != {}/{}", got.num, got.den, want.0, want.1);
    }
    ensure!((qwk - e.qwk).abs() <= e.tol, "qwk {qwk:.4} outside {}±{}", e.qwk, e.tol);
    if let Some(b) = budget {
        ensure!(took < b, "took {took:?}");
    }
    Ok(format!("qwk {qwk:.3}, sens {}/{}, spec {}/{}", b.sensitivity.num, b.sensitivity.den, b.specificity.num, b.specificity.den))
}

fn criterion_1() -> Outcome {
    check_fixture(
        "a1.txt",
        &Expected {
            qwk: 0.573,
            tol: 0.01,
            sensitivity: (102, 104),
            specificity: (215, 363),
            ppv: (102, 250),
            npv: (215, 217),
            accuracy: (250, 467),
        },
        Some(Duration::from_secs(1)),
    )
}

fn criterion_2() -> Outcome {
    check_fixture(
        "a2.txt",
        &Expected {
            qwk: 0.235,
            tol: 0.02,
            sensitivity: (19, 104),
            specificity: (341, 363),
            ppv: (19, 41),
            npv: (341, 426),
            accuracy: (234, 467),
        },
        None,
    )
}

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 6, 1, 12, 0, 0).unwrap()
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let cfg = FixedConfig::default();
    let empty = VitalHistory::new("p");
    let variants = [
        ("scale1", PatientFlags::default()),
        ("scale2-air", PatientFlags { copd: true, ..Default::default() }),
        ("scale2-o2", PatientFlags { copd: true, home_o2: true, ..Default::default() }),
    ];
    let mut checked = 0u64;
    let mut counts = [0u64; 4];
    for (name, flags) in &variants {
        for pulse in 0..=300 {
            for spo2 in 0..=100 {
                let r = Reading::oximeter("r", "p", t0(), spo2 as f64, pulse as f64).unwrap();
                let s = fixed_classify(&r, flags, &empty, &cfg).severity;
                ensure!(s != SeverityLevel::Emergency, "{name}: spo2 {spo2} pulse {pulse} -> EMERGENCY");
                counts[s.index()] += 1;
                checked += 1;
            }
            for sbp in 0..=300 {
                for dia in [40.0, 80.0, 130.0] {
                    let r = Reading::blood_pressure("r", "p", t0(), sbp as f64, dia, pulse as f64).unwrap();
                    let s = fixed_classify(&r, flags, &empty, &cfg).severity;
                    ensure!(s != SeverityLevel::Emergency, "{name}: sbp {sbp}/{dia} pulse {pulse} -> EMERGENCY");
                    counts[s.index()] += 1;
                    checked += 1;
                }
            }
        }
    }
    ensure!(counts[SeverityLevel::Urgent.index()] > 0, "sweep never reached URGENT");
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(10), "took {took:?}");
    Ok(format!("{checked} readings, none EMERGENCY"))
}

// Pair-enumeration form of the weighted multi-rater κ: observed agreement is
// the mean weight over ordered pairs of distinct ratings within an item.
fn oracle_fleiss(rows: &[Vec<u8>], w: impl Fn(u8, u8) -> f64) -> Option<f64> {
    let n = rows[0].len();
    let mut po = 0.0;
    let mut freq = [0.0f64; 4];
    for row in rows {
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    s += w(row[a], row[b]);
                }
            }
            freq[row[a] as usize] += 1.0;
        }
        po += s / (n * (n - 1)) as f64;
    }
    po /= rows.len() as f64;
    let total = (rows.len() * n) as f64;
    let mut pe = 0.0;
    for j in 0..4u8 {
        for k in 0..4u8 {
            pe += w(j, k) * freq[j as usize] / total * freq[k as usize] / total;
        }
    }
    ((1.0 - pe).abs() > 1e-9).then(|| (po - pe) / (1.0 - pe))
}

// Cohen's weighted κ with chance agreement as the mean weight over every
// (prediction, reference) cross pairing.
fn oracle_qwk(pairs: &[(u8, u8)]) -> Option<f64> {
    let w = |a: u8, b: u8| 1.0 - ((a as f64 - b as f64).powi(2)) / 9.0;
    let n = pairs.len() as f64;
    let po = pairs.iter().map(|&(p, r)| w(p, r)).sum::<f64>() / n;
    let mut pe = 0.0;
    for &(p, _) in pairs {
        for &(_, r) in pairs {
            pe += w(p, r);
        }
    }
    pe /= n * n;
    ((1.0 - pe).abs() > 1e-9).then(|| (po - pe) / (1.0 - pe))
}

fn close(got: Result<f64, impl std::fmt::Display>, want: Option<f64>, what: &str) -> Result<(), String> {
    match (got, want) {
        (Ok(g), Some(w)) if (g - w).abs() <= 1e-12 => Ok(()),
        (Err(_), None) => Ok(()),
        (Ok(g), Some(w)) => Err(format!("{what}: {g} vs oracle {w}")),
        (Ok(g), None) => Err(format!("{what}: {g} but oracle undefined")),
        (Err(e), Some(w)) => Err(format!("{what}: error {e} but oracle {w}")),
    }
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let identity = |a: u8, b: u8| if a == b { 1.0 } else { 0.0 };
    let linear = |a: u8, b: u8| 1.0 - (a as f64 - b as f64).abs() / 3.0;
    let mut defined = 0;
    for trial in 0..1000 {
        let items = rng.random_range(1..=12);
        let raters = rng.random_range(2..=6);
        let spread = rng.random_range(1..=4u8);
        let rows: Vec<Vec<u8>> = (0..items).map(|_| (0..raters).map(|_| rng.random_range(0..spread)).collect()).collect();
        let m = RatingMatrix::from_codes(&rows).map_err(|e| e.to_string())?;
        let f = oracle_fleiss(&rows, identity);
        defined += f.is_some() as usize;
        close(fleiss_kappa::<f64>(&m), f, &format!("fleiss #{trial}"))?;
        close(fleiss_kappa_weighted::<f64>(&m), oracle_fleiss(&rows, linear), &format!("weighted #{trial}"))?;

        let pairs: Vec<(u8, u8)> = rows.iter().map(|r| (r[0], r[1])).collect();
        let c = ConfusionMatrix4::from_pairs(pairs.iter().map(|&(p, r)| (LEVELS[p as usize], LEVELS[r as usize])));
        close(quadratic_weighted_kappa::<f64>(&c), oracle_qwk(&pairs), &format!("qwk #{trial}"))?;

        // Perfect agreement with at least two categories in use.
        let base: Vec<u8> = (0..items.max(2)).map(|i| (i % 4) as u8).collect();
        let same: Vec<Vec<u8>> = base.iter().map(|&l| vec![l; raters]).collect();
        let m = RatingMatrix::from_codes(&same).map_err(|e| e.to_string())?;
        ensure!(fleiss_kappa::<f64>(&m).ok() == Some(1.0), "perfect fleiss #{trial}");
        ensure!(fleiss_kappa_weighted::<f64>(&m).ok() == Some(1.0), "perfect weighted #{trial}");
        let c = ConfusionMatrix4::from_pairs(base.iter().map(|&l| (LEVELS[l as usize], LEVELS[l as usize])));
        ensure!(quadratic_weighted_kappa::<f64>(&c).ok() == Some(1.0), "perfect qwk #{trial}");
    }
    Ok(format!("1000 matrices, {defined} with defined κ, perfect agreement = 1.0"))
}

// Independent rolling-baseline classifier over plain (time, series, value)
// triples.
struct Obs {
    t: DateTime<Utc>,
    series: &'static str,
    value: f64,
}

fn series_of(measure: &str) -> &'static str {
    match measure {
        "systolic" => "systolic",
        "diastolic" => "diastolic",
        "pulse_rate" | "pulse" => "pulse",
        "spo2" => "spo2",
        "bodyweight" => "bodyweight",
        other => panic!("unknown measure {other}"),
    }
}

fn floor_for(series: &str) -> f64 {
    match series {
        "spo2" => 0.5,
        "bodyweight" => 0.1,
        _ => 1.0,
    }
}

fn band(dev: f64, sigma: f64) -> u8 {
    [4u8, 3, 2].into_iter().find(|&k| dev > k as f64 * sigma).unwrap_or(0)
}

fn mean_sd(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len();
    let mut sum = 0.0;
    for &x in xs {
        sum += x;
    }
    let mu = sum / n as f64;
    if n < 2 {
        return (mu, None);
    }
    let mut ss = 0.0;
    for &x in xs {
        ss += (x - mu) * (x - mu);
    }
    (mu, Some((ss / (n - 1) as f64).sqrt()))
}

fn oracle_adaptive(values: &[(&str, f64)], t: DateTime<Utc>, obs: &[Obs]) -> SeverityLevel {
    let start = t - chrono::Duration::days(30);
    let mut worst = 0u8;
    for &(measure, v) in values {
        let series = series_of(measure);
        let mut window: Vec<(DateTime<Utc>, usize, f64)> =
            obs.iter().enumerate().filter(|(_, o)| o.series == series && o.t >= start && o.t < t).map(|(i, o)| (o.t, i, o.value)).collect();
        window.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        let xs: Vec<f64> = window.iter().map(|w| w.2).collect();
        if xs.len() < 10 {
            continue;
        }
        let floor = floor_for(series);
        let (mu, sd) = mean_sd(&xs);
        let sigma = sd.expect("10 points").max(floor);
        let mut level = band((v - mu).abs(), sigma);

        let deltas: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        if deltas.len() >= 2 {
            let dsd = mean_sd(&deltas).1.expect("2 deltas").max(floor);
            level = level.max(band((v - xs[xs.len() - 1]).abs(), dsd));
        }

        let mut recent = xs.clone();
        recent.push(v);
        for k in [4u8, 3, 2] {
            let run = recent.iter().rev().take_while(|&&x| (x - mu).abs() > k as f64 * sigma).count();
            if run >= 3 {
                level = level.max(k);
                break;
            }
        }
        worst = worst.max(level);
    }
    [SeverityLevel::NotAnIssue, SeverityLevel::NotAnIssue, SeverityLevel::Monitor, SeverityLevel::Urgent, SeverityLevel::Emergency]
        [worst as usize]
}

fn random_reading(rng: &mut ChaCha8Rng, id: String, t: DateTime<Utc>, shift: f64) -> Reading {
    let mut g = |mean: f64, sd: f64| {
        let z: f64 = (0..12).map(|_| rng.random::<f64>()).sum::<f64>() - 6.0;
        (mean + shift * sd + sd * z).round()
    };
    match id.as_bytes()[0] % 3 {
        0 => Reading::blood_pressure(&id, "p", t, g(135.0, 8.0), g(82.0, 5.0), g(74.0, 6.0)).unwrap(),
        1 => Reading::oximeter(&id, "p", t, g(95.0, 1.2).min(100.0), g(76.0, 6.0)).unwrap(),
        _ => Reading::weight(&id, "p", t, (80.0 + shift * 0.8 + g(0.0, 4.0) / 10.0).max(1.0)).unwrap(),
    }
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = AdaptiveConfig::default();
    let mut by_level = [0u64; 4];
    for trial in 0..10_000u64 {
        let t = t0() + chrono::Duration::minutes(rng.random_range(0..1440));
        let n = rng.random_range(0..45);
        let mut readings = Vec::with_capacity(n);
        for i in 0..n {
            // Whole-day offsets put some points exactly on the window start.
            let ago = if rng.random_bool(0.2) {
                chrono::Duration::days(rng.random_range(0..=31))
            } else {
                chrono::Duration::minutes(rng.random_range(-600..=40 * 1440))
            };
            let id = format!("{}h{trial}-{i}", ["a", "b", "c"][rng.random_range(0..3)]);
            let shift = if rng.random_bool(0.05) { rng.random_range(-6.0..6.0) } else { 0.0 };
            readings.push(random_reading(&mut rng, id, t - ago, shift));
        }
        let shift = if rng.random_bool(0.5) { rng.random_range(-8.0..8.0) } else { 0.0 };
        let id = format!("{}cur{trial}", ["a", "b", "c"][rng.random_range(0..3)]);
        let current = random_reading(&mut rng, id, t, shift);

        let history = VitalHistory::from_readings("p", &readings);
        let got = adaptive_classify::<f64>(&current, &history, &cfg).severity;

        let mut sorted: Vec<&Reading> = readings.iter().collect();
        sorted.sort_by_key(|r| r.timestamp);
        let obs: Vec<Obs> = sorted
            .iter()
            .flat_map(|r| r.values().map(|(m, v)| Obs { t: r.timestamp, series: series_of(m.as_str()), value: v }).collect::<Vec<_>>())
            .collect();
        let values: Vec<(&str, f64)> = current.values().map(|(m, v)| (m.as_str(), v)).collect();
        let want = oracle_adaptive(&values, current.timestamp, &obs);
        ensure!(got == want, "history #{trial}: classifier {got:?}, oracle {want:?}");
        by_level[got.index()] += 1;
    }
    ensure!(by_level.iter().all(|&c| c > 0), "levels not all exercised: {by_level:?}");
    Ok(format!("10000 histories agree; NI/M/U/E = {by_level:?}"))
}

fn sample_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i:04}")).collect()
}

fn criterion_6() -> Outcome {
    let reviewers = default_reviewers();
    let plan = build_assignment(&sample_ids(500), &reviewers, &AssignmentParams::default()).map_err(|e| e.to_string())?;
    for r in &reviewers {
        ensure!(plan.unique_count(r) == 250, "{r}: {} unique", plan.unique_count(r));
        ensure!(plan.queue_len(r) == 330, "{r}: queue {}", plan.queue_len(r));
    }
    for (i, a) in reviewers.iter().enumerate() {
        for b in &reviewers[i + 1..] {
            let n = plan.co_reviews(a, b);
            ensure!(n == 100, "{a}/{b}: {n} co-reviews");
        }
    }
    ensure!(plan.assignments.values().all(|v| v.len() == 3), "sample without 3 reviewers");
    ensure!(plan.audit().is_empty(), "audit: {:?}", plan.audit());
    Ok("6 reviewers x 250 unique / 330 graded, 100 per pair".into())
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let reviewers = default_reviewers();
    let plan = build_assignment(&sample_ids(500), &reviewers, &AssignmentParams::default()).map_err(|e| e.to_string())?;
    let mut m = RatingMatrix::new();
    for (item, rs) in &plan.assignments {
        for r in rs {
            m.set(item, r, LEVELS[rng.random_range(0..4)]);
        }
    }
    for r in &reviewers {
        let before = loo_reference(&plan.assignments, &m, r).map_err(|e| e.to_string())?;
        let mut mutated = m.clone();
        for (item, rs) in &plan.assignments {
            if rs.contains(r) {
                mutated.set(item, r, LEVELS[rng.random_range(0..4)]);
            }
        }
        let after = loo_reference(&plan.assignments, &mutated, r).map_err(|e| e.to_string())?;
        ensure!(before.entries == after.entries, "{r}: reference moved with its own labels");

        let expected: BTreeSet<&String> = plan
            .assignments
            .iter()
            .filter(|(_, rs)| rs.contains(r))
            .filter(|(item, rs)| {
                let partners: Vec<_> = rs.iter().filter(|x| *x != r).map(|x| m.label(item, x)).collect();
                partners[0] != partners[1]
            })
            .map(|(item, _)| item)
            .collect();
        let excluded: BTreeSet<&String> = before.entries.iter().filter(|(_, l)| **l == RefLabel::Excluded).map(|(i, _)| i).collect();
        ensure!(excluded == expected, "{r}: exclusions differ from partner disagreements");
    }
    let run = RaterRun {
        rater_id: "agent".into(),
        deterministic: true,
        verdicts: m.items().iter().map(|i| (i.clone(), LEVELS[rng.random_range(0..4)])).collect(),
        failures: BTreeMap::new(),
    };
    let s = run_loo(&m, &plan.assignments, &run).map_err(|e| e.to_string())?;
    let sum: u64 = s.clinicians.iter().map(|c| c.n).sum();
    ensure!(s.clinician_pooled.n == sum, "clinician pooled {} != {sum}", s.clinician_pooled.n);
    let sum: u64 = s.rater_rows.iter().map(|c| c.n).sum();
    ensure!(s.rater_pooled.n == sum, "rater pooled {} != {sum}", s.rater_pooled.n);
    Ok(format!("mutation-invariant for 6 reviewers, pooled N = {sum}"))
}

fn criterion_8() -> Outcome {
    use AdjudicationVerdict::*;
    for &agent in &LEVELS {
        for &majority in &LEVELS {
            for &regrade in &LEVELS {
                let want = if regrade >= agent {
                    Justified
                } else if regrade > majority {
                    Debatable
                } else {
                    TrueOvertriage
                };
                let got = classify_adjudication(agent, majority, regrade);
                ensure!(got == want, "agent {agent:?} majority {majority:?} regrade {regrade:?}: {got:?}");
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut m = RatingMatrix::new();
    let mut pred = BTreeMap::new();
    for item in sample_ids(400) {
        for r in ["a", "b", "c"] {
            m.set(&item, r, LEVELS[rng.random_range(0..4)]);
        }
        pred.insert(item, LEVELS[rng.random_range(0..4)]);
    }
    let reference = majority_reference(&m);
    let selected = select_severe_overtriage(&pred, &reference, 2);
    let want: BTreeSet<String> = pred
        .iter()
        .filter(|(i, p)| matches!(reference.get(i), Some(RefLabel::Label(r)) if p.code() >= r.code() + 2))
        .map(|(i, _)| i.clone())
        .collect();
    let got: BTreeSet<String> = selected.iter().map(|c| c.sample_id.clone()).collect();
    ensure!(got == want, "selected {} cases, expected {}", got.len(), want.len());
    ensure!(selected.windows(2).all(|w| w[0].gap >= w[1].gap), "not sorted by gap");
    Ok(format!("64 verdict cells; {} severe cases selected", got.len()))
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let ds = simulate(&SimConfig::default()).map_err(|e| e.to_string())?;
    ensure!(ds.cohort.len() == 340 && ds.samples.len() == 500, "{} patients, {} samples", ds.cohort.len(), ds.samples.len());
    let study = run_desk_study(&ds, &StudyConfig::default()).map_err(|e| e.to_string())?;
    let report = &study.report;
    let audit = report.audit();
    ensure!(audit.is_empty(), "audit: {audit:?}");
    for key in ["3", "4", "5", "6", "7", "8", "9", "10", "11", "12", "13"] {
        ensure!(report.table(key).is_some_and(|t| !t.rows.is_empty()), "table {key} missing");
    }
    let chronic = ds.samples.iter().filter(|s| s.chronic_abnormal).count();
    ensure!(chronic * 10 >= ds.samples.len() * 3, "chronic share {chronic}/500");
    let comparison = report.comparison.as_ref().ok_or("no comparison")?;
    let rate = |id: &str| comparison.row(id).and_then(|r| r.actionable.ratio()).ok_or(format!("no row {id}"));
    let (fixed, adaptive) = (rate(fixed::RATER_ID)?, rate(adaptive::RATER_ID)?);
    ensure!(fixed > 3.0 * adaptive, "fixed {fixed:.3} vs adaptive {adaptive:.3}");
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(300), "took {took:?}");
    Ok(format!("audit clean, chronic {chronic}/500, actionable fixed {:.1}% vs adaptive {:.1}%", fixed * 100.0, adaptive * 100.0))
}

fn criterion_10() -> Outcome {
    let cfg = SimConfig { patients: 60, readings: 120, ..SimConfig::default() };
    let ds = simulate(&cfg).map_err(|e| e.to_string())?;
    let cases = build_cases(&ds.samples, &ds.readings, &ds.context).map_err(|e| e.to_string())?;
    for c in &cases {
        ensure!(c.snapshot.as_of == c.reading.timestamp, "{}: snapshot as_of differs", c.case_id);
        ensure!(c.history.latest().is_none_or(|t| t < c.reading.timestamp), "{}: history reaches the reading", c.case_id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut nonempty = 0;
    for draw in 0..10_000 {
        let s = &ds.samples[rng.random_range(0..ds.samples.len())];
        let t = s.timestamp + chrono::Duration::minutes(rng.random_range(-200 * 1440..=10 * 1440));
        let snap = ds.context.as_of(&s.patient_id, t).map_err(|e| e.to_string())?;
        ensure!(snap.as_of == t, "draw {draw}: as_of");
        if let Some(latest) = snap.latest_datum() {
            ensure!(latest <= t, "draw {draw}: datum at {latest} after {t}");
            nonempty += 1;
        }
        let own: Vec<&Reading> = ds.readings.iter().filter(|r| r.patient_id == s.patient_id).collect();
        let h = VitalHistory::from_readings(&s.patient_id, own.iter().copied()).before(t);
        ensure!(h.latest().is_none_or(|l| l < t), "draw {draw}: history reaches {t}");
    }
    Ok(format!("{} cases, 10000 draws ({nonempty} non-empty snapshots), nothing postdates", cases.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("fixed-threshold fixture metrics", criterion_1),
        ("adaptive fixture metrics", criterion_2),
        ("fixed baseline never emits EMERGENCY", criterion_3),
        ("kappa estimators match brute force", criterion_4),
        ("adaptive classifier matches brute force", criterion_5),
        ("assignment balance", criterion_6),
        ("leave-one-out reference", criterion_7),
        ("adjudication taxonomy and selection", criterion_8),
        ("end-to-end desk study", criterion_9),
        ("temporal integrity", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.2}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.2}s): {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
