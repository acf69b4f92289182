use std::fmt;

use chrono::Duration;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{SimError, VitalBaselines};
use crate::rng::named_rng;
use crate::vitals::{DeviceKind, Measure, PatientFlags, Reading, SeverityLevel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    HypertensiveSurge,
    ExerciseBpDecline,
    HfWeightSurge,
    ChronicHypoxemia,
    DeviceGlitch,
    StableBaseline,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::HypertensiveSurge,
        ScenarioKind::ExerciseBpDecline,
        ScenarioKind::HfWeightSurge,
        ScenarioKind::ChronicHypoxemia,
        ScenarioKind::DeviceGlitch,
        ScenarioKind::StableBaseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::HypertensiveSurge => "hypertensive_surge",
            ScenarioKind::ExerciseBpDecline => "exercise_bp_decline",
            ScenarioKind::HfWeightSurge => "hf_weight_surge",
            ScenarioKind::ChronicHypoxemia => "chronic_hypoxemia",
            ScenarioKind::DeviceGlitch => "device_glitch",
            ScenarioKind::StableBaseline => "stable_baseline",
        }
    }

    /// Device the scenario is defined on; `None` fits any device.
    pub fn device(self) -> Option<DeviceKind> {
        match self {
            ScenarioKind::HypertensiveSurge | ScenarioKind::ExerciseBpDecline => Some(DeviceKind::BloodPressureCuff),
            ScenarioKind::HfWeightSurge | ScenarioKind::DeviceGlitch => Some(DeviceKind::WeightScale),
            ScenarioKind::ChronicHypoxemia => Some(DeviceKind::PulseOximeter),
            ScenarioKind::StableBaseline => None,
        }
    }

    pub fn prefers(self, flags: &PatientFlags) -> bool {
        match self {
            ScenarioKind::HypertensiveSurge => flags.hypertension,
            ScenarioKind::HfWeightSurge => flags.heart_failure,
            ScenarioKind::ChronicHypoxemia => flags.copd,
            _ => true,
        }
    }

    /// Label used as the simulated ground truth for injected samples.
    pub fn expected_severity(self) -> SeverityLevel {
        match self {
            ScenarioKind::HypertensiveSurge | ScenarioKind::ExerciseBpDecline => SeverityLevel::Emergency,
            ScenarioKind::HfWeightSurge => SeverityLevel::Urgent,
            ScenarioKind::ChronicHypoxemia | ScenarioKind::DeviceGlitch => SeverityLevel::Monitor,
            ScenarioKind::StableBaseline => SeverityLevel::NotAnIssue,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Overrides the drawn magnitude: systolic rise (mmHg) for surges, total
    /// fall for exercise declines, kg above baseline for weight surges, and
    /// the multiple of baseline for glitches. Ignored otherwise.
    #[serde(default)]
    pub magnitude: Option<f64>,
    pub expected: SeverityLevel,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind) -> Self {
        Self { kind, magnitude: None, expected: kind.expected_severity() }
    }
}

fn too_short(kind: ScenarioKind, detail: impl Into<String>) -> SimError {
    SimError::SeriesTooShort { kind, detail: detail.into() }
}

fn round_to(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

fn step_for(m: Measure) -> f64 {
    if m == Measure::Bodyweight {
        0.1
    } else {
        1.0
    }
}

fn with(r: &Reading, m: Measure, v: f64) -> Reading {
    let mut out = r.clone();
    out.set_value(m, v);
    out
}

// Readings strictly before `from`, then the inserted ones, then the target.
fn splice(series: &[Reading], from: chrono::DateTime<chrono::Utc>, inserted: Vec<Reading>, target: Reading) -> Vec<Reading> {
    let mut out: Vec<Reading> = series[..series.len() - 1].iter().filter(|r| r.timestamp < from).cloned().collect();
    out.extend(inserted);
    out.push(target);
    out
}

/// Rewrites the tail of a single-device series (last element is the target
/// reading) so it carries the scenario's numeric signature.
pub fn inject_scenario(series: &[Reading], spec: &ScenarioSpec, baseline: &VitalBaselines, seed: u64) -> Result<Vec<Reading>, SimError> {
    let kind = spec.kind;
    let target = series.last().ok_or_else(|| too_short(kind, "empty series"))?;
    if let Some(d) = kind.device() {
        if target.device != d {
            return Err(SimError::Config(format!("{kind} needs a {} series", d.as_str())));
        }
    }
    let mut rng = named_rng(seed, kind.as_str(), 0);
    let t = target.timestamp;
    let id = &target.reading_id;
    let patient = target.patient_id.clone();
    match kind {
        ScenarioKind::HypertensiveSurge => {
            if series.len() < 3 {
                return Err(too_short(kind, "needs at least two prior readings"));
            }
            let tp = t - Duration::minutes(rng.random_range(14 * 60..=22 * 60));
            let b = baseline.systolic;
            let prev_sys = (b.mean + rng.random_range(-1.0..1.0) * b.sd).round().min(150.0);
            let rise = spec.magnitude.unwrap_or_else(|| rng.random_range(80.0..90.0)).ceil();
            let sys = (prev_sys + rise).max(200.0);
            let dia = (baseline.diastolic.mean + rng.random_range(12.0..22.0)).round();
            let pulse = (baseline.pulse.mean + rng.random_range(0.0..12.0)).round();
            let prev = Reading::blood_pressure(
                format!("{id}-x1"),
                patient.clone(),
                tp,
                prev_sys,
                (baseline.diastolic.mean).round(),
                baseline.pulse.mean.round(),
            )?;
            let tgt = Reading::blood_pressure(id.clone(), patient, t, sys, dia, pulse)?;
            Ok(splice(series, tp, vec![prev], tgt))
        }
        ScenarioKind::ExerciseBpDecline => {
            let t0 = t - Duration::minutes(rng.random_range(35..=45));
            let t1 = t - Duration::minutes(rng.random_range(15..=25));
            let fall = spec.magnitude.unwrap_or_else(|| rng.random_range(15.0..20.0)).ceil();
            let s0 = rng.random_range(93.0f64..100.0).round();
            let s2 = s0 - fall;
            let s1 = (s0 - fall * rng.random_range(0.35..0.65)).round().clamp(s2 + 1.0, s0 - 1.0);
            let d0 = rng.random_range(60.0f64..66.0).round();
            let pulse = (baseline.pulse.mean - 4.0).round();
            let r0 = Reading::blood_pressure(format!("{id}-x1"), patient.clone(), t0, s0, d0, pulse)?;
            let r1 = Reading::blood_pressure(format!("{id}-x2"), patient.clone(), t1, s1, d0 - 2.0, pulse)?;
            let tgt = Reading::blood_pressure(id.clone(), patient, t, s2, d0 - 5.0, pulse)?;
            Ok(splice(series, t0, vec![r0, r1], tgt))
        }
        ScenarioKind::HfWeightSurge => {
            if series.len() < 3 {
                return Err(too_short(kind, "needs a prior weight baseline"));
            }
            let m = baseline.weight.mean;
            let tl = t - Duration::minutes(rng.random_range(30 * 60..=44 * 60));
            let low = round_to(m - 0.75, 0.1);
            let gain = spec.magnitude.unwrap_or_else(|| rng.random_range(4.55..=5.2));
            let fin = round_to(m + gain, 0.1).max(round_to(low + 5.2, 0.1));
            let lo = Reading::weight(format!("{id}-x1"), patient.clone(), tl, low)?;
            let tgt = Reading::weight(id.clone(), patient, t, fin)?;
            Ok(splice(series, tl, vec![lo], tgt))
        }
        ScenarioKind::ChronicHypoxemia => {
            let start = t - Duration::days(15);
            if series.first().is_none_or(|r| r.timestamp > start) {
                return Err(too_short(kind, "needs history reaching 15 days back"));
            }
            let mut out: Vec<Reading> = series.iter().filter(|r| r.timestamp < start).cloned().collect();
            let mut anchor = target.clone();
            anchor.reading_id = format!("{id}-x1");
            anchor.timestamp = start;
            let tail = std::iter::once(anchor).chain(series.iter().filter(|r| r.timestamp > start).cloned());
            for r in tail {
                out.push(with(&r, Measure::Spo2, f64::from(rng.random_range(86..=90u8))));
            }
            Ok(out)
        }
        ScenarioKind::DeviceGlitch => {
            let m = target.device.measures()[0];
            let factor = spec.magnitude.unwrap_or_else(|| rng.random_range(10.0..15.0));
            let base = baseline.for_measure(m).mean;
            let step = step_for(m);
            let v = (base * factor.max(10.0) / step).ceil() * step;
            let mut out = series.to_vec();
            let last = out.len() - 1;
            out[last] = with(target, m, v);
            Ok(out)
        }
        ScenarioKind::StableBaseline => Ok(series
            .iter()
            .map(|r| {
                let mut r = r.clone();
                for m in r.device.measures() {
                    let b = baseline.for_measure(*m);
                    let step = step_for(*m);
                    let v = r.value(*m).expect("device measure present");
                    let mut x = round_to(v.clamp(b.mean - 1.9 * b.sd, b.mean + 1.9 * b.sd), step);
                    if x - b.mean > 2.0 * b.sd {
                        x -= step;
                    } else if b.mean - x > 2.0 * b.sd {
                        x += step;
                    }
                    r.set_value(*m, x);
                }
                r
            })
            .collect()),
    }
}

/// Re-measures the scenario's defining signature on an emitted series.
pub fn scenario_signature_holds(series: &[Reading], kind: ScenarioKind, baseline: &VitalBaselines) -> bool {
    let Some(last) = series.last() else { return false };
    let t = last.timestamp;
    let sys = |r: &Reading| r.value(Measure::Systolic);
    match kind {
        ScenarioKind::HypertensiveSurge => {
            let Some(s) = sys(last) else { return false };
            s >= 200.0
                && series[..series.len() - 1]
                    .iter()
                    .any(|r| r.timestamp >= t - Duration::hours(24) && r.timestamp < t && sys(r).is_some_and(|p| s - p >= 80.0))
        }
        ScenarioKind::ExerciseBpDecline => {
            if series.len() < 3 {
                return false;
            }
            let w = &series[series.len() - 3..];
            let Some(v) = w.iter().map(sys).collect::<Option<Vec<f64>>>() else { return false };
            w[2].timestamp - w[0].timestamp <= Duration::minutes(45) && v[0] > v[1] && v[1] > v[2] && v[0] - v[2] >= 15.0
        }
        ScenarioKind::HfWeightSurge => {
            let Some(w) = last.value(Measure::Bodyweight) else { return false };
            let prior_baseline = series.iter().filter(|r| r.timestamp < t - Duration::days(2)).count();
            prior_baseline >= 1
                && series[..series.len() - 1].iter().any(|r| {
                    r.timestamp >= t - Duration::days(2)
                        && r.timestamp < t
                        && r.value(Measure::Bodyweight).is_some_and(|p| w - p >= 5.2 - 1e-9)
                })
        }
        ScenarioKind::ChronicHypoxemia => {
            let in_band = |r: &Reading| r.value(Measure::Spo2).is_some_and(|v| (86.0..=90.0).contains(&v));
            let k = series.iter().rev().take_while(|r| in_band(r)).count();
            k > 0 && t - series[series.len() - k].timestamp >= Duration::days(14)
        }
        ScenarioKind::DeviceGlitch => series.iter().any(|r| r.values().any(|(m, v)| v >= 10.0 * baseline.for_measure(m).mean)),
        ScenarioKind::StableBaseline => series.iter().all(|r| {
            r.values().all(|(m, v)| {
                let b = baseline.for_measure(m);
                (v - b.mean).abs() <= 2.0 * b.sd + 1e-9
            })
        }),
    }
}
