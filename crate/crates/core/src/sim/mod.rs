//! Seeded synthetic cohort, device readings and context store.

mod context;
mod scenario;

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use context::{
    build_context_store, Condition, ContextError, ContextSnapshot, ContextStore, Demographics, Encounter, Medication, NoteSummary,
    PatientContext,
};
pub use scenario::{inject_scenario, scenario_signature_holds, ScenarioKind, ScenarioSpec};

use crate::rng::named_rng;
use crate::vitals::{DeviceKind, Measure, PatientFlags, Reading, SeverityLevel, VitalsError};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("series too short for {kind}: {detail}")]
    SeriesTooShort { kind: ScenarioKind, detail: String },
    #[error(transparent)]
    Vitals(#[from] VitalsError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceMix {
    pub blood_pressure_cuff: f64,
    pub pulse_oximeter: f64,
    pub weight_scale: f64,
}

impl Default for DeviceMix {
    fn default() -> Self {
        Self { blood_pressure_cuff: 0.456, pulse_oximeter: 0.390, weight_scale: 0.154 }
    }
}

impl DeviceMix {
    pub fn fraction(&self, d: DeviceKind) -> f64 {
        match d {
            DeviceKind::BloodPressureCuff => self.blood_pressure_cuff,
            DeviceKind::PulseOximeter => self.pulse_oximeter,
            DeviceKind::WeightScale => self.weight_scale,
        }
    }

    /// Largest-remainder split of `n` readings across devices.
    pub fn allocate(&self, n: usize) -> [usize; 3] {
        let raw = DeviceKind::ALL.map(|d| self.fraction(d) * n as f64);
        let mut out = raw.map(|x| x.floor() as usize);
        let mut rest = n - out.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| {
            let fa = raw[a] - raw[a].floor();
            let fb = raw[b] - raw[b].floor();
            fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
        });
        for i in order {
            if rest == 0 {
                break;
            }
            out[i] += 1;
            rest -= 1;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prevalence {
    pub hypertension: f64,
    pub heart_failure: f64,
    pub diabetes: f64,
    pub cad: f64,
    pub copd: f64,
    pub obesity: f64,
    pub ckd: f64,
    /// Share of COPD patients on home oxygen.
    pub home_o2_given_copd: f64,
}

impl Default for Prevalence {
    fn default() -> Self {
        Self {
            hypertension: 0.451,
            heart_failure: 0.319,
            diabetes: 0.310,
            cad: 0.271,
            copd: 0.242,
            obesity: 0.227,
            ckd: 0.215,
            home_o2_given_copd: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgeDist {
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl Default for AgeDist {
    fn default() -> Self {
        Self { mean: 70.3, sd: 9.5, min: 32.0, max: 91.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioQuotas {
    pub hypertensive_surge: usize,
    pub exercise_bp_decline: usize,
    pub hf_weight_surge: usize,
    pub chronic_hypoxemia: usize,
    pub device_glitch: usize,
    pub stable_baseline: usize,
}

impl Default for ScenarioQuotas {
    fn default() -> Self {
        Self {
            hypertensive_surge: 10,
            exercise_bp_decline: 6,
            hf_weight_surge: 6,
            chronic_hypoxemia: 8,
            device_glitch: 4,
            stable_baseline: 20,
        }
    }
}

impl ScenarioQuotas {
    pub fn get(&self, k: ScenarioKind) -> usize {
        match k {
            ScenarioKind::HypertensiveSurge => self.hypertensive_surge,
            ScenarioKind::ExerciseBpDecline => self.exercise_bp_decline,
            ScenarioKind::HfWeightSurge => self.hf_weight_surge,
            ScenarioKind::ChronicHypoxemia => self.chronic_hypoxemia,
            ScenarioKind::DeviceGlitch => self.device_glitch,
            ScenarioKind::StableBaseline => self.stable_baseline,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub seed: u64,
    pub patients: usize,
    /// Sample readings to triage (the study set).
    pub readings: usize,
    /// Days of daily history preceding the sample window.
    pub span_days: u32,
    /// End of the sample window; samples fall in the preceding 24 hours.
    pub end: DateTime<Utc>,
    /// Probability that a patient takes a given day's history reading.
    pub adherence: f64,
    pub female_fraction: f64,
    pub age: AgeDist,
    pub device_mix: DeviceMix,
    pub prevalence: Prevalence,
    pub scenarios: ScenarioQuotas,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            patients: 340,
            readings: 500,
            span_days: 45,
            end: Utc.with_ymd_and_hms(2025, 3, 1, 0, 0, 0).unwrap(),
            adherence: 0.85,
            female_fraction: 0.602,
            age: AgeDist::default(),
            device_mix: DeviceMix::default(),
            prevalence: Prevalence::default(),
            scenarios: ScenarioQuotas::default(),
        }
    }
}

fn unit(name: &str, v: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(SimError::Config(format!("{name} = {v} is outside [0, 1]")))
    }
}

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, SimError> {
        let c: SimConfig = toml::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let m = &self.device_mix;
        for (n, v) in [
            ("device_mix.blood_pressure_cuff", m.blood_pressure_cuff),
            ("device_mix.pulse_oximeter", m.pulse_oximeter),
            ("device_mix.weight_scale", m.weight_scale),
        ] {
            unit(n, v)?;
        }
        let sum = m.blood_pressure_cuff + m.pulse_oximeter + m.weight_scale;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SimError::Config(format!("device mix sums to {sum}, not 1")));
        }
        let p = &self.prevalence;
        for (n, v) in [
            ("prevalence.hypertension", p.hypertension),
            ("prevalence.heart_failure", p.heart_failure),
            ("prevalence.diabetes", p.diabetes),
            ("prevalence.cad", p.cad),
            ("prevalence.copd", p.copd),
            ("prevalence.obesity", p.obesity),
            ("prevalence.ckd", p.ckd),
            ("prevalence.home_o2_given_copd", p.home_o2_given_copd),
            ("adherence", self.adherence),
            ("female_fraction", self.female_fraction),
        ] {
            unit(n, v)?;
        }
        let a = &self.age;
        if !(a.min <= a.max && a.sd > 0.0 && a.mean.is_finite()) {
            return Err(SimError::Config("age distribution needs min <= max and sd > 0".into()));
        }
        let counts = self.device_mix.allocate(self.readings);
        for (d, c) in DeviceKind::ALL.iter().zip(counts) {
            if c > self.patients {
                return Err(SimError::Config(format!("{c} {} readings need at least {c} patients (have {})", d.as_str(), self.patients)));
            }
        }
        let bp = counts[0];
        let ox = counts[1];
        let sc = counts[2];
        let q = &self.scenarios;
        let need = [
            ("blood_pressure_cuff", q.hypertensive_surge + q.exercise_bp_decline, bp),
            ("pulse_oximeter", q.chronic_hypoxemia, ox),
            ("weight_scale", q.hf_weight_surge + q.device_glitch, sc),
        ];
        for (d, n, have) in need {
            if n > have {
                return Err(SimError::Config(format!("scenario quotas need {n} {d} samples, only {have} allocated")));
            }
        }
        let total: usize = ScenarioKind::ALL.iter().map(|k| q.get(*k)).sum();
        if total > self.readings {
            return Err(SimError::Config(format!("scenario quotas ({total}) exceed the sample count ({})", self.readings)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Female,
    Male,
}

/// Personal mean and day-to-day spread of one vital.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VitalBaselines {
    pub systolic: Baseline,
    pub diastolic: Baseline,
    pub pulse: Baseline,
    pub spo2: Baseline,
    pub weight: Baseline,
}

impl VitalBaselines {
    pub fn for_measure(&self, m: Measure) -> Baseline {
        match m {
            Measure::Systolic => self.systolic,
            Measure::Diastolic => self.diastolic,
            Measure::PulseRate | Measure::Pulse => self.pulse,
            Measure::Spo2 => self.spo2,
            Measure::Bodyweight => self.weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientProfile {
    pub patient_id: String,
    pub age: u32,
    pub sex: Sex,
    pub flags: PatientFlags,
    pub baseline: VitalBaselines,
    pub enrollment: DateTime<Utc>,
}

impl PatientProfile {
    /// Personal baseline sits outside the fixed thresholds.
    pub fn is_chronic_abnormal(&self) -> bool {
        let spo2_floor = if self.flags.copd { 88.0 } else { 94.0 };
        self.baseline.systolic.mean > 140.0 || self.baseline.diastolic.mean > 90.0 || self.baseline.spo2.mean < spo2_floor
    }
}

fn normal(rng: &mut impl Rng, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).expect("positive sd").sample(rng)
}

fn truncated_normal(rng: &mut impl Rng, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    // Rejection, with a clamp fallback for windows far in the tails.
    for _ in 0..1000 {
        let x = normal(rng, mean, sd);
        if (lo..=hi).contains(&x) {
            return x;
        }
    }
    mean.clamp(lo, hi)
}

pub fn generate_cohort(config: &SimConfig) -> Result<Vec<PatientProfile>, SimError> {
    config.validate()?;
    let p = &config.prevalence;
    let start = config.end - Duration::days(i64::from(config.span_days) + 1);
    let mut out = Vec::with_capacity(config.patients);
    for i in 0..config.patients {
        let mut rng = named_rng(config.seed, "cohort", i as u64);
        let a = &config.age;
        let age = truncated_normal(&mut rng, a.mean, a.sd, a.min, a.max).round() as u32;
        let sex = if rng.random_bool(config.female_fraction) { Sex::Female } else { Sex::Male };
        let copd = rng.random_bool(p.copd);
        let flags = PatientFlags {
            hypertension: rng.random_bool(p.hypertension),
            heart_failure: rng.random_bool(p.heart_failure),
            diabetes: rng.random_bool(p.diabetes),
            cad: rng.random_bool(p.cad),
            copd,
            obesity: rng.random_bool(p.obesity),
            ckd: rng.random_bool(p.ckd),
            home_o2: copd && rng.random_bool(p.home_o2_given_copd),
        };
        let (sys_mu, dia_mu) = if flags.hypertension {
            (truncated_normal(&mut rng, 150.0, 10.0, 125.0, 185.0), truncated_normal(&mut rng, 86.0, 6.0, 70.0, 105.0))
        } else {
            (truncated_normal(&mut rng, 124.0, 8.0, 100.0, 139.0), truncated_normal(&mut rng, 76.0, 5.0, 60.0, 88.0))
        };
        let pulse_mu = truncated_normal(&mut rng, if flags.heart_failure { 78.0 } else { 73.0 }, 8.0, 52.0, 100.0);
        let spo2_mu =
            if copd { truncated_normal(&mut rng, 90.5, 1.5, 87.0, 94.0) } else { truncated_normal(&mut rng, 96.5, 1.0, 94.5, 99.0) };
        let weight_mu = if flags.obesity {
            truncated_normal(&mut rng, 105.0, 15.0, 80.0, 180.0)
        } else {
            truncated_normal(&mut rng, 76.0, 12.0, 42.0, 110.0)
        };
        let baseline = VitalBaselines {
            systolic: Baseline { mean: sys_mu, sd: rng.random_range(4.0..9.0) },
            diastolic: Baseline { mean: dia_mu, sd: rng.random_range(3.0..6.0) },
            pulse: Baseline { mean: pulse_mu, sd: rng.random_range(3.0..6.0) },
            spo2: Baseline { mean: spo2_mu, sd: rng.random_range(0.6..1.2) },
            weight: Baseline { mean: weight_mu, sd: rng.random_range(0.25..0.6) },
        };
        let enrollment = start - Duration::days(rng.random_range(30..400)) - Duration::minutes(rng.random_range(0..1440));
        out.push(PatientProfile {
            patient_id: format!("P{:04}", i + 1),
            age,
            sex,
            flags,
            baseline,
            enrollment: crate::vitals::truncate_to_second(enrollment),
        });
    }
    Ok(out)
}

/// One sample reading in the study set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleCase {
    pub sample_id: String,
    pub reading_id: String,
    pub patient_id: String,
    pub device: DeviceKind,
    pub timestamp: DateTime<Utc>,
    pub scenario: Option<ScenarioKind>,
    /// Simulated ground truth: the scenario hint, else MONITOR for a
    /// chronically abnormal patient, else NOT AN ISSUE.
    pub latent: SeverityLevel,
    pub chronic_abnormal: bool,
}

/// Everything one simulation run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDataset {
    pub config: SimConfig,
    pub cohort: Vec<PatientProfile>,
    /// All readings (history and samples), ordered by timestamp then id.
    pub readings: Vec<Reading>,
    pub samples: Vec<SampleCase>,
    pub context: ContextStore,
}

fn draw_value(rng: &mut impl Rng, m: Measure, b: Baseline) -> f64 {
    let x = normal(rng, b.mean, b.sd);
    match m {
        Measure::Bodyweight => (x * 10.0).round() / 10.0,
        Measure::Spo2 => x.round().min(100.0),
        _ => x.round().max(1.0),
    }
}

pub(crate) fn draw_reading(rng: &mut impl Rng, id: String, profile: &PatientProfile, device: DeviceKind, t: DateTime<Utc>) -> Reading {
    let measurements: BTreeMap<Measure, f64> =
        device.measures().iter().map(|&m| (m, draw_value(rng, m, profile.baseline.for_measure(m)))).collect();
    Reading::new(id, profile.patient_id.clone(), device, t, measurements).expect("generator emits the device's measurement set")
}

/// Daily history for one (patient, device) pair ending with the sample
/// reading at `t`.
pub fn generate_series(
    config: &SimConfig,
    profile: &PatientProfile,
    device: DeviceKind,
    sample_id: &str,
    t: DateTime<Utc>,
    rng: &mut impl Rng,
) -> Vec<Reading> {
    let mut out = Vec::new();
    for d in (1..=i64::from(config.span_days)).rev() {
        if !rng.random_bool(config.adherence) {
            continue;
        }
        let jitter = Duration::minutes(rng.random_range(-120..=120));
        let ts = t - Duration::days(d) + jitter;
        out.push(draw_reading(rng, format!("{sample_id}-h{d:02}"), profile, device, ts));
    }
    out.push(draw_reading(rng, sample_id.to_string(), profile, device, t));
    out
}

pub fn generate_readings(cohort: &[PatientProfile], config: &SimConfig) -> Result<(Vec<Reading>, Vec<SampleCase>), SimError> {
    config.validate()?;
    if cohort.len() < config.patients.min(1) {
        return Err(SimError::Config("empty cohort".into()));
    }
    let counts = config.device_mix.allocate(config.readings);
    for (d, c) in DeviceKind::ALL.iter().zip(counts) {
        if c > cohort.len() {
            return Err(SimError::Config(format!("cohort too small for {c} {} samples", d.as_str())));
        }
    }
    let mut rng = named_rng(config.seed, "sampling", 0);
    // Each sample is a distinct (patient, device) pair.
    let mut slots: Vec<(DeviceKind, usize)> = Vec::with_capacity(config.readings);
    for (d, c) in DeviceKind::ALL.iter().zip(counts) {
        let mut idx: Vec<usize> = (0..cohort.len()).collect();
        idx.shuffle(&mut rng);
        slots.extend(idx.into_iter().take(c).map(|p| (*d, p)));
    }
    slots.shuffle(&mut rng);

    let scenarios = assign_scenarios(config, cohort, &slots);
    let window = Duration::hours(24);
    let mut readings = Vec::new();
    let mut samples = Vec::with_capacity(slots.len());
    for (k, &(device, p)) in slots.iter().enumerate() {
        let profile = &cohort[p];
        let sample_id = format!("S{:04}", k + 1);
        let mut srng = named_rng(config.seed, "series", k as u64);
        let offset = Duration::seconds(srng.random_range(0..window.num_seconds()));
        let t = config.end - window + offset;
        let mut series = generate_series(config, profile, device, &sample_id, t, &mut srng);
        let scenario = scenarios[k];
        if let Some(kind) = scenario {
            let spec = ScenarioSpec::new(kind);
            let seed = named_rng(config.seed, "scenario", k as u64).random::<u64>();
            series = inject_scenario(&series, &spec, &profile.baseline, seed)?;
        }
        let latent = match scenario {
            Some(kind) => kind.expected_severity(),
            None if profile.is_chronic_abnormal() => SeverityLevel::Monitor,
            None => SeverityLevel::NotAnIssue,
        };
        samples.push(SampleCase {
            sample_id: sample_id.clone(),
            reading_id: sample_id,
            patient_id: profile.patient_id.clone(),
            device,
            timestamp: series.last().expect("series ends with the sample").timestamp,
            scenario,
            latent,
            chronic_abnormal: profile.is_chronic_abnormal(),
        });
        readings.extend(series);
    }
    readings.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.reading_id.cmp(&b.reading_id)));
    Ok((readings, samples))
}

// Scenario slots prefer patients whose conditions fit the vignette (heart
// failure for weight surges, COPD for hypoxemia).
fn assign_scenarios(config: &SimConfig, cohort: &[PatientProfile], slots: &[(DeviceKind, usize)]) -> Vec<Option<ScenarioKind>> {
    let mut out = vec![None; slots.len()];
    let mut rng = named_rng(config.seed, "scenario-assign", 0);
    let mut order: Vec<usize> = (0..slots.len()).collect();
    order.shuffle(&mut rng);
    for kind in ScenarioKind::ALL {
        let want = config.scenarios.get(kind);
        let fits = |k: usize| -> Option<bool> {
            let (d, p) = slots[k];
            if kind.device().is_some_and(|need| need != d) {
                return None;
            }
            Some(kind.prefers(&cohort[p].flags))
        };
        let mut preferred: Vec<usize> = order.iter().copied().filter(|&k| out[k].is_none() && fits(k) == Some(true)).collect();
        let others: Vec<usize> = order.iter().copied().filter(|&k| out[k].is_none() && fits(k) == Some(false)).collect();
        preferred.extend(others);
        for k in preferred.into_iter().take(want) {
            out[k] = Some(kind);
        }
    }
    out
}

pub fn simulate(config: &SimConfig) -> Result<SimDataset, SimError> {
    let cohort = generate_cohort(config)?;
    let (readings, samples) = generate_readings(&cohort, config)?;
    let context = build_context_store(&cohort, config);
    Ok(SimDataset { config: config.clone(), cohort, readings, samples, context })
}

impl SimDataset {
    pub fn profile(&self, patient_id: &str) -> Option<&PatientProfile> {
        self.cohort.iter().find(|p| p.patient_id == patient_id)
    }

    pub fn reading(&self, reading_id: &str) -> Option<&Reading> {
        self.readings.iter().find(|r| r.reading_id == reading_id)
    }

    /// Writes `readings.jsonl`, `samples.json`, `cohort.json` and
    /// `context.json` into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<(), SimError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("readings.jsonl"))?);
        crate::vitals::write_readings(&mut f, &self.readings)?;
        std::io::Write::flush(&mut f)?;
        std::fs::write(dir.join("samples.json"), serde_json::to_string_pretty(&self.samples)?)?;
        std::fs::write(dir.join("cohort.json"), serde_json::to_string_pretty(&self.cohort)?)?;
        std::fs::write(dir.join("context.json"), serde_json::to_string_pretty(&self.context)?)?;
        std::fs::write(dir.join("sim.toml"), self.config.to_toml_string())?;
        Ok(())
    }

    pub fn read_dir(dir: impl AsRef<Path>) -> Result<Self, SimError> {
        let dir = dir.as_ref();
        let config = SimConfig::load(dir.join("sim.toml"))?;
        let readings = crate::vitals::read_readings(dir.join("readings.jsonl"))?;
        let samples = serde_json::from_str(&std::fs::read_to_string(dir.join("samples.json"))?)?;
        let cohort = serde_json::from_str(&std::fs::read_to_string(dir.join("cohort.json"))?)?;
        let context = serde_json::from_str(&std::fs::read_to_string(dir.join("context.json"))?)?;
        Ok(Self { config, cohort, readings, samples, context })
    }
}

#[cfg(test)]
mod tests;
