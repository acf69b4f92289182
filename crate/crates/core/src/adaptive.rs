//! Adaptive baseline: patient-specific rolling σ-band, rate-of-change and
//! persistence rules over a trailing window.
//!
//! The band arithmetic is generic over [`Scalar`]; readings are converted on
//! entry. Every sub-measurement of a reading is evaluated on its own series
//! (cuff and oximeter pulses pooled) and the reading takes the maximum
//! severity over sub-measurements and rules.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fixed::ConfigError;
use crate::scalar::Scalar;
use crate::vitals::{FiredRule, Reading, Series, SeverityLevel, TriageTrace, VitalHistory};

pub const RATER_ID: &str = "adaptive";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaFloors {
    pub systolic: f64,
    pub diastolic: f64,
    pub pulse: f64,
    pub spo2: f64,
    pub bodyweight: f64,
}

impl Default for SigmaFloors {
    fn default() -> Self {
        Self { systolic: 1.0, diastolic: 1.0, pulse: 1.0, spo2: 0.5, bodyweight: 0.1 }
    }
}

impl SigmaFloors {
    pub fn zero() -> Self {
        Self { systolic: 0.0, diastolic: 0.0, pulse: 0.0, spo2: 0.0, bodyweight: 0.0 }
    }

    pub fn for_series(&self, s: Series) -> f64 {
        match s {
            Series::Systolic => self.systolic,
            Series::Diastolic => self.diastolic,
            Series::Pulse => self.pulse,
            Series::Spo2 => self.spo2,
            Series::Bodyweight => self.bodyweight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub window_days: u32,
    /// Prior in-window readings a series needs before any rule is evaluated.
    pub min_history: usize,
    /// Historical deltas the rate-of-change rule needs.
    pub min_deltas: usize,
    /// Consecutive out-of-band readings that trigger the persistence rule.
    pub persistence_run: usize,
    /// Use the floored σ for the persistence bands (otherwise the raw σ).
    pub floor_persistence: bool,
    pub sigma_floors: SigmaFloors,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            window_days: 30,
            min_history: 10,
            min_deltas: 2,
            persistence_run: 3,
            floor_persistence: true,
            sigma_floors: SigmaFloors::default(),
        }
    }
}

impl AdaptiveConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(s)?;
        if cfg.window_days == 0 {
            return Err(ConfigError::Invalid("window_days must be > 0".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Mean and sample SD of a window. `mu` needs one point, `sigma` two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RollingStats<T> {
    pub mu: Option<T>,
    pub sigma: Option<T>,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaStats<T> {
    pub sigma_delta: Option<T>,
    pub m: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SigmaBand {
    None,
    Two,
    Three,
    Four,
}

impl SigmaBand {
    pub fn severity(self) -> SeverityLevel {
        match self {
            Self::None => SeverityLevel::NotAnIssue,
            Self::Two => SeverityLevel::Monitor,
            Self::Three => SeverityLevel::Urgent,
            Self::Four => SeverityLevel::Emergency,
        }
    }

    pub fn multiple(self) -> u8 {
        match self {
            Self::None => 0,
            Self::Two => 2,
            Self::Three => 3,
            Self::Four => 4,
        }
    }

    /// Strict band test of `deviation` against multiples of `sigma`.
    pub fn classify<T: Scalar>(deviation: T, sigma: T) -> Self {
        if deviation > T::lit(4.0) * sigma {
            Self::Four
        } else if deviation > T::lit(3.0) * sigma {
            Self::Three
        } else if deviation > T::lit(2.0) * sigma {
            Self::Two
        } else {
            Self::None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptiveRule {
    Deviation,
    Delta,
    Persistence,
}

impl AdaptiveRule {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Deviation => "deviation",
            Self::Delta => "delta",
            Self::Persistence => "persistence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandOutcome {
    pub rule: AdaptiveRule,
    pub band: SigmaBand,
}

impl BandOutcome {
    pub fn severity(&self) -> SeverityLevel {
        self.band.severity()
    }

    fn none(rule: AdaptiveRule) -> Self {
        Self { rule, band: SigmaBand::None }
    }
}

pub fn sample_stats<T: Scalar>(values: &[T]) -> RollingStats<T> {
    let n = values.len();
    if n == 0 {
        return RollingStats { mu: None, sigma: None, n };
    }
    let mu = values.iter().fold(T::zero(), |acc, &v| acc + v) / T::from_count(n);
    let sigma = (n >= 2).then(|| {
        let ss = values.iter().fold(T::zero(), |acc, &v| acc + (v - mu) * (v - mu));
        (ss / T::from_count(n - 1)).sqrt()
    });
    RollingStats { mu: Some(mu), sigma, n }
}

/// Consecutive deltas of `values` and their sample SD.
pub fn delta_stats<T: Scalar>(values: &[T]) -> DeltaStats<T> {
    let deltas: Vec<T> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let s = sample_stats(&deltas);
    DeltaStats { sigma_delta: s.sigma, m: s.n }
}

fn window_values<T: Scalar>(history: &VitalHistory, series: Series, end: chrono::DateTime<chrono::Utc>, days: u32) -> Vec<T> {
    history.window(series, end, days).iter().map(|p| T::lit(p.value)).collect()
}

/// Rolling mean/SD over the 30-day window of `series` ending (exclusive) at `end`.
pub fn rolling_stats<T: Scalar>(history: &VitalHistory, series: Series, end: chrono::DateTime<chrono::Utc>) -> RollingStats<T> {
    sample_stats(&window_values::<T>(history, series, end, 30))
}

fn floored<T: Scalar>(sigma: Option<T>, floor: T) -> Option<T> {
    sigma.map(|s| s.max(floor))
}

/// Rule 1: band of `|v − μ|` against the floored σ.
pub fn classify_deviation<T: Scalar>(v: T, stats: &RollingStats<T>, sigma_floor: T) -> BandOutcome {
    match (stats.mu, floored(stats.sigma, sigma_floor)) {
        (Some(mu), Some(sigma)) => BandOutcome { rule: AdaptiveRule::Deviation, band: SigmaBand::classify((v - mu).abs(), sigma) },
        _ => BandOutcome::none(AdaptiveRule::Deviation),
    }
}

/// Rule 2: band of `|v − v_prev|` against the floored SD of historical
/// deltas. Inert with fewer than `min_deltas` deltas.
pub fn classify_delta<T: Scalar>(v: T, v_prev: T, dstats: &DeltaStats<T>, sigma_floor: T, min_deltas: usize) -> BandOutcome {
    match floored(dstats.sigma_delta, sigma_floor) {
        Some(sd) if dstats.m >= min_deltas => BandOutcome { rule: AdaptiveRule::Delta, band: SigmaBand::classify((v - v_prev).abs(), sd) },
        _ => BandOutcome::none(AdaptiveRule::Delta),
    }
}

/// Rule 3: run of consecutive readings, counted backward from the last
/// element of `recent` (the current reading), that lie outside a band.
pub fn classify_persistence<T: Scalar>(recent: &[T], stats: &RollingStats<T>, sigma: Option<T>, run_length: usize) -> BandOutcome {
    let (Some(mu), Some(sigma)) = (stats.mu, sigma) else {
        return BandOutcome::none(AdaptiveRule::Persistence);
    };
    for band in [SigmaBand::Four, SigmaBand::Three, SigmaBand::Two] {
        let limit = T::lit(band.multiple() as f64) * sigma;
        let run = recent.iter().rev().take_while(|&&x| (x - mu).abs() > limit).count();
        if run >= run_length {
            return BandOutcome { rule: AdaptiveRule::Persistence, band };
        }
    }
    BandOutcome::none(AdaptiveRule::Persistence)
}

/// Per-series evaluation detail recorded in the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesEvaluation<T> {
    pub series: Series,
    pub stats: RollingStats<T>,
    pub outcomes: Vec<BandOutcome>,
}

impl<T> SeriesEvaluation<T> {
    pub fn severity(&self) -> SeverityLevel {
        self.outcomes.iter().map(BandOutcome::severity).max().unwrap_or(SeverityLevel::NotAnIssue)
    }
}

/// Evaluates all three rules for one value against its series history.
/// Returns no outcomes when the window holds fewer than `min_history` points.
pub fn evaluate_series<T: Scalar>(
    v: T,
    history: &VitalHistory,
    series: Series,
    end: chrono::DateTime<chrono::Utc>,
    cfg: &AdaptiveConfig,
) -> SeriesEvaluation<T> {
    let window: Vec<T> = window_values(history, series, end, cfg.window_days);
    let stats = sample_stats(&window);
    if window.len() < cfg.min_history {
        return SeriesEvaluation { series, stats, outcomes: Vec::new() };
    }
    let floor = T::lit(cfg.sigma_floors.for_series(series));
    let deviation = classify_deviation(v, &stats, floor);
    let delta = match window.last() {
        Some(&prev) => classify_delta(v, prev, &delta_stats(&window), floor, cfg.min_deltas),
        None => BandOutcome::none(AdaptiveRule::Delta),
    };
    let mut recent = window;
    recent.push(v);
    let persistence_sigma = if cfg.floor_persistence { floored(stats.sigma, floor) } else { stats.sigma };
    let persistence = classify_persistence(&recent, &stats, persistence_sigma, cfg.persistence_run);
    SeriesEvaluation { series, stats, outcomes: vec![deviation, delta, persistence] }
}

/// Full adaptive classification of one reading.
pub fn adaptive_classify<T: Scalar>(reading: &Reading, history: &VitalHistory, cfg: &AdaptiveConfig) -> TriageTrace {
    let mut rules = Vec::new();
    let mut scores = std::collections::BTreeMap::new();
    for (measure, value) in reading.values() {
        let eval = evaluate_series(T::lit(value), history, measure.series(), reading.timestamp, cfg);
        let name = measure.as_str();
        scores.insert(format!("{name}.n"), eval.stats.n as f64);
        if eval.outcomes.is_empty() {
            continue;
        }
        if let Some(mu) = eval.stats.mu {
            scores.insert(format!("{name}.mu"), mu.as_f64());
        }
        if let Some(sigma) = eval.stats.sigma {
            scores.insert(format!("{name}.sigma"), sigma.as_f64());
        }
        for o in &eval.outcomes {
            scores.insert(format!("{name}.{}_band", o.rule.as_str()), o.band.multiple() as f64);
            if o.band != SigmaBand::None {
                rules.push(FiredRule::new(format!("{name}.{}", o.rule.as_str()), o.severity()));
            }
        }
    }
    let mut trace = TriageTrace::from_rules(RATER_ID, rules);
    trace.component_scores = scores;
    trace
}
