//! Fixed-threshold baseline: guideline rules (two-level) combined with a
//! modified NEWS2 (four-level) by severity maximum.
//!
//! Every threshold lives in [`FixedConfig`], which round-trips through TOML.
//! The defaults reproduce the published rule tables exactly; `>` rules are
//! strict and `>=` rules inclusive.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::vitals::{
    severity_max, DeviceKind, FiredRule, Measure, PatientFlags, Reading, Series, SeverityLevel, TriageTrace, VitalHistory,
};

pub const RATER_ID: &str = "fixed_threshold";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpRules {
    pub crisis_systolic_above: f64,
    pub crisis_diastolic_above: f64,
    pub hypotension_systolic_below: f64,
    pub hypotension_diastolic_below: f64,
    pub elevated_systolic_above: f64,
    pub low_systolic_below: f64,
    pub range_low: f64,
    pub range_high: f64,
    pub single_crisis_systolic_at_least: f64,
    pub single_crisis_diastolic_at_least: f64,
    pub drop_at_least: f64,
    /// Oldest prior reading (days) still usable as "previous reading".
    pub drop_lookback_days: u32,
    /// Readings considered for persistence, current included.
    pub persistence_readings: usize,
    pub persistence_min_hits: usize,
    pub persistence_systolic_above: f64,
    pub persistence_diastolic_above: f64,
}

impl Default for BpRules {
    fn default() -> Self {
        Self {
            crisis_systolic_above: 180.0,
            crisis_diastolic_above: 120.0,
            hypotension_systolic_below: 90.0,
            hypotension_diastolic_below: 60.0,
            elevated_systolic_above: 140.0,
            low_systolic_below: 100.0,
            range_low: 90.0,
            range_high: 180.0,
            single_crisis_systolic_at_least: 180.0,
            single_crisis_diastolic_at_least: 110.0,
            drop_at_least: 20.0,
            drop_lookback_days: 7,
            persistence_readings: 10,
            persistence_min_hits: 3,
            persistence_systolic_above: 140.0,
            persistence_diastolic_above: 90.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spo2Rules {
    pub copd_below: f64,
    pub non_copd_below: f64,
}

impl Default for Spo2Rules {
    fn default() -> Self {
        Self { copd_below: 88.0, non_copd_below: 94.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleScope {
    HeartFailure,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightChange {
    /// current − earliest reading in the lookback window.
    Gain,
    /// earliest reading in the lookback window − current.
    Loss,
    /// |current − median of the lookback window|.
    FromMedian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRule {
    pub id: String,
    pub scope: RuleScope,
    pub change: WeightChange,
    pub threshold_kg: f64,
    /// `true` for `>=`, `false` for `>`.
    pub inclusive: bool,
    pub days: u32,
}

impl WeightRule {
    fn new(id: &str, scope: RuleScope, change: WeightChange, kg: f64, inclusive: bool, days: u32) -> Self {
        Self { id: id.to_string(), scope, change, threshold_kg: kg, inclusive, days }
    }

    fn exceeds(&self, delta: f64) -> bool {
        if self.inclusive {
            delta >= self.threshold_kg
        } else {
            delta > self.threshold_kg
        }
    }
}

fn default_weight_rules() -> Vec<WeightRule> {
    use RuleScope::*;
    use WeightChange::*;
    vec![
        WeightRule::new("hf_weight_gain_0.9kg_1d", HeartFailure, Gain, 0.9, false, 1),
        WeightRule::new("hf_weight_gain_5lb_week", HeartFailure, Gain, 2.27, false, 7),
        WeightRule::new("hfsa_delta_0.9kg_1d", HeartFailure, Gain, 0.9, true, 1),
        WeightRule::new("hfsa_delta_2kg_3d", HeartFailure, Gain, 2.0, true, 3),
        WeightRule::new("ccc_weight_3kg_2d", HeartFailure, Gain, 3.0, true, 2),
        WeightRule::new("ccc_weight_2kg_5d", HeartFailure, Gain, 2.0, true, 5),
        WeightRule::new("multi_weight_1kg_1d", All, Gain, 1.0, false, 1),
        WeightRule::new("multi_weight_2kg_2d", All, Gain, 2.0, false, 2),
        WeightRule::new("multi_weight_loss_3kg_1d", All, Loss, 3.0, false, 1),
        WeightRule::new("multi_weight_2kg_baseline", All, FromMedian, 2.0, false, 30),
        WeightRule::new("multi_weight_0.91kg_1wk", All, Gain, 0.91, false, 7),
        WeightRule::new("multi_weight_2.27kg_2wk", All, Gain, 2.27, false, 14),
        WeightRule::new("multi_weight_3.18kg_3wk", All, Gain, 3.18, false, 21),
    ]
}

/// One row of a points table: values up to and including `up_to` score
/// `points`. The last row leaves `up_to` unset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub up_to: Option<f64>,
    pub points: u8,
}

const fn band(up_to: f64, points: u8) -> Band {
    Band { up_to: Some(up_to), points }
}

const fn rest(points: u8) -> Band {
    Band { up_to: None, points }
}

pub fn score_bands(bands: &[Band], v: f64) -> u8 {
    bands.iter().find(|b| b.up_to.is_none_or(|u| v <= u)).map(|b| b.points).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagRules {
    pub emergency_total_at_least: u8,
    pub urgent_total_at_least: u8,
    pub urgent_single_parameter: u8,
    pub monitor_total_at_least: u8,
}

impl Default for FlagRules {
    fn default() -> Self {
        Self { emergency_total_at_least: 7, urgent_total_at_least: 5, urgent_single_parameter: 3, monitor_total_at_least: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct News2Tables {
    pub spo2_scale1: Vec<Band>,
    /// Scale 2 for patients breathing room air.
    pub spo2_scale2_air: Vec<Band>,
    /// Scale 2 for patients on supplemental oxygen.
    pub spo2_scale2_oxygen: Vec<Band>,
    pub systolic: Vec<Band>,
    pub pulse: Vec<Band>,
    pub flags: FlagRules,
}

impl Default for News2Tables {
    fn default() -> Self {
        Self {
            spo2_scale1: vec![band(91.0, 3), band(93.0, 2), band(95.0, 1), rest(0)],
            spo2_scale2_air: vec![band(83.0, 3), band(85.0, 2), band(87.0, 1), rest(0)],
            spo2_scale2_oxygen: vec![band(83.0, 3), band(85.0, 2), band(87.0, 1), band(92.0, 0), band(94.0, 1), band(96.0, 2), rest(3)],
            systolic: vec![band(90.0, 3), band(100.0, 2), band(110.0, 1), band(219.0, 0), rest(3)],
            pulse: vec![band(40.0, 3), band(50.0, 1), band(90.0, 0), band(110.0, 1), band(130.0, 2), rest(3)],
            flags: FlagRules::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedConfig {
    pub bp: BpRules,
    pub spo2: Spo2Rules,
    /// Minimum trailing points for the median-baseline weight rule.
    pub median_min_points: usize,
    pub weight_rules: Vec<WeightRule>,
    pub news2: News2Tables,
}

impl Default for FixedConfig {
    fn default() -> Self {
        Self {
            bp: BpRules::default(),
            spo2: Spo2Rules::default(),
            median_min_points: 3,
            weight_rules: default_weight_rules(),
            news2: News2Tables::default(),
        }
    }
}

impl FixedConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let tables = [
            ("spo2_scale1", &self.news2.spo2_scale1),
            ("spo2_scale2_air", &self.news2.spo2_scale2_air),
            ("spo2_scale2_oxygen", &self.news2.spo2_scale2_oxygen),
            ("systolic", &self.news2.systolic),
            ("pulse", &self.news2.pulse),
        ];
        for (name, bands) in tables {
            let Some(last) = bands.last() else {
                return Err(ConfigError::Invalid(format!("{name}: empty band table")));
            };
            if last.up_to.is_some() {
                return Err(ConfigError::Invalid(format!("{name}: last band must be open-ended")));
            }
            let edges: Vec<f64> = bands.iter().filter_map(|b| b.up_to).collect();
            if edges.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ConfigError::Invalid(format!("{name}: band edges must increase")));
            }
            if bands.iter().any(|b| b.points > 3) {
                return Err(ConfigError::Invalid(format!("{name}: points must be 0..=3")));
            }
        }
        let mut ids: Vec<&str> = self.weight_rules.iter().map(|r| r.id.as_str()).collect();
        ids.sort();
        ids.dedup();
        if ids.len() != self.weight_rules.len() {
            return Err(ConfigError::Invalid("duplicate weight rule id".into()));
        }
        if self.bp.persistence_readings == 0 {
            return Err(ConfigError::Invalid("bp.persistence_readings must be > 0".into()));
        }
        Ok(())
    }
}

/// Per-reading NEWS2 points. Components absent for the device stay `None`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct News2Score {
    pub spo2: Option<u8>,
    pub sbp: Option<u8>,
    pub pulse: Option<u8>,
}

impl News2Score {
    pub fn total(&self) -> u8 {
        [self.spo2, self.sbp, self.pulse].into_iter().flatten().sum()
    }

    pub fn max_single(&self) -> u8 {
        [self.spo2, self.sbp, self.pulse].into_iter().flatten().max().unwrap_or(0)
    }
}

/// Guideline-rule outcome: URGENT when any rule fired.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Criteria1 {
    pub severity: SeverityLevel,
    pub fired: Vec<String>,
}

pub fn criteria1_classify(reading: &Reading, flags: &PatientFlags, history: &VitalHistory, cfg: &FixedConfig) -> Criteria1 {
    let mut fired = Vec::new();
    match reading.device {
        DeviceKind::BloodPressureCuff => bp_rules(reading, history, &cfg.bp, &mut fired),
        DeviceKind::PulseOximeter => {
            if let Some(spo2) = reading.value(Measure::Spo2) {
                if flags.copd && spo2 < cfg.spo2.copd_below {
                    fired.push("spo2_copd_88".to_string());
                }
                if !flags.copd && spo2 < cfg.spo2.non_copd_below {
                    fired.push("spo2_non_copd_94".to_string());
                }
            }
        }
        DeviceKind::WeightScale => weight_rules(reading, flags, history, cfg, &mut fired),
    }
    let severity = if fired.is_empty() { SeverityLevel::NotAnIssue } else { SeverityLevel::Urgent };
    Criteria1 { severity, fired }
}

fn bp_rules(reading: &Reading, history: &VitalHistory, r: &BpRules, fired: &mut Vec<String>) {
    let (Some(sys), Some(dia)) = (reading.value(Measure::Systolic), reading.value(Measure::Diastolic)) else {
        return;
    };
    let mut fire = |cond: bool, id: &str| {
        if cond {
            fired.push(id.to_string());
        }
    };
    fire(sys > r.crisis_systolic_above || dia > r.crisis_diastolic_above, "bp_crisis");
    fire(sys < r.hypotension_systolic_below || dia < r.hypotension_diastolic_below, "hypotension");
    fire(sys > r.elevated_systolic_above, "bp_elevated_140");
    fire(sys < r.low_systolic_below, "bp_lt_100");
    fire(sys < r.range_low || sys > r.range_high, "bp_range");
    fire(sys >= r.single_crisis_systolic_at_least || dia >= r.single_crisis_diastolic_at_least, "bp_single_crisis");

    let t = reading.timestamp;
    if let Some(prev) = history.bp_window(t, r.drop_lookback_days).last() {
        fire(prev.systolic - sys >= r.drop_at_least, "bp_drop_20");
    }

    let prior = &history.blood_pressure()[..history.blood_pressure().partition_point(|p| p.t < t)];
    let take = r.persistence_readings.saturating_sub(1).min(prior.len());
    let high = |s: f64, d: f64| s > r.persistence_systolic_above || d > r.persistence_diastolic_above;
    let hits = prior[prior.len() - take..].iter().filter(|p| high(p.systolic, p.diastolic)).count() + usize::from(high(sys, dia));
    fire(hits >= r.persistence_min_hits, "bp_persistence");
}

fn weight_rules(reading: &Reading, flags: &PatientFlags, history: &VitalHistory, cfg: &FixedConfig, fired: &mut Vec<String>) {
    let Some(w) = reading.value(Measure::Bodyweight) else {
        return;
    };
    for rule in &cfg.weight_rules {
        if rule.scope == RuleScope::HeartFailure && !flags.heart_failure {
            continue;
        }
        let window = history.window(Series::Bodyweight, reading.timestamp, rule.days);
        let delta = match rule.change {
            WeightChange::Gain => window.first().map(|p| w - p.value),
            WeightChange::Loss => window.first().map(|p| p.value - w),
            WeightChange::FromMedian => {
                if window.len() < cfg.median_min_points {
                    None
                } else {
                    let values: Vec<f64> = window.iter().map(|p| p.value).collect();
                    Some((w - median(&values)).abs())
                }
            }
        };
        if delta.is_some_and(|d| rule.exceeds(d)) {
            fired.push(rule.id.clone());
        }
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Whether the SpO₂ component uses Scale 2.
pub fn uses_scale2(flags: &PatientFlags) -> bool {
    flags.copd || flags.home_o2
}

/// NEWS2 points for one reading. Weight readings score nothing (total 0).
pub fn news2_score(reading: &Reading, flags: &PatientFlags, tables: &News2Tables) -> News2Score {
    let mut s = News2Score::default();
    match reading.device {
        DeviceKind::BloodPressureCuff => {
            s.sbp = reading.value(Measure::Systolic).map(|v| score_bands(&tables.systolic, v));
            s.pulse = reading.value(Measure::PulseRate).map(|v| score_bands(&tables.pulse, v));
        }
        DeviceKind::PulseOximeter => {
            let spo2_table = match (uses_scale2(flags), flags.home_o2) {
                (false, _) => &tables.spo2_scale1,
                (true, false) => &tables.spo2_scale2_air,
                (true, true) => &tables.spo2_scale2_oxygen,
            };
            s.spo2 = reading.value(Measure::Spo2).map(|v| score_bands(spo2_table, v));
            s.pulse = reading.value(Measure::Pulse).map(|v| score_bands(&tables.pulse, v));
        }
        DeviceKind::WeightScale => {}
    }
    s
}

/// Escalation flag: the maximum over every matching trigger row.
pub fn news2_flag(score: &News2Score, rules: &FlagRules) -> SeverityLevel {
    let total = score.total();
    let mut flag = SeverityLevel::NotAnIssue;
    if total >= rules.monitor_total_at_least {
        flag = SeverityLevel::Monitor;
    }
    if total >= rules.urgent_total_at_least || score.max_single() >= rules.urgent_single_parameter {
        flag = SeverityLevel::Urgent;
    }
    if total >= rules.emergency_total_at_least {
        flag = SeverityLevel::Emergency;
    }
    flag
}

/// Final fixed-baseline classification: max of the guideline rules and NEWS2.
pub fn fixed_classify(reading: &Reading, flags: &PatientFlags, history: &VitalHistory, cfg: &FixedConfig) -> TriageTrace {
    let c1 = criteria1_classify(reading, flags, history, cfg);
    let score = news2_score(reading, flags, &cfg.news2);
    let flag = news2_flag(&score, &cfg.news2.flags);

    let mut rules: Vec<FiredRule> = c1.fired.iter().map(|id| FiredRule::new(id.clone(), SeverityLevel::Urgent)).collect();
    if flag > SeverityLevel::NotAnIssue {
        rules.push(FiredRule::new("news2", flag));
    }
    let mut trace = TriageTrace::from_rules(RATER_ID, rules);
    debug_assert_eq!(trace.severity, severity_max(c1.severity, flag));

    let mut scores = BTreeMap::new();
    for (k, v) in [("news2.spo2", score.spo2), ("news2.sbp", score.sbp), ("news2.pulse", score.pulse)] {
        if let Some(v) = v {
            scores.insert(k.to_string(), v as f64);
        }
    }
    scores.insert("news2.total".into(), score.total() as f64);
    scores.insert("news2.max_single".into(), score.max_single() as f64);
    trace.component_scores = scores;
    trace
}
