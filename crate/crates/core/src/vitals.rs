//! Shared domain vocabulary: severity levels, device readings, histories and traces.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

pub const SECONDS_PER_DAY: i64 = 86_400;
/// 1 lb in kilograms.
pub const KG_PER_LB: f64 = 0.453_592_37;

#[derive(Debug, thiserror::Error)]
pub enum VitalsError {
    #[error("invalid severity code {0} (expected 0..=3)")]
    InvalidSeverity(i64),
    #[error("unknown severity label `{0}`")]
    UnknownSeverityLabel(String),
    #[error("unknown action code `{0}`")]
    UnknownAction(String),
    #[error("unknown measurement `{0}`")]
    UnknownMeasurement(String),
    #[error("reading {reading}: {device} readings carry exactly {expected:?}, got {got:?}")]
    MeasurementSet { reading: String, device: DeviceKind, expected: Vec<Measure>, got: Vec<String> },
    #[error("reading {reading}: measurement {name} is not finite")]
    NonFinite { reading: String, name: Measure },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Four-level ordinal triage label. The derived order is the clinical
/// escalation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum SeverityLevel {
    NotAnIssue = 0,
    Monitor = 1,
    Urgent = 2,
    Emergency = 3,
}

impl SeverityLevel {
    pub const ALL: [SeverityLevel; 4] =
        [SeverityLevel::NotAnIssue, SeverityLevel::Monitor, SeverityLevel::Urgent, SeverityLevel::Emergency];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: i64) -> Result<Self, VitalsError> {
        match code {
            0 => Ok(Self::NotAnIssue),
            1 => Ok(Self::Monitor),
            2 => Ok(Self::Urgent),
            3 => Ok(Self::Emergency),
            other => Err(VitalsError::InvalidSeverity(other)),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::NotAnIssue => "NOT AN ISSUE",
            Self::Monitor => "MONITOR",
            Self::Urgent => "URGENT",
            Self::Emergency => "EMERGENCY",
        }
    }

    /// Expected response timeframe shown alongside the label.
    pub fn response_timeframe(self) -> &'static str {
        match self {
            Self::Emergency => "clinical outreach within 60 minutes",
            Self::Urgent => "clinical outreach within 24 hours",
            Self::Monitor => "review within 14 days",
            Self::NotAnIssue => "no action required",
        }
    }
}

impl TryFrom<u8> for SeverityLevel {
    type Error = VitalsError;
    fn try_from(code: u8) -> Result<Self, Self::Error> {
        Self::from_code(code as i64)
    }
}

impl From<SeverityLevel> for u8 {
    fn from(s: SeverityLevel) -> u8 {
        s.code()
    }
}

impl fmt::Display for SeverityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SeverityLevel {
    type Err = VitalsError;

    /// Accepts the numeric code, the display label, or a snake/short form
    /// (`not_an_issue`, `NI`, `E`, ...).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if let Ok(code) = t.parse::<i64>() {
            return Self::from_code(code);
        }
        let norm = t.to_ascii_uppercase().replace(['_', '-'], " ");
        match norm.as_str() {
            "NOT AN ISSUE" | "NI" | "NONE" => Ok(Self::NotAnIssue),
            "MONITOR" | "M" => Ok(Self::Monitor),
            "URGENT" | "U" => Ok(Self::Urgent),
            "EMERGENCY" | "E" => Ok(Self::Emergency),
            _ => Err(VitalsError::UnknownSeverityLabel(s.to_string())),
        }
    }
}

/// Ordinal maximum of two severities.
pub fn severity_max(a: SeverityLevel, b: SeverityLevel) -> SeverityLevel {
    a.max(b)
}

/// `true` for URGENT and EMERGENCY.
pub fn collapse_actionable(s: SeverityLevel) -> bool {
    s >= SeverityLevel::Urgent
}

pub fn within_one(a: SeverityLevel, b: SeverityLevel) -> bool {
    a.code().abs_diff(b.code()) <= 1
}

/// Follow-up routing recorded next to the severity. Never scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionType {
    NoAction,
    EquipmentResolution,
    PatientEducation,
    ClinicalReview,
    UrgentReview,
    CareCoordination,
}

impl ActionType {
    pub const ALL: [ActionType; 6] = [
        ActionType::NoAction,
        ActionType::EquipmentResolution,
        ActionType::PatientEducation,
        ActionType::ClinicalReview,
        ActionType::UrgentReview,
        ActionType::CareCoordination,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NoAction => "no_action",
            Self::EquipmentResolution => "equipment_resolution",
            Self::PatientEducation => "patient_education",
            Self::ClinicalReview => "clinical_review",
            Self::UrgentReview => "urgent_review",
            Self::CareCoordination => "care_coordination",
        }
    }
}

impl FromStr for ActionType {
    type Err = VitalsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|a| a.as_str() == s.trim()).ok_or_else(|| VitalsError::UnknownAction(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    BloodPressureCuff,
    PulseOximeter,
    WeightScale,
}

impl DeviceKind {
    pub const ALL: [DeviceKind; 3] = [DeviceKind::BloodPressureCuff, DeviceKind::PulseOximeter, DeviceKind::WeightScale];

    /// Sub-measurements a reading from this device carries, in display order.
    pub fn measures(self) -> &'static [Measure] {
        match self {
            Self::BloodPressureCuff => &[Measure::Systolic, Measure::Diastolic, Measure::PulseRate],
            Self::PulseOximeter => &[Measure::Spo2, Measure::Pulse],
            Self::WeightScale => &[Measure::Bodyweight],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::BloodPressureCuff => "blood_pressure_cuff",
            Self::PulseOximeter => "pulse_oximeter",
            Self::WeightScale => "weight_scale",
        }
    }
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Named sub-measurement of a reading.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Systolic,
    Diastolic,
    PulseRate,
    Spo2,
    Pulse,
    Bodyweight,
}

impl Measure {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Systolic => "systolic",
            Self::Diastolic => "diastolic",
            Self::PulseRate => "pulse_rate",
            Self::Spo2 => "spo2",
            Self::Pulse => "pulse",
            Self::Bodyweight => "bodyweight",
        }
    }

    /// History series this measurement feeds. Cuff and oximeter pulses pool.
    pub fn series(self) -> Series {
        match self {
            Self::Systolic => Series::Systolic,
            Self::Diastolic => Series::Diastolic,
            Self::PulseRate | Self::Pulse => Series::Pulse,
            Self::Spo2 => Series::Spo2,
            Self::Bodyweight => Series::Bodyweight,
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Self::Systolic | Self::Diastolic => "mmHg",
            Self::PulseRate | Self::Pulse => "bpm",
            Self::Spo2 => "%",
            Self::Bodyweight => "kg",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Measure {
    type Err = VitalsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "systolic" => Self::Systolic,
            "diastolic" => Self::Diastolic,
            "pulse_rate" => Self::PulseRate,
            "spo2" => Self::Spo2,
            "pulse" => Self::Pulse,
            "bodyweight" => Self::Bodyweight,
            other => return Err(VitalsError::UnknownMeasurement(other.to_string())),
        })
    }
}

/// Key of a stored history sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Series {
    Systolic,
    Diastolic,
    /// Pulse from cuffs and oximeters, pooled.
    Pulse,
    Spo2,
    Bodyweight,
}

impl Series {
    pub const ALL: [Series; 5] = [Series::Systolic, Series::Diastolic, Series::Pulse, Series::Spo2, Series::Bodyweight];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Systolic => "systolic",
            Self::Diastolic => "diastolic",
            Self::Pulse => "pulse",
            Self::Spo2 => "spo2",
            Self::Bodyweight => "bodyweight",
        }
    }

    /// Resolves a measurement or series name; `pulse_rate` maps to the pooled pulse.
    pub fn from_name(name: &str) -> Option<Series> {
        name.parse::<Measure>().ok().map(Measure::series)
    }
}

impl fmt::Display for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One device measurement event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawReading")]
pub struct Reading {
    pub reading_id: String,
    pub patient_id: String,
    pub device: DeviceKind,
    pub timestamp: DateTime<Utc>,
    pub measurements: BTreeMap<Measure, f64>,
}

#[derive(Deserialize)]
struct RawReading {
    reading_id: String,
    patient_id: String,
    device: DeviceKind,
    timestamp: DateTime<Utc>,
    measurements: BTreeMap<String, f64>,
}

impl TryFrom<RawReading> for Reading {
    type Error = VitalsError;
    fn try_from(raw: RawReading) -> Result<Self, Self::Error> {
        let names: Vec<String> = raw.measurements.keys().cloned().collect();
        let mut measurements = BTreeMap::new();
        for (name, value) in raw.measurements {
            match name.parse::<Measure>() {
                Ok(m) => {
                    measurements.insert(m, value);
                }
                Err(_) => {
                    return Err(VitalsError::MeasurementSet {
                        reading: raw.reading_id,
                        device: raw.device,
                        expected: raw.device.measures().to_vec(),
                        got: names,
                    })
                }
            }
        }
        Reading::new(raw.reading_id, raw.patient_id, raw.device, raw.timestamp, measurements)
    }
}

impl Reading {
    /// Validates the measurement set against the device kind. Values are not
    /// range-checked: glitches must reach the classifiers.
    pub fn new(
        reading_id: impl Into<String>,
        patient_id: impl Into<String>,
        device: DeviceKind,
        timestamp: DateTime<Utc>,
        measurements: BTreeMap<Measure, f64>,
    ) -> Result<Self, VitalsError> {
        let reading_id = reading_id.into();
        let expected = device.measures();
        let keys: Vec<Measure> = measurements.keys().copied().collect();
        let mut want = expected.to_vec();
        want.sort();
        if keys != want {
            return Err(VitalsError::MeasurementSet {
                reading: reading_id,
                device,
                expected: expected.to_vec(),
                got: keys.iter().map(|m| m.to_string()).collect(),
            });
        }
        if let Some((&name, _)) = measurements.iter().find(|(_, v)| !v.is_finite()) {
            return Err(VitalsError::NonFinite { reading: reading_id, name });
        }
        Ok(Self { reading_id, patient_id: patient_id.into(), device, timestamp: truncate_to_second(timestamp), measurements })
    }

    pub fn blood_pressure(
        id: impl Into<String>,
        patient: impl Into<String>,
        t: DateTime<Utc>,
        systolic: f64,
        diastolic: f64,
        pulse_rate: f64,
    ) -> Result<Self, VitalsError> {
        let m = BTreeMap::from([(Measure::Systolic, systolic), (Measure::Diastolic, diastolic), (Measure::PulseRate, pulse_rate)]);
        Self::new(id, patient, DeviceKind::BloodPressureCuff, t, m)
    }

    pub fn oximeter(
        id: impl Into<String>,
        patient: impl Into<String>,
        t: DateTime<Utc>,
        spo2: f64,
        pulse: f64,
    ) -> Result<Self, VitalsError> {
        let m = BTreeMap::from([(Measure::Spo2, spo2), (Measure::Pulse, pulse)]);
        Self::new(id, patient, DeviceKind::PulseOximeter, t, m)
    }

    pub fn weight(id: impl Into<String>, patient: impl Into<String>, t: DateTime<Utc>, kg: f64) -> Result<Self, VitalsError> {
        let m = BTreeMap::from([(Measure::Bodyweight, kg)]);
        Self::new(id, patient, DeviceKind::WeightScale, t, m)
    }

    pub fn value(&self, m: Measure) -> Option<f64> {
        self.measurements.get(&m).copied()
    }

    /// Sub-measurements in the device's canonical order.
    pub fn values(&self) -> impl Iterator<Item = (Measure, f64)> + '_ {
        self.device.measures().iter().filter_map(|&m| self.value(m).map(|v| (m, v)))
    }

    /// Sets a sub-measurement value. Ignores names the device does not carry.
    pub fn set_value(&mut self, m: Measure, v: f64) {
        if let Some(slot) = self.measurements.get_mut(&m) {
            *slot = v;
        }
    }
}

pub fn truncate_to_second(t: DateTime<Utc>) -> DateTime<Utc> {
    DateTime::from_timestamp(t.timestamp(), 0).unwrap_or(t)
}

/// Reads a readings file: one JSON record per line, blank lines ignored.
pub fn read_readings(path: impl AsRef<Path>) -> Result<Vec<Reading>, VitalsError> {
    let file = std::fs::File::open(path)?;
    parse_readings(std::io::BufReader::new(file))
}

pub fn parse_readings(input: impl BufRead) -> Result<Vec<Reading>, VitalsError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: Reading = serde_json::from_str(&line).map_err(|source| VitalsError::Parse { line: i + 1, source })?;
        out.push(r);
    }
    Ok(out)
}

pub fn write_readings<'a>(mut out: impl Write, readings: impl IntoIterator<Item = &'a Reading>) -> Result<(), VitalsError> {
    for r in readings {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Static condition flags that alter rule selection. Snapshot per call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientFlags {
    pub copd: bool,
    pub heart_failure: bool,
    pub home_o2: bool,
    #[serde(default)]
    pub hypertension: bool,
    #[serde(default)]
    pub diabetes: bool,
    #[serde(default)]
    pub ckd: bool,
    #[serde(default)]
    pub cad: bool,
    #[serde(default)]
    pub obesity: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub t: DateTime<Utc>,
    pub value: f64,
}

/// A prior blood-pressure reading kept whole, for rules that look at both
/// pressures of the same reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpPoint {
    pub t: DateTime<Utc>,
    pub systolic: f64,
    pub diastolic: f64,
}

/// Per-patient, time-ordered vital-sign history.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VitalHistory {
    pub patient_id: String,
    series: BTreeMap<Series, Vec<Point>>,
    blood_pressure: Vec<BpPoint>,
}

impl VitalHistory {
    pub fn new(patient_id: impl Into<String>) -> Self {
        Self { patient_id: patient_id.into(), ..Default::default() }
    }

    /// Builds a history from the readings of `patient_id`, ignoring others.
    pub fn from_readings<'a>(patient_id: impl Into<String>, readings: impl IntoIterator<Item = &'a Reading>) -> Self {
        let mut h = Self::new(patient_id);
        let mut own: Vec<&Reading> = readings.into_iter().filter(|r| r.patient_id == h.patient_id).collect();
        own.sort_by_key(|r| r.timestamp);
        for r in own {
            h.push(r);
        }
        h
    }

    /// Adds a reading, keeping every sequence ordered by timestamp. Equal
    /// timestamps keep insertion order.
    pub fn push(&mut self, r: &Reading) {
        for (m, v) in r.values() {
            let seq = self.series.entry(m.series()).or_default();
            let at = seq.partition_point(|p| p.t <= r.timestamp);
            seq.insert(at, Point { t: r.timestamp, value: v });
        }
        if r.device == DeviceKind::BloodPressureCuff {
            if let (Some(s), Some(d)) = (r.value(Measure::Systolic), r.value(Measure::Diastolic)) {
                let at = self.blood_pressure.partition_point(|p| p.t <= r.timestamp);
                self.blood_pressure.insert(at, BpPoint { t: r.timestamp, systolic: s, diastolic: d });
            }
        }
    }

    pub fn series(&self, s: Series) -> &[Point] {
        self.series.get(&s).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn blood_pressure(&self) -> &[BpPoint] {
        &self.blood_pressure
    }

    /// Points with `end - days*24h <= t < end`, in time order. The point at
    /// exactly `end` is excluded.
    pub fn window(&self, s: Series, end: DateTime<Utc>, days: u32) -> &[Point] {
        window_slice(self.series(s), |p| p.t, end, days)
    }

    /// Like [`window`](Self::window) but by name; unknown names yield an empty slice.
    pub fn window_named(&self, name: &str, end: DateTime<Utc>, days: u32) -> &[Point] {
        match Series::from_name(name) {
            Some(s) => self.window(s, end, days),
            None => &[],
        }
    }

    pub fn bp_window(&self, end: DateTime<Utc>, days: u32) -> &[BpPoint] {
        window_slice(&self.blood_pressure, |p| p.t, end, days)
    }

    /// History restricted to data strictly before `t`.
    pub fn before(&self, t: DateTime<Utc>) -> VitalHistory {
        let series =
            self.series.iter().map(|(k, v)| (*k, v[..v.partition_point(|p| p.t < t)].to_vec())).filter(|(_, v)| !v.is_empty()).collect();
        let bp = &self.blood_pressure[..self.blood_pressure.partition_point(|p| p.t < t)];
        VitalHistory { patient_id: self.patient_id.clone(), series, blood_pressure: bp.to_vec() }
    }

    /// Latest timestamp stored anywhere in the history.
    pub fn latest(&self) -> Option<DateTime<Utc>> {
        self.series.values().filter_map(|v| v.last()).map(|p| p.t).max()
    }

    pub fn is_empty(&self) -> bool {
        self.series.values().all(Vec::is_empty)
    }
}

fn window_slice<P>(seq: &[P], time: impl Fn(&P) -> DateTime<Utc>, end: DateTime<Utc>, days: u32) -> &[P] {
    if days == 0 {
        return &[];
    }
    let start = end - Duration::seconds(days as i64 * SECONDS_PER_DAY);
    let lo = seq.partition_point(|p| time(p) < start);
    let hi = seq.partition_point(|p| time(p) < end);
    &seq[lo..hi.max(lo)]
}

/// A rule that fired, with the severity it carries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiredRule {
    pub id: String,
    pub severity: SeverityLevel,
}

impl FiredRule {
    pub fn new(id: impl Into<String>, severity: SeverityLevel) -> Self {
        Self { id: id.into(), severity }
    }
}

/// A rater's output together with the evidence behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriageTrace {
    pub rater_id: String,
    pub severity: SeverityLevel,
    pub action: Option<ActionType>,
    pub fired_rules: Vec<FiredRule>,
    pub component_scores: BTreeMap<String, f64>,
    pub duration_secs: f64,
}

impl TriageTrace {
    /// Severity is the maximum over `rules` (NOT AN ISSUE when none fired).
    pub fn from_rules(rater_id: impl Into<String>, rules: Vec<FiredRule>) -> Self {
        let severity = rules.iter().map(|r| r.severity).max().unwrap_or(SeverityLevel::NotAnIssue);
        Self {
            rater_id: rater_id.into(),
            severity,
            action: None,
            fired_rules: rules,
            component_scores: BTreeMap::new(),
            duration_secs: 0.0,
        }
    }

    /// Trace for an opaque rater that reports only a verdict. The verdict is
    /// recorded as a single `verdict` rule so the max invariant holds.
    pub fn verdict(rater_id: impl Into<String>, severity: SeverityLevel, action: Option<ActionType>) -> Self {
        let rules = if severity > SeverityLevel::NotAnIssue { vec![FiredRule::new("verdict", severity)] } else { Vec::new() };
        let mut t = Self::from_rules(rater_id, rules);
        t.action = action;
        t
    }

    pub fn with_score(mut self, key: impl Into<String>, value: f64) -> Self {
        self.component_scores.insert(key.into(), value);
        self
    }

    pub fn with_duration(mut self, secs: f64) -> Self {
        self.duration_secs = secs.max(0.0);
        self
    }

    pub fn fired_ids(&self) -> impl Iterator<Item = &str> {
        self.fired_rules.iter().map(|r| r.id.as_str())
    }

    pub fn is_consistent(&self) -> bool {
        let max = self.fired_rules.iter().map(|r| r.severity).max().unwrap_or(SeverityLevel::NotAnIssue);
        max == self.severity
    }
}
