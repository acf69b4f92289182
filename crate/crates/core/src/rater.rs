//! Uniform rater interface: rule baselines, seeded mocks, replay logs and an
//! external HTTP adapter all rate the same `RaterCase`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, Receiver, Sender};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adaptive::{adaptive_classify, AdaptiveConfig};
use crate::fixed::{fixed_classify, FixedConfig};
use crate::rng::named_rng;
use crate::sim::{ContextSnapshot, ContextStore, SampleCase};
use crate::vitals::{ActionType, Reading, SeverityLevel, TriageTrace, VitalHistory};

#[derive(Debug, thiserror::Error)]
pub enum RaterError {
    #[error("case {case}: context datum at {datum} postdates the reading at {reading}")]
    Temporal { case: String, datum: chrono::DateTime<chrono::Utc>, reading: chrono::DateTime<chrono::Utc> },
    #[error("invalid noise kernel: {0}")]
    Kernel(String),
    #[error("case {0}: reading not found")]
    MissingReading(String),
    #[error(transparent)]
    Context(#[from] crate::sim::ContextError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("replay log line {line}: {source}")]
    Log { line: usize, source: serde_json::Error },
}

/// One case as a rater sees it. Holds nothing about other raters' output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterCase {
    pub case_id: String,
    pub reading: Reading,
    pub snapshot: ContextSnapshot,
    /// Readings strictly before the case reading.
    pub history: VitalHistory,
}

impl RaterCase {
    /// Builds a case and checks that no context or history datum postdates
    /// the reading.
    pub fn new(case_id: impl Into<String>, reading: Reading, snapshot: ContextSnapshot, history: VitalHistory) -> Result<Self, RaterError> {
        let case = Self { case_id: case_id.into(), reading, snapshot, history };
        if let Some(d) = case.latest_datum().filter(|d| *d > case.reading.timestamp) {
            return Err(RaterError::Temporal { case: case.case_id, datum: d, reading: case.reading.timestamp });
        }
        Ok(case)
    }

    /// Latest timestamp across the snapshot, its as-of instant and history.
    pub fn latest_datum(&self) -> Option<chrono::DateTime<chrono::Utc>> {
        [self.snapshot.latest_datum(), Some(self.snapshot.as_of), self.history.latest()].into_iter().flatten().max()
    }

    pub fn is_temporally_correct(&self) -> bool {
        self.latest_datum().is_none_or(|d| d <= self.reading.timestamp) && self.history.latest().is_none_or(|d| d < self.reading.timestamp)
    }
}

/// Builds the rater case for every sample: as-of snapshot plus the
/// patient's history strictly before the reading.
pub fn build_cases(samples: &[SampleCase], readings: &[Reading], context: &ContextStore) -> Result<Vec<RaterCase>, RaterError> {
    let mut by_patient: BTreeMap<&str, Vec<&Reading>> = BTreeMap::new();
    for r in readings {
        by_patient.entry(r.patient_id.as_str()).or_default().push(r);
    }
    let by_id: BTreeMap<&str, &Reading> = readings.iter().map(|r| (r.reading_id.as_str(), r)).collect();
    samples
        .iter()
        .map(|s| {
            let reading = *by_id.get(s.reading_id.as_str()).ok_or_else(|| RaterError::MissingReading(s.sample_id.clone()))?;
            let own = by_patient.get(s.patient_id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
            let history = VitalHistory::from_readings(s.patient_id.clone(), own.iter().copied()).before(reading.timestamp);
            let snapshot = context.as_of(&s.patient_id, reading.timestamp)?;
            RaterCase::new(s.sample_id.clone(), reading.clone(), snapshot, history)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterVerdict {
    pub trace: TriageTrace,
    #[serde(default)]
    pub rationale: Option<String>,
    pub duration_secs: f64,
}

impl RaterVerdict {
    pub fn severity(&self) -> SeverityLevel {
        self.trace.severity
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Timeout,
    Malformed,
    Connection,
    /// The rater has no answer for this case (e.g. missing from a replay log).
    Unavailable,
}

/// A failed trial. Failures are results, not aborts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{kind:?}: {detail}")]
pub struct RaterFailure {
    pub kind: FailureKind,
    pub detail: String,
    pub duration_secs: f64,
}

impl RaterFailure {
    pub fn new(kind: FailureKind, detail: impl Into<String>, duration_secs: f64) -> Self {
        Self { kind, detail: detail.into(), duration_secs }
    }
}

pub type TrialResult = Result<RaterVerdict, RaterFailure>;

pub trait Rater: Send + Sync {
    fn id(&self) -> &str;

    /// Whether repeated runs on a case always return the same verdict.
    fn is_deterministic(&self) -> bool;

    /// Rates one case. `run` numbers independent trials from 0; stateless
    /// raters may ignore it.
    fn rate(&self, case: &RaterCase, run: u32) -> TrialResult;
}

impl<R: Rater + ?Sized> Rater for Box<R> {
    fn id(&self) -> &str {
        (**self).id()
    }

    fn is_deterministic(&self) -> bool {
        (**self).is_deterministic()
    }

    fn rate(&self, case: &RaterCase, run: u32) -> TrialResult {
        (**self).rate(case, run)
    }
}

fn elapsed(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

pub struct FixedRater {
    pub config: FixedConfig,
}

impl FixedRater {
    pub fn new(config: FixedConfig) -> Self {
        Self { config }
    }
}

impl Rater for FixedRater {
    fn id(&self) -> &str {
        crate::fixed::RATER_ID
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn rate(&self, case: &RaterCase, _run: u32) -> TrialResult {
        let start = Instant::now();
        let flags = case.snapshot.flags();
        let trace = fixed_classify(&case.reading, &flags, &case.history, &self.config);
        let d = elapsed(start);
        Ok(RaterVerdict { trace: trace.with_duration(d), rationale: None, duration_secs: d })
    }
}

pub struct AdaptiveRater {
    pub config: AdaptiveConfig,
}

impl AdaptiveRater {
    pub fn new(config: AdaptiveConfig) -> Self {
        Self { config }
    }
}

impl Rater for AdaptiveRater {
    fn id(&self) -> &str {
        crate::adaptive::RATER_ID
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn rate(&self, case: &RaterCase, _run: u32) -> TrialResult {
        let start = Instant::now();
        let trace = adaptive_classify::<f64>(&case.reading, &case.history, &self.config);
        let d = elapsed(start);
        Ok(RaterVerdict { trace: trace.with_duration(d), rationale: None, duration_secs: d })
    }
}

/// Row-stochastic matrix: `rows[i][j]` is P(emit j | latent i), indexed by
/// severity code.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 4]; 4]", into = "[[f64; 4]; 4]")]
pub struct NoiseKernel {
    rows: [[f64; 4]; 4],
}

impl TryFrom<[[f64; 4]; 4]> for NoiseKernel {
    type Error = RaterError;
    fn try_from(rows: [[f64; 4]; 4]) -> Result<Self, RaterError> {
        Self::new(rows)
    }
}

impl From<NoiseKernel> for [[f64; 4]; 4] {
    fn from(k: NoiseKernel) -> Self {
        k.rows
    }
}

impl NoiseKernel {
    pub fn new(rows: [[f64; 4]; 4]) -> Result<Self, RaterError> {
        for (i, r) in rows.iter().enumerate() {
            if r.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(RaterError::Kernel(format!("row {i} has a negative or non-finite entry")));
            }
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(RaterError::Kernel(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { rows })
    }

    pub fn identity() -> Self {
        let mut rows = [[0.0; 4]; 4];
        for (i, r) in rows.iter_mut().enumerate() {
            r[i] = 1.0;
        }
        Self { rows }
    }

    pub fn uniform() -> Self {
        Self { rows: [[0.25; 4]; 4] }
    }

    /// `p` on the diagonal; the rest split evenly over adjacent levels.
    pub fn adjacent(p: f64) -> Result<Self, RaterError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(RaterError::Kernel(format!("diagonal mass {p} outside [0, 1]")));
        }
        let mut rows = [[0.0; 4]; 4];
        for (i, r) in rows.iter_mut().enumerate() {
            r[i] = p;
            let nbrs: Vec<usize> = [i.checked_sub(1), (i < 3).then_some(i + 1)].into_iter().flatten().collect();
            for j in &nbrs {
                r[*j] = (1.0 - p) / nbrs.len() as f64;
            }
        }
        Self::new(rows)
    }

    /// `stay` on the diagonal; of the remainder, `up` goes one level up and
    /// the rest one level down. At the ends everything goes to the one
    /// neighbour.
    pub fn banded(stay: f64, up: f64) -> Result<Self, RaterError> {
        if !(0.0..=1.0).contains(&stay) || !(0.0..=1.0).contains(&up) {
            return Err(RaterError::Kernel(format!("banded({stay}, {up}) outside [0, 1]")));
        }
        let off = 1.0 - stay;
        let mut rows = [[0.0; 4]; 4];
        for (i, r) in rows.iter_mut().enumerate() {
            r[i] = stay;
            match i {
                0 => r[1] = off,
                3 => r[2] = off,
                _ => {
                    r[i + 1] = off * up;
                    r[i - 1] = off - off * up;
                }
            }
        }
        Self::new(rows)
    }

    pub fn rows(&self) -> &[[f64; 4]; 4] {
        &self.rows
    }

    /// Inverse-CDF draw for uniform `u` in [0, 1).
    pub fn sample(&self, latent: SeverityLevel, u: f64) -> SeverityLevel {
        let row = &self.rows[latent.index()];
        let mut acc = 0.0;
        let mut last = latent;
        for l in SeverityLevel::ALL {
            let p = row[l.index()];
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = l;
            if u < acc {
                return l;
            }
        }
        last
    }

    /// Probability that `runs` independent draws on a latent-`i` item all
    /// agree, averaged over `latent_mix` (indexed by code).
    pub fn perfect_agreement_rate(&self, latent_mix: &[f64; 4], runs: i32) -> f64 {
        (0..4).map(|i| latent_mix[i] * self.rows[i].iter().map(|p| p.powi(runs)).sum::<f64>()).sum()
    }
}

/// Stochastic rater that perturbs a latent label through a kernel. Each
/// (rater, case, run) draws from its own stream.
pub struct MockRater {
    id: String,
    kernel: NoiseKernel,
    latent: BTreeMap<String, SeverityLevel>,
    seed: u64,
    /// Simulated grading time range, seconds.
    pub duration_range: (f64, f64),
}

impl MockRater {
    pub fn new(id: impl Into<String>, kernel: NoiseKernel, latent: BTreeMap<String, SeverityLevel>, seed: u64) -> Self {
        Self { id: id.into(), kernel, latent, seed, duration_range: (5.0, 40.0) }
    }

    pub fn label_for(&self, case_id: &str, run: u32) -> Option<SeverityLevel> {
        let latent = *self.latent.get(case_id)?;
        let mut rng = named_rng(self.seed, &format!("mock/{}/{case_id}", self.id), u64::from(run));
        Some(self.kernel.sample(latent, rng.random::<f64>()))
    }
}

impl Rater for MockRater {
    fn id(&self) -> &str {
        &self.id
    }

    fn is_deterministic(&self) -> bool {
        self.kernel.rows.iter().all(|r| r.contains(&1.0))
    }

    fn rate(&self, case: &RaterCase, run: u32) -> TrialResult {
        let Some(latent) = self.latent.get(&case.case_id).copied() else {
            return Err(RaterFailure::new(FailureKind::Unavailable, "no latent label", 0.0));
        };
        let mut rng = named_rng(self.seed, &format!("mock/{}/{}", self.id, case.case_id), u64::from(run));
        let label = self.kernel.sample(latent, rng.random::<f64>());
        let (lo, hi) = self.duration_range;
        let d = if hi > lo { rng.random_range(lo..hi) } else { lo };
        let trace = TriageTrace::verdict(self.id.clone(), label, Some(default_action(label))).with_duration(d);
        Ok(RaterVerdict { trace, rationale: None, duration_secs: d })
    }
}

/// Conventional action for a severity, used by raters that only emit levels.
pub fn default_action(s: SeverityLevel) -> ActionType {
    match s {
        SeverityLevel::Emergency | SeverityLevel::Urgent => ActionType::UrgentReview,
        SeverityLevel::Monitor => ActionType::ClinicalReview,
        SeverityLevel::NotAnIssue => ActionType::NoAction,
    }
}

/// One line of a record/replay log (JSON Lines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub rater_id: String,
    pub case_id: String,
    pub run: u32,
    /// Present for successful trials.
    #[serde(default)]
    pub verdict: Option<RaterVerdict>,
    /// Present for failed trials.
    #[serde(default)]
    pub failure: Option<RaterFailure>,
}

impl ReplayRecord {
    pub fn from_result(rater_id: &str, case_id: &str, run: u32, r: &TrialResult) -> Self {
        let (verdict, failure) = match r {
            Ok(v) => (Some(v.clone()), None),
            Err(f) => (None, Some(f.clone())),
        };
        Self { rater_id: rater_id.into(), case_id: case_id.into(), run, verdict, failure }
    }

    pub fn result(&self) -> TrialResult {
        match (&self.verdict, &self.failure) {
            (Some(v), _) => Ok(v.clone()),
            (None, Some(f)) => Err(f.clone()),
            (None, None) => Err(RaterFailure::new(FailureKind::Malformed, "record has neither verdict nor failure", 0.0)),
        }
    }
}

pub fn write_replay_log<'a>(mut out: impl Write, records: impl IntoIterator<Item = &'a ReplayRecord>) -> Result<(), RaterError> {
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_replay_log(input: impl BufRead) -> Result<Vec<ReplayRecord>, RaterError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| RaterError::Log { line: i + 1, source })?);
    }
    Ok(out)
}

/// Serves recorded verdicts verbatim.
pub struct ReplayRater {
    id: String,
    records: BTreeMap<(String, u32), ReplayRecord>,
}

impl ReplayRater {
    /// Keeps the records of `rater_id`; the first record per (case, run) wins.
    pub fn new(rater_id: impl Into<String>, records: impl IntoIterator<Item = ReplayRecord>) -> Self {
        let id = rater_id.into();
        let mut map = BTreeMap::new();
        for r in records.into_iter().filter(|r| r.rater_id == id) {
            map.entry((r.case_id.clone(), r.run)).or_insert(r);
        }
        Self { id, records: map }
    }

    pub fn load(rater_id: impl Into<String>, path: impl AsRef<Path>) -> Result<Self, RaterError> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Ok(Self::new(rater_id, read_replay_log(f)?))
    }
}

impl Rater for ReplayRater {
    fn id(&self) -> &str {
        &self.id
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn rate(&self, case: &RaterCase, run: u32) -> TrialResult {
        match self.records.get(&(case.case_id.clone(), run)) {
            Some(r) => r.result(),
            None => Err(RaterFailure::new(FailureKind::Unavailable, "no recorded trial", 0.0)),
        }
    }
}

/// Wraps a rater and keeps every trial for later replay.
pub struct RecordingRater<R> {
    inner: R,
    log: Mutex<Vec<ReplayRecord>>,
}

impl<R: Rater> RecordingRater<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, log: Mutex::new(Vec::new()) }
    }

    /// Recorded trials ordered by (case, run).
    pub fn records(&self) -> Vec<ReplayRecord> {
        let mut v = self.log.lock().expect("log lock").clone();
        v.sort_by(|a, b| (&a.case_id, a.run).cmp(&(&b.case_id, b.run)));
        v
    }
}

impl<R: Rater> Rater for RecordingRater<R> {
    fn id(&self) -> &str {
        self.inner.id()
    }

    fn is_deterministic(&self) -> bool {
        self.inner.is_deterministic()
    }

    fn rate(&self, case: &RaterCase, run: u32) -> TrialResult {
        let r = self.inner.rate(case, run);
        let rec = ReplayRecord::from_result(self.inner.id(), &case.case_id, run, &r);
        self.log.lock().expect("log lock").push(rec);
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalConfig {
    pub id: String,
    pub endpoint: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    /// Carried as metadata only.
    #[serde(default = "default_turns")]
    pub max_reasoning_turns: u32,
}

fn default_timeout() -> f64 {
    120.0
}
fn default_in_flight() -> usize {
    4
}
fn default_turns() -> u32 {
    15
}

impl ExternalConfig {
    pub fn new(id: impl Into<String>, endpoint: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            endpoint: endpoint.into(),
            timeout_secs: default_timeout(),
            max_in_flight: default_in_flight(),
            max_reasoning_turns: default_turns(),
        }
    }
}

/// Request body sent to an external rater.
#[derive(Debug, Serialize)]
pub struct ExternalRequest<'a> {
    pub case_id: &'a str,
    pub run: u32,
    pub reading: &'a Reading,
    pub snapshot: &'a ContextSnapshot,
    pub history: &'a VitalHistory,
}

/// Response body expected from an external rater.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalResponse {
    /// Severity code 0..=3.
    pub severity: u8,
    #[serde(default)]
    pub action: Option<ActionType>,
    #[serde(default)]
    pub rationale: Option<String>,
}

/// HTTP adapter. One POST per trial, no retries; in-flight requests are
/// bounded by a token channel.
pub struct ExternalRater {
    config: ExternalConfig,
    agent: ureq::Agent,
    tokens: (Sender<()>, Receiver<()>),
}

impl ExternalRater {
    pub fn new(config: ExternalConfig) -> Self {
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(Duration::from_secs_f64(config.timeout_secs.max(0.001)))).build().into();
        let limit = config.max_in_flight.max(1);
        let (tx, rx) = bounded(limit);
        for _ in 0..limit {
            tx.send(()).expect("token channel has capacity");
        }
        Self { config, agent, tokens: (tx, rx) }
    }

    pub fn config(&self) -> &ExternalConfig {
        &self.config
    }

    fn call(&self, case: &RaterCase, run: u32) -> Result<ExternalResponse, (FailureKind, String)> {
        let body =
            ExternalRequest { case_id: &case.case_id, run, reading: &case.reading, snapshot: &case.snapshot, history: &case.history };
        let mut resp = self.agent.post(&self.config.endpoint).send_json(&body).map_err(classify)?;
        let text = resp.body_mut().read_to_string().map_err(classify)?;
        serde_json::from_str::<ExternalResponse>(&text).map_err(|e| (FailureKind::Malformed, e.to_string()))
    }
}

fn classify(e: ureq::Error) -> (FailureKind, String) {
    let kind = match &e {
        ureq::Error::Timeout(_) => FailureKind::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => FailureKind::Timeout,
        ureq::Error::Json(_) | ureq::Error::Protocol(_) => FailureKind::Malformed,
        _ => FailureKind::Connection,
    };
    (kind, e.to_string())
}

impl Rater for ExternalRater {
    fn id(&self) -> &str {
        &self.config.id
    }

    fn is_deterministic(&self) -> bool {
        false
    }

    fn rate(&self, case: &RaterCase, run: u32) -> TrialResult {
        self.tokens.1.recv().expect("token channel open");
        let start = Instant::now();
        let out = self.call(case, run);
        let d = elapsed(start);
        self.tokens.0.send(()).expect("token channel open");
        let resp = out.map_err(|(k, detail)| RaterFailure::new(k, detail, d))?;
        let severity = SeverityLevel::try_from(resp.severity).map_err(|e| RaterFailure::new(FailureKind::Malformed, e.to_string(), d))?;
        let trace = TriageTrace::verdict(self.config.id.clone(), severity, resp.action).with_duration(d);
        Ok(RaterVerdict { trace, rationale: resp.rationale, duration_secs: d })
    }
}
