use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::reference::{RefLabel, ReferenceStandard};
use super::StatsError;
use crate::scalar::Proportion;
use crate::vitals::{collapse_actionable, within_one, SeverityLevel};

/// 4x4 counts indexed `[predicted.index()][reference.index()]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix4 {
    pub counts: [[u64; 4]; 4],
}

// Grid files list rows and columns from most to least severe.
const DISPLAY_ORDER: [SeverityLevel; 4] =
    [SeverityLevel::Emergency, SeverityLevel::Urgent, SeverityLevel::Monitor, SeverityLevel::NotAnIssue];

impl ConfusionMatrix4 {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (SeverityLevel, SeverityLevel)>) -> Self {
        let mut c = Self::default();
        for (p, r) in pairs {
            c.add(p, r);
        }
        c
    }

    pub fn add(&mut self, pred: SeverityLevel, reference: SeverityLevel) {
        self.counts[pred.index()][reference.index()] += 1;
    }

    pub fn get(&self, pred: SeverityLevel, reference: SeverityLevel) -> u64 {
        self.counts[pred.index()][reference.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_totals(&self) -> [u64; 4] {
        self.counts.map(|r| r.iter().sum())
    }

    pub fn col_totals(&self) -> [u64; 4] {
        let mut c = [0; 4];
        for row in &self.counts {
            for (j, v) in row.iter().enumerate() {
                c[j] += v;
            }
        }
        c
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::default();
        for i in 0..4 {
            for j in 0..4 {
                t.counts[j][i] = self.counts[i][j];
            }
        }
        t
    }

    pub fn trace(&self) -> u64 {
        (0..4).map(|i| self.counts[i][i]).sum()
    }

    /// Parses a grid file: four rows (predicted E, U, M, NI) of four
    /// integers (reference E, U, M, NI). `#` starts a comment. Leading row
    /// labels, separators (`,`, `|`, tabs), a header line and a trailing
    /// total column or `Total` row are tolerated.
    pub fn parse_grid(text: &str) -> Result<Self, StatsError> {
        let mut rows: Vec<[u64; 4]> = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() || line.to_ascii_lowercase().starts_with("total") {
                continue;
            }
            let nums: Vec<u64> = line
                .split(|c: char| c.is_whitespace() || c == ',' || c == '|')
                .filter(|t| !t.is_empty())
                .skip_while(|t| t.parse::<u64>().is_err())
                .map(|t| t.parse::<u64>().map_err(|_| StatsError::Fixture(format!("line {}: bad count {t:?}", ln + 1))))
                .collect::<Result<_, _>>()?;
            match nums.len() {
                0 => continue,
                4 | 5 => rows.push([nums[0], nums[1], nums[2], nums[3]]),
                k => return Err(StatsError::Fixture(format!("line {}: expected 4 counts, found {k}", ln + 1))),
            }
        }
        if rows.len() != 4 {
            return Err(StatsError::Fixture(format!("expected 4 rows, found {}", rows.len())));
        }
        let mut c = Self::default();
        for (r, pred) in rows.iter().zip(DISPLAY_ORDER) {
            for (v, reference) in r.iter().zip(DISPLAY_ORDER) {
                c.counts[pred.index()][reference.index()] = *v;
            }
        }
        Ok(c)
    }

    /// Plain grid in the same layout `parse_grid` reads.
    pub fn to_grid_string(&self) -> String {
        let mut s = String::from("# rows: predicted E U M NI; columns: reference E U M NI\n");
        for pred in DISPLAY_ORDER {
            let cells: Vec<String> = DISPLAY_ORDER.iter().map(|r| self.get(pred, *r).to_string()).collect();
            let _ = writeln!(s, "{}", cells.join(" "));
        }
        s
    }
}

/// (prediction, reference) pairs over non-excluded reference items, in item
/// id order.
pub fn paired(
    pred: &BTreeMap<String, SeverityLevel>,
    reference: &ReferenceStandard,
) -> Result<Vec<(SeverityLevel, SeverityLevel)>, StatsError> {
    let mut out = Vec::new();
    let mut missing = Vec::new();
    for (item, label) in &reference.entries {
        if let RefLabel::Label(r) = label {
            match pred.get(item) {
                Some(p) => out.push((*p, *r)),
                None => missing.push(item.clone()),
            }
        }
    }
    if missing.is_empty() {
        Ok(out)
    } else {
        Err(StatsError::MissingPredictions(missing))
    }
}

pub fn confusion(pred: &BTreeMap<String, SeverityLevel>, reference: &ReferenceStandard) -> Result<ConfusionMatrix4, StatsError> {
    paired(pred, reference).map(ConfusionMatrix4::from_pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub level: SeverityLevel,
    /// Correct / reference count.
    pub recall: Proportion,
    /// Correct / predicted count.
    pub precision: Proportion,
    pub reference_count: u64,
    pub predicted_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics4 {
    pub n: u64,
    pub exact: Proportion,
    pub within_one: Proportion,
    pub overtriage: Proportion,
    pub undertriage: Proportion,
    /// Indexed by severity code.
    pub per_category: [CategoryMetrics; 4],
}

pub fn metrics4(c: &ConfusionMatrix4) -> Metrics4 {
    let n = c.total();
    let (mut within, mut over, mut under) = (0, 0, 0);
    for p in SeverityLevel::ALL {
        for r in SeverityLevel::ALL {
            let v = c.get(p, r);
            if within_one(p, r) {
                within += v;
            }
            if p > r {
                over += v;
            } else if p < r {
                under += v;
            }
        }
    }
    let rows = c.row_totals();
    let cols = c.col_totals();
    let per_category = SeverityLevel::ALL.map(|l| {
        let i = l.index();
        CategoryMetrics {
            level: l,
            recall: Proportion::new(c.counts[i][i], cols[i]),
            precision: Proportion::new(c.counts[i][i], rows[i]),
            reference_count: cols[i],
            predicted_count: rows[i],
        }
    });
    Metrics4 {
        n,
        exact: Proportion::new(c.trace(), n),
        within_one: Proportion::new(within, n),
        overtriage: Proportion::new(over, n),
        undertriage: Proportion::new(under, n),
        per_category,
    }
}

/// Actionable (URGENT or EMERGENCY) vs non-actionable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub sensitivity: Proportion,
    pub specificity: Proportion,
    pub ppv: Proportion,
    pub npv: Proportion,
    pub fpr: Proportion,
    pub fnr: Proportion,
    pub accuracy: Proportion,
}

pub fn binary_metrics(c: &ConfusionMatrix4) -> BinaryMetrics {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for p in SeverityLevel::ALL {
        for r in SeverityLevel::ALL {
            let v = c.get(p, r);
            match (collapse_actionable(p), collapse_actionable(r)) {
                (true, true) => tp += v,
                (true, false) => fp += v,
                (false, false) => tn += v,
                (false, true) => fn_ += v,
            }
        }
    }
    BinaryMetrics {
        tp,
        fp,
        tn,
        fn_,
        sensitivity: Proportion::new(tp, tp + fn_),
        specificity: Proportion::new(tn, tn + fp),
        ppv: Proportion::new(tp, tp + fp),
        npv: Proportion::new(tn, tn + fn_),
        fpr: Proportion::new(fp, tn + fp),
        fnr: Proportion::new(fn_, tp + fn_),
        accuracy: Proportion::new(tp + tn, tp + fp + tn + fn_),
    }
}
