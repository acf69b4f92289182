use std::fmt::{self, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    AdjudicationSection, ComparisonSection, IntraSection, IrrSection, LooRow, LooSection, RaterValidation, StudyError, ValidationSection,
};
use crate::agreement::KappaEstimate;
use crate::scalar::Proportion;
use crate::vitals::SeverityLevel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cell {
    Text { text: String },
    Count { count: u64 },
    Rate { num: u64, den: u64 },
    Kappa { point: Option<f64>, low: Option<f64>, high: Option<f64> },
}

impl Cell {
    fn text(s: impl Into<String>) -> Self {
        Cell::Text { text: s.into() }
    }

    fn rate(p: Proportion) -> Self {
        Cell::Rate { num: p.num, den: p.den }
    }

    fn kappa(k: Option<&KappaEstimate<f64>>) -> Self {
        Cell::Kappa { point: k.map(|k| k.point), low: k.map(|k| k.ci_low), high: k.map(|k| k.ci_high) }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Text { text } => f.write_str(text),
            Cell::Count { count } => write!(f, "{count}"),
            Cell::Rate { num, den } => write!(f, "{}", Proportion::new(*num, *den)),
            Cell::Kappa { point: None, .. } => f.write_str("undefined"),
            Cell::Kappa { point: Some(p), low: Some(l), high: Some(h) } => write!(f, "{p:.3} (95% CI {l:.3}, {h:.3})"),
            Cell::Kappa { point: Some(p), .. } => write!(f, "{p:.3}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub key: String,
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Table {
    fn new(key: &str, title: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            key: key.into(),
            title: title.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn row(&mut self, cells: Vec<Cell>) {
        self.rows.push(cells);
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("### Table {}. {}\n\n", self.key, self.title);
        let _ = writeln!(s, "| {} |", self.columns.join(" | "));
        let _ = writeln!(s, "|{}", "---|".repeat(self.columns.len()));
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|c| c.to_string().replace('|', "/")).collect();
            let _ = writeln!(s, "| {} |", cells.join(" | "));
        }
        for n in &self.notes {
            let _ = write!(s, "\n{n}\n");
        }
        s
    }
}

/// All study sections. Every section is optional so single analyses can be
/// rendered on their own.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub seed: u64,
    pub irr: Option<IrrSection>,
    pub comparison: Option<ComparisonSection>,
    pub intra: Option<IntraSection>,
    pub validation: Option<ValidationSection>,
    pub loo: Option<LooSection>,
    pub adjudication: Option<AdjudicationSection>,
}

fn pct(x: f64) -> String {
    format!("{:.1}%", x * 100.0)
}

fn sum(ps: impl IntoIterator<Item = Proportion>) -> Proportion {
    ps.into_iter().fold(Proportion::new(0, 0), |a, b| Proportion::new(a.num + b.num, a.den + b.den))
}

fn irr_table(s: &IrrSection) -> Table {
    let mut t = Table::new(
        "3",
        format!("Self-agreement of {} (N={}, {} runs)", s.rater_id, s.items_used, s.runs),
        &["Category", "Fleiss kappa", "Distribution of runs"],
    );
    for c in &s.per_category {
        t.row(vec![
            Cell::text(c.level.label()),
            Cell::Kappa { point: c.kappa, low: c.ci.map(|c| c.0), high: c.ci.map(|c| c.1) },
            Cell::rate(c.share),
        ]);
    }
    let total = sum(s.per_category.iter().map(|c| c.share)).num;
    t.row(vec![Cell::text("Overall"), Cell::kappa(s.overall.as_ref()), Cell::rate(Proportion::new(total, total))]);
    t.row(vec![Cell::text("Overall, linear-weighted"), Cell::kappa(s.weighted.as_ref()), Cell::text("")]);
    t.row(vec![Cell::text(format!("Perfect {0}/{0} agreement", s.runs)), Cell::text(""), Cell::rate(s.perfect)]);
    for d in &s.by_device {
        t.row(vec![
            Cell::text(format!("Device: {}", d.device)),
            Cell::Kappa { point: d.kappa, low: None, high: None },
            Cell::rate(d.perfect),
        ]);
    }
    if s.deterministic {
        t.notes.push("Deterministic rater: repeated runs cannot disagree.".into());
    }
    if !s.items_excluded.is_empty() {
        let failed: u64 = s.failed_trials.values().sum();
        t.notes.push(format!(
            "{} of {} items excluded after {failed} failed trials ({:?}).",
            s.items_excluded.len(),
            s.items,
            s.failed_trials
        ));
    }
    if let Some(k) = &s.overall {
        t.notes.push(format!("Intervals: {} bootstrap resamples over items, seed {}.", k.resamples, k.seed));
    }
    t
}

fn comparison_table(s: &ComparisonSection) -> Table {
    let n = s.rows.first().map_or(0, |r| r.n);
    let mut t = Table::new(
        "4",
        format!("Alert rates by system (N={n})"),
        &["System", "URGENT/EMERGENCY", "EMERGENCY", "MONITOR", "NOT AN ISSUE", "Failed"],
    );
    for r in &s.rows {
        t.row(vec![
            Cell::text(&r.rater_id),
            Cell::rate(r.actionable),
            Cell::rate(r.emergency),
            Cell::rate(r.monitor),
            Cell::rate(r.not_an_issue),
            Cell::rate(r.failed),
        ]);
    }
    t
}

fn intra_table(s: &IntraSection) -> Table {
    let anchors = s.rows.first().map_or(0, |r| r.anchors);
    let mut t = Table::new(
        "5",
        format!("Intra-rater consistency ({anchors} anchors per reviewer, {} presentations each)", s.presentations),
        &["Reviewer", "All presentations identical"],
    );
    for r in &s.rows {
        t.row(vec![Cell::text(&r.reviewer), Cell::rate(r.consistent)]);
        if !r.incomplete.is_empty() {
            t.notes.push(format!("{}: {} incomplete anchors excluded.", r.reviewer, r.incomplete.len()));
        }
    }
    t.row(vec![Cell::text("Pooled"), Cell::rate(s.pooled)]);
    if let Some(m) = s.mean {
        t.row(vec![Cell::text("Mean of reviewer rates"), Cell::text(pct(m))]);
    }
    t
}

fn panel_table(v: &ValidationSection) -> Table {
    let p = &v.panel;
    let mut t = Table::new("6", "Inter-reviewer agreement", &["Metric", "Value"]);
    let pairwise = match (p.pairwise_mean, p.pairwise_min, p.pairwise_max) {
        (Some(m), Some(lo), Some(hi)) => format!("{} (range {} to {})", pct(m), pct(lo), pct(hi)),
        _ => "undefined".into(),
    };
    t.row(vec![Cell::text("Mean pairwise exact agreement"), Cell::text(pairwise)]);
    t.row(vec![Cell::text("Unanimous"), Cell::rate(p.unanimous)]);
    t.row(vec![Cell::text("Strict majority"), Cell::rate(p.majority)]);
    t.row(vec![Cell::text("No majority (excluded)"), Cell::rate(p.no_majority)]);
    for (a, b, x) in &p.pairs {
        t.row(vec![Cell::text(format!("Pair {a}/{b}")), Cell::rate(*x)]);
    }
    t
}

fn reviewer_table(v: &ValidationSection) -> Option<Table> {
    let rows = v.reviewer_vs.get(&v.primary)?;
    let mut t = Table::new("7", format!("Reviewer agreement with {}", v.primary), &["Reviewer", "Exact", "Binary", "Within one level"]);
    for r in rows {
        t.row(vec![Cell::text(&r.reviewer), Cell::rate(r.exact), Cell::rate(r.binary), Cell::rate(r.within_one)]);
    }
    t.row(vec![
        Cell::text("Pooled"),
        Cell::rate(sum(rows.iter().map(|r| r.exact))),
        Cell::rate(sum(rows.iter().map(|r| r.binary))),
        Cell::rate(sum(rows.iter().map(|r| r.within_one))),
    ]);
    Some(t)
}

fn performance_tables(v: &ValidationSection, r: &RaterValidation) -> [Table; 3] {
    let n = r.metrics.n;
    let mut t8 = Table::new("8", format!("{} against the majority reference (N={n})", r.rater_id), &["Metric", "Value"]);
    t8.row(vec![Cell::text("Four-level exact accuracy"), Cell::rate(r.metrics.exact)]);
    t8.row(vec![Cell::text("Quadratic-weighted kappa"), Cell::kappa(r.qwk.as_ref())]);
    t8.row(vec![Cell::text("Within one level"), Cell::rate(r.metrics.within_one)]);
    t8.row(vec![Cell::text("Overtriage"), Cell::rate(r.metrics.overtriage)]);
    t8.row(vec![Cell::text("Undertriage"), Cell::rate(r.metrics.undertriage)]);
    t8.notes.push(format!("{} of {} samples without a strict majority were excluded.", v.excluded.len(), v.samples));

    let mut t9 = Table::new(
        "9",
        format!("{} per-category performance (N={n})", r.rater_id),
        &["Category", "Reference prevalence", "Recall", "Precision"],
    );
    for c in r.metrics.per_category.iter().rev() {
        t9.row(vec![
            Cell::text(c.level.label()),
            Cell::rate(Proportion::new(c.reference_count, n)),
            Cell::rate(c.recall),
            Cell::rate(c.precision),
        ]);
    }

    let b = &r.binary;
    let mut t10 = Table::new("10", format!("{} actionable (E+U) vs non-actionable (M+NI) (N={n})", r.rater_id), &["Metric", "Value"]);
    t10.row(vec![Cell::text("Accuracy"), Cell::rate(b.accuracy)]);
    t10.row(vec![Cell::text("Sensitivity"), Cell::rate(b.sensitivity)]);
    t10.row(vec![Cell::text("Specificity"), Cell::rate(b.specificity)]);
    t10.row(vec![Cell::text("PPV"), Cell::rate(b.ppv)]);
    t10.row(vec![Cell::text("NPV"), Cell::rate(b.npv)]);
    if let Some(m) = &r.max_severity {
        t10.row(vec![Cell::text("Sensitivity, max-severity reference"), Cell::rate(m.sensitivity)]);
        t10.row(vec![Cell::text("Specificity, max-severity reference"), Cell::rate(m.specificity)]);
    }
    [t8, t9, t10]
}

fn head_to_head(v: &ValidationSection) -> Table {
    let mut cols = vec!["Metric"];
    cols.extend(v.raters.iter().map(|r| r.rater_id.as_str()));
    let mut t = Table::new("11", format!("Head-to-head against the majority reference (N={})", v.evaluable), &cols);
    let metric = |name: &str, f: &dyn Fn(&RaterValidation) -> Cell| {
        let mut row = vec![Cell::text(name)];
        row.extend(v.raters.iter().map(f));
        row
    };
    t.row(metric("Four-level exact accuracy", &|r| Cell::rate(r.metrics.exact)));
    t.row(metric("Actionable sensitivity (E+U)", &|r| Cell::rate(r.binary.sensitivity)));
    t.row(metric("Specificity (M+NI)", &|r| Cell::rate(r.binary.specificity)));
    t.row(metric("PPV", &|r| Cell::rate(r.binary.ppv)));
    t.row(metric("NPV", &|r| Cell::rate(r.binary.npv)));
    t.row(metric("QWK", &|r| Cell::kappa(r.qwk.as_ref())));
    t
}

fn confusion_table(r: &RaterValidation) -> Table {
    let mut t = Table::new(
        &format!("CM-{}", r.rater_id),
        format!("{} vs majority reference confusion matrix (N={})", r.rater_id, r.confusion.total()),
        &["Predicted \\ Reference", "EMERGENCY", "URGENT", "MONITOR", "NOT AN ISSUE", "Total"],
    );
    let order = [SeverityLevel::Emergency, SeverityLevel::Urgent, SeverityLevel::Monitor, SeverityLevel::NotAnIssue];
    for p in order {
        let mut row = vec![Cell::text(p.label())];
        row.extend(order.iter().map(|&q| Cell::Count { count: r.confusion.get(p, q) }));
        row.push(Cell::Count { count: r.confusion.row_totals()[p.index()] });
        t.row(row);
    }
    let mut total = vec![Cell::text("Total")];
    total.extend(order.iter().map(|q| Cell::Count { count: r.confusion.col_totals()[q.index()] }));
    total.push(Cell::Count { count: r.confusion.total() });
    t.row(total);
    t
}

fn loo_row(r: &LooRow, label: &str) -> Vec<Cell> {
    vec![
        Cell::text(label),
        Cell::Count { count: r.n },
        Cell::rate(r.exact),
        Cell::rate(r.emergency_sensitivity),
        Cell::rate(r.actionable_sensitivity),
        Cell::rate(r.overtriage),
    ]
}

fn loo_tables(s: &LooSection) -> [Table; 2] {
    let cols = ["Reviewer", "LOO samples", "Exact match", "Emergency sensitivity", "Actionable sensitivity", "Overtriage"];
    let mut t12 = Table::new("12", format!("Leave-one-out: each clinician vs {}", s.rater_id), &cols);
    for r in &s.clinicians {
        t12.row(loo_row(r, &r.reviewer));
    }
    t12.row(loo_row(&s.clinician_pooled, "Clinicians (pooled)"));
    t12.row(loo_row(&s.rater_pooled, &format!("{} (pooled)", s.rater_id)));
    t12.notes.push(format!(
        "Pooled rows sum each clinician subset; a sample appears once per assigned clinician. The {} overtriage cell is computed on the pooled set.",
        s.rater_id
    ));
    let mut a4 = Table::new("A4", format!("Leave-one-out: {} on each clinician subset", s.rater_id), &cols);
    for r in &s.rater_rows {
        a4.row(loo_row(r, &r.reviewer));
    }
    [t12, a4]
}

fn adjudication_table(s: &AdjudicationSection) -> Table {
    let mut cols = vec!["Category"];
    cols.extend(s.columns.iter().map(|c| c.adjudicator.as_str()));
    let mut t = Table::new(
        "13",
        format!("Adjudication of severe {} overtriage (gap of {} or more levels, N={})", s.rater_id, s.min_gap, s.cases.len()),
        &cols,
    );
    let row = |name: &str, f: fn(&super::AdjudicationColumn) -> Proportion| {
        let mut r = vec![Cell::text(name)];
        r.extend(s.columns.iter().map(|c| Cell::rate(f(c))));
        r
    };
    t.row(row("JUSTIFIED", |c| c.justified));
    t.row(row("DEBATABLE", |c| c.debatable));
    t.row(row("TRUE OVERTRIAGE", |c| c.true_overtriage));
    t.row(row("Not overtriage (JUSTIFIED + DEBATABLE)", |c| c.non_overtriage));
    t.notes.push(format!("Original majority NOT AN ISSUE: {}.", s.majority_not_an_issue));
    t
}

fn check(out: &mut Vec<String>, ok: bool, what: impl FnOnce() -> String) {
    if !ok {
        out.push(what());
    }
}

fn audit_validation(v: &RaterValidation, n: u64, out: &mut Vec<String>) {
    let id = &v.rater_id;
    let m = &v.metrics;
    let b = &v.binary;
    check(out, v.confusion.total() == n, || format!("{id}: confusion total {} != {n}", v.confusion.total()));
    for p in [m.exact, m.within_one, m.overtriage, m.undertriage, b.accuracy] {
        check(out, p.den == n, || format!("{id}: denominator {} != {n}", p.den));
    }
    check(out, m.exact.num + m.overtriage.num + m.undertriage.num == n, || format!("{id}: exact+over+under != {n}"));
    check(out, m.within_one.num >= m.exact.num, || format!("{id}: within-one below exact"));
    let prevalence: u64 = m.per_category.iter().map(|c| c.reference_count).sum();
    check(out, prevalence == n, || format!("{id}: prevalence sums to {prevalence}"));
    let hits: u64 = m.per_category.iter().map(|c| c.recall.num).sum();
    check(out, hits == m.exact.num, || format!("{id}: recall numerators {hits} != exact {}", m.exact.num));
    check(out, b.tp + b.fp + b.tn + b.fn_ == n, || format!("{id}: binary cells do not sum to {n}"));
    check(out, b.sensitivity.den + b.specificity.den == n, || format!("{id}: sensitivity/specificity split"));
    check(out, b.ppv.den + b.npv.den == n, || format!("{id}: ppv/npv split"));
    check(out, b.accuracy.num == b.tp + b.tn, || format!("{id}: binary accuracy"));
}

impl StudyReport {
    /// Report tables in presentation order.
    pub fn tables(&self) -> Vec<Table> {
        let mut out = Vec::new();
        if let Some(s) = &self.irr {
            out.push(irr_table(s));
        }
        if let Some(s) = &self.comparison {
            out.push(comparison_table(s));
        }
        if let Some(s) = &self.intra {
            out.push(intra_table(s));
        }
        if let Some(v) = &self.validation {
            out.push(panel_table(v));
            out.extend(reviewer_table(v));
            if let Some(r) = v.rater(&v.primary) {
                out.extend(performance_tables(v, r));
            }
            out.push(head_to_head(v));
        }
        if let Some(s) = &self.loo {
            out.extend(loo_tables(s));
        }
        if let Some(s) = &self.adjudication {
            out.push(adjudication_table(s));
        }
        if let Some(v) = &self.validation {
            out.extend(v.raters.iter().map(confusion_table));
        }
        out
    }

    pub fn table(&self, key: &str) -> Option<Table> {
        self.tables().into_iter().find(|t| t.key == key)
    }

    /// Internal-consistency failures; empty when every count re-sums.
    pub fn audit(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(s) = &self.irr {
            let shares = sum(s.per_category.iter().map(|c| c.share));
            let labels = s.items_used as u64 * u64::from(s.runs);
            check(&mut out, s.per_category.iter().all(|c| c.share.den == labels) && shares.num == labels, || {
                format!("table 3: run distribution sums to {} of {labels}", shares.num)
            });
            check(&mut out, s.perfect.den == s.items_used as u64, || "table 3: perfect-agreement denominator".into());
            check(&mut out, s.items_used + s.items_excluded.len() == s.items, || "table 3: items used + excluded".into());
            let dev: usize = s.by_device.iter().map(|d| d.items).sum();
            check(&mut out, dev == s.items_used, || format!("table 3: device rows sum to {dev}"));
        }
        if let Some(s) = &self.comparison {
            for r in &s.rows {
                let id = &r.rater_id;
                let parts = [r.emergency, r.urgent, r.monitor, r.not_an_issue, r.failed, r.actionable];
                check(&mut out, parts.iter().all(|p| p.den == r.n), || format!("table 4 {id}: denominators"));
                check(&mut out, r.emergency.num + r.urgent.num == r.actionable.num, || format!("table 4 {id}: E+U"));
                let total = r.actionable.num + r.monitor.num + r.not_an_issue.num + r.failed.num;
                check(&mut out, total == r.n, || format!("table 4 {id}: row sums to {total} of {}", r.n));
            }
        }
        if let Some(s) = &self.intra {
            for r in &s.rows {
                check(&mut out, r.consistent.den as usize + r.incomplete.len() == r.anchors, || format!("table 5 {}: anchors", r.reviewer));
            }
        }
        if let Some(v) = &self.validation {
            let n = v.samples as u64;
            let p = &v.panel;
            check(&mut out, [p.unanimous, p.majority, p.no_majority].iter().all(|x| x.den == n), || "table 6: denominators".into());
            check(&mut out, p.majority.num + p.no_majority.num == n, || "table 6: majority + no majority".into());
            check(&mut out, p.unanimous.num <= p.majority.num, || "table 6: unanimous above majority".into());
            check(&mut out, p.no_majority.num as usize == v.excluded.len(), || "table 6: exclusions".into());
            check(&mut out, v.evaluable + v.excluded.len() == v.samples, || "tables 8-11: evaluable + excluded".into());
            for (rater, rows) in &v.reviewer_vs {
                for r in rows {
                    check(&mut out, r.exact.den == r.binary.den && r.exact.den == r.within_one.den, || {
                        format!("table 7 {rater}/{}: denominators", r.reviewer)
                    });
                    check(&mut out, r.exact.num <= r.binary.num && r.exact.num <= r.within_one.num, || {
                        format!("table 7 {rater}/{}: exact exceeds a looser match", r.reviewer)
                    });
                }
            }
            for r in &v.raters {
                audit_validation(r, v.evaluable as u64, &mut out);
                if let Some(m) = &r.max_severity {
                    check(&mut out, m.tp + m.fp + m.tn + m.fn_ == n, || format!("{}: max-severity N", r.rater_id));
                }
            }
            if let Some(c) = &self.comparison {
                for r in &c.rows {
                    check(&mut out, r.n == n, || format!("table 4 {}: N {} differs from panel N {n}", r.rater_id, r.n));
                }
            }
        }
        if let Some(s) = &self.loo {
            for (c, a) in s.clinicians.iter().zip(&s.rater_rows) {
                let who = &c.reviewer;
                check(&mut out, c.n == a.n && c.assigned == a.assigned, || format!("table 12 {who}: subset sizes differ"));
                check(&mut out, c.n <= c.assigned, || format!("table 12 {who}: N above assigned"));
                for r in [c, a] {
                    check(&mut out, r.exact.den == r.n && r.overtriage.den == r.n, || format!("table 12 {who}: denominators"));
                    check(&mut out, r.emergency_sensitivity.den <= r.actionable_sensitivity.den, || {
                        format!("table 12 {who}: emergencies exceed actionable")
                    });
                }
            }
            check(&mut out, LooRow::pooled(&s.rater_id, &s.rater_rows) == s.rater_pooled, || "table 12: pooled row".into());
            let n: u64 = s.clinicians.iter().map(|r| r.n).sum();
            check(&mut out, s.rater_pooled.n == n, || format!("table 12: pooled N {} != {n}", s.rater_pooled.n));
        }
        if let Some(s) = &self.adjudication {
            let n = s.cases.len() as u64;
            check(&mut out, s.cases.iter().all(|c| c.gap >= s.min_gap), || "table 13: case below gap".into());
            for c in &s.columns {
                let total = c.justified.num + c.debatable.num + c.true_overtriage.num;
                check(&mut out, total == n && c.justified.den == n, || format!("table 13 {}: sums to {total}", c.adjudicator));
                check(&mut out, c.non_overtriage.num == c.justified.num + c.debatable.num, || {
                    format!("table 13 {}: non-overtriage", c.adjudicator)
                });
            }
        }
        out
    }

    /// Fails with every audit message when any check does not hold.
    pub fn verify(&self) -> Result<(), StudyError> {
        let problems = self.audit();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(StudyError::Audit(problems))
        }
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("# Triage study report\n\nSeed: {}\n\n", self.seed);
        for t in self.tables() {
            s.push_str(&t.to_markdown());
            s.push('\n');
        }
        let problems = self.audit();
        if problems.is_empty() {
            s.push_str("Internal-consistency audit: all checks passed.\n");
        } else {
            s.push_str("Internal-consistency audit FAILED:\n\n");
            for p in problems {
                let _ = writeln!(s, "- {p}");
            }
        }
        s
    }

    pub fn to_json(&self) -> Result<String, StudyError> {
        #[derive(Serialize)]
        struct Doc<'a> {
            report: &'a StudyReport,
            tables: Vec<Table>,
            audit: Vec<String>,
        }
        Ok(serde_json::to_string_pretty(&Doc { report: self, tables: self.tables(), audit: self.audit() })?)
    }

    /// Writes `report.md`, `report.json` and one JSON file per table.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<(), StudyError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir.join("tables"))?;
        std::fs::write(dir.join("report.md"), self.to_markdown())?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        for t in self.tables() {
            std::fs::write(dir.join("tables").join(format!("table_{}.json", t.key)), serde_json::to_string_pretty(&t)?)?;
        }
        Ok(())
    }
}
