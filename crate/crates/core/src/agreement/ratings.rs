use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::StatsError;
use crate::vitals::SeverityLevel;

/// One row of the ratings file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub item_id: String,
    pub rater_id: String,
    pub label: SeverityLevel,
    pub duration_secs: f64,
    /// 1 for the first presentation; 2.. for repeated anchor presentations.
    pub presentation_index: u8,
}

pub fn read_ratings(path: impl AsRef<Path>) -> Result<Vec<RatingRecord>, StatsError> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(StatsError::from)).collect()
}

pub fn write_ratings<'a, W: std::io::Write>(out: W, records: impl IntoIterator<Item = &'a RatingRecord>) -> Result<(), StatsError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Items × raters label table. Cells are empty where a rater did not grade
/// an item. The category set is always the four severity levels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RatingMatrix {
    items: Vec<String>,
    raters: Vec<String>,
    cells: Vec<Vec<Option<SeverityLevel>>>,
    item_index: BTreeMap<String, usize>,
    rater_index: BTreeMap<String, usize>,
}

impl RatingMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a matrix from rows of labels; row `i` belongs to `items[i]`.
    pub fn from_rows(items: Vec<String>, raters: Vec<String>, rows: Vec<Vec<Option<SeverityLevel>>>) -> Result<Self, StatsError> {
        if rows.len() != items.len() || rows.iter().any(|r| r.len() != raters.len()) {
            return Err(StatsError::Invalid("row shape does not match item/rater lists".into()));
        }
        let mut m = Self::new();
        for r in &raters {
            m.rater(r);
        }
        for (item, row) in items.iter().zip(rows) {
            let i = m.push_item(item.clone());
            m.cells[i] = row;
        }
        Ok(m)
    }

    /// Matrix from fully-populated rows of codes; raters are named `r0..`.
    pub fn from_codes(rows: &[Vec<u8>]) -> Result<Self, StatsError> {
        let width = rows.first().map_or(0, Vec::len);
        let raters = (0..width).map(|j| format!("r{j}")).collect();
        let items = (0..rows.len()).map(|i| format!("i{i}")).collect();
        let cells = rows
            .iter()
            .map(|r| r.iter().map(|&c| SeverityLevel::try_from(c).map(Some)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| StatsError::Invalid(e.to_string()))?;
        Self::from_rows(items, raters, cells)
    }

    /// First-presentation labels from ratings-file records. Repeated anchor
    /// presentations are ignored here.
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a RatingRecord>) -> Self {
        let mut m = Self::new();
        for r in records {
            if r.presentation_index <= 1 {
                m.set(&r.item_id, &r.rater_id, r.label);
            }
        }
        m
    }

    fn push_item(&mut self, id: String) -> usize {
        let i = self.items.len();
        self.items.push(id.clone());
        self.cells.push(vec![None; self.raters.len()]);
        self.item_index.entry(id).or_insert(i);
        i
    }

    fn item(&mut self, id: &str) -> usize {
        match self.item_index.get(id) {
            Some(&i) => i,
            None => self.push_item(id.to_string()),
        }
    }

    fn rater(&mut self, id: &str) -> usize {
        if let Some(&j) = self.rater_index.get(id) {
            return j;
        }
        let j = self.raters.len();
        self.raters.push(id.to_string());
        self.rater_index.insert(id.to_string(), j);
        for row in &mut self.cells {
            row.push(None);
        }
        j
    }

    pub fn set(&mut self, item: &str, rater: &str, label: SeverityLevel) {
        let j = self.rater(rater);
        let i = self.item(item);
        self.cells[i][j] = Some(label);
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn raters(&self) -> &[String] {
        &self.raters
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn row(&self, i: usize) -> &[Option<SeverityLevel>] {
        &self.cells[i]
    }

    pub fn label(&self, item: &str, rater: &str) -> Option<SeverityLevel> {
        let i = *self.item_index.get(item)?;
        let j = *self.rater_index.get(rater)?;
        self.cells[i][j]
    }

    /// Labels present on row `i`, in rater order.
    pub fn labels(&self, i: usize) -> Vec<SeverityLevel> {
        self.cells[i].iter().flatten().copied().collect()
    }

    pub fn category_counts(&self, i: usize) -> [u64; 4] {
        let mut c = [0u64; 4];
        for l in self.cells[i].iter().flatten() {
            c[l.index()] += 1;
        }
        c
    }

    /// Rows `idx` (repeats allowed), as used by item-level resampling.
    pub fn select_items(&self, idx: &[usize]) -> RatingMatrix {
        let mut m = RatingMatrix { raters: self.raters.clone(), rater_index: self.rater_index.clone(), ..Default::default() };
        for &i in idx {
            let k = m.items.len();
            m.items.push(self.items[i].clone());
            m.cells.push(self.cells[i].clone());
            m.item_index.entry(self.items[i].clone()).or_insert(k);
        }
        m
    }

    /// Permutes raters (columns) by `order`, where `order[k]` is the old index.
    pub fn permute_raters(&self, order: &[usize]) -> RatingMatrix {
        let raters: Vec<String> = order.iter().map(|&j| self.raters[j].clone()).collect();
        let rows = self.cells.iter().map(|row| order.iter().map(|&j| row[j]).collect()).collect();
        Self::from_rows(self.items.clone(), raters, rows).expect("permutation keeps shape")
    }
}
