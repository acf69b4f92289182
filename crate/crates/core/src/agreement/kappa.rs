use serde::{Deserialize, Serialize};

use super::bootstrap::bootstrap;
use super::confusion::ConfusionMatrix4;
use super::ratings::RatingMatrix;
use super::StatsError;
use crate::scalar::Scalar;
use crate::vitals::SeverityLevel;

/// Agreement weights on the four ordinal codes, `w[i][j]`.
pub type Weights<T> = [[T; 4]; 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaMethod {
    Fleiss,
    FleissLinearWeighted,
    CohenQuadratic,
}

impl KappaMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            KappaMethod::Fleiss => "fleiss",
            KappaMethod::FleissLinearWeighted => "fleiss_linear_weighted",
            KappaMethod::CohenQuadratic => "cohen_quadratic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaEstimate<T> {
    pub method: KappaMethod,
    pub point: T,
    pub ci_low: T,
    pub ci_high: T,
    pub resamples: usize,
    pub seed: u64,
    /// Resamples that were redrawn because the estimator was undefined.
    pub redraws: usize,
}

pub fn identity_weights<T: Scalar>() -> Weights<T> {
    let mut w = [[T::zero(); 4]; 4];
    for (i, row) in w.iter_mut().enumerate() {
        row[i] = T::one();
    }
    w
}

/// `1 - |i-j|/3`.
pub fn linear_weights<T: Scalar>() -> Weights<T> {
    let mut w = [[T::zero(); 4]; 4];
    for (i, row) in w.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = T::one() - T::from_count(i.abs_diff(j)) / T::lit(3.0);
        }
    }
    w
}

/// `1 - (i-j)^2/9`.
pub fn quadratic_weights<T: Scalar>() -> Weights<T> {
    let mut w = [[T::zero(); 4]; 4];
    for (i, row) in w.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let d = T::from_count(i.abs_diff(j));
            *cell = T::one() - d * d / T::lit(9.0);
        }
    }
    w
}

/// Fleiss κ with the items it used and the ones it dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct FleissDetail<T> {
    pub kappa: T,
    pub raters_per_item: usize,
    pub items_used: usize,
    pub dropped: Vec<String>,
}

struct CountTable {
    rows: Vec<[u64; 4]>,
    n: u64,
    dropped: Vec<String>,
}

// Items rated by fewer raters than the best-covered item are dropped so that
// every remaining row has the same rating count.
fn count_table(m: &RatingMatrix) -> Result<CountTable, StatsError> {
    let all: Vec<[u64; 4]> = (0..m.n_items()).map(|i| m.category_counts(i)).collect();
    let n = all.iter().map(|c| c.iter().sum::<u64>()).max().unwrap_or(0);
    if n < 2 {
        return Err(StatsError::Undefined("fewer than 2 ratings per item".into()));
    }
    let mut rows = Vec::with_capacity(all.len());
    let mut dropped = Vec::new();
    for (i, c) in all.into_iter().enumerate() {
        if c.iter().sum::<u64>() == n {
            rows.push(c);
        } else {
            dropped.push(m.items()[i].clone());
        }
    }
    Ok(CountTable { rows, n, dropped })
}

fn weighted_from_counts<T: Scalar>(t: &CountTable, w: &Weights<T>) -> Result<T, StatsError> {
    if t.rows.is_empty() {
        return Err(StatsError::Undefined("all items dropped".into()));
    }
    let big_n = T::from_count(t.rows.len());
    let n = T::lit(t.n as f64);
    let mut p = [T::zero(); 4];
    let mut po = T::zero();
    for row in &t.rows {
        let mut agree = T::zero();
        for j in 0..4 {
            let nj = T::lit(row[j] as f64);
            p[j] = p[j] + nj;
            for k in 0..4 {
                let nk = T::lit(row[k] as f64) - if j == k { T::one() } else { T::zero() };
                agree = agree + w[j][k] * nj * nk;
            }
        }
        po = po + agree / (n * (n - T::one()));
    }
    po = po / big_n;
    for pj in &mut p {
        *pj = *pj / (big_n * n);
    }
    let mut pe = T::zero();
    for j in 0..4 {
        for k in 0..4 {
            pe = pe + w[j][k] * p[j] * p[k];
        }
    }
    let denom = T::one() - pe;
    if denom.abs() <= T::epsilon() * T::lit(16.0) {
        return Err(StatsError::Undefined("chance agreement is 1".into()));
    }
    Ok((po - pe) / denom)
}

pub fn fleiss_detail<T: Scalar>(m: &RatingMatrix, method: KappaMethod) -> Result<FleissDetail<T>, StatsError> {
    let t = count_table(m)?;
    let w = match method {
        KappaMethod::Fleiss => identity_weights(),
        KappaMethod::FleissLinearWeighted => linear_weights(),
        KappaMethod::CohenQuadratic => return Err(StatsError::Invalid("cohen_quadratic is not a Fleiss variant".into())),
    };
    let kappa = weighted_from_counts(&t, &w)?;
    Ok(FleissDetail { kappa, raters_per_item: t.n as usize, items_used: t.rows.len(), dropped: t.dropped })
}

pub fn fleiss_kappa<T: Scalar>(m: &RatingMatrix) -> Result<T, StatsError> {
    fleiss_detail(m, KappaMethod::Fleiss).map(|d| d.kappa)
}

pub fn fleiss_kappa_weighted<T: Scalar>(m: &RatingMatrix) -> Result<T, StatsError> {
    fleiss_detail(m, KappaMethod::FleissLinearWeighted).map(|d| d.kappa)
}

/// Category-specific Fleiss κ; `None` for categories that never occur.
pub fn fleiss_per_category<T: Scalar>(m: &RatingMatrix) -> Result<[Option<T>; 4], StatsError> {
    let t = count_table(m)?;
    if t.rows.is_empty() {
        return Err(StatsError::Undefined("all items dropped".into()));
    }
    let big_n = T::from_count(t.rows.len());
    let n = T::lit(t.n as f64);
    let mut out = [None; 4];
    for (j, slot) in out.iter_mut().enumerate() {
        let total: u64 = t.rows.iter().map(|r| r[j]).sum();
        let pj = T::lit(total as f64) / (big_n * n);
        let q = pj * (T::one() - pj);
        if q <= T::zero() {
            continue;
        }
        let dis: T = t.rows.iter().map(|r| T::lit((r[j] * (t.n - r[j])) as f64)).fold(T::zero(), |a, b| a + b);
        *slot = Some(T::one() - dis / (big_n * n * (n - T::one()) * q));
    }
    Ok(out)
}

/// Cohen's weighted κ on a confusion matrix.
pub fn cohen_weighted_kappa<T: Scalar>(c: &ConfusionMatrix4, w: &Weights<T>) -> Result<T, StatsError> {
    let total = c.total();
    if total == 0 {
        return Err(StatsError::Undefined("empty confusion matrix".into()));
    }
    let n = T::lit(total as f64);
    let rows = c.row_totals();
    let cols = c.col_totals();
    // Sums stay in counts until the end so integer diagonals divide exactly.
    let mut po = T::zero();
    let mut pe = T::zero();
    for i in 0..4 {
        for j in 0..4 {
            po = po + w[i][j] * T::lit(c.counts[i][j] as f64);
            pe = pe + w[i][j] * T::lit(rows[i] as f64) * T::lit(cols[j] as f64);
        }
    }
    po = po / n;
    pe = pe / (n * n);
    let denom = T::one() - pe;
    if denom.abs() <= T::epsilon() * T::lit(16.0) {
        return Err(StatsError::Undefined("degenerate marginals".into()));
    }
    Ok((po - pe) / denom)
}

pub fn quadratic_weighted_kappa<T: Scalar>(c: &ConfusionMatrix4) -> Result<T, StatsError> {
    cohen_weighted_kappa(c, &quadratic_weights())
}

/// Fleiss-family estimate with a bootstrap interval over items.
pub fn kappa_estimate<T: Scalar>(
    m: &RatingMatrix,
    method: KappaMethod,
    resamples: usize,
    seed: u64,
) -> Result<KappaEstimate<T>, StatsError> {
    let point = fleiss_detail::<T>(m, method)?.kappa;
    let ci = bootstrap(m.n_items(), resamples, seed, |idx| fleiss_detail::<T>(&m.select_items(idx), method).ok().map(|d| d.kappa))?;
    Ok(KappaEstimate { method, point, ci_low: ci.low, ci_high: ci.high, resamples, seed, redraws: ci.redraws })
}

/// Quadratic-weighted κ over (predicted, reference) pairs with a bootstrap
/// interval over the pairs.
pub fn qwk_estimate<T: Scalar>(
    pairs: &[(SeverityLevel, SeverityLevel)],
    resamples: usize,
    seed: u64,
) -> Result<KappaEstimate<T>, StatsError> {
    let point = quadratic_weighted_kappa::<T>(&ConfusionMatrix4::from_pairs(pairs.iter().copied()))?;
    let ci = bootstrap(pairs.len(), resamples, seed, |idx| {
        let c = ConfusionMatrix4::from_pairs(idx.iter().map(|&i| pairs[i]));
        quadratic_weighted_kappa::<T>(&c).ok()
    })?;
    Ok(KappaEstimate { method: KappaMethod::CohenQuadratic, point, ci_low: ci.low, ci_high: ci.high, resamples, seed, redraws: ci.redraws })
}
