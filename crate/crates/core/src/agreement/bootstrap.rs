use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::StatsError;
use crate::scalar::Scalar;

/// Percentile (2.5 / 97.5) bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapCi<T> {
    pub low: T,
    pub high: T,
    pub resamples: usize,
    pub redraws: usize,
    pub seed: u64,
}

/// Linear-interpolation quantile of sorted data (`q` in [0, 1]).
pub fn percentile<T: Scalar>(sorted: &[T], q: f64) -> T {
    assert!(!sorted.is_empty(), "percentile of empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = T::lit(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

// Each attempt owns a ChaCha stream keyed by its index, so results do not
// depend on scheduling or worker count.
fn draw(n: usize, seed: u64, attempt: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(attempt as u64);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Resamples `n` units with replacement and evaluates `estimator` on the
/// index vector of each resample. Undefined resamples (estimator returns
/// `None`) are redrawn, up to 10x the requested count.
pub fn bootstrap<T, F>(n: usize, resamples: usize, seed: u64, estimator: F) -> Result<BootstrapCi<T>, StatsError>
where
    T: Scalar,
    F: Fn(&[usize]) -> Option<T> + Sync,
{
    if resamples == 0 {
        return Err(StatsError::Invalid("resamples must be at least 1".into()));
    }
    if n == 0 {
        return Err(StatsError::Undefined("no units to resample".into()));
    }
    let cap = resamples.saturating_mul(10);
    let mut values: Vec<T> = Vec::with_capacity(resamples);
    let mut attempts = 0usize;
    let mut failures = 0usize;
    while values.len() < resamples && attempts < cap {
        let need = (resamples - values.len()).min(cap - attempts);
        let batch: Vec<Option<T>> =
            (attempts..attempts + need).into_par_iter().map(|a| estimator(&draw(n, seed, a)).filter(|v| v.is_finite())).collect();
        attempts += need;
        for v in batch {
            match v {
                Some(v) => values.push(v),
                None => failures += 1,
            }
        }
    }
    if failures * 2 > attempts || values.len() < resamples {
        return Err(StatsError::CiFailure { failures, attempts });
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    Ok(BootstrapCi { low: percentile(&values, 0.025), high: percentile(&values, 0.975), resamples, redraws: failures, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 0.5), 3.0);
        assert_eq!(percentile(&v, 0.1), 1.4);
        assert_eq!(percentile(&v, 1.0), 5.0);
    }

    #[test]
    fn same_seed_same_interval() {
        let data: Vec<f64> = (0..50).map(|i| (i * 7 % 13) as f64).collect();
        let mean = |idx: &[usize]| Some(idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64);
        let a = bootstrap(data.len(), 500, 11, mean).unwrap();
        let b = bootstrap(data.len(), 500, 11, mean).unwrap();
        assert_eq!(a, b);
        let c = bootstrap(data.len(), 500, 12, mean).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn mostly_undefined_estimator_fails() {
        let r = bootstrap(10, 100, 1, |idx: &[usize]| (idx[0] == 0).then_some(1.0f64));
        assert!(matches!(r, Err(StatsError::CiFailure { .. })));
    }

    #[test]
    fn occasional_undefined_resamples_are_redrawn() {
        let r = bootstrap(10, 200, 1, |idx: &[usize]| (idx[0] != 0).then_some(idx[1] as f64)).unwrap();
        assert!(r.redraws > 0);
        assert!(r.low <= r.high);
    }

    #[test]
    fn zero_resamples_rejected() {
        assert!(bootstrap(3, 0, 1, |_: &[usize]| Some(0.0f64)).is_err());
    }
}
