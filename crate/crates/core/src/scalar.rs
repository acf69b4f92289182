//! Scalar abstraction shared by the numeric estimators.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the estimators are generic over (`f32` or `f64`).
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static {
    /// Converts an `f64` literal, panicking only for values the type cannot hold.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Exact count ratio kept alongside its decimal value.
///
/// Unlike a reduced rational, the numerator and denominator are the raw
/// counts, so `102/104` stays `102/104`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Proportion {
    pub num: u64,
    pub den: u64,
}

impl Proportion {
    pub fn new(num: u64, den: u64) -> Self {
        Self { num, den }
    }

    /// Decimal value; `None` when the denominator is zero.
    pub fn value<T: Scalar>(&self) -> Option<T> {
        (self.den > 0).then(|| T::lit(self.num as f64) / T::lit(self.den as f64))
    }

    pub fn ratio(&self) -> Option<f64> {
        self.value::<f64>()
    }

    /// Complement against the same denominator (`den - num` / `den`).
    pub fn complement(&self) -> Self {
        Self::new(self.den.saturating_sub(self.num), self.den)
    }
}

impl Display for Proportion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.ratio() {
            Some(r) => write!(f, "{}/{} ({:.1}%)", self.num, self.den, r * 100.0),
            None => write!(f, "{}/{} (n/a)", self.num, self.den),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proportion_keeps_raw_counts() {
        let p = Proportion::new(102, 104);
        assert_eq!(p.to_string(), "102/104 (98.1%)");
        assert_eq!(p.complement(), Proportion::new(2, 104));
        assert_eq!(Proportion::new(0, 0).ratio(), None);
        let v: f32 = p.value().unwrap();
        assert!((v - 0.980_769).abs() < 1e-5);
    }
}
