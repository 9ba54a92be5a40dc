//! Scalar abstraction shared by the metric, psychometric and simulation code.
//!
//! Everything downstream of integer counts is generic over [`Scalar`], which is
//! implemented for `f32`, `f64` and the exact [`BigRational`]. The exact backend
//! makes ratios such as sensitivity or the ROC area reproducible to the last
//! digit; square roots (g-mean, t statistic) are the one place where it falls
//! back to a rounded `f64` root.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};

use crate::decimal;

pub trait Scalar:
    Clone + Debug + PartialOrd + Num + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// Exact-as-possible `num / den`. `den` must be non-zero.
    fn from_ratio(num: u64, den: u64) -> Self {
        debug_assert!(den != 0);
        Self::from_u64(num).expect("u64 fits scalar") / Self::from_u64(den).expect("u64 fits scalar")
    }

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("u64 fits scalar")
    }

    /// Square root of a non-negative value.
    fn sqrt(&self) -> Self;

    /// Decimal rendering with exactly `places` fractional digits.
    fn to_decimal(&self, places: usize) -> String;

    fn abs_value(&self) -> Self {
        if *self < Self::zero() {
            Self::zero() - self.clone()
        } else {
            self.clone()
        }
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }

    fn to_decimal(&self, places: usize) -> String {
        format!("{:.*}", places, self)
    }
}

impl Scalar for f32 {
    fn sqrt(&self) -> Self {
        f32::sqrt(*self)
    }

    fn to_decimal(&self, places: usize) -> String {
        format!("{:.*}", places, self)
    }
}

impl Scalar for BigRational {
    fn from_ratio(num: u64, den: u64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn sqrt(&self) -> Self {
        // Exact roots of perfect squares stay exact; everything else goes
        // through f64.
        if !self.is_negative() {
            let (n, d) = (self.numer(), self.denom());
            let (rn, rd) = (n.sqrt(), d.sqrt());
            if &(&rn * &rn) == n && &(&rd * &rd) == d {
                return BigRational::new(rn, rd);
            }
        }
        let root = self.to_f64().map(f64::sqrt).unwrap_or(f64::NAN);
        BigRational::from_float(root).unwrap_or_else(BigRational::zero)
    }

    fn to_decimal(&self, places: usize) -> String {
        decimal::render_big_ratio(self.numer(), self.denom(), places)
    }
}
