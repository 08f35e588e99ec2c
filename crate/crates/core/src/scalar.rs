// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt::{Debug, Display};
use std::iter::Sum;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar the numeric core is generic over: `f32` or `f64`.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as num_traits::NumCast>::from(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `log(1 - exp(-z))` for `z >= 0`, accurate across the whole range.
#[inline]
pub(crate) fn log1mexp<T: Scalar>(z: T) -> T {
    if z <= T::lit(std::f64::consts::LN_2) {
        (-(-z).exp_m1()).ln()
    } else {
        (-(-z).exp()).ln_1p()
    }
}

/// `z / (exp(z) - 1)`, with the removable singularity at zero filled in.
#[inline]
pub(crate) fn z_over_expm1<T: Scalar>(z: T) -> T {
    if z == T::zero() {
        T::one()
    } else if !z.is_finite() {
        T::zero()
    } else {
        let d = z.exp_m1();
        if d.is_finite() {
            z / d
        } else {
            T::zero()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log1mexp_matches_naive_in_safe_range() {
        for &z in &[0.01_f64, 0.3, 0.69, 0.7, 1.0, 5.0, 20.0] {
            let naive = (1.0 - (-z).exp()).ln();
            assert!((log1mexp(z) - naive).abs() < 1e-12, "z={z}");
        }
        // tiny z: log(z) dominates and naive evaluation loses digits
        let z = 1e-20_f64;
        assert!((log1mexp(z) - z.ln()).abs() < 1e-12);
        assert_eq!(log1mexp(f64::INFINITY), 0.0);
    }

    #[test]
    fn z_over_expm1_limits() {
        assert_eq!(z_over_expm1(0.0_f64), 1.0);
        assert_eq!(z_over_expm1(f64::INFINITY), 0.0);
        assert_eq!(z_over_expm1(1e6_f32), 0.0);
        assert!((z_over_expm1(1e-9_f64) - 1.0).abs() < 1e-8);
    }
}
