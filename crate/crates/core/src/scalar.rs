//! Scalar abstraction for the closed-form latency evaluators.
//!
//! Every latency formula in [`crate::analysis`] is a rational function of
//! binomial coefficients and the connectivity, so it can be evaluated in any
//! field that embeds the integers. Exact rationals are used for equality
//! checks against simulated plans; floats for plotting and aggregation.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Num, ToPrimitive};

/// A field-like numeric type the latency formulas can be evaluated in.
pub trait Scalar: Num + Clone + PartialOrd + Debug {
    /// Embeds an unsigned integer (binomial coefficients, counts).
    fn from_u128(n: u128) -> Self;

    /// Embeds the ratio `num / den`. `den` must be nonzero.
    fn from_ratio(num: i128, den: i128) -> Self;

    /// Lossy conversion for reporting.
    fn to_f64(&self) -> f64;

    fn from_usize(n: usize) -> Self {
        Self::from_u128(n as u128)
    }
}

macro_rules! float_scalar {
    ($($t:ty),+) => {
        $(
            impl Scalar for $t {
                fn from_u128(n: u128) -> Self {
                    n as $t
                }
                fn from_ratio(num: i128, den: i128) -> Self {
                    num as $t / den as $t
                }
                fn to_f64(&self) -> f64 {
                    *self as f64
                }
            }
        )+
    };
}

float_scalar!(f32, f64);

macro_rules! ratio_scalar {
    ($($t:ty),+) => {
        $(
            impl Scalar for Ratio<$t> {
                fn from_u128(n: u128) -> Self {
                    let n = <$t>::try_from(n).expect("integer does not fit the rational backing type");
                    Ratio::from_integer(n)
                }
                fn from_ratio(num: i128, den: i128) -> Self {
                    let num = <$t>::try_from(num).expect("numerator does not fit the rational backing type");
                    let den = <$t>::try_from(den).expect("denominator does not fit the rational backing type");
                    Ratio::new(num, den)
                }
                fn to_f64(&self) -> f64 {
                    ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
                }
            }
        )+
    };
}

ratio_scalar!(i64, i128);

impl Scalar for BigRational {
    fn from_u128(n: u128) -> Self {
        Ratio::from_integer(BigInt::from(n))
    }
    fn from_ratio(num: i128, den: i128) -> Self {
        Ratio::new(BigInt::from(num), BigInt::from(den))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Converts an exact rational into any scalar.
pub fn from_rational<S: Scalar>(r: &crate::Rational) -> S {
    S::from_ratio(*r.numer(), *r.denom())
}

/// Integer power by repeated squaring.
pub fn powi<S: Scalar>(base: &S, exp: u32) -> S {
    num_traits::pow(base.clone(), exp as usize)
}
