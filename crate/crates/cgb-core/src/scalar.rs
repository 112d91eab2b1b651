use core::fmt::Debug;
use core::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Coefficient ring for Grassmann elements: `f64` by default, `BigRational` for exact checks.
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    fn from_i64(v: i64) -> Self;
    fn div_u64(&self, k: u64) -> Self;
    fn exp(&self) -> Result<Self>;
}

impl Scalar for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn div_u64(&self, k: u64) -> Self {
        self / k as f64
    }
    fn exp(&self) -> Result<Self> {
        Ok(num_traits::Float::exp(*self))
    }
}

impl Scalar for BigRational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
    fn div_u64(&self, k: u64) -> Self {
        self / BigRational::from_integer(BigInt::from(k))
    }
    fn exp(&self) -> Result<Self> {
        if self.is_zero() {
            Ok(Self::one())
        } else {
            Err(Error::Transcendental)
        }
    }
}

pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}
