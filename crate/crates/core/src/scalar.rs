//! Scalar abstractions.
//!
//! The pointwise kernels are written against [`Scalar`], which is satisfied by
//! `f32`, `f64` and exact rationals. Anything that touches storage, timing or
//! transcendental functions needs [`Real`], which is only implemented for the
//! two IEEE float widths.

use std::fmt::{Debug, Display, LowerExp};

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, NumCast, ToPrimitive};

/// Arithmetic required by the lattice kernels. Exact types qualify.
pub trait Scalar:
    Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    /// Converts a small integer constant; lattice constants never overflow.
    #[inline]
    fn int(v: i64) -> Self {
        Self::from_i64(v).expect("lattice constant fits the scalar type")
    }

    /// Exact ratio of two small integers.
    #[inline]
    fn ratio(num: i64, den: i64) -> Self {
        Self::int(num) / Self::int(den)
    }

    /// Nearest `f64`, for reporting.
    #[inline]
    fn approx_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
impl Scalar for Ratio<i64> {}
impl Scalar for Ratio<i128> {}

/// Floating point storage type of a distribution field: `f32` or `f64`.
pub trait Real: Scalar + Float + NumCast + Display + LowerExp + Default {
    /// Storage width in bytes, used by the traffic model.
    const BYTES: usize;
    /// Label used in reports.
    const NAME: &'static str;

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        <f64 as NumCast>::from(self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        <Self as NumCast>::from(v).unwrap_or_else(Self::nan)
    }
}

impl Real for f32 {
    const BYTES: usize = 4;
    const NAME: &'static str = "single";
}

impl Real for f64 {
    const BYTES: usize = 8;
    const NAME: &'static str = "double";
}
