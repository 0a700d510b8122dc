//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating-point type the models are evaluated in: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Lossy conversion from a count.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Elementary charge (C).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Vacuum permittivity (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// `20·log10(x)`.
pub fn db20<T: Scalar>(x: T) -> T {
    T::lit(20.0) * x.log10()
}

/// Inverse of [`db20`].
pub fn from_db20<T: Scalar>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(20.0))
}

/// `n` logarithmically spaced points from `lo` to `hi` inclusive.
pub fn logspace<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n <= 1 || lo == hi {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / T::from_count(n - 1);
    (0..n)
        .map(|k| {
            if k == 0 {
                lo
            } else if k == n - 1 {
                hi
            } else {
                (a + step * T::from_count(k)).exp()
            }
        })
        .collect()
}

/// `n` linearly spaced points from `lo` to `hi` inclusive.
pub fn linspace<T: Scalar>(lo: T, hi: T, n: usize) -> Vec<T> {
    if n <= 1 || lo == hi {
        return vec![lo];
    }
    let m = T::from_count(n - 1);
    (0..n)
        .map(|k| (lo * T::from_count(n - 1 - k) + hi * T::from_count(k)) / m)
        .collect()
}

/// Shortest text that parses back to the same value. Plain decimal for
/// moderate magnitudes, scientific otherwise.
pub fn fmt_float<T: Scalar>(x: T) -> String {
    let a = x.abs();
    if a == T::zero() || !a.is_finite() || (a >= T::lit(1e-3) && a < T::lit(1e9)) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}
