//! Scalar abstraction shared by every numerical module.
//!
//! All physics and reduction code is written against [`Real`], which is
//! implemented for `f32` and `f64`. The crate root exposes `f64` aliases for
//! the common types; `f32` is usable for quick exploratory runs but several
//! invariants (grid convergence, oracle agreement) are only pinned for `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating point scalar used throughout the crate.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + FftNum
    + Default
    + Debug
    + Display
    + FromStr
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal or constant into this type.
    fn of(x: f64) -> Self;

    fn of_usize(n: usize) -> Self {
        Self::of(n as f64)
    }

    fn as_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Pairwise (cascade) summation with a fixed split order.
///
/// The result depends only on the order of `values`, never on how the values
/// were produced, so parallel producers that collect in index order reduce to
/// bit-identical totals.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    match values.len() {
        0 => T::zero(),
        1 => values[0],
        n if n <= 8 => values.iter().fold(T::zero(), |acc, &v| acc + v),
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

/// SplitMix64 finaliser, used to derive independent child seeds from a master seed.
pub fn mix_seed(master: u64, salt: u64) -> u64 {
    let mut z = master
        .wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
