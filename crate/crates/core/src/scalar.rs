//! Floating-point abstraction shared by the vector providers and the scorer.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Element type of embedding vectors: `f32` or `f64`.
///
/// Vectors are stored at whatever precision the provider loads them in;
/// similarity accumulation always happens in `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + FromStr
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    fn to_f64_lossless(self) -> f64 {
        // Both supported types widen exactly.
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).unwrap_or_else(Self::nan)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Elementwise `acc += v`.
pub(crate) fn add_assign<T: Scalar>(acc: &mut [T], v: &[T]) {
    debug_assert_eq!(acc.len(), v.len());
    for (a, x) in acc.iter_mut().zip(v) {
        *a += *x;
    }
}

/// Arithmetic mean of equally sized rows. `rows` must be non-empty.
///
/// Sums in `f64` and rounds once so the result is independent of row order
/// up to the final rounding.
pub(crate) fn mean_rows<'a, T, I>(rows: I, width: usize) -> Vec<T>
where
    T: Scalar,
    I: IntoIterator<Item = &'a [T]>,
{
    let mut acc = vec![0.0f64; width];
    let mut n = 0usize;
    for row in rows {
        debug_assert_eq!(row.len(), width);
        for (a, x) in acc.iter_mut().zip(row) {
            *a += x.to_f64_lossless();
        }
        n += 1;
    }
    debug_assert!(n > 0);
    let n = n as f64;
    acc.into_iter()
        .map(|a| T::from_f64(a / n).unwrap_or_else(T::nan))
        .collect()
}
