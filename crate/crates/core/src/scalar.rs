//! Floating-point abstraction shared by the estimators.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar type the numerical core is written against.
///
/// Implemented for `f32` and `f64`. Count data always enters through
/// [`Scalar::from_count`], so panels stay integer-valued regardless of `T`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only if `T` cannot represent finite `f64`s at all.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("scalar literal out of range")
    }

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count out of range")
    }

    fn from_len(n: usize) -> Self {
        Self::from_usize(n).expect("length out of range")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + Sum
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Mean and population standard deviation of a slice.
pub(crate) fn mean_sd<T: Scalar>(xs: &[T]) -> (T, T) {
    let n = T::from_len(xs.len());
    let mean = xs.iter().copied().sum::<T>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    (mean, var.sqrt())
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson<T: Scalar>(xs: &[T], ys: &[T]) -> Option<T> {
    assert_eq!(xs.len(), ys.len(), "pearson: length mismatch");
    let (mx, sx) = mean_sd(xs);
    let (my, sy) = mean_sd(ys);
    if sx <= T::zero() || sy <= T::zero() {
        return None;
    }
    let n = T::from_len(xs.len());
    let cov = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| (x - mx) * (y - my))
        .sum::<T>()
        / n;
    Some(cov / (sx * sy))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_sd_matches_hand_values() {
        let (m, s) = mean_sd(&[1.0f64, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - 1.25f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn pearson_of_affine_map_is_one() {
        let x = [1.0f32, 2.0, 4.0, 7.0];
        let y: Vec<f32> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-6);
        assert!(pearson(&x, &[1.0; 4]).is_none());
    }
}
