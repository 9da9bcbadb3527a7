use crate::error::{Error, Result};
use crate::scalar::{mean_sd, Scalar};

pub const FEATURES: usize = 5;
pub const FEATURE_NAMES: [&str; FEATURES] = ["x", "y", "x^2", "x*y", "y^2"];

/// Full second-order expansion `(x, y, x², x·y, y²)`.
pub fn quadratic_features<T: Scalar>(x: T, y: T) -> [T; FEATURES] {
    [x, y, x * x, x * y, y * y]
}

/// Standardized quadratic design over `(x, y)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct Design<T> {
    columns: Vec<Vec<T>>,
    means: [T; FEATURES],
    sds: [T; FEATURES],
}

impl<T: Scalar> Design<T> {
    pub fn build(x: &[T], y: &[T]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::param("design", "x and y lengths differ"));
        }
        if x.is_empty() {
            return Err(Error::Empty("design has no rows"));
        }
        let raw: Vec<[T; FEATURES]> = x
            .iter()
            .zip(y)
            .map(|(&a, &b)| quadratic_features(a, b))
            .collect();
        let mut columns = Vec::with_capacity(FEATURES);
        let mut means = [T::zero(); FEATURES];
        let mut sds = [T::zero(); FEATURES];
        for j in 0..FEATURES {
            let col: Vec<T> = raw.iter().map(|r| r[j]).collect();
            let (mean, sd) = mean_sd(&col);
            if !(sd > T::zero()) {
                return Err(Error::Degenerate(format!(
                    "feature {} has zero variance",
                    FEATURE_NAMES[j]
                )));
            }
            means[j] = mean;
            sds[j] = sd;
            columns.push(col.into_iter().map(|v| (v - mean) / sd).collect());
        }
        if x.len() <= FEATURES {
            return Err(Error::Degenerate(format!(
                "need more rows than features ({} <= {FEATURES})",
                x.len()
            )));
        }
        Ok(Design {
            columns,
            means,
            sds,
        })
    }

    pub fn rows(&self) -> usize {
        self.columns[0].len()
    }

    /// Standardized feature columns.
    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    pub fn means(&self) -> &[T; FEATURES] {
        &self.means
    }

    pub fn sds(&self) -> &[T; FEATURES] {
        &self.sds
    }

    pub fn standardize(&self, x: T, y: T) -> [T; FEATURES] {
        let raw = quadratic_features(x, y);
        std::array::from_fn(|j| (raw[j] - self.means[j]) / self.sds[j])
    }
}
