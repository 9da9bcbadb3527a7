//! Pool-adjacent-violators for nondecreasing least-squares fits.

use crate::scalar::Scalar;

/// L2 projection of `values` onto nondecreasing sequences (uniform weights).
pub fn pava<T: Scalar>(values: &[T]) -> Vec<T> {
    let weights = vec![T::one(); values.len()];
    pava_weighted(values, &weights)
}

/// Weighted pool-adjacent-violators. Weights must be positive.
pub fn pava_weighted<T: Scalar>(values: &[T], weights: &[T]) -> Vec<T> {
    assert_eq!(values.len(), weights.len(), "pava: length mismatch");
    // each block: (weighted mean, total weight, length)
    let mut blocks: Vec<(T, T, usize)> = Vec::with_capacity(values.len());
    for (&y, &w) in values.iter().zip(weights) {
        let mut cur = (y, w, 1usize);
        while let Some(&(mean, weight, len)) = blocks.last() {
            if mean <= cur.0 {
                break;
            }
            blocks.pop();
            let total = weight + cur.1;
            cur = ((mean * weight + cur.0 * cur.1) / total, total, len + cur.2);
        }
        blocks.push(cur);
    }
    let mut out = Vec::with_capacity(values.len());
    for (mean, _, len) in blocks {
        out.extend(std::iter::repeat_n(mean, len));
    }
    out
}

pub fn is_nondecreasing<T: PartialOrd>(values: &[T]) -> bool {
    values.windows(2).all(|w| w[0] <= w[1])
}
