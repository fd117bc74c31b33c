//! Agreement metrics between model scores and reference targets.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_finite<T: Scalar>(pairs: &[(T, T)]) -> Result<()> {
    if pairs.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::invalid("pairs contain non-finite values"));
    }
    Ok(())
}

/// Mean of `|score − target|`.
pub fn mean_absolute_error<T: Scalar>(pairs: &[(T, T)]) -> Result<T> {
    if pairs.is_empty() {
        return Err(Error::invalid("mean absolute error of an empty list"));
    }
    check_finite(pairs)?;
    let total = pairs.iter().fold(T::zero(), |acc, &(s, t)| acc + (s - t).abs());
    Ok(total / T::from_usize_lossy(pairs.len()))
}

/// Sample Pearson correlation, `None` when either side has zero variance.
///
/// Accumulates the co-moments in a single streaming pass.
pub fn pearson<T: Scalar>(pairs: &[(T, T)]) -> Result<Option<T>> {
    if pairs.len() < 2 {
        return Err(Error::invalid(format!("pearson needs n >= 2, got {}", pairs.len())));
    }
    check_finite(pairs)?;
    let (mut mean_x, mut mean_y) = (T::zero(), T::zero());
    let (mut sxx, mut syy, mut sxy) = (T::zero(), T::zero(), T::zero());
    for (i, &(x, y)) in pairs.iter().enumerate() {
        let n = T::from_usize_lossy(i + 1);
        let dx = x - mean_x;
        let dy = y - mean_y;
        mean_x = mean_x + dx / n;
        mean_y = mean_y + dy / n;
        sxx = sxx + dx * (x - mean_x);
        syy = syy + dy * (y - mean_y);
        sxy = sxy + dx * (y - mean_y);
    }
    if sxx <= T::zero() || syy <= T::zero() {
        return Ok(None);
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(Some(r.max(-T::one()).min(T::one())))
}

fn cmp<T: Scalar>(a: T, b: T) -> Ordering {
    a.partial_cmp(&b).expect("finite values compare")
}

fn tied_pairs<T: Scalar>(sorted: impl Iterator<Item = T>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<T> = None;
    for v in sorted {
        if prev == Some(v) {
            run += 1;
        } else {
            total += run * run.saturating_sub(1) / 2;
            run = 1;
        }
        prev = Some(v);
    }
    total + run * run.saturating_sub(1) / 2
}

/// Merge sort on `ys`, returning the number of inversions (swaps).
fn sort_count_swaps<T: Scalar>(ys: &mut [T]) -> u64 {
    let n = ys.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_count_swaps(&mut ys[..mid]) + sort_count_swaps(&mut ys[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if cmp(ys[j], ys[i]) == Ordering::Less {
            merged.push(ys[j]);
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            merged.push(ys[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&ys[i..mid]);
    merged.extend_from_slice(&ys[j..n]);
    ys.copy_from_slice(&merged);
    swaps
}

/// Kendall τ-b with tie correction, in O(n log n).
///
/// `None` when every x or every y is tied.
pub fn kendall_tau<T: Scalar>(pairs: &[(T, T)]) -> Result<Option<T>> {
    let n = pairs.len();
    if n < 2 {
        return Err(Error::invalid(format!("kendall tau needs n >= 2, got {n}")));
    }
    check_finite(pairs)?;
    let mut sorted: Vec<(T, T)> = pairs.to_vec();
    sorted.sort_by(|a, b| cmp(a.0, b.0).then(cmp(a.1, b.1)));

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let ties_x = tied_pairs(sorted.iter().map(|p| p.0));
    let mut joint = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            joint += run * (run - 1) / 2;
            run = 1;
        }
    }
    joint += run * (run - 1) / 2;

    let mut ys: Vec<T> = sorted.iter().map(|p| p.1).collect();
    let discordant = sort_count_swaps(&mut ys);
    let ties_y = tied_pairs(ys.iter().copied());

    if n0 == ties_x || n0 == ties_y {
        return Ok(None);
    }
    let numerator = n0 as i128 - ties_x as i128 - ties_y as i128 + joint as i128 - 2 * discordant as i128;
    let denom = T::from_u64((n0 - ties_x) * (n0 - ties_y)).expect("count fits").sqrt();
    let numerator = T::from_i128(numerator).expect("count fits");
    Ok(Some(numerator / denom))
}

/// Box-plot summary with quartiles by linear interpolation between order
/// statistics (position `p·(n−1)`, zero-indexed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber<T = f64> {
    pub n: usize,
    pub min: T,
    pub q1: T,
    pub median: T,
    pub q3: T,
    pub max: T,
}

/// Quantile of already-sorted data.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], p: T) -> T {
    let h = p * T::from_usize_lossy(sorted.len() - 1);
    let lo = h.floor().to_usize().unwrap_or(0).min(sorted.len() - 1);
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - T::from_usize_lossy(lo);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Five-number summary; `None` for an empty group.
pub fn five_number<T: Scalar>(values: &[T]) -> Option<FiveNumber<T>> {
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| cmp(*a, *b));
    Some(FiveNumber {
        n: sorted.len(),
        min: sorted[0],
        q1: quantile_sorted(&sorted, T::lit(0.25)),
        median: quantile_sorted(&sorted, T::lit(0.5)),
        q3: quantile_sorted(&sorted, T::lit(0.75)),
        max: sorted[sorted.len() - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zip(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
        x.iter().copied().zip(y.iter().copied()).collect()
    }

    #[test]
    fn mae_cases() {
        assert!((mean_absolute_error::<f64>(&[(0.2, 0.0), (0.6, 1.0)]).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(mean_absolute_error::<f64>(&[(0.5, 0.5), (0.1, 0.1)]).unwrap(), 0.0);
        assert_eq!(mean_absolute_error::<f64>(&[(1.0, 0.0)]).unwrap(), 1.0);
        assert!(mean_absolute_error::<f64>(&[]).is_err());
    }

    #[test]
    fn pearson_cases() {
        let up = zip(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        assert!((pearson(&up).unwrap().unwrap() - 1.0).abs() < 1e-15);
        let down = zip(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]);
        assert!((pearson(&down).unwrap().unwrap() + 1.0).abs() < 1e-15);
        // cov = 1.5, var_x = 1, var_y = 7/3 -> 1.5 / sqrt(7/3)
        let r = pearson(&zip(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0])).unwrap().unwrap();
        assert!((r - 1.5 / (7.0f64 / 3.0).sqrt()).abs() < 1e-14);
        assert!((r - 0.9820).abs() < 1e-4);
        assert_eq!(pearson(&zip(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0])).unwrap(), None);
        assert!(pearson::<f64>(&[(1.0, 1.0)]).is_err());
    }

    #[test]
    fn kendall_cases() {
        let up = zip(&[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0, 30.0, 40.0]);
        assert_eq!(kendall_tau(&up).unwrap(), Some(1.0));
        let down = zip(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]);
        assert_eq!(kendall_tau(&down).unwrap(), Some(-1.0));
        // C=4, D=0, Tx=1, Ty=1 -> 4 / sqrt(5*5)
        let tied = zip(&[1.0, 2.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 3.0]);
        assert!((kendall_tau(&tied).unwrap().unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(kendall_tau(&zip(&[2.0, 2.0], &[1.0, 3.0])).unwrap(), None);
        assert!(kendall_tau::<f64>(&[(1.0, 1.0)]).is_err());
        assert!(kendall_tau::<f64>(&[(1.0, f64::NAN), (2.0, 1.0)]).is_err());
    }

    #[test]
    fn five_number_cases() {
        let s = five_number::<f64>(&[0.7, 0.3, 0.5]).unwrap();
        assert_eq!((s.min, s.median, s.max), (0.3, 0.5, 0.7));
        assert!((s.q1 - 0.4).abs() < 1e-15 && (s.q3 - 0.6).abs() < 1e-15);
        let single = five_number::<f64>(&[0.5]).unwrap();
        assert_eq!([single.min, single.q1, single.median, single.q3, single.max], [0.5; 5]);
        let two = five_number::<f64>(&[0.1, 0.9]).unwrap();
        assert!((two.median - 0.5).abs() < 1e-15);
        assert!((two.q1 - 0.3).abs() < 1e-15 && (two.q3 - 0.7).abs() < 1e-15);
        assert!(five_number::<f64>(&[]).is_none());
    }
}
