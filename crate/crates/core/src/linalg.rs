//! Small dense least-squares kernels used by the cone projection.

use crate::scalar::{dot, Scalar};

const MAX_SWEEPS: usize = 60;

/// Minimum-norm least-squares solution of `min ‖A z − b‖₂`, where `A` is given
/// as a list of columns. Uses a one-sided Jacobi SVD and drops singular values
/// at or below `cutoff · σ_max`.
pub(crate) fn lstsq_min_norm<T: Scalar>(columns: &[&[T]], b: &[T], cutoff: T) -> Vec<T> {
    let s = columns.len();
    if s == 0 {
        return Vec::new();
    }
    let mut u: Vec<Vec<T>> = columns.iter().map(|c| c.to_vec()).collect();
    let mut v: Vec<Vec<T>> = (0..s)
        .map(|i| (0..s).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();

    let eps = T::epsilon();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..s {
            for q in (p + 1)..s {
                let alpha = dot(&u[p], &u[p]);
                let beta = dot(&u[q], &u[q]);
                let gamma = dot(&u[p], &u[q]);
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let sn = c * t;
                rotate(&mut u, p, q, c, sn);
                rotate(&mut v, p, q, c, sn);
            }
        }
        if !rotated {
            break;
        }
    }

    let sigma: Vec<T> = u.iter().map(|col| dot(col, col).sqrt()).collect();
    let sigma_max = sigma.iter().fold(T::zero(), |m, &x| m.max(x));
    let mut z = vec![T::zero(); s];
    if sigma_max == T::zero() {
        return z;
    }
    let threshold = cutoff * sigma_max;
    for i in 0..s {
        if sigma[i] <= threshold {
            continue;
        }
        let weight = dot(&u[i], b) / (sigma[i] * sigma[i]);
        for (zj, &vij) in z.iter_mut().zip(&v[i]) {
            *zj = *zj + weight * vij;
        }
    }
    z
}

fn rotate<T: Scalar>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (a, b) in cp.iter_mut().zip(cq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}
