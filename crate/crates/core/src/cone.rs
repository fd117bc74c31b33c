//! Projection of a response vector onto the conical hull of premise vectors.
//!
//! Novelty is the norm of what is left over after the projection; the
//! nonnegative coefficients feed the synthesis entropy.

use crate::embedding::EmbeddingVector;
use crate::error::{Error, Result};
use crate::linalg::lstsq_min_norm;
use crate::scalar::{dot, norm, Scalar};

/// Largest column count [`oracle_project`] will enumerate.
pub const ORACLE_MAX_COLUMNS: usize = 12;

/// Iteration cap per premise column.
pub const ITERATIONS_PER_COLUMN: usize = 50;

/// Default reduced-gradient tolerance: `1e-10`, or a few ulps above it for `f32`.
pub fn default_tol<T: Scalar>() -> T {
    (T::epsilon() * T::lit(100.0)).max(T::lit(1e-10))
}

/// Columns spanning the cone, each tagged with the premise it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PremiseMatrix<T = f64> {
    columns: Vec<EmbeddingVector<T>>,
    group_of: Vec<usize>,
    premise_count: usize,
}

impl<T: Scalar> PremiseMatrix<T> {
    /// `group_of[i]` is the premise index of column `i`. Premise indices must
    /// be dense (`0..premise_count`) with at least one column each.
    pub fn new(columns: Vec<EmbeddingVector<T>>, group_of: Vec<usize>) -> Result<Self> {
        if columns.len() < 2 {
            return Err(Error::invalid(format!(
                "cone needs at least 2 columns, got {}",
                columns.len()
            )));
        }
        if group_of.len() != columns.len() {
            return Err(Error::invalid("group_of must map every column"));
        }
        let dim = columns[0].dim();
        if let Some(i) = columns.iter().position(|c| c.dim() != dim) {
            return Err(Error::invalid(format!(
                "column {i} has dim {}, expected {dim}",
                columns[i].dim()
            )));
        }
        let premise_count = group_of.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; premise_count];
        for &g in &group_of {
            seen[g] = true;
        }
        if let Some(p) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("premise {p} has no columns")));
        }
        Ok(PremiseMatrix { columns, group_of, premise_count })
    }

    /// One column per premise.
    pub fn from_columns(columns: Vec<EmbeddingVector<T>>) -> Result<Self> {
        let group_of = (0..columns.len()).collect();
        Self::new(columns, group_of)
    }

    pub fn k(&self) -> usize {
        self.columns.len()
    }

    pub fn dim(&self) -> usize {
        self.columns[0].dim()
    }

    pub fn premise_count(&self) -> usize {
        self.premise_count
    }

    pub fn columns(&self) -> &[EmbeddingVector<T>] {
        &self.columns
    }

    pub fn group_of(&self) -> &[usize] {
        &self.group_of
    }

    /// Copy with one more column attached to premise `group`.
    pub fn with_column(&self, column: EmbeddingVector<T>, group: usize) -> Result<Self> {
        let mut columns = self.columns.clone();
        let mut group_of = self.group_of.clone();
        columns.push(column);
        group_of.push(group);
        Self::new(columns, group_of)
    }

    fn combine(&self, coefficients: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        for (col, &c) in self.columns.iter().zip(coefficients) {
            if c == T::zero() {
                continue;
            }
            for (o, &x) in out.iter_mut().zip(col.as_slice()) {
                *o = *o + c * x;
            }
        }
        out
    }

    /// `Pᵀ(P·c − r)`, the gradient of `½‖P·c − r‖²`.
    pub fn gradient(&self, coefficients: &[T], r: &[T]) -> Vec<T> {
        let fitted = self.combine(coefficients);
        let diff: Vec<T> = fitted.iter().zip(r).map(|(&f, &x)| f - x).collect();
        self.columns.iter().map(|col| dot(col.as_slice(), &diff)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeProjection<T = f64> {
    pub coefficients: Vec<T>,
    pub projection: Vec<T>,
    pub residual_norm: T,
    pub converged: bool,
    pub iterations: usize,
}

impl<T: Scalar> ConeProjection<T> {
    fn assemble(
        premises: &PremiseMatrix<T>,
        r: &[T],
        coefficients: Vec<T>,
        converged: bool,
        iterations: usize,
    ) -> Self {
        let projection = premises.combine(&coefficients);
        let residual: Vec<T> = r.iter().zip(&projection).map(|(&a, &b)| a - b).collect();
        ConeProjection {
            coefficients,
            projection,
            residual_norm: norm(&residual),
            converged,
            iterations,
        }
    }
}

/// Novelty `N ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct NoveltyScore<T = f64>(pub T);

impl<T: Scalar> NoveltyScore<T> {
    pub fn value(self) -> T {
        self.0
    }
}

fn check_dims<T: Scalar>(r: &EmbeddingVector<T>, premises: &PremiseMatrix<T>) -> Result<()> {
    if premises.k() < 2 {
        return Err(Error::invalid("cone needs at least 2 columns"));
    }
    if r.dim() != premises.dim() {
        return Err(Error::invalid(format!(
            "response dim {} does not match premise dim {}",
            r.dim(),
            premises.dim()
        )));
    }
    Ok(())
}

/// Nonnegative least squares `min ‖r − P·c‖₂, c ≥ 0` by the Lawson–Hanson
/// active-set method.
///
/// Terminates when every inactive reduced gradient is `≥ −tol`. If the
/// iteration cap (`50·k`) is hit the best iterate is returned with
/// `converged = false`.
pub fn project_onto_cone<T: Scalar>(
    r: &EmbeddingVector<T>,
    premises: &PremiseMatrix<T>,
    tol: T,
) -> Result<ConeProjection<T>> {
    check_dims(r, premises)?;
    if tol.is_nan() || tol <= T::zero() {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let k = premises.k();
    let rv = r.as_slice();
    let cap = ITERATIONS_PER_COLUMN * k;
    let cutoff = T::singular_cutoff(premises.dim(), k);

    let mut c = vec![T::zero(); k];
    let mut active = vec![false; k];
    // columns that numerically fail to enter the support at the current iterate
    let mut blocked = vec![false; k];
    let mut iterations = 0;

    let solve_support = |active: &[bool]| -> (Vec<usize>, Vec<T>) {
        let support: Vec<usize> = (0..k).filter(|&i| active[i]).collect();
        let cols: Vec<&[T]> = support.iter().map(|&i| premises.columns[i].as_slice()).collect();
        let z = lstsq_min_norm(&cols, rv, cutoff);
        (support, z)
    };

    let converged = 'outer: loop {
        let grad = premises.gradient(&c, rv);
        let entering = (0..k)
            .filter(|&j| !active[j] && !blocked[j] && -grad[j] > tol)
            .fold(None, |best: Option<usize>, j| match best {
                Some(b) if -grad[b] >= -grad[j] => Some(b),
                _ => Some(j),
            });
        let Some(j) = entering else { break true };
        iterations += 1;
        if iterations > cap {
            break false;
        }
        active[j] = true;

        let mut first_pass = true;
        loop {
            let (support, z) = solve_support(&active);
            if support.iter().zip(&z).all(|(_, &zi)| zi > T::zero()) {
                for &i in &support {
                    c[i] = T::zero();
                }
                for (&i, &zi) in support.iter().zip(&z) {
                    c[i] = zi;
                }
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }
            let new_pos = support.iter().position(|&i| i == j);
            if first_pass && new_pos.is_some_and(|p| z[p] <= T::zero()) {
                // the entering column cannot take positive weight; try another
                active[j] = false;
                blocked[j] = true;
                break;
            }
            first_pass = false;

            // step from c toward z until the first coefficient hits zero
            let mut alpha = T::one();
            let mut leaving = None;
            for (&i, &zi) in support.iter().zip(&z) {
                if zi <= T::zero() {
                    let denom = c[i] - zi;
                    let step = if denom > T::zero() { c[i] / denom } else { T::zero() };
                    if step < alpha || leaving.is_none() {
                        alpha = step.min(alpha);
                        leaving = Some(i);
                    }
                }
            }
            for (&i, &zi) in support.iter().zip(&z) {
                c[i] = c[i] + alpha * (zi - c[i]);
            }
            for &i in &support {
                if c[i] <= T::zero() || Some(i) == leaving {
                    c[i] = T::zero();
                    active[i] = false;
                }
            }
            iterations += 1;
            if iterations > cap {
                break 'outer false;
            }
        }
    };

    Ok(ConeProjection::assemble(premises, rv, c, converged, iterations))
}

/// Novelty of a unit-norm response: the residual norm of its cone projection.
pub fn novelty<T: Scalar>(proj: &ConeProjection<T>, r: &EmbeddingVector<T>) -> Result<NoveltyScore<T>> {
    let r_norm = norm(r.as_slice());
    if (r_norm - T::one()).abs() > T::unit_norm_tol() {
        return Err(Error::invalid(format!("response is not unit-norm (norm {r_norm})")));
    }
    if proj.projection.len() != r.dim() {
        return Err(Error::invalid("projection and response dims differ"));
    }
    let overshoot = T::lit(1e-9);
    let n = proj.residual_norm;
    if n < -overshoot || n > T::one() + overshoot || !n.is_finite() {
        return Err(Error::invalid(format!("residual norm {n} outside [0, 1]")));
    }
    Ok(NoveltyScore(n.max(T::zero()).min(T::one())))
}

/// Reference NNLS by exhaustive support enumeration (`k ≤ 12`).
///
/// Every subset of columns is solved as an unconstrained least-squares
/// problem through the normal equations (Cholesky); supports that are rank
/// deficient or give a negative coefficient are skipped, and the feasible
/// candidate with the smallest residual wins. Smaller supports win ties.
pub fn oracle_project<T: Scalar>(
    r: &EmbeddingVector<T>,
    premises: &PremiseMatrix<T>,
) -> Result<ConeProjection<T>> {
    check_dims(r, premises)?;
    let k = premises.k();
    if k > ORACLE_MAX_COLUMNS {
        return Err(Error::OracleScope(k));
    }
    let rv = r.as_slice();
    let mut masks: Vec<u32> = (0..(1u32 << k)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));

    let mut best_coeffs = vec![T::zero(); k];
    let mut best_residual = norm(rv);
    let tie = T::lit(1e-13);
    for &mask in masks.iter().skip(1) {
        let support: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let Some(z) = normal_equations(premises, &support, rv) else { continue };
        if z.iter().any(|&zi| zi < T::zero()) {
            continue;
        }
        let mut coeffs = vec![T::zero(); k];
        for (&i, &zi) in support.iter().zip(&z) {
            coeffs[i] = zi;
        }
        let fitted = premises.combine(&coeffs);
        let residual = norm(&rv.iter().zip(&fitted).map(|(&a, &b)| a - b).collect::<Vec<_>>());
        if residual < best_residual - tie {
            best_residual = residual;
            best_coeffs = coeffs;
        }
    }
    Ok(ConeProjection::assemble(premises, rv, best_coeffs, true, masks.len()))
}

#[allow(clippy::needless_range_loop)]
fn normal_equations<T: Scalar>(premises: &PremiseMatrix<T>, support: &[usize], r: &[T]) -> Option<Vec<T>> {
    let s = support.len();
    let col = |i: usize| premises.columns[support[i]].as_slice();
    let mut g = vec![vec![T::zero(); s]; s];
    for i in 0..s {
        for j in 0..=i {
            let v = dot(col(i), col(j));
            g[i][j] = v;
            g[j][i] = v;
        }
    }
    let rhs: Vec<T> = (0..s).map(|i| dot(col(i), r)).collect();

    // Cholesky G = L Lᵀ
    let max_diag = (0..s).fold(T::zero(), |m, i| m.max(g[i][i]));
    let pivot_floor = max_diag * T::lit(1e-10);
    let mut l = vec![vec![T::zero(); s]; s];
    for i in 0..s {
        for j in 0..=i {
            let partial = (0..j).fold(T::zero(), |acc, m| acc + l[i][m] * l[j][m]);
            if i == j {
                let d = g[i][i] - partial;
                if d <= pivot_floor {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (g[i][j] - partial) / l[j][j];
            }
        }
    }
    let mut y = vec![T::zero(); s];
    for i in 0..s {
        let partial = (0..i).fold(T::zero(), |acc, m| acc + l[i][m] * y[m]);
        y[i] = (rhs[i] - partial) / l[i][i];
    }
    let mut z = vec![T::zero(); s];
    for i in (0..s).rev() {
        let partial = ((i + 1)..s).fold(T::zero(), |acc, m| acc + l[m][i] * z[m]);
        z[i] = (y[i] - partial) / l[i][i];
    }
    Some(z)
}
