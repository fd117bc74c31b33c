//! Population-level analysis of a set of responses: how far each one sits
//! from its competitors, and whether the creativity scores split into two
//! clusters.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingVector;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Reference value of the bimodality coefficient for a uniform distribution.
pub const BIMODALITY_THRESHOLD: f64 = 5.0 / 9.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distinctiveness<T = f64> {
    pub response_id: String,
    /// Mean cosine distance to every other member of the population.
    pub divergence: T,
    /// Fraction of the population with strictly smaller divergence.
    pub percentile: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationDistinctiveness<T = f64> {
    pub per_response: Vec<Distinctiveness<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BimodalityResult<T = f64> {
    pub coefficient: T,
    pub threshold: T,
    pub flagged: bool,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSplit<T = f64> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub boundary_gap: T,
    pub centroids: (T, T),
}

pub fn distinctiveness<T: Scalar>(
    population: &[(String, EmbeddingVector<T>)],
) -> Result<PopulationDistinctiveness<T>> {
    let n = population.len();
    if n < 2 {
        return Err(Error::invalid(format!("population needs at least 2 members, got {n}")));
    }
    let dim = population[0].1.dim();
    if population.iter().any(|(_, v)| v.dim() != dim) {
        return Err(Error::invalid("population vectors differ in dimension"));
    }
    let others = T::from_usize_lossy(n - 1);
    let divergences: Vec<T> = (0..n)
        .map(|i| {
            let total = (0..n)
                .filter(|&j| j != i)
                .fold(T::zero(), |acc, j| acc + (T::one() - population[i].1.dot(&population[j].1)));
            (total / others).max(T::zero())
        })
        .collect();
    let size = T::from_usize_lossy(n);
    let per_response = population
        .iter()
        .zip(&divergences)
        .map(|((id, _), &d)| Distinctiveness {
            response_id: id.clone(),
            divergence: d,
            percentile: T::from_usize_lossy(divergences.iter().filter(|&&o| o < d).count()) / size,
        })
        .collect();
    Ok(PopulationDistinctiveness { per_response })
}

/// Sarle's bimodality coefficient from biased central moments with the
/// finite-sample kurtosis correction.
pub fn bimodality_coefficient<T: Scalar>(scores: &[T]) -> Result<BimodalityResult<T>> {
    let n = scores.len();
    if n < 4 {
        return Err(Error::invalid(format!("bimodality needs n >= 4, got {n}")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scores contain non-finite values"));
    }
    let first = scores[0];
    if scores.iter().all(|&s| s == first) {
        return Err(Error::degenerate("scores have zero variance"));
    }
    let nf = T::from_usize_lossy(n);
    let mean = scores.iter().fold(T::zero(), |a, &s| a + s) / nf;
    let (mut m2, mut m3, mut m4) = (T::zero(), T::zero(), T::zero());
    for &s in scores {
        let d = s - mean;
        let d2 = d * d;
        m2 = m2 + d2;
        m3 = m3 + d2 * d;
        m4 = m4 + d2 * d2;
    }
    m2 = m2 / nf;
    m3 = m3 / nf;
    m4 = m4 / nf;
    if m2 <= T::zero() {
        return Err(Error::degenerate("scores have zero variance"));
    }
    let skew = m3 / m2.powf(T::lit(1.5));
    let excess_kurtosis = m4 / (m2 * m2) - T::lit(3.0);
    let correction = T::lit(3.0) * (nf - T::one()) * (nf - T::one())
        / ((nf - T::lit(2.0)) * (nf - T::lit(3.0)));
    let coefficient = (skew * skew + T::one()) / (excess_kurtosis + correction);
    let threshold = T::lit(BIMODALITY_THRESHOLD);
    Ok(BimodalityResult { coefficient, threshold, flagged: coefficient > threshold, n })
}

/// Exact 1-D two-means: tries every split of the sorted scores and keeps the
/// one with the smallest within-cluster sum of squares (first one on ties).
pub fn two_cluster_split<T: Scalar>(scores: &[T]) -> Result<ClusterSplit<T>> {
    let n = scores.len();
    if n < 2 {
        return Err(Error::invalid(format!("two-cluster split needs n >= 2, got {n}")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scores contain non-finite values"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));

    // centre first so the prefix-sum SSE formula stays well conditioned
    let mean = sorted.iter().fold(T::zero(), |a, &s| a + s) / T::from_usize_lossy(n);
    let centred: Vec<T> = sorted.iter().map(|&s| s - mean).collect();
    let mut sum = vec![T::zero(); n + 1];
    let mut sq = vec![T::zero(); n + 1];
    for (i, &x) in centred.iter().enumerate() {
        sum[i + 1] = sum[i] + x;
        sq[i + 1] = sq[i] + x * x;
    }
    let sse = |lo: usize, hi: usize| {
        let count = T::from_usize_lossy(hi - lo);
        let s = sum[hi] - sum[lo];
        ((sq[hi] - sq[lo]) - s * s / count).max(T::zero())
    };
    let mut best = 1;
    let mut best_cost = T::infinity();
    for split in 1..n {
        let cost = sse(0, split) + sse(split, n);
        if cost < best_cost {
            best_cost = cost;
            best = split;
        }
    }
    let upper = sorted.split_off(best);
    let lower = sorted;
    let mean_of = |v: &[T]| v.iter().fold(T::zero(), |a, &s| a + s) / T::from_usize_lossy(v.len());
    Ok(ClusterSplit {
        boundary_gap: upper[0] - lower[lower.len() - 1],
        centroids: (mean_of(&lower), mean_of(&upper)),
        lower,
        upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> EmbeddingVector {
        EmbeddingVector::normalize(x.to_vec()).unwrap()
    }

    fn population(vectors: &[&[f64]]) -> Vec<(String, EmbeddingVector)> {
        vectors.iter().enumerate().map(|(i, x)| (format!("r{i}"), v(x))).collect()
    }

    #[test]
    fn identical_population_has_no_divergence() {
        let pop = population(&[&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]]);
        let d = distinctiveness(&pop).unwrap();
        for r in &d.per_response {
            assert_eq!((r.divergence, r.percentile), (0.0, 0.0));
        }
    }

    #[test]
    fn outlier_is_most_distinct() {
        let pop = population(&[&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let d = distinctiveness(&pop).unwrap().per_response;
        assert_eq!(d[3].divergence, 1.0);
        assert_eq!(d[3].percentile, 0.75);
        for r in &d[..3] {
            assert!((r.divergence - 1.0 / 3.0).abs() < 1e-15);
            assert_eq!(r.percentile, 0.0);
        }
    }

    #[test]
    fn orthogonal_pair() {
        let d = distinctiveness(&population(&[&[1.0, 0.0], &[0.0, 1.0]])).unwrap().per_response;
        assert!(d.iter().all(|r| r.divergence == 1.0 && r.percentile == 0.0));
        assert!(distinctiveness(&population(&[&[1.0, 0.0]])).is_err());
    }

    #[test]
    fn two_point_masses_are_bimodal() {
        let mut scores = vec![0.1; 10];
        scores.extend(vec![0.9; 10]);
        let bc = bimodality_coefficient::<f64>(&scores).unwrap();
        // g1 = 0, g2 = -2, correction = 3*19^2/(18*17)
        let expected = 1.0 / (-2.0 + 3.0 * 361.0 / 306.0);
        assert!((bc.coefficient - expected).abs() < 1e-12);
        assert!(bc.flagged);
        assert_eq!(bc.n, 20);
    }

    #[test]
    fn bimodality_errors() {
        assert!(matches!(bimodality_coefficient(&[0.5; 6]), Err(Error::DegenerateInput(_))));
        assert!(matches!(bimodality_coefficient(&[0.1, 0.2, 0.3]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn split_examples() {
        let s = two_cluster_split::<f64>(&[0.9, 0.1, 0.8, 0.2]).unwrap();
        assert_eq!(s.lower, vec![0.1, 0.2]);
        assert_eq!(s.upper, vec![0.8, 0.9]);
        assert!((s.centroids.0 - 0.15).abs() < 1e-15 && (s.centroids.1 - 0.85).abs() < 1e-15);
        assert!((s.boundary_gap - 0.6).abs() < 1e-15);

        let two = two_cluster_split::<f64>(&[1.0, 0.0]).unwrap();
        assert_eq!((two.boundary_gap, two.centroids), (1.0, (0.0, 1.0)));

        let tied = two_cluster_split::<f64>(&[0.5, 0.9, 0.5, 0.5]).unwrap();
        assert_eq!(tied.lower, vec![0.5; 3]);
        assert_eq!(tied.upper, vec![0.9]);
        assert!((tied.boundary_gap - 0.4).abs() < 1e-15);
        assert!(two_cluster_split(&[0.5]).is_err());
    }
}
