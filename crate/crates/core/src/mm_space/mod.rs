//! Finite metric measure spaces and the clustering functional over them.
//!
//! A [`FiniteMetricMeasureSpace`] is the common substrate for every learned
//! metric in this crate: Fermat and Isomap graph distances, diffusion
//! distances, Wasserstein distances between measures and scaled passage
//! times all end up here before clustering.

mod hausdorff;
mod kmeans;
mod validate;

pub use hausdorff::{hausdorff, one_sided_center_deviation};
pub use kmeans::{
    k_means_exact, k_means_exact_with_budget, k_means_pam, k_means_pam_with_tol, KMeansSolution, SolverMethod, DEFAULT_ENUMERATION_BUDGET,
    DEFAULT_TIE_TOL,
};
pub use validate::{metric_validate, validate_matrix, MetricReport, Violation};

use serde::{Deserialize, Serialize};

use crate::error::{MmError, Result};
use crate::matrix::DistanceMatrix;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A finite set of labelled points with a distance matrix and a probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMetricMeasureSpace {
    labels: Vec<String>,
    dist: DistanceMatrix,
    weights: Vec<f64>,
}

impl FiniteMetricMeasureSpace {
    /// Checks shapes, symmetry, zero diagonal and the weight simplex.
    ///
    /// The triangle inequality is not checked here since it costs O(n³);
    /// use [`metric_validate`] when the matrix comes from an untrusted source.
    pub fn new(labels: Vec<String>, dist: DistanceMatrix, weights: Vec<f64>) -> Result<Self> {
        let n = dist.len();
        if n == 0 {
            return Err(MmError::invalid("space must contain at least one point"));
        }
        if labels.len() != n || weights.len() != n {
            return Err(MmError::invalid(format!(
                "{} labels and {} weights for a {n}-point matrix",
                labels.len(),
                weights.len()
            )));
        }
        for i in 0..n {
            if dist.get(i, i) != 0.0 {
                return Err(MmError::invalid(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = dist.get(i, j);
                if !v.is_finite() || v < 0.0 {
                    return Err(MmError::invalid(format!("bad distance {v} at ({i},{j})")));
                }
                if v != dist.get(j, i) {
                    return Err(MmError::invalid(format!("asymmetric entry at ({i},{j})")));
                }
            }
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(MmError::invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(MmError::invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(FiniteMetricMeasureSpace {
            labels,
            dist,
            weights,
        })
    }

    /// Uniform weights and labels `0..n`.
    pub fn uniform(dist: DistanceMatrix) -> Result<Self> {
        let n = dist.len();
        if n == 0 {
            return Err(MmError::invalid("space must contain at least one point"));
        }
        let labels = (0..n).map(|i| i.to_string()).collect();
        FiniteMetricMeasureSpace::new(labels, dist, vec![1.0 / n as f64; n])
    }

    /// Uniform space over points of the real line with |x - y| distances.
    pub fn from_line(points: &[f64]) -> Result<Self> {
        let dist = DistanceMatrix::symmetric_from_fn(points.len(), |i, j| {
            (points[i] - points[j]).abs()
        });
        let mut s = FiniteMetricMeasureSpace::uniform(dist)?;
        s.labels = points.iter().map(|p| p.to_string()).collect();
        Ok(s)
    }

    pub fn with_weights(self, weights: Vec<f64>) -> Result<Self> {
        FiniteMetricMeasureSpace::new(self.labels, self.dist, weights)
    }

    pub fn with_labels(self, labels: Vec<String>) -> Result<Self> {
        FiniteMetricMeasureSpace::new(labels, self.dist, self.weights)
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dist(&self) -> &DistanceMatrix {
        &self.dist
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist.get(i, j)
    }

    pub fn diameter(&self) -> f64 {
        self.dist.diameter()
    }

    /// Distance from point `i` to the nearest member of `centers`.
    pub fn dist_to_set(&self, i: usize, centers: &[usize]) -> f64 {
        let row = self.dist.row(i);
        centers.iter().map(|&c| row[c]).fold(f64::INFINITY, f64::min)
    }
}

/// A nonempty set of distinct point indices, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CenterSet(Vec<usize>);

impl CenterSet {
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(MmError::invalid("center set must be nonempty"));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(MmError::invalid("center indices must be distinct"));
        }
        Ok(CenterSet(indices))
    }

    pub(crate) fn from_sorted_unchecked(indices: Vec<usize>) -> Self {
        CenterSet(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn check_in(&self, space: &FiniteMetricMeasureSpace) -> Result<()> {
        match self.0.iter().find(|&&i| i >= space.len()) {
            Some(&bad) => Err(MmError::invalid(format!(
                "center index {bad} out of range for {} points",
                space.len()
            ))),
            None => Ok(()),
        }
    }
}

/// The clustering functional: Σ_i w_i · d(x_i, S)^p.
pub fn phi(space: &FiniteMetricMeasureSpace, centers: &CenterSet, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(MmError::invalid(format!("p must be >= 1, got {p}")));
    }
    centers.check_in(space)?;
    Ok(phi_unchecked(space, centers.indices(), p))
}

pub(crate) fn phi_unchecked(space: &FiniteMetricMeasureSpace, centers: &[usize], p: f64) -> f64 {
    let mut total = 0.0;
    for (i, &w) in space.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let d = space.dist_to_set(i, centers);
        total += w * pow_p(d, p);
    }
    total
}

#[inline]
pub(crate) fn pow_p(d: f64, p: f64) -> f64 {
    if p == 2.0 {
        d * d
    } else if p == 1.0 {
        d
    } else {
        d.powf(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_singleton_space_is_zero() {
        let s = FiniteMetricMeasureSpace::from_line(&[3.0]).unwrap();
        let c = CenterSet::new(vec![0]).unwrap();
        assert_eq!(phi(&s, &c, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn phi_three_points_middle_center() {
        let s = FiniteMetricMeasureSpace::from_line(&[0.0, 1.0, 2.0]).unwrap();
        let c = CenterSet::new(vec![1]).unwrap();
        assert!((phi(&s, &c, 2.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn phi_weighted_two_points() {
        let s = FiniteMetricMeasureSpace::from_line(&[0.0, 1.0])
            .unwrap()
            .with_weights(vec![0.9, 0.1])
            .unwrap();
        let c = CenterSet::new(vec![0]).unwrap();
        assert!((phi(&s, &c, 1.0).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn phi_rejects_bad_input() {
        let s = FiniteMetricMeasureSpace::from_line(&[0.0, 1.0]).unwrap();
        assert!(CenterSet::new(vec![]).is_err());
        assert!(CenterSet::new(vec![1, 1]).is_err());
        let c = CenterSet::new(vec![5]).unwrap();
        assert!(matches!(phi(&s, &c, 2.0), Err(MmError::InvalidArgument(_))));
        let c = CenterSet::new(vec![0]).unwrap();
        assert!(phi(&s, &c, 0.5).is_err());
    }

    #[test]
    fn zero_weight_points_do_not_count() {
        let s = FiniteMetricMeasureSpace::from_line(&[0.0, 7.0])
            .unwrap()
            .with_weights(vec![1.0, 0.0])
            .unwrap();
        let c = CenterSet::new(vec![0]).unwrap();
        assert_eq!(phi(&s, &c, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn space_rejects_bad_weights() {
        let d = DistanceMatrix::zeros(2);
        let labels = vec!["a".into(), "b".into()];
        assert!(FiniteMetricMeasureSpace::new(labels.clone(), d.clone(), vec![0.5, 0.6]).is_err());
        assert!(FiniteMetricMeasureSpace::new(labels, d, vec![1.5, -0.5]).is_err());
    }
}
