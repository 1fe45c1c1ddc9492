use serde::{Deserialize, Serialize};

use super::{wasserstein_space, DiscreteMeasure};
use crate::cloud::PointCloud;
use crate::diffusion::diffusion_distances_for_cloud;
use crate::error::{MmError, Result};
use crate::fermat_isomap::{fermat_distance_matrix, isomap_distance_matrix};
use crate::matrix::DistanceMatrix;
use crate::mm_space::{
    k_means_exact, k_means_pam, FiniteMetricMeasureSpace, KMeansSolution, DEFAULT_TIE_TOL,
};

/// How the ground metric on the pooled sample is learned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum GroundEstimator {
    Euclid,
    Fermat { alpha: f64 },
    Isomap { eps: f64 },
    Diffusion { sigma: f64, k: usize, t: f64 },
}

impl GroundEstimator {
    /// Ground distances on `cloud` plus, for each point, the index of the ground
    /// point it is identified with (the identity except for diffusion quotients).
    pub fn estimate(&self, cloud: &PointCloud) -> Result<(DistanceMatrix, Vec<usize>)> {
        let identity: Vec<usize> = (0..cloud.len()).collect();
        match *self {
            GroundEstimator::Euclid => Ok((cloud.euclidean_matrix(), identity)),
            GroundEstimator::Fermat { alpha } => {
                if cloud.len() < 2 {
                    return Ok((DistanceMatrix::zeros(1), identity));
                }
                Ok((fermat_distance_matrix(cloud, alpha)?, identity))
            }
            GroundEstimator::Isomap { eps } => Ok((isomap_distance_matrix(cloud, eps)?, identity)),
            GroundEstimator::Diffusion { sigma, k, t } => {
                let (dd, _) = diffusion_distances_for_cloud(cloud, sigma, k, t)?;
                let reps: Vec<usize> = dd.quotient_classes.iter().map(|c| c[0]).collect();
                Ok((dd.matrix.submatrix(&reps), dd.class_of()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "lowercase")]
pub enum KMeansSolver {
    Exact,
    Pam { restarts: usize, seed: u64 },
}

impl KMeansSolver {
    pub fn solve(&self, space: &FiniteMetricMeasureSpace, k: usize, p: f64) -> Result<KMeansSolution> {
        match *self {
            KMeansSolver::Exact => k_means_exact(space, k, p, DEFAULT_TIE_TOL),
            KMeansSolver::Pam { restarts, seed } => k_means_pam(space, k, p, restarts, seed),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LearnedWasserstein {
    /// Ground distances over the pooled sample (or its quotient).
    pub ground: DistanceMatrix,
    /// Empirical measure of each group on the ground space.
    pub measures: Vec<DiscreteMeasure>,
    pub space: FiniteMetricMeasureSpace,
    /// Centers are indices into `measures`.
    pub solution: KMeansSolution,
}

/// Pools the groups, learns a ground metric on the pool, forms each group's
/// empirical measure, and clusters the measures in Wasserstein distance with
/// medoids restricted to the input measures.
pub fn learned_wasserstein_kmeans(
    groups: &[PointCloud],
    estimator: GroundEstimator,
    k: usize,
    p: f64,
    solver: KMeansSolver,
) -> Result<LearnedWasserstein> {
    if groups.is_empty() {
        return Err(MmError::invalid("need at least one sample group"));
    }
    if k > groups.len() {
        return Err(MmError::invalid(format!(
            "k = {k} exceeds the number of groups ({})",
            groups.len()
        )));
    }
    let pooled = PointCloud::concat(groups)?;
    let (ground, ground_index) = estimator.estimate(&pooled)?;
    let mut offset = 0;
    let mut measures = Vec::with_capacity(groups.len());
    for g in groups {
        let idx: Vec<usize> = (offset..offset + g.len()).map(|i| ground_index[i]).collect();
        measures.push(DiscreteMeasure::uniform(&idx)?);
        offset += g.len();
    }
    let space = wasserstein_space(&measures, &ground, p)?;
    let solution = solver.solve(&space, k, p)?;
    Ok(LearnedWasserstein {
        ground,
        measures,
        space,
        solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mm_space::CenterSet;

    fn line(xs: &[f64]) -> PointCloud {
        PointCloud::from_line(xs).unwrap()
    }

    #[test]
    fn central_dirac_group_is_the_medoid() {
        let groups = [line(&[0.0]), line(&[0.1]), line(&[10.0])];
        let out =
            learned_wasserstein_kmeans(&groups, GroundEstimator::Euclid, 1, 2.0, KMeansSolver::Exact)
                .unwrap();
        assert_eq!(out.solution.minimizers, vec![CenterSet::new(vec![1]).unwrap()]);
        let expected = (0.1f64.powi(2) + 9.9f64.powi(2)) / 3.0;
        assert!((out.solution.objective - expected).abs() < 1e-12);
    }

    #[test]
    fn k_equal_m_has_zero_objective() {
        let groups = [line(&[0.0, 1.0]), line(&[5.0, 6.0])];
        let out =
            learned_wasserstein_kmeans(&groups, GroundEstimator::Euclid, 2, 2.0, KMeansSolver::Exact)
                .unwrap();
        assert_eq!(out.solution.objective, 0.0);
    }

    #[test]
    fn rejects_too_many_centers() {
        let groups = [line(&[0.0])];
        assert!(
            learned_wasserstein_kmeans(&groups, GroundEstimator::Euclid, 2, 2.0, KMeansSolver::Exact)
                .is_err()
        );
    }
}
