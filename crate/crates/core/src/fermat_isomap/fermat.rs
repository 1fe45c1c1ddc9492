use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{MmError, Result};
use crate::matrix::DistanceMatrix;
use crate::shortest_path::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FermatParams {
    pub alpha: f64,
    pub intrinsic_dim: usize,
}

impl FermatParams {
    pub fn new(alpha: f64, intrinsic_dim: usize) -> Result<Self> {
        if !(alpha >= 1.0) || !alpha.is_finite() {
            return Err(MmError::invalid(format!("alpha must be >= 1, got {alpha}")));
        }
        if intrinsic_dim == 0 {
            return Err(MmError::invalid("intrinsic dimension must be >= 1"));
        }
        Ok(FermatParams {
            alpha,
            intrinsic_dim,
        })
    }

    /// Conformal exponent `(1 - alpha) / intrinsic_dim`, never positive.
    pub fn kappa(&self) -> f64 {
        (1.0 - self.alpha) / self.intrinsic_dim as f64
    }
}

/// Which edges the shortest-path search may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum FermatGraph {
    /// Every pair is an edge. Edges that can be replaced by a two-hop path of
    /// strictly shorter edges with no larger total cost are dropped before the
    /// search, which leaves all distances unchanged.
    #[default]
    Complete,
    /// Symmetrized k-nearest-neighbour graph. Distances are upper bounds of the
    /// complete-graph ones and can be infinite-free only when the graph is connected.
    Knn(usize),
}

pub fn fermat_distance_matrix(cloud: &PointCloud, alpha: f64) -> Result<DistanceMatrix> {
    fermat_distance_matrix_with(cloud, alpha, FermatGraph::Complete)
}

pub fn fermat_distance_matrix_with(
    cloud: &PointCloud,
    alpha: f64,
    graph: FermatGraph,
) -> Result<DistanceMatrix> {
    let n = cloud.len();
    if n < 2 {
        return Err(MmError::invalid("Fermat distances need at least two points"));
    }
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(MmError::invalid(format!("alpha must be >= 1, got {alpha}")));
    }
    // With alpha = 1 the direct edge is always a shortest path.
    if alpha == 1.0 && graph == FermatGraph::Complete {
        return Ok(cloud.euclidean_matrix());
    }
    let cost = DistanceMatrix::symmetric_from_fn(n, |i, j| edge_cost(cloud.distance(i, j), alpha));
    let g = match graph {
        FermatGraph::Complete => pruned_complete_graph(cloud, &cost),
        FermatGraph::Knn(k) => knn_graph(cloud, &cost, k)?,
    };
    g.all_pairs("increase the neighbourhood size or use the complete graph")
}

#[inline]
fn edge_cost(d: f64, alpha: f64) -> f64 {
    if alpha == 2.0 {
        d * d
    } else {
        d.powf(alpha)
    }
}

/// Keeps edge {i, j} unless some z has c(i,z) < c(i,j), c(z,j) < c(i,j) and
/// c(i,z) + c(z,j) <= c(i,j). By induction on edge cost every dropped edge is
/// replaced by a path of kept edges of no larger cost.
fn pruned_complete_graph(cloud: &PointCloud, cost: &DistanceMatrix) -> Graph {
    let n = cloud.len();
    let kept: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = cost.row(i);
            let mut order: Vec<usize> = (0..n).filter(|&z| z != i).collect();
            order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
            let mut keep = Vec::new();
            for j in (i + 1)..n {
                let cij = row[j];
                let redundant = order
                    .iter()
                    .take_while(|&&z| row[z] < cij)
                    .any(|&z| {
                        let czj = cost.get(z, j);
                        czj < cij && row[z] + czj <= cij
                    });
                if !redundant {
                    keep.push(j);
                }
            }
            keep
        })
        .collect();
    let mut g = Graph::new(n);
    for (i, js) in kept.into_iter().enumerate() {
        for j in js {
            g.add_edge(i, j, cost.get(i, j));
        }
    }
    g
}

fn knn_graph(cloud: &PointCloud, cost: &DistanceMatrix, k: usize) -> Result<Graph> {
    let n = cloud.len();
    if k == 0 {
        return Err(MmError::invalid("k-NN graph needs k >= 1"));
    }
    let mut adjacent = vec![vec![false; n]; n];
    for i in 0..n {
        let row = cost.row(i);
        let mut order: Vec<usize> = (0..n).filter(|&z| z != i).collect();
        order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        for &j in order.iter().take(k) {
            adjacent[i][j] = true;
            adjacent[j][i] = true;
        }
    }
    let mut g = Graph::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if adjacent[i][j] {
                g.add_edge(i, j, cost.get(i, j));
            }
        }
    }
    Ok(g)
}

/// `n^((alpha - 1) / intrinsic_dim)`.
pub fn fermat_scale_factor(n: usize, alpha: f64, intrinsic_dim: usize) -> f64 {
    (n as f64).powf((alpha - 1.0) / intrinsic_dim as f64)
}

/// Rescales an empirical Fermat matrix so that it has a nondegenerate limit as n grows.
pub fn fermat_scaled(
    matrix: &DistanceMatrix,
    n: usize,
    alpha: f64,
    intrinsic_dim: usize,
) -> DistanceMatrix {
    matrix.scaled(fermat_scale_factor(n, alpha, intrinsic_dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mm_space::validate_matrix;

    #[test]
    fn two_points_use_the_direct_edge() {
        let c = PointCloud::from_line(&[0.0, 3.0]).unwrap();
        let d = fermat_distance_matrix(&c, 2.5).unwrap();
        assert!((d.get(0, 1) - 3f64.powf(2.5)).abs() < 1e-12);
    }

    #[test]
    fn collinear_three_points() {
        let c = PointCloud::from_line(&[0.0, 1.0, 2.0]).unwrap();
        let d = fermat_distance_matrix(&c, 2.0).unwrap();
        assert_eq!(d.get(0, 2), 2.0);
        assert_eq!(d.get(0, 1), 1.0);
    }

    #[test]
    fn alpha_one_is_euclidean() {
        let c = PointCloud::from_points(vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![-1.0, 0.5]])
            .unwrap();
        assert_eq!(fermat_distance_matrix(&c, 1.0).unwrap(), c.euclidean_matrix());
    }

    #[test]
    fn rejects_bad_input() {
        let one = PointCloud::from_line(&[0.0]).unwrap();
        assert!(fermat_distance_matrix(&one, 2.0).is_err());
        let two = PointCloud::from_line(&[0.0, 1.0]).unwrap();
        assert!(fermat_distance_matrix(&two, 0.5).is_err());
        assert!(FermatParams::new(0.9, 1).is_err());
        assert_eq!(FermatParams::new(3.0, 2).unwrap().kappa(), -1.0);
    }

    #[test]
    fn duplicates_are_at_distance_zero() {
        let c = PointCloud::from_line(&[0.0, 1.0, 1.0, 2.0]).unwrap();
        let d = fermat_distance_matrix(&c, 2.0).unwrap();
        assert_eq!(d.get(1, 2), 0.0);
        assert_eq!(d.get(0, 3), 2.0);
        assert!(validate_matrix(&d, 1e-9).passed);
    }

    #[test]
    fn scale_factors() {
        assert_eq!(fermat_scale_factor(4, 2.0, 1), 4.0);
        assert_eq!(fermat_scale_factor(4, 1.0, 1), 1.0);
        assert!((fermat_scale_factor(100, 2.0, 2) - 10.0).abs() < 1e-12);
        let m = DistanceMatrix::symmetric_from_fn(2, |_, _| 1.5);
        assert_eq!(fermat_scaled(&m, 4, 2.0, 1).get(0, 1), 6.0);
    }
}
