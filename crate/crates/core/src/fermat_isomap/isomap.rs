use crate::cloud::PointCloud;
use crate::error::{MmError, Result};
use crate::matrix::DistanceMatrix;
use crate::shortest_path::Graph;

/// Graph with an edge of Euclidean length between every pair at distance <= eps.
pub fn epsilon_graph(cloud: &PointCloud, eps: f64) -> Result<Graph> {
    if !(eps > 0.0) {
        return Err(MmError::invalid(format!("eps must be positive, got {eps}")));
    }
    let n = cloud.len();
    let mut g = Graph::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = cloud.distance(i, j);
            if d <= eps {
                g.add_edge(i, j, d);
            }
        }
    }
    Ok(g)
}

/// Shortest-path distances in the ε-graph.
pub fn isomap_distance_matrix(cloud: &PointCloud, eps: f64) -> Result<DistanceMatrix> {
    let hint = format!("try an eps larger than {eps}");
    let mut d = epsilon_graph(cloud, eps)?.all_pairs(&hint)?;
    // A path sum can round one ulp below the chord; the chord is a lower bound.
    let n = cloud.len();
    for i in 0..n {
        for j in 0..n {
            let chord = cloud.distance(i, j);
            if d.get(i, j) < chord {
                d.set(i, j, chord);
            }
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hops_around_missing_edge() {
        let c = PointCloud::from_line(&[0.0, 0.5, 1.2]).unwrap();
        let d = isomap_distance_matrix(&c, 0.8).unwrap();
        assert!((d.get(0, 2) - 1.2).abs() < 1e-15);
        assert_eq!(epsilon_graph(&c, 0.8).unwrap().edge_count(), 2);
    }

    #[test]
    fn large_eps_is_euclidean() {
        let c = PointCloud::from_points(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, -1.0]])
            .unwrap();
        let d = isomap_distance_matrix(&c, 10.0).unwrap();
        assert_eq!(d, c.euclidean_matrix());
    }

    #[test]
    fn disconnected_graph_reports_components() {
        let c = PointCloud::from_line(&[0.0, 0.5, 1.2]).unwrap();
        match isomap_distance_matrix(&c, 0.6) {
            Err(MmError::Disconnected { components, .. }) => {
                assert_eq!(components, vec![vec![0, 1], vec![2]]);
            }
            other => panic!("expected disconnected error, got {other:?}"),
        }
        assert!(isomap_distance_matrix(&c, 0.0).is_err());
    }
}
