use serde::{Deserialize, Serialize};

use crate::error::{MmError, Result};
use crate::matrix::DistanceMatrix;

/// Sample points in ambient ℝ^D together with a declared intrinsic dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    ambient_dim: usize,
    intrinsic_dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>, intrinsic_dim: usize) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(MmError::invalid("point cloud is empty"));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(MmError::invalid("points must have at least one coordinate"));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(MmError::invalid("points have inconsistent dimensions"));
        }
        let coords: Vec<f64> = points.into_iter().flatten().collect();
        PointCloud::from_flat(dim, intrinsic_dim, coords)
    }

    /// Intrinsic dimension defaults to the ambient one.
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map_or(1, Vec::len);
        PointCloud::new(points, dim.max(1))
    }

    pub fn from_line(xs: &[f64]) -> Result<Self> {
        PointCloud::from_flat(1, 1, xs.to_vec())
    }

    pub fn from_flat(ambient_dim: usize, intrinsic_dim: usize, coords: Vec<f64>) -> Result<Self> {
        if ambient_dim == 0 || coords.is_empty() || !coords.len().is_multiple_of(ambient_dim) {
            return Err(MmError::invalid("malformed coordinate buffer"));
        }
        if intrinsic_dim == 0 || intrinsic_dim > ambient_dim {
            return Err(MmError::invalid(format!(
                "intrinsic dimension {intrinsic_dim} must lie in 1..={ambient_dim}"
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(MmError::invalid("point coordinates must be finite"));
        }
        Ok(PointCloud {
            ambient_dim,
            intrinsic_dim,
            coords,
        })
    }

    pub fn with_intrinsic_dim(self, intrinsic_dim: usize) -> Result<Self> {
        PointCloud::from_flat(self.ambient_dim, intrinsic_dim, self.coords)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.ambient_dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.ambient_dim)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.points().map(<[f64]>::to_vec).collect()
    }

    /// Concatenates clouds of equal ambient dimension.
    pub fn concat(clouds: &[PointCloud]) -> Result<PointCloud> {
        let Some(first) = clouds.first() else {
            return Err(MmError::invalid("no clouds to concatenate"));
        };
        if clouds.iter().any(|c| c.ambient_dim != first.ambient_dim) {
            return Err(MmError::invalid("clouds have different ambient dimensions"));
        }
        let coords = clouds.iter().flat_map(|c| c.coords.iter().copied()).collect();
        PointCloud::from_flat(first.ambient_dim, first.intrinsic_dim, coords)
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        euclidean(self.point(i), self.point(j))
    }

    pub fn euclidean_matrix(&self) -> DistanceMatrix {
        DistanceMatrix::symmetric_from_fn(self.len(), |i, j| self.distance(i, j))
    }

    pub fn diameter(&self) -> f64 {
        let n = self.len();
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                d = d.max(self.distance(i, j));
            }
        }
        d
    }
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_clouds() {
        assert!(PointCloud::new(vec![], 1).is_err());
        assert!(PointCloud::new(vec![vec![0.0], vec![0.0, 1.0]], 1).is_err());
        assert!(PointCloud::new(vec![vec![0.0, 1.0]], 3).is_err());
        assert!(PointCloud::new(vec![vec![f64::NAN]], 1).is_err());
    }

    #[test]
    fn euclidean_distances() {
        let c = PointCloud::from_points(vec![vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(c.distance(0, 1), 5.0);
        assert_eq!(c.euclidean_matrix().get(1, 0), 5.0);
        assert_eq!(c.diameter(), 5.0);
    }
}
