use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MmError, Result};
use crate::matrix::DistanceMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsometryDefect {
    pub metric_defect: f64,
    pub covering_radius: f64,
}

/// max entrywise |d_n - d|.
pub fn metric_defect(d_n: &DistanceMatrix, d: &DistanceMatrix) -> Result<f64> {
    d_n.max_abs_diff(d)
}

/// sup over `grid` of the distance to the nearest sample point.
pub fn covering_radius<F>(grid: &[Vec<f64>], sample: &[Vec<f64>], dist: F) -> Result<f64>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    if grid.is_empty() || sample.is_empty() {
        return Err(MmError::invalid("grid and sample must be nonempty"));
    }
    Ok(grid
        .par_iter()
        .map(|z| sample.iter().map(|x| dist(z, x)).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max))
}

pub fn isometry_defect<F>(
    d_n: &DistanceMatrix,
    d: &DistanceMatrix,
    grid: &[Vec<f64>],
    sample: &[Vec<f64>],
    dist: F,
) -> Result<IsometryDefect>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    if sample.len() != d_n.len() {
        return Err(MmError::invalid("one sample point per matrix row required"));
    }
    Ok(IsometryDefect {
        metric_defect: metric_defect(d_n, d)?,
        covering_radius: covering_radius(grid, sample, dist)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Generator;

    #[test]
    fn identical_matrices_have_no_metric_defect() {
        let d = DistanceMatrix::symmetric_from_fn(4, |i, j| (i as f64 - j as f64).abs());
        assert_eq!(metric_defect(&d, &d).unwrap(), 0.0);
        assert!(metric_defect(&d, &DistanceMatrix::zeros(3)).is_err());
    }

    #[test]
    fn interval_endpoints_cover_to_the_midpoint() {
        let g = Generator::Interval { low: 0.0, high: 1.0 };
        let grid = g.reference_grid(1001).unwrap();
        let dist = |a: &[f64], b: &[f64]| g.geodesic(a, b);
        let r = covering_radius(&grid, &[vec![0.0], vec![1.0]], dist).unwrap();
        assert_eq!(r, 0.5);
        assert_eq!(covering_radius(&grid, &grid, dist).unwrap(), 0.0);
    }
}
