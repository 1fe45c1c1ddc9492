//! Voronoi cells over a finite metric space, their δ-enlargements and the
//! one-sided deviation between two families of clusters.
//!
//! Cells use the non-strict inequality, so a point equidistant from several
//! centers belongs to all of their cells.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{MmError, Result};
use crate::mm_space::{CenterSet, FiniteMetricMeasureSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoronoiPartition {
    pub centers: CenterSet,
    /// `cells[c]` belongs to `centers.indices()[c]`; each cell is sorted.
    pub cells: Vec<Vec<usize>>,
}

impl VoronoiPartition {
    pub fn cell_of(&self, center: usize) -> Option<&[usize]> {
        let pos = self.centers.indices().iter().position(|&c| c == center)?;
        Some(&self.cells[pos])
    }

    /// `{center_index: [point indices]}` keyed by the center's point index.
    pub fn to_map(&self) -> BTreeMap<usize, Vec<usize>> {
        self.centers
            .indices()
            .iter()
            .copied()
            .zip(self.cells.iter().cloned())
            .collect()
    }
}

pub fn voronoi_cells(space: &FiniteMetricMeasureSpace, centers: &CenterSet) -> Result<VoronoiPartition> {
    centers.check_in(space)?;
    let idx = centers.indices();
    let mut cells = vec![Vec::new(); idx.len()];
    for x in 0..space.len() {
        let nearest = space.dist_to_set(x, idx);
        for (c, &b) in idx.iter().enumerate() {
            if space.d(x, b) <= nearest {
                cells[c].push(x);
            }
        }
    }
    Ok(VoronoiPartition {
        centers: centers.clone(),
        cells,
    })
}

/// `{x : d(x,b) <= d(x,b') + delta for every b' in S}`.
pub fn enlarged_cell(
    space: &FiniteMetricMeasureSpace,
    centers: &CenterSet,
    b: usize,
    delta: f64,
) -> Result<Vec<usize>> {
    centers.check_in(space)?;
    if !centers.contains(b) {
        return Err(MmError::invalid(format!("{b} is not one of the centers")));
    }
    if !(delta >= 0.0) {
        return Err(MmError::invalid("delta must be nonnegative"));
    }
    Ok((0..space.len())
        .filter(|&x| space.d(x, b) <= space.dist_to_set(x, centers.indices()) + delta)
        .collect())
}

/// Smallest positive slack `d(x, b) - d(x, S)` over points outside the cell of `b`.
///
/// For every `delta` strictly below this value the enlarged cell equals the
/// Voronoi cell; `None` means the cell of `b` is already the whole space.
pub fn enlargement_threshold(
    space: &FiniteMetricMeasureSpace,
    centers: &CenterSet,
    b: usize,
) -> Result<Option<f64>> {
    centers.check_in(space)?;
    if !centers.contains(b) {
        return Err(MmError::invalid(format!("{b} is not one of the centers")));
    }
    Ok((0..space.len())
        .map(|x| space.d(x, b) - space.dist_to_set(x, centers.indices()))
        .filter(|&g| g > 0.0)
        .min_by(f64::total_cmp))
}

/// max over V in `cells_n` of min over W in `cells_lim` of max over v in V of d(v, W).
pub fn cluster_deviation<T, F>(cells_n: &[Vec<T>], cells_lim: &[Vec<T>], dist: F) -> Result<f64>
where
    F: Fn(&T, &T) -> f64,
{
    if cells_n.is_empty() || cells_lim.is_empty() {
        return Err(MmError::invalid("cluster family must be nonempty"));
    }
    if cells_n.iter().chain(cells_lim).any(Vec::is_empty) {
        return Err(MmError::invalid("clusters must be nonempty"));
    }
    let excess = |v_cell: &[T], w_cell: &[T]| {
        v_cell
            .iter()
            .map(|v| w_cell.iter().map(|w| dist(v, w)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    Ok(cells_n
        .iter()
        .map(|v| {
            cells_lim
                .iter()
                .map(|w| excess(v, w))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line3() -> FiniteMetricMeasureSpace {
        FiniteMetricMeasureSpace::from_line(&[0.0, 1.0, 2.0]).unwrap()
    }

    fn set(v: &[usize]) -> CenterSet {
        CenterSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn tie_goes_to_both_cells() {
        let p = voronoi_cells(&line3(), &set(&[0, 2])).unwrap();
        assert_eq!(p.cells, vec![vec![0, 1], vec![1, 2]]);
        assert_eq!(p.cell_of(2), Some(&[1, 2][..]));
    }

    #[test]
    fn trivial_partitions() {
        let p = voronoi_cells(&line3(), &set(&[0, 1, 2])).unwrap();
        assert_eq!(p.cells, vec![vec![0], vec![1], vec![2]]);
        let p = voronoi_cells(&line3(), &set(&[1])).unwrap();
        assert_eq!(p.cells, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn enlarged_cells() {
        let s = line3();
        let c = set(&[0, 2]);
        assert_eq!(enlarged_cell(&s, &c, 0, 0.0).unwrap(), vec![0, 1]);
        assert_eq!(enlarged_cell(&s, &c, 0, 2.0).unwrap(), vec![0, 1, 2]);
        assert_eq!(enlarged_cell(&s, &c, 0, 4.0).unwrap(), vec![0, 1, 2]);
        assert!(enlarged_cell(&s, &c, 1, 0.0).is_err());
        assert!(enlarged_cell(&s, &c, 0, -1.0).is_err());
        assert_eq!(enlargement_threshold(&s, &c, 0).unwrap(), Some(2.0));
    }

    #[test]
    fn deviation_examples() {
        let abs = |a: &f64, b: &f64| (a - b).abs();
        let fam = vec![vec![0.0, 1.0], vec![3.0]];
        assert_eq!(cluster_deviation(&fam, &fam, abs).unwrap(), 0.0);
        assert_eq!(cluster_deviation(&[vec![0.0, 1.0]], &[vec![0.0]], abs).unwrap(), 1.0);
        assert_eq!(
            cluster_deviation(&[vec![0.0], vec![9.0]], &[vec![0.0, 9.0]], abs).unwrap(),
            0.0
        );
        assert!(cluster_deviation(&[vec![]], &[vec![0.0]], abs).is_err());
        assert!(cluster_deviation::<f64, _>(&[], &[vec![0.0]], abs).is_err());
    }
}
