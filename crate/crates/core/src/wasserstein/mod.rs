//! Optimal transport between discrete measures over a shared finite ground
//! space, and the finite Wasserstein spaces built from families of such measures.

mod learned;
mod transport;

pub use learned::{
    learned_wasserstein_kmeans, GroundEstimator, KMeansSolver, LearnedWasserstein,
};
pub use transport::{solve_transport, TransportPlan};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MmError, Result};
use crate::matrix::DistanceMatrix;
use crate::mm_space::{pow_p, FiniteMetricMeasureSpace};

const MASS_TOL: f64 = 1e-12;
const MISMATCH_TOL: f64 = 1e-9;

/// Probability measure on a subset of a ground space, one atom per index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    ground_indices: Vec<usize>,
    masses: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(ground_indices: Vec<usize>, masses: Vec<f64>) -> Result<Self> {
        if ground_indices.is_empty() || ground_indices.len() != masses.len() {
            return Err(MmError::invalid("measure needs matching, nonempty indices and masses"));
        }
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(MmError::invalid("masses must be finite and nonnegative"));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(MmError::invalid(format!("masses sum to {total}, not 1")));
        }
        let mut sorted = ground_indices.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(MmError::invalid("duplicate ground index; aggregate masses first"));
        }
        Ok(DiscreteMeasure {
            ground_indices,
            masses,
        })
    }

    /// Sums the masses of repeated indices.
    pub fn aggregated(atoms: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, m) in atoms {
            *acc.entry(i).or_insert(0.0) += m;
        }
        let (idx, masses) = acc.into_iter().unzip();
        DiscreteMeasure::new(idx, masses)
    }

    /// Uniform measure on the given indices (repeats add mass).
    pub fn uniform(indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(MmError::invalid("uniform measure on an empty set"));
        }
        let w = 1.0 / indices.len() as f64;
        let m = DiscreteMeasure::aggregated(indices.iter().map(|&i| (i, w)))?;
        Ok(m.renormalized())
    }

    pub fn dirac(index: usize) -> Self {
        DiscreteMeasure {
            ground_indices: vec![index],
            masses: vec![1.0],
        }
    }

    fn renormalized(mut self) -> Self {
        let total: f64 = self.masses.iter().sum();
        for m in &mut self.masses {
            *m /= total;
        }
        self
    }

    pub fn ground_indices(&self) -> &[usize] {
        &self.ground_indices
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    fn positive_atoms(&self) -> (Vec<usize>, Vec<f64>) {
        self.ground_indices
            .iter()
            .zip(&self.masses)
            .filter(|(_, m)| **m > 0.0)
            .map(|(&i, &m)| (i, m))
            .unzip()
    }
}

/// `W_p(a, b)` for the ground metric `ground`, solved exactly.
pub fn wasserstein_distance(
    ground: &DistanceMatrix,
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    p: f64,
) -> Result<f64> {
    Ok(optimal_plan(ground, a, b, p)?.cost.powf(1.0 / p))
}

/// Optimal coupling for the cost `d^p`, on the positive-mass atoms of `a` and `b`.
pub fn optimal_plan(
    ground: &DistanceMatrix,
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    p: f64,
) -> Result<TransportPlan> {
    if !(p >= 1.0) {
        return Err(MmError::invalid(format!("p must be >= 1, got {p}")));
    }
    let n = ground.len();
    for m in [a, b] {
        if let Some(&bad) = m.ground_indices.iter().find(|&&i| i >= n) {
            return Err(MmError::invalid(format!(
                "support index {bad} outside the {n}-point ground space"
            )));
        }
    }
    let (sa, sb): (f64, f64) = (a.masses.iter().sum(), b.masses.iter().sum());
    if (sa - sb).abs() > MISMATCH_TOL {
        return Err(MmError::invalid(format!("mass mismatch: {sa} vs {sb}")));
    }
    let (ia, ma) = a.positive_atoms();
    let (ib, mb) = b.positive_atoms();
    let mut cost = Vec::with_capacity(ia.len() * ib.len());
    for &i in &ia {
        let row = ground.row(i);
        cost.extend(ib.iter().map(|&j| pow_p(row[j], p)));
    }
    solve_transport(&ma, &mb, &cost)
}

/// Pairwise Wasserstein distances between `measures` with uniform weights.
pub fn wasserstein_space(
    measures: &[DiscreteMeasure],
    ground: &DistanceMatrix,
    p: f64,
) -> Result<FiniteMetricMeasureSpace> {
    let m = measures.len();
    if m == 0 {
        return Err(MmError::invalid("need at least one measure"));
    }
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
        .collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| wasserstein_distance(ground, &measures[i], &measures[j], p))
        .collect::<Result<_>>()?;
    let mut dist = DistanceMatrix::zeros(m);
    for (&(i, j), v) in pairs.iter().zip(values) {
        dist.set(i, j, v);
        dist.set(j, i, v);
    }
    let labels = (0..m).map(|i| format!("measure{i}")).collect();
    FiniteMetricMeasureSpace::new(labels, dist, vec![1.0 / m as f64; m])
}

/// `8 (eps + sqrt(eps · diam))`: how far Wasserstein distances can move when the
/// ground metric is perturbed by at most `eps` in sup norm.
pub fn isometry_defect_bound(eps: f64, diam: f64) -> Result<f64> {
    if !(eps >= 0.0) || !(diam >= 0.0) {
        return Err(MmError::invalid("eps and diam must be nonnegative"));
    }
    Ok(8.0 * (eps + (eps * diam).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_ground(xs: &[f64]) -> DistanceMatrix {
        DistanceMatrix::symmetric_from_fn(xs.len(), |i, j| (xs[i] - xs[j]).abs())
    }

    #[test]
    fn identical_measures() {
        let g = line_ground(&[0.0, 1.0, 3.0]);
        let a = DiscreteMeasure::new(vec![0, 2], vec![0.4, 0.6]).unwrap();
        assert!(wasserstein_distance(&g, &a, &a, 2.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn diracs() {
        let g = line_ground(&[0.0, 1.0, 3.0]);
        let d = wasserstein_distance(&g, &DiscreteMeasure::dirac(0), &DiscreteMeasure::dirac(2), 2.0)
            .unwrap();
        assert!((d - 3.0).abs() < 1e-15);
    }

    #[test]
    fn half_mass_moves() {
        let g = line_ground(&[0.0, 1.0]);
        let a = DiscreteMeasure::new(vec![0, 1], vec![1.0, 0.0]).unwrap();
        let b = DiscreteMeasure::new(vec![0, 1], vec![0.5, 0.5]).unwrap();
        let d = wasserstein_distance(&g, &a, &b, 2.0).unwrap();
        assert!((d - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn measure_validation() {
        assert!(DiscreteMeasure::new(vec![0, 0], vec![0.5, 0.5]).is_err());
        assert!(DiscreteMeasure::new(vec![0, 1], vec![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::new(vec![], vec![]).is_err());
        let u = DiscreteMeasure::uniform(&[3, 1, 3, 2]).unwrap();
        assert_eq!(u.ground_indices(), &[1, 2, 3]);
        assert_eq!(u.masses(), &[0.25, 0.25, 0.5]);
        let g = line_ground(&[0.0, 1.0]);
        assert!(wasserstein_distance(&g, &DiscreteMeasure::dirac(5), &DiscreteMeasure::dirac(0), 1.0).is_err());
    }

    #[test]
    fn spaces() {
        let g = line_ground(&[0.0, 2.0]);
        let one = wasserstein_space(&[DiscreteMeasure::dirac(0)], &g, 2.0).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.d(0, 0), 0.0);
        let two =
            wasserstein_space(&[DiscreteMeasure::dirac(0), DiscreteMeasure::dirac(1)], &g, 2.0)
                .unwrap();
        assert_eq!(two.d(0, 1), 2.0);
        assert_eq!(two.weights(), &[0.5, 0.5]);
        assert!(wasserstein_space(&[], &g, 2.0).is_err());
    }

    #[test]
    fn defect_bound() {
        assert_eq!(isometry_defect_bound(0.0, 5.0).unwrap(), 0.0);
        assert!((isometry_defect_bound(0.01, 1.0).unwrap() - 0.88).abs() < 1e-12);
        assert!(isometry_defect_bound(-0.1, 1.0).is_err());
    }
}
