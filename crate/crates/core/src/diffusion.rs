//! Diffusion maps over a Gaussian similarity graph.
//!
//! Pipeline: [`similarity_matrix`] → [`normalized_laplacian`] →
//! [`SpectralDecomposition::compute`] → [`spectral_embedding`] →
//! [`diffusion_distance_matrix`]. The resulting distance is a pseudo-metric;
//! [`DiffusionDistances::quotient_space`] identifies points at distance zero.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{MmError, Result};
use crate::matrix::DistanceMatrix;
use crate::mm_space::FiniteMetricMeasureSpace;

/// Adjacent eigenvalues closer than this are reported as near-degenerate.
pub const GAP_TOL: f64 = 1e-8;

/// Relative merge tolerance for the zero-distance quotient.
pub const MERGE_TOL: f64 = 1e-10;

/// `exp(-|x - y|² / (2σ²))` for all pairs.
pub fn similarity_matrix(cloud: &PointCloud, sigma: f64) -> Result<DMatrix<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(MmError::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let n = cloud.len();
    let denom = 2.0 * sigma * sigma;
    let mut eta = DMatrix::from_element(n, n, 1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = cloud.distance(i, j);
            let v = (-(d * d) / denom).exp();
            eta[(i, j)] = v;
            eta[(j, i)] = v;
        }
    }
    Ok(eta)
}

/// `I - D^{-1/2} η D^{-1/2}` with degrees `d_i = Σ_j η_ij` (self term included).
pub fn normalized_laplacian(eta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = eta.nrows();
    if eta.ncols() != n {
        return Err(MmError::invalid("similarity matrix must be square"));
    }
    let inv_sqrt = degrees(eta)?
        .into_iter()
        .map(|d| 1.0 / d.sqrt())
        .collect::<Vec<_>>();
    let mut lap = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let a = 0.5 * (eta[(i, j)] + eta[(j, i)]);
            let delta = if i == j { 1.0 } else { 0.0 };
            lap[(i, j)] = delta - inv_sqrt[i] * a * inv_sqrt[j];
        }
    }
    Ok(lap)
}

pub fn degrees(eta: &DMatrix<f64>) -> Result<Vec<f64>> {
    let d: Vec<f64> = eta.row_iter().map(|r| r.sum()).collect();
    if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
        return Err(MmError::invalid(format!("nonpositive degree at vertex {i}")));
    }
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapWarning {
    pub index: usize,
    pub lower: f64,
    pub upper: f64,
}

/// The `k` smallest eigenpairs of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `j` pairs with `eigenvalues[j]`; unit norm, and the entry of
    /// largest magnitude is positive.
    pub eigenvectors: DMatrix<f64>,
    pub gap_warnings: Vec<GapWarning>,
}

impl SpectralDecomposition {
    pub fn compute(lap: &DMatrix<f64>, k: usize) -> Result<Self> {
        let n = lap.nrows();
        if lap.ncols() != n {
            return Err(MmError::invalid("Laplacian must be square"));
        }
        if k == 0 || k > n {
            return Err(MmError::invalid(format!("k = {k} must lie in 1..={n}")));
        }
        let eig = SymmetricEigen::new(lap.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        order.truncate(k);

        let eigenvalues: Vec<f64> = order.iter().map(|&c| eig.eigenvalues[c]).collect();
        let mut eigenvectors = DMatrix::zeros(n, k);
        for (dst, &src) in order.iter().enumerate() {
            let col = eig.eigenvectors.column(src);
            let norm = col.norm();
            let pivot = col
                .iter()
                .copied()
                .enumerate()
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
                .map_or(1.0, |(_, v)| v);
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for i in 0..n {
                eigenvectors[(i, dst)] = sign * col[i] / norm;
            }
        }
        let gap_warnings = eigenvalues
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1] - w[0] < GAP_TOL)
            .map(|(index, w)| GapWarning {
                index,
                lower: w[0],
                upper: w[1],
            })
            .collect();
        Ok(SpectralDecomposition {
            eigenvalues,
            eigenvectors,
            gap_warnings,
        })
    }

    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Largest `‖L u_j − λ_j u_j‖` over the retained pairs.
    pub fn max_residual(&self, lap: &DMatrix<f64>) -> f64 {
        (0..self.k())
            .map(|j| {
                let u = self.eigenvectors.column(j);
                (lap * u - u * self.eigenvalues[j]).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Rows are points; column `j` is `(1 - λ_j)^t u_j`.
    pub fn embedding(&self, t: f64) -> Result<DMatrix<f64>> {
        if !(t >= 0.0) {
            return Err(MmError::invalid(format!("t must be nonnegative, got {t}")));
        }
        let mut emb = self.eigenvectors.clone();
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let factor = diffusion_factor(lambda, t);
            emb.column_mut(j).scale_mut(factor);
        }
        Ok(emb)
    }
}

/// `(1 - λ)^t`, with `0^0 = 1` and the base clamped at zero against roundoff.
fn diffusion_factor(lambda: f64, t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        (1.0 - lambda).max(0.0).powf(t)
    }
}

/// Diffusion-map coordinates of the `k` lowest modes of `lap`.
pub fn spectral_embedding(lap: &DMatrix<f64>, k: usize, t: f64) -> Result<DMatrix<f64>> {
    SpectralDecomposition::compute(lap, k)?.embedding(t)
}

#[derive(Debug, Clone)]
pub struct DiffusionDistances {
    pub matrix: DistanceMatrix,
    /// Groups of indices whose pairwise distance is within the merge tolerance;
    /// sorted, ordered by smallest member.
    pub quotient_classes: Vec<Vec<usize>>,
    pub merge_tol: f64,
}

impl DiffusionDistances {
    /// Metric space on one representative (smallest index) per class; weights
    /// are the summed input weights of each class.
    pub fn quotient_space(&self, weights: &[f64]) -> Result<(FiniteMetricMeasureSpace, Vec<usize>)> {
        if weights.len() != self.matrix.len() {
            return Err(MmError::invalid("weight vector length mismatch"));
        }
        let reps: Vec<usize> = self.quotient_classes.iter().map(|c| c[0]).collect();
        let class_weights: Vec<f64> = self
            .quotient_classes
            .iter()
            .map(|c| c.iter().map(|&i| weights[i]).sum())
            .collect();
        let labels = reps.iter().map(|r| r.to_string()).collect();
        let space =
            FiniteMetricMeasureSpace::new(labels, self.matrix.submatrix(&reps), class_weights)?;
        Ok((space, reps))
    }

    /// Class index of every point.
    pub fn class_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.matrix.len()];
        for (c, members) in self.quotient_classes.iter().enumerate() {
            for &i in members {
                out[i] = c;
            }
        }
        out
    }
}

/// Euclidean distances between embedded rows plus the zero-distance quotient.
pub fn diffusion_distance_matrix(embedding: &DMatrix<f64>) -> Result<DiffusionDistances> {
    if embedding.iter().any(|v| !v.is_finite()) {
        return Err(MmError::invalid("embedding has non-finite coordinates"));
    }
    let n = embedding.nrows();
    let matrix = DistanceMatrix::symmetric_from_fn(n, |i, j| {
        (embedding.row(i) - embedding.row(j)).norm()
    });
    let spread = embedding
        .column_iter()
        .map(|c| c.max() - c.min())
        .fold(0.0, f64::max);
    let merge_tol = MERGE_TOL * spread;

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if matrix.get(i, j) <= merge_tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = classes.len();
            classes.push(Vec::new());
        }
        classes[slot[r]].push(i);
    }
    Ok(DiffusionDistances {
        matrix,
        quotient_classes: classes,
        merge_tol,
    })
}

/// Convenience: cloud → truncated diffusion distances.
pub fn diffusion_distances_for_cloud(
    cloud: &PointCloud,
    sigma: f64,
    k: usize,
    t: f64,
) -> Result<(DiffusionDistances, SpectralDecomposition)> {
    let lap = normalized_laplacian(&similarity_matrix(cloud, sigma)?)?;
    let decomp = SpectralDecomposition::compute(&lap, k)?;
    let dist = diffusion_distance_matrix(&decomp.embedding(t)?)?;
    Ok((dist, decomp))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(a: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, a, a, 1.0])
    }

    #[test]
    fn kernel_values() {
        let c = PointCloud::from_line(&[0.0, 0.5, 3.0]).unwrap();
        let eta = similarity_matrix(&c, 0.5).unwrap();
        assert_eq!(eta[(1, 1)], 1.0);
        assert!((eta[(0, 1)] - (-0.5f64).exp()).abs() < 1e-15);
        let wide = similarity_matrix(&c, 3e6).unwrap();
        assert!(wide.iter().all(|&v| (v - 1.0).abs() < 1e-9));
        assert!(similarity_matrix(&c, 0.0).is_err());
    }

    #[test]
    fn two_point_laplacian_closed_form() {
        let a = 0.3;
        let lap = normalized_laplacian(&two_point(a)).unwrap();
        let s = 1.0 / (1.0 + a);
        assert!((lap[(0, 0)] - a * s).abs() < 1e-15);
        assert!((lap[(0, 1)] + a * s).abs() < 1e-15);
        let dec = SpectralDecomposition::compute(&lap, 2).unwrap();
        assert!(dec.eigenvalues[0].abs() < 1e-12);
        assert!((dec.eigenvalues[1] - 2.0 * a / (1.0 + a)).abs() < 1e-12);
    }

    #[test]
    fn all_ones_kernel_spectrum() {
        let eta = DMatrix::from_element(5, 5, 1.0);
        let dec = SpectralDecomposition::compute(&normalized_laplacian(&eta).unwrap(), 5).unwrap();
        assert!(dec.eigenvalues[0].abs() < 1e-12);
        for &l in &dec.eigenvalues[1..] {
            assert!((l - 1.0).abs() < 1e-12);
        }
        // Four equal eigenvalues produce three gap warnings.
        assert_eq!(dec.gap_warnings.len(), 3);
    }

    #[test]
    fn sqrt_degree_vector_is_in_the_kernel() {
        let c = PointCloud::from_points(vec![vec![0.0, 0.0], vec![1.0, 0.2], vec![0.4, 2.0]])
            .unwrap();
        let eta = similarity_matrix(&c, 0.8).unwrap();
        let lap = normalized_laplacian(&eta).unwrap();
        let v = nalgebra::DVector::from_vec(degrees(&eta).unwrap().iter().map(|d| d.sqrt()).collect());
        assert!((lap * v).norm() < 1e-10);
    }

    #[test]
    fn embedding_scaling() {
        let a = 0.4;
        let lap = normalized_laplacian(&two_point(a)).unwrap();
        let dec = SpectralDecomposition::compute(&lap, 2).unwrap();
        let e0 = dec.embedding(0.0).unwrap();
        assert_eq!(e0, dec.eigenvectors);
        let e1 = dec.embedding(1.0).unwrap();
        let factor = 1.0 - 2.0 * a / (1.0 + a);
        for i in 0..2 {
            assert!((e1[(i, 1)] - factor * e0[(i, 1)]).abs() < 1e-12);
            assert!((e1[(i, 0)] - e0[(i, 0)]).abs() < 1e-12);
        }
        let far = dec.embedding(200.0).unwrap();
        assert!(far.column(1).norm() < 1e-12);
        assert!(spectral_embedding(&lap, 3, 1.0).is_err());
    }

    #[test]
    fn two_point_distance_at_t_zero() {
        let lap = normalized_laplacian(&two_point(0.7)).unwrap();
        let emb = spectral_embedding(&lap, 2, 0.0).unwrap();
        let d = diffusion_distance_matrix(&emb).unwrap();
        assert!((d.matrix.get(0, 1) - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(d.quotient_classes, vec![vec![0], vec![1]]);
    }

    #[test]
    fn identical_rows_share_a_class() {
        let emb = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.5, 0.5, 1.0, 2.0]);
        let d = diffusion_distance_matrix(&emb).unwrap();
        assert_eq!(d.matrix.get(0, 2), 0.0);
        assert_eq!(d.matrix.get(1, 1), 0.0);
        assert_eq!(d.quotient_classes, vec![vec![0, 2], vec![1]]);
        let (q, reps) = d.quotient_space(&[0.25, 0.5, 0.25]).unwrap();
        assert_eq!(reps, vec![0, 1]);
        assert_eq!(q.weights(), &[0.5, 0.5]);
        assert_eq!(d.class_of(), vec![0, 1, 0]);
    }
}
