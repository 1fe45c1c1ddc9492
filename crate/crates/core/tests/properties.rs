use proptest::prelude::*;

use mmspace::diffusion::{diffusion_distance_matrix, normalized_laplacian, similarity_matrix, SpectralDecomposition};
use mmspace::fermat_isomap::{fermat_distance_matrix, isomap_distance_matrix};
use mmspace::mm_space::{k_means_exact, k_means_pam, metric_validate, DEFAULT_TIE_TOL};
use mmspace::quantize::{density_compensation, quantize};
use mmspace::voronoi::{enlarged_cell, voronoi_cells};
use mmspace::wasserstein::{wasserstein_distance, DiscreteMeasure};
use mmspace::{phi, CenterSet, FiniteMetricMeasureSpace, PointCloud};

fn cloud_strategy(max_n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0..1.0f64, dim), 2..=max_n)
}

fn space_of(points: &[Vec<f64>]) -> FiniteMetricMeasureSpace {
    let cloud = PointCloud::from_points(points.to_vec()).unwrap();
    FiniteMetricMeasureSpace::uniform(cloud.euclidean_matrix()).unwrap()
}

fn measure(n: usize, masses: &[f64]) -> DiscreteMeasure {
    let total: f64 = masses.iter().sum();
    DiscreteMeasure::new((0..n).collect(), masses.iter().map(|m| m / total).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn phi_decreases_when_centers_are_added(points in cloud_strategy(12, 2), a in 0usize..12, b in 0usize..12) {
        let space = space_of(&points);
        let (a, b) = (a % space.len(), b % space.len());
        let one = phi(&space, &CenterSet::new(vec![a]).unwrap(), 2.0).unwrap();
        let mut both = vec![a, b];
        both.sort_unstable();
        both.dedup();
        let two = phi(&space, &CenterSet::new(both).unwrap(), 2.0).unwrap();
        prop_assert!(two <= one);
    }

    #[test]
    fn exact_objective_is_nonincreasing_in_k(points in cloud_strategy(9, 2), p in prop::sample::select(vec![1.0, 2.0, 3.0])) {
        let space = space_of(&points);
        let mut prev = f64::INFINITY;
        for k in 1..=space.len().min(4) {
            let sol = k_means_exact(&space, k, p, DEFAULT_TIE_TOL).unwrap();
            prop_assert!(sol.objective <= prev);
            let pam = k_means_pam(&space, k, p, 2, 7).unwrap();
            prop_assert!(pam.objective >= sol.objective * (1.0 - 1e-12));
            prev = sol.objective;
        }
        prop_assert_eq!(k_means_exact(&space, space.len(), p, DEFAULT_TIE_TOL).unwrap().objective, 0.0);
    }

    #[test]
    fn fermat_distances_are_metrics_below_euclidean_power(points in cloud_strategy(30, 2), alpha in 1.0..4.0f64) {
        let cloud = PointCloud::from_points(points).unwrap();
        let d = fermat_distance_matrix(&cloud, alpha).unwrap();
        let rows: Vec<Vec<f64>> = (0..cloud.len()).map(|i| d.row(i).to_vec()).collect();
        prop_assert!(metric_validate(&rows, 1e-9).unwrap().passed);
        for i in 0..cloud.len() {
            for j in 0..cloud.len() {
                prop_assert!(d.get(i, j) <= cloud.distance(i, j).powf(alpha) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn isomap_with_large_radius_is_euclidean(points in cloud_strategy(20, 3)) {
        let cloud = PointCloud::from_points(points).unwrap();
        let d = isomap_distance_matrix(&cloud, 10.0).unwrap();
        prop_assert!(d.max_abs_diff(&cloud.euclidean_matrix()).unwrap() <= 1e-12);
    }

    #[test]
    fn wasserstein_axioms(
        xs in prop::collection::vec(0.0..1.0f64, 3..8),
        ma in prop::collection::vec(0.1..1.0f64, 8),
        mb in prop::collection::vec(0.1..1.0f64, 8),
        mc in prop::collection::vec(0.1..1.0f64, 8),
        p in prop::sample::select(vec![1.0, 2.0]),
    ) {
        let n = xs.len();
        let ground = PointCloud::from_line(&xs).unwrap().euclidean_matrix();
        let (a, b, c) = (measure(n, &ma[..n]), measure(n, &mb[..n]), measure(n, &mc[..n]));
        let ab = wasserstein_distance(&ground, &a, &b, p).unwrap();
        let ba = wasserstein_distance(&ground, &b, &a, p).unwrap();
        let bc = wasserstein_distance(&ground, &b, &c, p).unwrap();
        let ac = wasserstein_distance(&ground, &a, &c, p).unwrap();
        prop_assert!(wasserstein_distance(&ground, &a, &a, p).unwrap() <= 1e-9);
        prop_assert!((ab - ba).abs() <= 1e-9);
        prop_assert!(ac <= ab + bc + 1e-9);
        if p == 1.0 {
            // On the line W_1 is the L1 distance between distribution functions.
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
            let (mut fa, mut fb, mut cdf) = (0.0, 0.0, 0.0);
            for w in order.windows(2) {
                fa += a.masses()[w[0]];
                fb += b.masses()[w[0]];
                cdf += (fa - fb).abs() * (xs[w[1]] - xs[w[0]]);
            }
            prop_assert!((ab - cdf).abs() <= 1e-9);
        }
    }

    #[test]
    fn diffusion_distances_shrink_with_time(points in cloud_strategy(15, 2), sigma in 0.1..1.0f64) {
        let cloud = PointCloud::from_points(points).unwrap();
        let lap = normalized_laplacian(&similarity_matrix(&cloud, sigma).unwrap()).unwrap();
        let dec = SpectralDecomposition::compute(&lap, cloud.len()).unwrap();
        prop_assert!(dec.eigenvalues.iter().all(|&l| (-1e-9..=1.0 + 1e-9).contains(&l)));
        let d1 = diffusion_distance_matrix(&dec.embedding(1.0).unwrap()).unwrap().matrix;
        let d3 = diffusion_distance_matrix(&dec.embedding(3.0).unwrap()).unwrap().matrix;
        for (x, y) in d3.as_slice().iter().zip(d1.as_slice()) {
            prop_assert!(*x <= y + 1e-9);
        }
    }

    #[test]
    fn voronoi_cells_cover_and_enlarged_cells_contain_them(points in cloud_strategy(20, 2), k in 1usize..4, delta in 0.0..0.5f64) {
        let space = space_of(&points);
        let centers = CenterSet::new((0..k.min(space.len())).collect()).unwrap();
        let part = voronoi_cells(&space, &centers).unwrap();
        let mut covered = vec![false; space.len()];
        for (cell, &b) in part.cells.iter().zip(centers.indices()) {
            cell.iter().for_each(|&x| covered[x] = true);
            let big = enlarged_cell(&space, &centers, b, delta).unwrap();
            prop_assert!(cell.iter().all(|x| big.contains(x)));
        }
        prop_assert!(covered.into_iter().all(|c| c));
    }

    #[test]
    fn quantization_traces_never_increase(xs in prop::collection::vec(-3.0..3.0f64, 5..60), n in 1usize..5, p in prop::sample::select(vec![1.0, 1.5, 2.0]), seed in any::<u64>()) {
        let cloud = PointCloud::from_line(&xs).unwrap();
        let q = quantize(&cloud, None, n, p, 3, seed).unwrap();
        for trace in &q.traces {
            for w in trace.objectives.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
        }
        prop_assert!((q.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let best = q.traces.iter().map(|t| t.last()).fold(f64::INFINITY, f64::min);
        prop_assert!((q.objective - best).abs() <= 1e-12 * best.max(1.0));
        prop_assert_eq!(&q, &quantize(&cloud, None, n, p, 3, seed).unwrap());
    }

    #[test]
    fn density_compensation_is_a_power_law(rho in prop::collection::vec(0.01..10.0f64, 1..10), scale in 0.1..10.0f64, p in 1.0..3.0f64, ell in 1usize..4) {
        let base = density_compensation(&rho, p, ell).unwrap();
        let scaled: Vec<f64> = rho.iter().map(|r| r * scale).collect();
        let moved = density_compensation(&scaled, p, ell).unwrap();
        for (m, b) in moved.iter().zip(&base) {
            prop_assert!((m - b).abs() <= 1e-9 * b);
        }
        prop_assert!((base.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let expo = -(p + ell as f64) / ell as f64;
        let ratio = (rho[0] / rho[rho.len() - 1]).powf(expo);
        prop_assert!((base[0] / base[rho.len() - 1] - ratio).abs() <= 1e-9 * ratio);
    }
}
