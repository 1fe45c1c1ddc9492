//! Finite metric measure spaces built from learned metrics, Fréchet k-means on
//! them, and diagnostics for the stability of centers and clusters.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`mm_space`] | spaces, the clustering functional, exact and PAM k-means, Hausdorff deviations |
//! | [`voronoi`] | Voronoi cells, enlarged cells, cluster deviation |
//! | [`fermat_isomap`] | Fermat and Isomap graph distances, 1-D Gaussian Fermat distance, curvature check |
//! | [`diffusion`] | Gaussian kernels, normalized Laplacian, diffusion maps and distances |
//! | [`wasserstein`] | exact discrete transport, Wasserstein spaces, learned-ground k-barycenters |
//! | [`fpp`] | first-passage percolation balls and their scaled spaces |
//! | [`quantize`] | Lloyd quantization, ε-net graphs, density compensation |
//! | [`harness`] | samplers, isometry defects, configuration-driven experiments |

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::type_complexity
)]

pub mod cloud;
pub mod diffusion;
pub mod error;
pub mod fermat_isomap;
pub mod fpp;
pub mod harness;
pub mod io;
pub mod matrix;
pub mod mm_space;
pub mod quantize;
pub mod seed;
pub mod shortest_path;
pub mod voronoi;
pub mod wasserstein;

pub use cloud::PointCloud;
pub use error::{MmError, Result};
pub use matrix::DistanceMatrix;
pub use mm_space::{phi, CenterSet, FiniteMetricMeasureSpace, KMeansSolution};
