//! Density-adaptive graph metrics on point clouds.
//!
//! * [`fermat_distance_matrix`]: shortest paths in the complete graph with edge
//!   cost `|x - y|^alpha`.
//! * [`isomap_distance_matrix`]: shortest paths in the ε-graph with Euclidean
//!   edge lengths.
//! * [`fermat_1d_gaussian`]: the population Fermat distance of the standard
//!   normal density on the line.
//! * [`curvature_condition_check`]: pointwise sign check of the sectional
//!   curvature of the conformal Fermat metric.

mod curvature;
mod fermat;
mod gaussian;
mod isomap;

pub use curvature::{
    curvature_condition_check, BaseGeometry, ConstantDensity, CurvatureReport, FnDensity,
    GaussianDensity, GaussianMixtureDensity, SmoothDensity, CURVATURE_TOL,
};
pub use fermat::{
    fermat_distance_matrix, fermat_distance_matrix_with, fermat_scale_factor, fermat_scaled,
    FermatGraph, FermatParams,
};
pub use gaussian::{
    fermat_1d_gaussian, gaussian_fermat_moment_estimate, gauss_kronrod, MomentEstimate,
    QUADRATURE_TOL,
};
pub use isomap::{epsilon_graph, isomap_distance_matrix};
