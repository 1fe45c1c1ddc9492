use serde::{Deserialize, Serialize};

use crate::error::{MmError, Result};

/// Pass threshold for the curvature margin.
pub const CURVATURE_TOL: f64 = 1e-9;

const FRAME_TOL: f64 = 1e-9;

/// A positive density with first and second derivatives, expressed in
/// coordinates that are orthonormal for the base metric at each point.
pub trait SmoothDensity {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// Row-major `dim × dim` Hessian.
    fn hessian(&self, x: &[f64]) -> Vec<f64>;
}

/// Sectional curvature of the base manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BaseGeometry {
    Euclidean,
    ConstantCurvature(f64),
}

impl BaseGeometry {
    fn sectional(&self) -> f64 {
        match *self {
            BaseGeometry::Euclidean => 0.0,
            BaseGeometry::ConstantCurvature(c) => c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub kappa: f64,
    /// Smallest value of `lhs - K(u, v)` over all samples and frames.
    pub min_margin: f64,
    pub worst_point: usize,
    pub worst_frame: usize,
    /// Largest sectional curvature of the conformal metric `f^κ g` seen.
    pub max_conformal_curvature: f64,
    /// Sample indices with a margin below `-tol` for some frame.
    pub failing_points: Vec<usize>,
    pub passed: bool,
}

/// Evaluates, at every sample point and frame `(u, v)`,
///
/// ```text
/// κ/(2f) (H(u,u) + H(v,v)) + κ²/(4f²) |∇f|²
///   - κ/(2f²) (1 + κ/2) ((∇f·u)² + (∇f·v)²)  -  K(u, v)
/// ```
///
/// which is nonnegative exactly when the conformal metric `f^κ g` has
/// nonpositive sectional curvature on the plane spanned by `u, v`.
pub fn curvature_condition_check(
    density: &dyn SmoothDensity,
    alpha: f64,
    intrinsic_dim: usize,
    base: BaseGeometry,
    sample_points: &[Vec<f64>],
    sample_frames: &[(Vec<f64>, Vec<f64>)],
) -> Result<CurvatureReport> {
    if !(alpha >= 1.0) {
        return Err(MmError::invalid(format!("alpha must be >= 1, got {alpha}")));
    }
    if intrinsic_dim == 0 {
        return Err(MmError::invalid("intrinsic dimension must be >= 1"));
    }
    let dim = density.dim();
    if sample_points.is_empty() || sample_frames.is_empty() {
        return Err(MmError::invalid("need at least one sample point and one frame"));
    }
    for (u, v) in sample_frames {
        if u.len() != dim || v.len() != dim {
            return Err(MmError::invalid("frame vector has the wrong dimension"));
        }
        let (uu, vv, uv) = (dot(u, u), dot(v, v), dot(u, v));
        if (uu - 1.0).abs() > FRAME_TOL || (vv - 1.0).abs() > FRAME_TOL || uv.abs() > FRAME_TOL {
            return Err(MmError::invalid("frames must be orthonormal pairs"));
        }
    }
    let kappa = (1.0 - alpha) / intrinsic_dim as f64;
    let k_base = base.sectional();

    let mut report = CurvatureReport {
        kappa,
        min_margin: f64::INFINITY,
        worst_point: 0,
        worst_frame: 0,
        max_conformal_curvature: f64::NEG_INFINITY,
        failing_points: Vec::new(),
        passed: true,
    };
    for (pi, x) in sample_points.iter().enumerate() {
        if x.len() != dim {
            return Err(MmError::invalid(format!("sample {pi} has the wrong dimension")));
        }
        let f = density.value(x);
        if !(f > 0.0) {
            return Err(MmError::invalid(format!(
                "density must be positive, got {f} at sample {pi}"
            )));
        }
        let grad = density.gradient(x);
        let hess = density.hessian(x);
        let grad_sq = dot(&grad, &grad);
        let mut failing = false;
        for (fi, (u, v)) in sample_frames.iter().enumerate() {
            let h_uu = quad_form(&hess, u);
            let h_vv = quad_form(&hess, v);
            let (gu, gv) = (dot(&grad, u), dot(&grad, v));
            let lhs = kappa / (2.0 * f) * (h_uu + h_vv) + kappa * kappa / (4.0 * f * f) * grad_sq
                - kappa / (2.0 * f * f) * (1.0 + kappa / 2.0) * (gu * gu + gv * gv);
            let margin = lhs - k_base;
            let conformal = -f.powf(-kappa) * margin;
            if margin < report.min_margin {
                report.min_margin = margin;
                report.worst_point = pi;
                report.worst_frame = fi;
            }
            report.max_conformal_curvature = report.max_conformal_curvature.max(conformal);
            failing |= margin < -CURVATURE_TOL;
        }
        if failing {
            report.failing_points.push(pi);
        }
    }
    report.passed = report.failing_points.is_empty();
    Ok(report)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn quad_form(m: &[f64], u: &[f64]) -> f64 {
    let d = u.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += u[i] * m[i * d + j] * u[j];
        }
    }
    s
}

#[derive(Debug, Clone, Copy)]
pub struct ConstantDensity {
    pub dim: usize,
    pub value: f64,
}

impl SmoothDensity for ConstantDensity {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _: &[f64]) -> f64 {
        self.value
    }
    fn gradient(&self, _: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim]
    }
    fn hessian(&self, _: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim * self.dim]
    }
}

/// Isotropic normal density with the given mean and standard deviation.
#[derive(Debug, Clone)]
pub struct GaussianDensity {
    pub mean: Vec<f64>,
    pub std_dev: f64,
}

impl GaussianDensity {
    pub fn standard(dim: usize) -> Self {
        GaussianDensity {
            mean: vec![0.0; dim],
            std_dev: 1.0,
        }
    }

    fn offset(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).map(|(a, m)| a - m).collect()
    }
}

impl SmoothDensity for GaussianDensity {
    fn dim(&self) -> usize {
        self.mean.len()
    }
    fn value(&self, x: &[f64]) -> f64 {
        let d = self.dim() as f64;
        let s2 = self.std_dev * self.std_dev;
        let r = self.offset(x);
        let norm = (2.0 * std::f64::consts::PI * s2).powf(-d / 2.0);
        norm * (-dot(&r, &r) / (2.0 * s2)).exp()
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let f = self.value(x);
        let s2 = self.std_dev * self.std_dev;
        self.offset(x).iter().map(|r| -f * r / s2).collect()
    }
    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let f = self.value(x);
        let s2 = self.std_dev * self.std_dev;
        let r = self.offset(x);
        let d = r.len();
        let mut h = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let delta = if i == j { 1.0 } else { 0.0 };
                h[i * d + j] = f * (r[i] * r[j] / (s2 * s2) - delta / s2);
            }
        }
        h
    }
}

/// Weighted mixture of isotropic normals.
#[derive(Debug, Clone)]
pub struct GaussianMixtureDensity {
    pub components: Vec<(f64, GaussianDensity)>,
}

impl GaussianMixtureDensity {
    pub fn equal_weights(components: Vec<GaussianDensity>) -> Self {
        let w = 1.0 / components.len() as f64;
        GaussianMixtureDensity {
            components: components.into_iter().map(|c| (w, c)).collect(),
        }
    }
}

impl SmoothDensity for GaussianMixtureDensity {
    fn dim(&self) -> usize {
        self.components.first().map_or(0, |(_, c)| c.dim())
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.components.iter().map(|(w, c)| w * c.value(x)).sum()
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for (w, c) in &self.components {
            for (gi, ci) in g.iter_mut().zip(c.gradient(x)) {
                *gi += w * ci;
            }
        }
        g
    }
    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut h = vec![0.0; d * d];
        for (w, c) in &self.components {
            for (hi, ci) in h.iter_mut().zip(c.hessian(x)) {
                *hi += w * ci;
            }
        }
        h
    }
}

type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Density from user-supplied closures for the value, gradient and Hessian.
pub struct FnDensity {
    pub dim: usize,
    pub value: ScalarFn,
    pub gradient: VectorFn,
    pub hessian: VectorFn,
}

impl SmoothDensity for FnDensity {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }
    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        (self.hessian)(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes() -> Vec<(Vec<f64>, Vec<f64>)> {
        vec![(vec![1.0, 0.0], vec![0.0, 1.0])]
    }

    #[test]
    fn constant_density_has_zero_margin() {
        let f = ConstantDensity { dim: 2, value: 0.25 };
        let r = curvature_condition_check(
            &f,
            2.0,
            2,
            BaseGeometry::Euclidean,
            &[vec![0.3, -0.2], vec![1.0, 1.0]],
            &axes(),
        )
        .unwrap();
        assert_eq!(r.min_margin, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn gaussian_passes() {
        let f = GaussianDensity::standard(2);
        let pts: Vec<Vec<f64>> = (-4..=4)
            .flat_map(|i| (-4..=4).map(move |j| vec![i as f64 * 0.7, j as f64 * 0.7]))
            .collect();
        let r = curvature_condition_check(&f, 2.0, 2, BaseGeometry::Euclidean, &pts, &axes())
            .unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.max_conformal_curvature <= CURVATURE_TOL);
    }

    #[test]
    fn positive_base_curvature_can_fail() {
        let f = ConstantDensity { dim: 2, value: 1.0 };
        let r = curvature_condition_check(
            &f,
            2.0,
            2,
            BaseGeometry::ConstantCurvature(1.0),
            &[vec![0.0, 0.0]],
            &axes(),
        )
        .unwrap();
        assert!(!r.passed);
        assert_eq!(r.min_margin, -1.0);
        assert_eq!(r.max_conformal_curvature, 1.0);
    }

    #[test]
    fn rejects_bad_frames_and_densities() {
        let f = ConstantDensity { dim: 2, value: 1.0 };
        let bad = vec![(vec![1.0, 0.0], vec![1.0, 0.0])];
        assert!(curvature_condition_check(&f, 2.0, 2, BaseGeometry::Euclidean, &[vec![0.0, 0.0]], &bad).is_err());
        let zero = ConstantDensity { dim: 2, value: 0.0 };
        assert!(curvature_condition_check(&zero, 2.0, 2, BaseGeometry::Euclidean, &[vec![0.0, 0.0]], &axes()).is_err());
    }
}
