use std::f64::consts::PI;
use std::path::PathBuf;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cloud::{euclidean, PointCloud};
use crate::error::{MmError, Result};
use crate::io::read_points;
use crate::seed;

pub const DEFAULT_GRID_RESOLUTION: usize = 1001;

/// Sampling distributions.
///
/// * `interval`: uniform on `[low, high]`.
/// * `circle`: uniform on the unit circle in ℝ².
/// * `torus`: uniform on the flat torus `(cos a, sin a, cos b, sin b) / √2` in ℝ⁴.
/// * `gaussian`: isotropic normal with the given center and scale.
/// * `mixture`: equal-weight isotropic normals.
/// * `file`: the first `n` rows of a point file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Generator {
    Interval {
        #[serde(default)]
        low: f64,
        #[serde(default = "one")]
        high: f64,
    },
    Circle,
    Torus,
    Gaussian {
        center: Vec<f64>,
        #[serde(default = "one")]
        scale: f64,
    },
    Mixture {
        centers: Vec<Vec<f64>>,
        scales: Vec<f64>,
    },
    File {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

impl Generator {
    pub fn validate(&self) -> Result<()> {
        match self {
            Generator::Interval { low, high } => {
                if !(low < high) || !low.is_finite() || !high.is_finite() {
                    return Err(MmError::invalid(format!("invalid interval [{low}, {high}]")));
                }
            }
            Generator::Circle | Generator::Torus => {}
            Generator::Gaussian { center, scale } => check_component(center, *scale)?,
            Generator::Mixture { centers, scales } => {
                if centers.is_empty() || centers.len() != scales.len() {
                    return Err(MmError::invalid("mixture needs one scale per center"));
                }
                let dim = centers[0].len();
                for (c, s) in centers.iter().zip(scales) {
                    if c.len() != dim {
                        return Err(MmError::invalid("mixture centers must share a dimension"));
                    }
                    check_component(c, *s)?;
                }
            }
            Generator::File { path } => {
                if !path.exists() {
                    return Err(MmError::invalid(format!("sample file {} does not exist", path.display())));
                }
            }
        }
        Ok(())
    }

    /// Intrinsic dimension of the support.
    pub fn intrinsic_dim(&self) -> Option<usize> {
        match self {
            Generator::Interval { .. } | Generator::Circle => Some(1),
            Generator::Torus => Some(2),
            Generator::Gaussian { center, .. } => Some(center.len()),
            Generator::Mixture { centers, .. } => centers.first().map(Vec::len),
            Generator::File { .. } => None,
        }
    }

    /// Intrinsic (geodesic) distance of the support, Euclidean where the support is flat.
    pub fn geodesic(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Generator::Circle => angle_between(a[1].atan2(a[0]), b[1].atan2(b[0])),
            Generator::Torus => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let da = angle_between(a[1].atan2(a[0]), b[1].atan2(b[0]));
                let db = angle_between(a[3].atan2(a[2]), b[3].atan2(b[2]));
                s * (da * da + db * db).sqrt()
            }
            _ => euclidean(a, b),
        }
    }

    /// Dense reference grid of a compact support, `resolution` points per intrinsic axis.
    pub fn reference_grid(&self, resolution: usize) -> Option<Vec<Vec<f64>>> {
        let r = resolution.max(2);
        match *self {
            Generator::Interval { low, high } => Some(
                (0..r)
                    .map(|i| vec![low + (high - low) * i as f64 / (r - 1) as f64])
                    .collect(),
            ),
            Generator::Circle => Some(
                (0..r)
                    .map(|i| {
                        let a = 2.0 * PI * i as f64 / r as f64;
                        vec![a.cos(), a.sin()]
                    })
                    .collect(),
            ),
            Generator::Torus => {
                let r = (r as f64).sqrt().ceil() as usize;
                let mut out = Vec::with_capacity(r * r);
                for i in 0..r {
                    for j in 0..r {
                        out.push(torus_point(2.0 * PI * i as f64 / r as f64, 2.0 * PI * j as f64 / r as f64));
                    }
                }
                Some(out)
            }
            _ => None,
        }
    }
}

fn check_component(center: &[f64], scale: f64) -> Result<()> {
    if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
        return Err(MmError::invalid("gaussian center must be a finite nonempty vector"));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(MmError::invalid("gaussian scale must be positive"));
    }
    Ok(())
}

fn angle_between(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn torus_point(a: f64, b: f64) -> Vec<f64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    vec![s * a.cos(), s * a.sin(), s * b.cos(), s * b.sin()]
}

/// `n` i.i.d. points, a pure function of `(generator, n, seed)`.
pub fn sample(generator: &Generator, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(MmError::invalid("n must be at least 1"));
    }
    generator.validate()?;
    let mut rng = seed::rng(seed, &[seed::tag("sample"), n as u64]);
    let points: Vec<Vec<f64>> = match generator {
        Generator::Interval { low, high } => (0..n)
            .map(|_| vec![low + (high - low) * rng.random::<f64>()])
            .collect(),
        Generator::Circle => (0..n)
            .map(|_| {
                let a = 2.0 * PI * rng.random::<f64>();
                let (s, c) = a.sin_cos();
                let r = c.hypot(s);
                vec![c / r, s / r]
            })
            .collect(),
        Generator::Torus => (0..n)
            .map(|_| {
                let a = 2.0 * PI * rng.random::<f64>();
                let b = 2.0 * PI * rng.random::<f64>();
                torus_point(a, b)
            })
            .collect(),
        Generator::Gaussian { center, scale } => (0..n)
            .map(|_| normal_around(&mut rng, center, *scale))
            .collect(),
        Generator::Mixture { centers, scales } => (0..n)
            .map(|_| {
                let c = if centers.len() == 1 {
                    0
                } else {
                    rng.random_range(0..centers.len())
                };
                normal_around(&mut rng, &centers[c], scales[c])
            })
            .collect(),
        Generator::File { path } => {
            let cloud = read_points(path)?;
            if cloud.len() < n {
                return Err(MmError::invalid(format!(
                    "{} holds {} points, {n} requested",
                    path.display(),
                    cloud.len()
                )));
            }
            cloud.to_rows().into_iter().take(n).collect()
        }
    };
    let cloud = PointCloud::from_points(points)?;
    match generator.intrinsic_dim() {
        Some(d) => cloud.with_intrinsic_dim(d),
        None => Ok(cloud),
    }
}

fn normal_around(rng: &mut impl Rng, center: &[f64], scale: f64) -> Vec<f64> {
    center
        .iter()
        .map(|c| c + scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_is_reproducible() {
        let g = Generator::Interval { low: 0.0, high: 1.0 };
        let a = sample(&g, 3, 11).unwrap();
        let b = sample(&g, 3, 11).unwrap();
        let bits = |c: &PointCloud| c.to_rows().concat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&sample(&g, 3, 12).unwrap()));
        assert!(a.to_rows().iter().all(|x| (0.0..1.0).contains(&x[0])));
    }

    #[test]
    fn circle_points_have_unit_radius() {
        let c = sample(&Generator::Circle, 500, 3).unwrap();
        for x in c.points() {
            assert!((x[0].hypot(x[1]) - 1.0).abs() <= 1e-12);
        }
        assert_eq!(c.intrinsic_dim(), 1);
    }

    #[test]
    fn single_mixture_equals_gaussian() {
        let g = Generator::Gaussian { center: vec![1.0, -2.0], scale: 0.5 };
        let m = Generator::Mixture { centers: vec![vec![1.0, -2.0]], scales: vec![0.5] };
        assert_eq!(sample(&g, 50, 4).unwrap(), sample(&m, 50, 4).unwrap());
    }

    #[test]
    fn bad_generators_are_rejected() {
        assert!(sample(&Generator::Interval { low: 1.0, high: 0.0 }, 3, 0).is_err());
        assert!(sample(&Generator::Mixture { centers: vec![vec![0.0]], scales: vec![] }, 3, 0).is_err());
        assert!(sample(&Generator::File { path: "/nonexistent/x.csv".into() }, 3, 0).is_err());
        assert!(sample(&Generator::Circle, 0, 0).is_err());
    }

    #[test]
    fn geodesics() {
        let g = Generator::Circle;
        assert!((g.geodesic(&[1.0, 0.0], &[-1.0, 0.0]) - PI).abs() < 1e-12);
        let t = Generator::Torus;
        let a = torus_point(0.0, 0.0);
        let b = torus_point(PI, 0.0);
        assert!((t.geodesic(&a, &b) - PI / 2f64.sqrt()).abs() < 1e-12);
    }
}
