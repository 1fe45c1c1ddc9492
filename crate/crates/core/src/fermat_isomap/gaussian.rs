use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{MmError, Result};
use crate::seed;

/// Absolute tolerance for the Fermat integral F(x, y).
pub const QUADRATURE_TOL: f64 = 1e-10;

const MAX_DEPTH: u32 = 40;

// Gauss–Kronrod 7/15 nodes on [-1, 1] (nonnegative half) and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod_segment(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(&WGK).take(7).enumerate() {
        let s = f(center - half * x) + f(center + half * x);
        kronrod += w * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Adaptive Gauss–Kronrod quadrature of `f` over `[a, b]`.
///
/// Bisects until each piece's Kronrod/Gauss gap is within its share of
/// `max(abs_tol, rel_tol * |estimate|)`.
pub fn gauss_kronrod(f: impl Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (whole, _) = kronrod_segment(&f, a, b);
    let tol = abs_tol.max(rel_tol * whole.abs());
    refine(&f, a, b, tol, 0)
}

fn refine(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = kronrod_segment(f, a, b);
    if err <= tol || depth >= MAX_DEPTH {
        return value;
    }
    let mid = 0.5 * (a + b);
    refine(f, a, mid, 0.5 * tol, depth + 1) + refine(f, mid, b, 0.5 * tol, depth + 1)
}

/// Population Fermat distance of the standard normal density on ℝ:
/// `(2π)^(-κ/4) |y - x| ∫_0^1 exp(-κ/4 ((1-t)x + ty)^2) dt` with `κ = 1 - alpha`.
pub fn fermat_1d_gaussian(x: f64, y: f64, alpha: f64) -> Result<f64> {
    if !(alpha >= 1.0) {
        return Err(MmError::invalid(format!("alpha must be >= 1, got {alpha}")));
    }
    if x == y {
        return Ok(0.0);
    }
    let kappa = 1.0 - alpha;
    let prefactor = (2.0 * std::f64::consts::PI).powf(-kappa / 4.0) * (y - x).abs();
    if kappa == 0.0 {
        return Ok(prefactor);
    }
    let integrand = |t: f64| {
        let s = (1.0 - t) * x + t * y;
        (-kappa / 4.0 * s * s).exp()
    };
    // The integrand grows like exp(|κ| s²/4); far from the origin an absolute
    // tolerance alone would demand more digits than f64 carries.
    let f = gauss_kronrod(integrand, 0.0, 1.0, QUADRATURE_TOL, 1e-13);
    Ok(prefactor * f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub alpha: f64,
    pub n_samples: usize,
    pub mean: f64,
    /// Sample standard deviation divided by √n.
    pub std_error: f64,
}

/// Monte Carlo estimate of `E d(0, Z)` for a standard normal `Z` in its own Fermat distance.
///
/// The sample sequence depends only on `seed`, so a run with more samples
/// extends the sequence used by a run with fewer.
pub fn gaussian_fermat_moment_estimate(
    alpha: f64,
    n_samples: usize,
    seed: u64,
) -> Result<MomentEstimate> {
    if n_samples == 0 {
        return Err(MmError::invalid("need at least one sample"));
    }
    let mut rng = seed::rng(seed, &[seed::tag("gaussian-fermat-moment")]);
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..n_samples {
        let z: f64 = StandardNormal.sample(&mut rng);
        let v = fermat_1d_gaussian(0.0, z, alpha)?;
        // Welford update.
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let var = if n_samples > 1 {
        m2 / (n_samples - 1) as f64
    } else {
        0.0
    };
    Ok(MomentEstimate {
        alpha,
        n_samples,
        mean,
        std_error: (var / n_samples as f64).sqrt(),
    })
}
