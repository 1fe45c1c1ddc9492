use crate::error::{MmError, Result};

/// Hausdorff distance between two finite sets under `dist`.
pub fn hausdorff<T, F>(a: &[T], b: &[T], dist: F) -> Result<f64>
where
    F: Fn(&T, &T) -> f64,
{
    if a.is_empty() || b.is_empty() {
        return Err(MmError::invalid("hausdorff distance of an empty set"));
    }
    Ok(directed(a, b, &dist).max(directed(b, a, &|x, y| dist(y, x))))
}

fn directed<T>(from: &[T], to: &[T], dist: &dyn Fn(&T, &T) -> f64) -> f64 {
    from.iter()
        .map(|x| to.iter().map(|y| dist(x, y)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// max over `family_n` of the Hausdorff distance to the closest member of `family_lim`.
///
/// Zero whenever every empirical minimizer coincides with some limit minimizer;
/// it does not penalize limit minimizers that the empirical family misses.
pub fn one_sided_center_deviation<T, F>(
    family_n: &[Vec<T>],
    family_lim: &[Vec<T>],
    dist: F,
) -> Result<f64>
where
    F: Fn(&T, &T) -> f64,
{
    if family_n.is_empty() || family_lim.is_empty() {
        return Err(MmError::invalid("center family must be nonempty"));
    }
    let mut worst: f64 = 0.0;
    for s_n in family_n {
        let mut closest = f64::INFINITY;
        for s in family_lim {
            closest = closest.min(hausdorff(s_n, s, &dist)?);
        }
        worst = worst.max(closest);
    }
    Ok(worst)
}
