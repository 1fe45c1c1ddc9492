use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::matrix::DistanceMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Offending indices: a pair for symmetry, a single index for the diagonal,
    /// `(i, l, j)` for the triangle inequality d(i,j) <= d(i,l) + d(l,j).
    pub indices: Vec<usize>,
    pub magnitude: f64,
}

/// Worst violation of each metric axiom; `None` when the axiom holds exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n: usize,
    pub tol: f64,
    pub symmetry: Option<Violation>,
    pub zero_diagonal: Option<Violation>,
    pub nonnegativity: Option<Violation>,
    pub triangle: Option<Violation>,
    pub passed: bool,
}

impl MetricReport {
    pub fn violations(&self) -> impl Iterator<Item = (&'static str, &Violation)> {
        [
            ("symmetry", &self.symmetry),
            ("zero_diagonal", &self.zero_diagonal),
            ("nonnegativity", &self.nonnegativity),
            ("triangle", &self.triangle),
        ]
        .into_iter()
        .filter_map(|(name, v)| v.as_ref().map(|v| (name, v)))
    }
}

fn keep_worst(slot: &mut Option<Violation>, indices: &[usize], magnitude: f64) {
    if magnitude > 0.0 && slot.as_ref().is_none_or(|v| magnitude > v.magnitude) {
        *slot = Some(Violation {
            indices: indices.to_vec(),
            magnitude,
        });
    }
}

/// Checks the metric axioms. The triangle inequality is tested with the absolute
/// slack `tol * max(1, max entry)`; the other axioms with `tol`.
pub fn metric_validate(rows: &[Vec<f64>], tol: f64) -> Result<MetricReport> {
    let m = DistanceMatrix::from_rows(rows)?;
    Ok(validate_matrix(&m, tol))
}

pub fn validate_matrix(m: &DistanceMatrix, tol: f64) -> MetricReport {
    let n = m.len();
    let mut report = MetricReport {
        n,
        tol,
        symmetry: None,
        zero_diagonal: None,
        nonnegativity: None,
        triangle: None,
        passed: true,
    };
    for i in 0..n {
        keep_worst(&mut report.zero_diagonal, &[i], m.get(i, i).abs());
        for j in 0..n {
            let v = m.get(i, j);
            keep_worst(&mut report.nonnegativity, &[i, j], -v);
            if j > i {
                keep_worst(&mut report.symmetry, &[i, j], (v - m.get(j, i)).abs());
            }
        }
    }
    for i in 0..n {
        for l in 0..n {
            let dil = m.get(i, l);
            let row_l = m.row(l);
            let row_i = m.row(i);
            for j in 0..n {
                let excess = row_i[j] - (dil + row_l[j]);
                if excess > 0.0 {
                    keep_worst(&mut report.triangle, &[i, l, j], excess);
                }
            }
        }
    }
    let scale = m.max_entry().max(1.0);
    let over = |v: &Option<Violation>, t: f64| v.as_ref().is_some_and(|v| v.magnitude > t);
    report.passed = !(over(&report.symmetry, tol)
        || over(&report.zero_diagonal, tol)
        || over(&report.nonnegativity, tol)
        || over(&report.triangle, tol * scale)
        || m.as_slice().iter().any(|v| v.is_nan()));
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_asymmetry() {
        let r = metric_validate(&[vec![0.0, 1.0], vec![2.0, 0.0]], 1e-9).unwrap();
        assert!(!r.passed);
        assert_eq!(r.symmetry.as_ref().unwrap().magnitude, 1.0);
    }

    #[test]
    fn detects_triangle_violation() {
        let rows = vec![
            vec![0.0, 1.0, 3.0],
            vec![1.0, 0.0, 1.0],
            vec![3.0, 1.0, 0.0],
        ];
        let r = metric_validate(&rows, 1e-9).unwrap();
        assert!(!r.passed);
        let t = r.triangle.unwrap();
        assert_eq!(t.magnitude, 1.0);
        assert_eq!(t.indices, vec![0, 1, 2]);
        assert!(r.symmetry.is_none());
    }

    #[test]
    fn passes_a_metric() {
        let rows = vec![
            vec![0.0, 1.0, 2.0],
            vec![1.0, 0.0, 1.0],
            vec![2.0, 1.0, 0.0],
        ];
        let r = metric_validate(&rows, 1e-9).unwrap();
        assert!(r.passed);
        assert_eq!(r.violations().count(), 0);
    }

    #[test]
    fn rejects_non_square() {
        assert!(metric_validate(&[vec![0.0, 1.0]], 1e-9).is_err());
    }

    #[test]
    fn diagonal_and_sign() {
        let r = metric_validate(&[vec![0.5, -1.0], vec![-1.0, 0.0]], 1e-9).unwrap();
        assert!(!r.passed);
        assert_eq!(r.zero_diagonal.unwrap().magnitude, 0.5);
        assert_eq!(r.nonnegativity.unwrap().magnitude, 1.0);
    }
}
