use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{phi_unchecked, pow_p, CenterSet, FiniteMetricMeasureSpace};
use crate::error::{MmError, Result};

/// Largest number of candidate center sets `k_means_exact` will enumerate by default.
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 2_000_000;

/// Relative tolerance under which two objective values count as tied.
pub const DEFAULT_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    Exact,
    Heuristic,
}

/// The family of (near-)tied minimizers of the clustering functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansSolution {
    /// Sorted lexicographically by index vector.
    pub minimizers: Vec<CenterSet>,
    pub objective: f64,
    pub method: SolverMethod,
    pub tie_tolerance: f64,
}

impl KMeansSolution {
    /// First minimizer in lexicographic order.
    pub fn best(&self) -> &CenterSet {
        &self.minimizers[0]
    }

    pub fn is_unique(&self) -> bool {
        self.minimizers.len() == 1
    }
}

fn within(value: f64, best: f64, tie_tol: f64) -> bool {
    value <= best + tie_tol * best.abs()
}

fn check_args(space: &FiniteMetricMeasureSpace, k: usize, p: f64) -> Result<()> {
    if k == 0 {
        return Err(MmError::invalid("k must be at least 1"));
    }
    if !(p >= 1.0) {
        return Err(MmError::invalid(format!("p must be >= 1, got {p}")));
    }
    if space.is_empty() {
        return Err(MmError::invalid("space is empty"));
    }
    Ok(())
}

/// Number of nonempty subsets of an n-set with at most k elements, saturating.
pub(crate) fn candidate_count(n: usize, k: usize) -> u128 {
    let m = k.min(n);
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for j in 1..=m {
        // C(n, j) = C(n, j-1) * (n - j + 1) / j
        binom = match binom.checked_mul((n - j + 1) as u128) {
            Some(v) => v / j as u128,
            None => return u128::MAX,
        };
        total = total.saturating_add(binom);
    }
    total
}

/// Exact medoid k-means by enumeration of every center set of cardinality at most `k`.
pub fn k_means_exact(
    space: &FiniteMetricMeasureSpace,
    k: usize,
    p: f64,
    tie_tol: f64,
) -> Result<KMeansSolution> {
    k_means_exact_with_budget(space, k, p, tie_tol, DEFAULT_ENUMERATION_BUDGET)
}

pub fn k_means_exact_with_budget(
    space: &FiniteMetricMeasureSpace,
    k: usize,
    p: f64,
    tie_tol: f64,
    budget: u128,
) -> Result<KMeansSolution> {
    check_args(space, k, p)?;
    if !(tie_tol >= 0.0) {
        return Err(MmError::invalid("tie tolerance must be nonnegative"));
    }
    let n = space.len();
    let required = candidate_count(n, k);
    if required > budget {
        return Err(MmError::BudgetExceeded {
            what: format!("exact enumeration of C_{k} over {n} points"),
            required,
            limit: budget,
            hint: "use the PAM heuristic solver instead".into(),
        });
    }
    let m = k.min(n);

    // Each worker owns one leading index; its subtree is enumerated depth first,
    // which visits index vectors in lexicographic order.
    let partial: Vec<(f64, Vec<(f64, Vec<usize>)>)> = (0..n)
        .into_par_iter()
        .map(|first| {
            let mut acc = TieCollector::new(tie_tol);
            let mut stack = vec![first];
            let mut mins: Vec<Vec<f64>> = vec![vec![0.0; n]; m];
            for i in 0..n {
                mins[0][i] = space.d(i, first);
            }
            enumerate(space, p, m, &mut stack, &mut mins, &mut acc);
            (acc.best, acc.members)
        })
        .collect();

    let best = partial
        .iter()
        .map(|(b, _)| *b)
        .fold(f64::INFINITY, f64::min);
    let mut minimizers: Vec<Vec<usize>> = partial
        .into_iter()
        .flat_map(|(_, members)| members)
        .filter(|(v, _)| within(*v, best, tie_tol))
        .map(|(_, s)| s)
        .collect();
    minimizers.sort();
    Ok(KMeansSolution {
        minimizers: minimizers
            .into_iter()
            .map(CenterSet::from_sorted_unchecked)
            .collect(),
        objective: best,
        method: SolverMethod::Exact,
        tie_tolerance: tie_tol,
    })
}

struct TieCollector {
    tie_tol: f64,
    best: f64,
    members: Vec<(f64, Vec<usize>)>,
}

impl TieCollector {
    fn new(tie_tol: f64) -> Self {
        TieCollector {
            tie_tol,
            best: f64::INFINITY,
            members: Vec::new(),
        }
    }

    fn offer(&mut self, value: f64, set: &[usize]) {
        if value < self.best {
            self.best = value;
            let (best, tol) = (self.best, self.tie_tol);
            self.members.retain(|(v, _)| within(*v, best, tol));
        }
        if within(value, self.best, self.tie_tol) {
            self.members.push((value, set.to_vec()));
        }
    }
}

fn weighted_cost(space: &FiniteMetricMeasureSpace, mins: &[f64], p: f64) -> f64 {
    let mut total = 0.0;
    for (&w, &d) in space.weights().iter().zip(mins) {
        if w != 0.0 {
            total += w * pow_p(d, p);
        }
    }
    total
}

fn enumerate(
    space: &FiniteMetricMeasureSpace,
    p: f64,
    m: usize,
    stack: &mut Vec<usize>,
    mins: &mut [Vec<f64>],
    acc: &mut TieCollector,
) {
    let depth = stack.len();
    acc.offer(weighted_cost(space, &mins[depth - 1], p), stack);
    if depth == m {
        return;
    }
    let n = space.len();
    let last = *stack.last().expect("nonempty stack");
    for next in (last + 1)..n {
        let (done, rest) = mins.split_at_mut(depth);
        let prev = &done[depth - 1];
        let cur = &mut rest[0];
        let row = space.dist().row(next);
        for i in 0..n {
            cur[i] = prev[i].min(row[i]);
        }
        stack.push(next);
        enumerate(space, p, m, stack, mins, acc);
        stack.pop();
    }
}

/// Heuristic medoid k-means: greedy build followed by best-improvement swaps,
/// repeated `restarts` times. Restart 0 uses the deterministic greedy build; later
/// restarts draw their first medoid from a generator seeded by `seed`.
pub fn k_means_pam(
    space: &FiniteMetricMeasureSpace,
    k: usize,
    p: f64,
    restarts: usize,
    seed: u64,
) -> Result<KMeansSolution> {
    k_means_pam_with_tol(space, k, p, restarts, seed, super::DEFAULT_TIE_TOL)
}

pub fn k_means_pam_with_tol(
    space: &FiniteMetricMeasureSpace,
    k: usize,
    p: f64,
    restarts: usize,
    seed: u64,
    tie_tol: f64,
) -> Result<KMeansSolution> {
    check_args(space, k, p)?;
    if restarts == 0 {
        return Err(MmError::invalid("restarts must be at least 1"));
    }
    let n = space.len();
    if k >= n {
        let all: Vec<usize> = (0..n).collect();
        let objective = phi_unchecked(space, &all, p);
        return Ok(KMeansSolution {
            minimizers: vec![CenterSet::from_sorted_unchecked(all)],
            objective,
            method: SolverMethod::Heuristic,
            tie_tolerance: tie_tol,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: Vec<(f64, Vec<usize>)> = Vec::with_capacity(restarts);
    for r in 0..restarts {
        let first = if r == 0 { None } else { Some(rng.random_range(0..n)) };
        let mut medoids = greedy_build(space, k, p, first);
        let value = swap_until_stable(space, &mut medoids, p);
        medoids.sort_unstable();
        found.push((value, medoids));
    }
    let best = found.iter().map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
    let mut minimizers: Vec<Vec<usize>> = found
        .into_iter()
        .filter(|(v, _)| within(*v, best, tie_tol))
        .map(|(_, s)| s)
        .collect();
    minimizers.sort();
    minimizers.dedup();
    Ok(KMeansSolution {
        minimizers: minimizers
            .into_iter()
            .map(CenterSet::from_sorted_unchecked)
            .collect(),
        objective: best,
        method: SolverMethod::Heuristic,
        tie_tolerance: tie_tol,
    })
}

fn greedy_build(
    space: &FiniteMetricMeasureSpace,
    k: usize,
    p: f64,
    first: Option<usize>,
) -> Vec<usize> {
    let n = space.len();
    let mut medoids = Vec::with_capacity(k);
    let mut nearest = vec![f64::INFINITY; n];
    if let Some(f) = first {
        medoids.push(f);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = space.d(i, f);
        }
    }
    while medoids.len() < k {
        let mut best: Option<(f64, usize)> = None;
        for cand in 0..n {
            if medoids.contains(&cand) {
                continue;
            }
            let row = space.dist().row(cand);
            let cost: f64 = space
                .weights()
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, w)| w * pow_p(nearest[i].min(row[i]), p))
                .sum();
            if best.is_none_or(|(b, _)| cost < b) {
                best = Some((cost, cand));
            }
        }
        let (_, chosen) = best.expect("k < n leaves a candidate");
        medoids.push(chosen);
        let row = space.dist().row(chosen);
        for (d, r) in nearest.iter_mut().zip(row) {
            *d = d.min(*r);
        }
    }
    medoids
}

fn swap_until_stable(space: &FiniteMetricMeasureSpace, medoids: &mut [usize], p: f64) -> f64 {
    let n = space.len();
    let mut current = phi_unchecked(space, medoids, p);
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for slot in 0..medoids.len() {
            let removed = medoids[slot];
            for cand in 0..n {
                if medoids.contains(&cand) {
                    continue;
                }
                medoids[slot] = cand;
                let value = phi_unchecked(space, medoids, p);
                medoids[slot] = removed;
                if value < current - 1e-12 * current.abs()
                    && best.is_none_or(|(b, _, _)| value < b)
                {
                    best = Some((value, slot, cand));
                }
            }
        }
        match best {
            Some((value, slot, cand)) => {
                medoids[slot] = cand;
                current = value;
            }
            None => return current,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DistanceMatrix;

    fn line(points: &[f64]) -> FiniteMetricMeasureSpace {
        FiniteMetricMeasureSpace::from_line(points).unwrap()
    }

    #[test]
    fn exact_three_points_one_center() {
        let sol = k_means_exact(&line(&[0.0, 1.0, 2.0]), 1, 2.0, DEFAULT_TIE_TOL).unwrap();
        assert_eq!(sol.minimizers, vec![CenterSet::new(vec![1]).unwrap()]);
        assert!((sol.objective - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(sol.method, SolverMethod::Exact);
    }

    #[test]
    fn exact_two_pairs_gives_four_ties() {
        let sol = k_means_exact(&line(&[0.0, 0.1, 10.0, 10.1]), 2, 2.0, DEFAULT_TIE_TOL).unwrap();
        let expect: Vec<CenterSet> = [[0, 2], [0, 3], [1, 2], [1, 3]]
            .iter()
            .map(|s| CenterSet::new(s.to_vec()).unwrap())
            .collect();
        assert_eq!(sol.minimizers, expect);
        assert!((sol.objective - 0.005).abs() < 1e-15);
    }

    #[test]
    fn exact_k_at_least_n_is_zero() {
        let sol = k_means_exact(&line(&[0.0, 3.0, 4.0]), 5, 2.0, DEFAULT_TIE_TOL).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert!(sol.minimizers.contains(&CenterSet::new(vec![0, 1, 2]).unwrap()));
    }

    #[test]
    fn zero_weight_point_allows_smaller_tied_sets() {
        let s = line(&[0.0, 5.0, 9.0])
            .with_weights(vec![0.5, 0.5, 0.0])
            .unwrap();
        let sol = k_means_exact(&s, 3, 2.0, DEFAULT_TIE_TOL).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert_eq!(
            sol.minimizers,
            vec![
                CenterSet::new(vec![0, 1]).unwrap(),
                CenterSet::new(vec![0, 1, 2]).unwrap()
            ]
        );
    }

    #[test]
    fn budget_is_enforced() {
        let pts: Vec<f64> = (0..40).map(f64::from).collect();
        let err = k_means_exact_with_budget(&line(&pts), 5, 2.0, 1e-9, 1000).unwrap_err();
        assert!(matches!(err, MmError::BudgetExceeded { .. }));
    }

    #[test]
    fn candidate_count_matches_binomials() {
        assert_eq!(candidate_count(4, 2), 4 + 6);
        assert_eq!(candidate_count(3, 7), 7);
        assert_eq!(candidate_count(12, 3), 12 + 66 + 220);
    }

    #[test]
    fn pam_matches_exact_on_small_case() {
        let s = line(&[0.0, 1.0, 2.0]);
        let sol = k_means_pam(&s, 1, 2.0, 3, 11).unwrap();
        assert!((sol.objective - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(sol.method, SolverMethod::Heuristic);
    }

    #[test]
    fn pam_k_at_least_n() {
        let s = line(&[0.0, 1.0, 2.0]);
        assert_eq!(k_means_pam(&s, 3, 2.0, 1, 0).unwrap().objective, 0.0);
        assert_eq!(k_means_pam(&s, 9, 1.0, 1, 0).unwrap().objective, 0.0);
    }

    #[test]
    fn pam_is_seed_deterministic() {
        let d = DistanceMatrix::symmetric_from_fn(15, |i, j| ((i * 7 + j * 3) % 11) as f64 + 1.0);
        let s = FiniteMetricMeasureSpace::uniform(d).unwrap();
        let a = k_means_pam(&s, 3, 2.0, 5, 42).unwrap();
        let b = k_means_pam(&s, 3, 2.0, 5, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn argument_validation() {
        let s = line(&[0.0, 1.0]);
        assert!(k_means_exact(&s, 0, 2.0, 1e-9).is_err());
        assert!(k_means_exact(&s, 1, 0.0, 1e-9).is_err());
        assert!(k_means_pam(&s, 1, 2.0, 0, 0).is_err());
    }
}
