//! Optimal quantization of a measure by Lloyd iterations, ε-net graph
//! approximations of length spaces, and density-compensated weights.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{euclidean, PointCloud};
use crate::error::{MmError, Result};
use crate::matrix::DistanceMatrix;
use crate::mm_space::pow_p;
use crate::seed;
use crate::shortest_path::Graph;

/// Lloyd stops once an iteration improves the objective by less than this (relative).
pub const LLOYD_TOL: f64 = 1e-14;

pub const MAX_LLOYD_ITERS: usize = 1000;

const RECENTER_ITERS: usize = 200;

/// A probability density on an interval, discretized by the midpoint rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "density", rename_all = "lowercase")]
pub enum Density1d {
    Uniform { low: f64, high: f64 },
    /// Truncated to `mean ± 8 std`.
    Gaussian { mean: f64, std: f64 },
}

impl Density1d {
    fn support(&self) -> Result<(f64, f64)> {
        let (a, b) = match *self {
            Density1d::Uniform { low, high } => (low, high),
            Density1d::Gaussian { mean, std } => {
                if !(std > 0.0) {
                    return Err(MmError::invalid("std must be positive"));
                }
                (mean - 8.0 * std, mean + 8.0 * std)
            }
        };
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(MmError::invalid(format!("invalid density support [{a}, {b}]")));
        }
        Ok((a, b))
    }

    fn pdf(&self, x: f64) -> f64 {
        match *self {
            Density1d::Uniform { low, high } => 1.0 / (high - low),
            Density1d::Gaussian { mean, std } => {
                let z = (x - mean) / std;
                (-0.5 * z * z).exp() / (std * (2.0 * PI).sqrt())
            }
        }
    }

    /// `cells` midpoints with normalized masses.
    pub fn discretize(&self, cells: usize) -> Result<(PointCloud, Vec<f64>)> {
        if cells == 0 {
            return Err(MmError::invalid("need at least one cell"));
        }
        let (a, b) = self.support()?;
        let h = (b - a) / cells as f64;
        let xs: Vec<f64> = (0..cells).map(|i| a + (i as f64 + 0.5) * h).collect();
        let mut w: Vec<f64> = xs.iter().map(|&x| self.pdf(x)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        Ok((PointCloud::from_line(&xs)?, w))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub restart: usize,
    /// Objective after each assignment step; nonincreasing.
    pub objectives: Vec<f64>,
}

impl RestartTrace {
    pub fn initial(&self) -> f64 {
        self.objectives[0]
    }

    pub fn last(&self) -> f64 {
        *self.objectives.last().expect("trace is never empty")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantization {
    /// Sorted lexicographically.
    pub centers: Vec<Vec<f64>>,
    /// Mass assigned to each center.
    pub weights: Vec<f64>,
    /// `Σ_i w_i min_c |x_i - c|^p`, the p-th power of the empirical transport cost.
    pub objective: f64,
    pub p: f64,
    pub best_restart: usize,
    pub traces: Vec<RestartTrace>,
}

impl Quantization {
    /// Wasserstein-p distance between the input measure and the quantizer.
    pub fn wasserstein(&self) -> f64 {
        self.objective.powf(1.0 / self.p)
    }
}

/// Multi-restart Lloyd quantization of the weighted samples.
///
/// Restart `r` seeds its centers by D^p sampling from `rng(seed, [quantize, r])`;
/// for `p != 2` the recentering step is a guarded iteratively reweighted mean
/// that only accepts improving moves.
pub fn quantize(
    samples: &PointCloud,
    weights: Option<&[f64]>,
    n_centers: usize,
    p: f64,
    restarts: usize,
    seed: u64,
) -> Result<Quantization> {
    let n = samples.len();
    if n == 0 {
        return Err(MmError::invalid("cannot quantize an empty sample"));
    }
    if n_centers == 0 {
        return Err(MmError::invalid("n_centers must be at least 1"));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(MmError::invalid("p must be >= 1"));
    }
    let w: Vec<f64> = match weights {
        Some(w) => {
            if w.len() != n {
                return Err(MmError::invalid("one weight per sample required"));
            }
            if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(MmError::invalid("weights must be finite and nonnegative"));
            }
            let total: f64 = w.iter().sum();
            if !(total > 0.0) {
                return Err(MmError::invalid("weights must have positive total"));
            }
            w.iter().map(|v| v / total).collect()
        }
        None => vec![1.0 / n as f64; n],
    };

    let mut distinct: Vec<Vec<f64>> = samples.to_rows();
    distinct.sort_by(|a, b| cmp_points(a, b));
    distinct.dedup();
    if n_centers >= distinct.len() {
        let state = State::new(samples, &w, distinct, p);
        return Ok(finish(state, p, 0, Vec::new()));
    }

    let restarts = restarts.max(1);
    let runs: Vec<(State, RestartTrace)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = seed::rng(seed, &[seed::tag("quantize"), r as u64]);
            let init = seed_centers(samples, &w, n_centers, p, &mut rng);
            lloyd(samples, &w, init, p, r)
        })
        .collect();
    let mut best = 0;
    for (r, run) in runs.iter().enumerate() {
        if run.0.objective < runs[best].0.objective {
            best = r;
        }
    }
    let mut traces = Vec::with_capacity(runs.len());
    let mut winner = None;
    for (r, (state, trace)) in runs.into_iter().enumerate() {
        traces.push(trace);
        if r == best {
            winner = Some(state);
        }
    }
    Ok(finish(winner.expect("at least one restart"), p, best, traces))
}

fn cmp_points(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

struct State {
    centers: Vec<Vec<f64>>,
    assignment: Vec<usize>,
    objective: f64,
    mass: Vec<f64>,
}

impl State {
    fn new(samples: &PointCloud, w: &[f64], centers: Vec<Vec<f64>>, p: f64) -> Self {
        let mut s = State {
            centers,
            assignment: Vec::new(),
            objective: 0.0,
            mass: Vec::new(),
        };
        s.assign(samples, w, p);
        s
    }

    /// Nearest center for every sample, ties to the lowest center index.
    fn assign(&mut self, samples: &PointCloud, w: &[f64], p: f64) {
        let mut objective = 0.0;
        let mut mass = vec![0.0; self.centers.len()];
        self.assignment = samples
            .points()
            .zip(w)
            .map(|(x, &wi)| {
                let (c, d) = self
                    .centers
                    .iter()
                    .map(|c| euclidean(x, c))
                    .enumerate()
                    .fold((0, f64::INFINITY), |acc, (j, d)| if d < acc.1 { (j, d) } else { acc });
                objective += wi * pow_p(d, p);
                mass[c] += wi;
                c
            })
            .collect();
        self.objective = objective;
        self.mass = mass;
    }
}

fn seed_centers(samples: &PointCloud, w: &[f64], k: usize, p: f64, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = samples.len();
    let pick = |scores: &[f64], rng: &mut dyn rand::RngCore| -> Option<usize> {
        let total: f64 = scores.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        for (i, s) in scores.iter().enumerate() {
            acc += s;
            if acc > target && *s > 0.0 {
                return Some(i);
            }
        }
        scores.iter().rposition(|s| *s > 0.0)
    };
    let first = pick(w, rng).unwrap_or(0);
    let mut centers = vec![samples.point(first).to_vec()];
    let mut nearest: Vec<f64> = (0..n).map(|i| euclidean(samples.point(i), &centers[0])).collect();
    while centers.len() < k {
        let scores: Vec<f64> = (0..n).map(|i| w[i] * pow_p(nearest[i], p)).collect();
        let next = match pick(&scores, rng) {
            Some(i) => i,
            None => match (0..n).find(|&i| nearest[i] > 0.0) {
                Some(i) => i,
                None => break,
            },
        };
        let c = samples.point(next).to_vec();
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(euclidean(samples.point(i), &c));
        }
        centers.push(c);
    }
    centers
}

fn lloyd(samples: &PointCloud, w: &[f64], init: Vec<Vec<f64>>, p: f64, restart: usize) -> (State, RestartTrace) {
    let mut state = State::new(samples, w, init, p);
    let mut objectives = vec![state.objective];
    for _ in 0..MAX_LLOYD_ITERS {
        let previous = state.objective;
        let old_centers = state.centers.clone();
        for c in 0..state.centers.len() {
            let members: Vec<usize> = (0..samples.len()).filter(|&i| state.assignment[i] == c).collect();
            if members.is_empty() || state.mass[c] == 0.0 {
                continue;
            }
            state.centers[c] = recenter(samples, w, &members, &state.centers[c], p);
        }
        state.assign(samples, w, p);
        if state.objective > previous {
            // Rounding can make a no-op step look worse; keep the earlier state.
            state.centers = old_centers;
            state.assign(samples, w, p);
            break;
        }
        objectives.push(state.objective);
        if previous - state.objective <= LLOYD_TOL * previous.abs() {
            break;
        }
    }
    (
        state,
        RestartTrace {
            restart,
            objectives,
        },
    )
}

fn cell_cost(samples: &PointCloud, w: &[f64], members: &[usize], c: &[f64], p: f64) -> f64 {
    members.iter().map(|&i| w[i] * pow_p(euclidean(samples.point(i), c), p)).sum()
}

fn weighted_mean(samples: &PointCloud, coef: &[(usize, f64)]) -> Vec<f64> {
    let dim = samples.ambient_dim();
    let total: f64 = coef.iter().map(|(_, a)| a).sum();
    let mut m = vec![0.0; dim];
    for &(i, a) in coef {
        for (mj, xj) in m.iter_mut().zip(samples.point(i)) {
            *mj += a * xj;
        }
    }
    m.iter_mut().for_each(|v| *v /= total);
    m
}

fn recenter(samples: &PointCloud, w: &[f64], members: &[usize], current: &[f64], p: f64) -> Vec<f64> {
    let coef: Vec<(usize, f64)> = members.iter().map(|&i| (i, w[i])).collect();
    if p == 2.0 {
        return weighted_mean(samples, &coef);
    }
    let mut c = current.to_vec();
    let mut cost = cell_cost(samples, w, members, &c, p);
    for _ in 0..RECENTER_ITERS {
        let coef: Vec<(usize, f64)> = members
            .iter()
            .map(|&i| {
                let d = euclidean(samples.point(i), &c).max(1e-12);
                (i, w[i] * d.powf(p - 2.0))
            })
            .collect();
        let next = weighted_mean(samples, &coef);
        let next_cost = cell_cost(samples, w, members, &next, p);
        if !(next_cost < cost) {
            break;
        }
        let gain = cost - next_cost;
        c = next;
        cost = next_cost;
        if gain <= LLOYD_TOL * cost {
            break;
        }
    }
    c
}

fn finish(state: State, p: f64, best_restart: usize, traces: Vec<RestartTrace>) -> Quantization {
    let total: f64 = state.mass.iter().sum();
    let mut order: Vec<usize> = (0..state.centers.len()).collect();
    order.sort_by(|&a, &b| cmp_points(&state.centers[a], &state.centers[b]));
    Quantization {
        centers: order.iter().map(|&i| state.centers[i].clone()).collect(),
        weights: order.iter().map(|&i| state.mass[i] / total).collect(),
        objective: state.objective,
        p,
        best_restart,
        traces,
    }
}

/// Spaces whose geodesic distance and net radius are known in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "lowercase")]
pub enum NetSpace {
    /// Unit circle; points are angles.
    Circle,
    /// Flat torus `(ℝ/2πℤ)^dim`; points are angle vectors.
    Torus { dim: usize },
    /// The box `[low, high]^dim` with the Euclidean metric.
    Box { dim: usize, low: f64, high: f64 },
}

fn circle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

impl NetSpace {
    pub fn dim(&self) -> usize {
        match *self {
            NetSpace::Circle => 1,
            NetSpace::Torus { dim } | NetSpace::Box { dim, .. } => dim,
        }
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            NetSpace::Circle => circle_gap(a[0], b[0]),
            NetSpace::Torus { .. } => a
                .iter()
                .zip(b)
                .map(|(x, y)| circle_gap(*x, *y).powi(2))
                .sum::<f64>()
                .sqrt(),
            NetSpace::Box { .. } => euclidean(a, b),
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            NetSpace::Circle => PI,
            NetSpace::Torus { dim } => PI * (dim as f64).sqrt(),
            NetSpace::Box { dim, low, high } => (high - low) * (dim as f64).sqrt(),
        }
    }

    /// `n` equispaced points per axis.
    pub fn grid(&self, n: usize) -> Vec<Vec<f64>> {
        let axis: Vec<f64> = match *self {
            NetSpace::Circle | NetSpace::Torus { .. } => (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect(),
            NetSpace::Box { low, high, .. } => {
                if n == 1 {
                    vec![0.5 * (low + high)]
                } else {
                    (0..n).map(|i| low + (high - low) * i as f64 / (n - 1) as f64).collect()
                }
            }
        };
        let dim = self.dim();
        let mut out = Vec::with_capacity(n.pow(dim as u32));
        let mut idx = vec![0usize; dim];
        loop {
            out.push(idx.iter().map(|&k| axis[k]).collect());
            let mut a = 0;
            while a < dim {
                idx[a] += 1;
                if idx[a] < n {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
            if a == dim {
                return out;
            }
        }
    }

    /// `sup_x d(x, net)`. Exact on the circle; elsewhere evaluated on a
    /// reference grid with `resolution` points per axis.
    pub fn net_radius(&self, net: &[Vec<f64>], resolution: usize) -> Result<f64> {
        if net.is_empty() {
            return Err(MmError::invalid("net must be nonempty"));
        }
        if net.iter().any(|x| x.len() != self.dim()) {
            return Err(MmError::invalid("net point dimension does not match the space"));
        }
        if let NetSpace::Circle = self {
            let mut angles: Vec<f64> = net.iter().map(|x| x[0].rem_euclid(2.0 * PI)).collect();
            angles.sort_by(f64::total_cmp);
            let wrap = angles[0] + 2.0 * PI - angles[angles.len() - 1];
            let gap = angles.windows(2).map(|w| w[1] - w[0]).fold(wrap, f64::max);
            return Ok(gap / 2.0);
        }
        Ok(self
            .grid(resolution.max(2))
            .par_iter()
            .map(|z| net.iter().map(|x| self.distance(z, x)).fold(f64::INFINITY, f64::min))
            .reduce(|| 0.0, f64::max))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetGraph {
    pub distances: DistanceMatrix,
    pub eps: f64,
    pub diam: f64,
    pub net_radius: f64,
    /// `net_radius < eps² / (4 diam)`.
    pub admissible: bool,
}

/// Shortest paths in the graph joining net points closer than `eps`, with the
/// ambient distance as edge length.
pub fn epsilon_net_graph(ambient: &DistanceMatrix, eps: f64, diam: f64, net_radius: f64) -> Result<NetGraph> {
    if !(eps > 0.0) {
        return Err(MmError::invalid("eps must be positive"));
    }
    if !(diam > 0.0) || !(net_radius >= 0.0) {
        return Err(MmError::invalid("diam must be positive and the net radius nonnegative"));
    }
    let n = ambient.len();
    if n == 0 {
        return Err(MmError::invalid("net must be nonempty"));
    }
    let mut graph = Graph::new(n);
    for i in 0..n {
        for j in i + 1..n {
            let d = ambient.get(i, j);
            if d < eps {
                graph.add_edge(i, j, d);
            }
        }
    }
    let distances = graph.all_pairs("increase eps or densify the net")?;
    Ok(NetGraph {
        distances,
        eps,
        diam,
        net_radius,
        admissible: net_radius < eps * eps / (4.0 * diam),
    })
}

/// [`epsilon_net_graph`] on a built-in space, measuring the net radius.
pub fn epsilon_net_graph_on(space: &NetSpace, net: &[Vec<f64>], eps: f64, resolution: usize) -> Result<NetGraph> {
    let radius = space.net_radius(net, resolution)?;
    let ambient = DistanceMatrix::symmetric_from_fn(net.len(), |i, j| space.distance(&net[i], &net[j]));
    epsilon_net_graph(&ambient, eps, space.diameter(), radius)
}

/// Weights proportional to `ρ^{-(p+ℓ)/ℓ}`, normalized to sum 1.
pub fn density_compensation(rho: &[f64], p: f64, ell: usize) -> Result<Vec<f64>> {
    if rho.is_empty() {
        return Err(MmError::invalid("need at least one density value"));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(MmError::invalid("p must be >= 1"));
    }
    if ell == 0 {
        return Err(MmError::invalid("intrinsic dimension must be positive"));
    }
    if let Some(r) = rho.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(MmError::invalid(format!("density values must be positive, got {r}")));
    }
    let expo = -(p + ell as f64) / ell as f64;
    let logs: Vec<f64> = rho.iter().map(|r| expo * r.ln()).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.iter().map(|v| v / total).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_center_is_the_mean() {
        let (cloud, w) = Density1d::Uniform { low: 0.0, high: 1.0 }.discretize(1000).unwrap();
        let q = quantize(&cloud, Some(&w), 1, 2.0, 3, 1).unwrap();
        assert!((q.centers[0][0] - 0.5).abs() < 1e-9);
        assert!((q.objective - 1.0 / 12.0).abs() < 1e-6);
        assert_eq!(q.weights, vec![1.0]);
    }

    #[test]
    fn median_for_p_one() {
        let cloud = PointCloud::from_line(&[0.0, 1.0, 10.0]).unwrap();
        let q = quantize(&cloud, None, 1, 1.0, 2, 0).unwrap();
        assert!((q.centers[0][0] - 1.0).abs() < 1e-3, "{:?}", q.centers);
    }

    #[test]
    fn enough_centers_reproduce_the_sample() {
        let cloud = PointCloud::from_line(&[3.0, 1.0, 2.0, 1.0]).unwrap();
        let q = quantize(&cloud, None, 5, 2.0, 1, 0).unwrap();
        assert_eq!(q.centers, vec![vec![1.0], vec![2.0], vec![3.0]]);
        assert_eq!(q.objective, 0.0);
        assert_eq!(q.weights, vec![0.5, 0.25, 0.25]);
    }

    #[test]
    fn traces_are_nonincreasing() {
        let xs: Vec<f64> = (0..200).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let cloud = PointCloud::from_line(&xs).unwrap();
        for p in [1.0, 1.5, 2.0, 3.0] {
            let q = quantize(&cloud, None, 4, p, 5, 9).unwrap();
            for t in &q.traces {
                assert!(t.objectives.windows(2).all(|w| w[1] <= w[0]));
                assert!(t.last() <= t.initial());
            }
        }
    }

    #[test]
    fn quantize_rejects_bad_input() {
        let empty = PointCloud::from_flat(1, 1, vec![]);
        if let Ok(c) = empty {
            assert!(quantize(&c, None, 1, 2.0, 1, 0).is_err());
        }
        let c = PointCloud::from_line(&[0.0]).unwrap();
        assert!(quantize(&c, None, 0, 2.0, 1, 0).is_err());
    }

    #[test]
    fn net_examples() {
        let two = DistanceMatrix::from_rows(&[vec![0.0, 0.1], vec![0.1, 0.0]]).unwrap();
        let g = epsilon_net_graph(&two, 0.3, 1.0, 0.0).unwrap();
        assert_eq!(g.distances.get(0, 1), 0.1);
        assert!(matches!(epsilon_net_graph(&two, 0.05, 1.0, 0.0), Err(MmError::Disconnected { .. })));
    }

    #[test]
    fn circle_net_radius() {
        let net = NetSpace::Circle.grid(8);
        let r = NetSpace::Circle.net_radius(&net, 0).unwrap();
        assert!((r - PI / 8.0).abs() < 1e-15);
    }

    #[test]
    fn compensation_examples() {
        let w = density_compensation(&[1.0, 2.0], 2.0, 1).unwrap();
        assert!((w[0] - 8.0 / 9.0).abs() < 1e-15 && (w[1] - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(density_compensation(&[3.0; 4], 2.0, 2).unwrap(), vec![0.25; 4]);
        assert!(density_compensation(&[1.0, 0.0], 2.0, 1).is_err());
        assert!(density_compensation(&[1.0], 0.0, 1).is_err());
    }
}
