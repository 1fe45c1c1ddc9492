//! First-passage percolation on ℤ^ℓ (ℓ ≤ 3).
//!
//! Edge passage times are generated lazily: the weight of an edge is a pure
//! function of the instance seed and the edge's lower endpoint and axis, so
//! the lattice is never stored and any query order sees the same weights.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MmError, Result};
use crate::matrix::DistanceMatrix;
use crate::mm_space::{pow_p, FiniteMetricMeasureSpace};
use crate::seed;
use crate::shortest_path::{symmetrize_min, Graph};

/// Default cap on |B(t)| for all-pairs matrices.
pub const DEFAULT_PAIR_BUDGET: usize = 4000;

/// Default cap on |B(t)| for barycenter tracking, which never stores a matrix.
pub const DEFAULT_TRACK_BUDGET: usize = 20_000;

/// Default relative shell width for paths that may leave the ball.
pub const DEFAULT_SHELL: f64 = 0.2;

const GROWTH_LIMIT: usize = 5_000_000;

const TIE_TOL: f64 = 1e-12;

pub type Site = [i64; 3];

const ORIGIN: Site = [0, 0, 0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum WeightLaw {
    Deterministic { value: f64 },
    Exponential { rate: f64 },
    Uniform { low: f64, high: f64 },
}

impl WeightLaw {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            WeightLaw::Deterministic { value } => value > 0.0 && value.is_finite(),
            WeightLaw::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            WeightLaw::Uniform { low, high } => low >= 0.0 && high > low && high.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(MmError::invalid(format!("invalid weight law {self:?}")))
        }
    }

    /// Inverse CDF at `u ∈ (0, 1)`.
    fn quantile(&self, u: f64) -> f64 {
        match *self {
            WeightLaw::Deterministic { value } => value,
            WeightLaw::Exponential { rate } => -(1.0 - u).ln() / rate,
            WeightLaw::Uniform { low, high } => low + (high - low) * u,
        }
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, WeightLaw::Deterministic { .. })
    }
}

impl FromStr for WeightLaw {
    type Err = MmError;

    /// `det:C`, `exp:RATE` or `unif:A,B`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s
            .split_once(':')
            .ok_or_else(|| MmError::invalid(format!("weight law '{s}' must look like kind:params")))?;
        let nums: Vec<f64> = args
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| MmError::invalid(format!("bad weight law parameters '{args}': {e}")))?;
        let law = match (kind, nums.as_slice()) {
            ("det" | "const", [c]) => WeightLaw::Deterministic { value: *c },
            ("exp", [r]) => WeightLaw::Exponential { rate: *r },
            ("unif", [a, b]) => WeightLaw::Uniform { low: *a, high: *b },
            _ => return Err(MmError::invalid(format!("unknown weight law '{s}'"))),
        };
        law.validate()?;
        Ok(law)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FppInstance {
    pub dim: usize,
    pub law: WeightLaw,
    pub seed: u64,
    pub horizon: f64,
}

impl FppInstance {
    pub fn new(dim: usize, law: WeightLaw, seed: u64, horizon: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(MmError::invalid(format!("lattice dimension must be 1, 2 or 3, got {dim}")));
        }
        law.validate()?;
        if !(horizon > 0.0) {
            return Err(MmError::invalid("horizon must be positive"));
        }
        Ok(FppInstance {
            dim,
            law,
            seed,
            horizon,
        })
    }

    /// Passage time of the edge from `x` to `x + e_axis`.
    pub fn edge_weight(&self, x: Site, axis: usize) -> f64 {
        let bits = seed::derive(
            self.seed,
            &[
                seed::tag("fpp-edge"),
                x[0] as u64,
                x[1] as u64,
                x[2] as u64,
                axis as u64,
            ],
        );
        self.law.quantile(seed::unit_open(bits))
    }

    fn neighbors(&self, x: Site) -> impl Iterator<Item = (Site, f64)> + '_ {
        (0..self.dim).flat_map(move |axis| {
            let mut up = x;
            up[axis] += 1;
            let mut down = x;
            down[axis] -= 1;
            [
                (up, self.edge_weight(x, axis)),
                (down, self.edge_weight(down, axis)),
            ]
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    time: f64,
    site: Site,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.site.cmp(&self.site))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `B(t) = {y : T(0, y) < t}` with passage times from the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub t: f64,
    /// Sorted lexicographically.
    pub sites: Vec<Site>,
    pub times: Vec<f64>,
}

impl Ball {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn index_of(&self, site: &Site) -> Option<usize> {
        self.sites.binary_search(site).ok()
    }
}

/// Grows Dijkstra from the origin until every frontier value is at least `t`.
pub fn passage_time_ball(instance: &FppInstance, t: f64) -> Result<Ball> {
    if !(t > 0.0) {
        return Err(MmError::invalid("t must be positive"));
    }
    if t > instance.horizon {
        return Err(MmError::invalid(format!(
            "t = {t} exceeds the instance horizon {}",
            instance.horizon
        )));
    }
    grow_ball(instance, t)
}

fn grow_ball(instance: &FppInstance, t: f64) -> Result<Ball> {
    let mut best: HashMap<Site, f64> = HashMap::new();
    let mut settled: Vec<(Site, f64)> = Vec::new();
    let mut done: HashSet<Site> = HashSet::new();
    let mut heap = BinaryHeap::new();
    best.insert(ORIGIN, 0.0);
    heap.push(Entry {
        time: 0.0,
        site: ORIGIN,
    });
    while let Some(Entry { time, site }) = heap.pop() {
        if time >= t {
            break;
        }
        if !done.insert(site) {
            continue;
        }
        settled.push((site, time));
        if settled.len() > GROWTH_LIMIT {
            return Err(MmError::BudgetExceeded {
                what: format!("growing B({t})"),
                required: settled.len() as u128,
                limit: GROWTH_LIMIT as u128,
                hint: "use a smaller t".into(),
            });
        }
        for (next, w) in instance.neighbors(site) {
            if done.contains(&next) {
                continue;
            }
            let cand = time + w;
            let slot = best.entry(next).or_insert(f64::INFINITY);
            if cand < *slot {
                *slot = cand;
                heap.push(Entry {
                    time: cand,
                    site: next,
                });
            }
        }
    }
    settled.sort_by_key(|a| a.0);
    let (sites, times) = settled.into_iter().unzip();
    Ok(Ball { t, sites, times })
}

/// Which paths count when measuring passage times between points of B(t).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shell {
    /// Only edges with both endpoints in B(t).
    Restricted,
    /// Edges inside B(t (1 + s)).
    Expanded(f64),
}

impl Default for Shell {
    fn default() -> Self {
        Shell::Expanded(DEFAULT_SHELL)
    }
}

/// Lattice region used for routing: the routing ball, the ball's positions in it, and its graph.
struct Region {
    ball: Ball,
    routing: Ball,
    members: Vec<usize>,
    graph: Graph,
}

fn region(instance: &FppInstance, t: f64, shell: Shell, budget: usize) -> Result<Region> {
    let ball = passage_time_ball(instance, t)?;
    if ball.len() > budget {
        return Err(MmError::BudgetExceeded {
            what: format!("pairwise passage times on B({t})"),
            required: ball.len() as u128,
            limit: budget as u128,
            hint: "use a smaller t".into(),
        });
    }
    let routing = match shell {
        Shell::Restricted => ball.clone(),
        Shell::Expanded(s) => {
            if !(s >= 0.0) {
                return Err(MmError::invalid("shell width must be nonnegative"));
            }
            grow_ball(instance, t * (1.0 + s))?
        }
    };
    let mut graph = Graph::new(routing.len());
    for (i, &site) in routing.sites.iter().enumerate() {
        for axis in 0..instance.dim {
            let mut up = site;
            up[axis] += 1;
            if let Some(j) = routing.index_of(&up) {
                graph.add_edge(i, j, instance.edge_weight(site, axis));
            }
        }
    }
    let members = ball
        .sites
        .iter()
        .map(|s| routing.index_of(s).expect("B(t) lies inside the routing ball"))
        .collect();
    Ok(Region {
        ball,
        routing,
        members,
        graph,
    })
}

impl Region {
    /// Passage times from ball point `i` to every ball point.
    fn row(&self, i: usize) -> Vec<f64> {
        let d = self.graph.dijkstra(self.members[i]);
        self.members.iter().map(|&m| d[m]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ScaledSpace {
    pub ball: Ball,
    /// `site / t` for each ball site.
    pub coords: Vec<Vec<f64>>,
    pub space: FiniteMetricMeasureSpace,
}

/// `(B(t)/t, T/t, uniform)`.
pub fn scaled_space(instance: &FppInstance, t: f64, shell: Shell) -> Result<ScaledSpace> {
    scaled_space_with_budget(instance, t, shell, DEFAULT_PAIR_BUDGET)
}

pub fn scaled_space_with_budget(
    instance: &FppInstance,
    t: f64,
    shell: Shell,
    budget: usize,
) -> Result<ScaledSpace> {
    let reg = region(instance, t, shell, budget)?;
    let n = reg.ball.len();
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|i| reg.row(i)).collect();
    let mut dist = DistanceMatrix::from_row_major(n, rows.concat())?.map(|v| v / t);
    symmetrize_min(&mut dist);
    if let Some(v) = dist.as_slice().iter().find(|v| !v.is_finite()) {
        return Err(MmError::Internal(format!("non-finite passage time {v} inside B({t})")));
    }
    let coords = scaled_coords(&reg.ball, instance.dim, t);
    let labels = reg
        .ball
        .sites
        .iter()
        .map(|s| format!("{:?}", &s[..instance.dim]))
        .collect();
    let space = FiniteMetricMeasureSpace::new(labels, dist, vec![1.0 / n as f64; n])?;
    let _ = reg.routing;
    Ok(ScaledSpace {
        ball: reg.ball,
        coords,
        space,
    })
}

fn scaled_coords(ball: &Ball, dim: usize, t: f64) -> Vec<Vec<f64>> {
    ball.sites
        .iter()
        .map(|s| s[..dim].iter().map(|&c| c as f64 / t).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarycenterRecord {
    pub t: f64,
    pub ball_size: usize,
    /// Scaled coordinates of every minimizer of the 1-means functional.
    pub barycenters: Vec<Vec<f64>>,
    pub phi: f64,
    /// More than one minimizer within relative tolerance 1e-12 under a continuous law.
    pub tie_warning: bool,
}

impl BarycenterRecord {
    pub fn norm(&self) -> f64 {
        self.barycenters[0].iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Exact 1-medoid of the scaled space for each `t`, evaluated one source at a
/// time so that no |B(t)|² matrix is stored.
pub fn fpp_barycenter_track(
    instance: &FppInstance,
    t_list: &[f64],
    p: f64,
    shell: Shell,
) -> Result<Vec<BarycenterRecord>> {
    fpp_barycenter_track_with_budget(instance, t_list, p, shell, DEFAULT_TRACK_BUDGET)
}

pub fn fpp_barycenter_track_with_budget(
    instance: &FppInstance,
    t_list: &[f64],
    p: f64,
    shell: Shell,
    budget: usize,
) -> Result<Vec<BarycenterRecord>> {
    if t_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(MmError::invalid("t values must be ascending"));
    }
    if !(p >= 1.0) {
        return Err(MmError::invalid("p must be >= 1"));
    }
    let mut out = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let reg = region(instance, t, shell, budget)?;
        let n = reg.ball.len();
        let phis: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                reg.row(i)
                    .iter()
                    .map(|&d| pow_p(d / t, p))
                    .sum::<f64>()
                    / n as f64
            })
            .collect();
        let best = phis.iter().copied().fold(f64::INFINITY, f64::min);
        let winners: Vec<usize> = (0..n)
            .filter(|&i| phis[i] <= best + TIE_TOL * best.abs())
            .collect();
        let coords = scaled_coords(&reg.ball, instance.dim, t);
        out.push(BarycenterRecord {
            t,
            ball_size: n,
            barycenters: winners.iter().map(|&i| coords[i].clone()).collect(),
            phi: best,
            tie_warning: instance.law.is_continuous() && winners.len() > 1,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeDefect {
    /// sup over pairs of |d_t - reference distance|.
    pub metric_defect: f64,
    /// Euclidean Hausdorff distance between B(t)/t and the reference unit ball,
    /// evaluated on a grid of the ball.
    pub covering_defect: f64,
}

/// Only deterministic weights have a closed-form limit norm (`c · |·|₁`).
pub fn shape_defect(instance: &FppInstance, t: f64, shell: Shell) -> Result<ShapeDefect> {
    let WeightLaw::Deterministic { value: c } = instance.law else {
        return Err(MmError::Unsupported(
            "the limit norm is only known in closed form for deterministic weights".into(),
        ));
    };
    let scaled = scaled_space(instance, t, shell)?;
    let n = scaled.ball.len();
    let dim = instance.dim;
    let reference = |a: &Site, b: &Site| c * (0..dim).map(|k| (a[k] - b[k]).abs()).sum::<i64>() as f64 / t;
    let mut metric_defect: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let r = reference(&scaled.ball.sites[i], &scaled.ball.sites[j]);
            metric_defect = metric_defect.max((scaled.space.d(i, j) - r).abs());
        }
    }
    let outside: f64 = scaled
        .coords
        .iter()
        .map(|x| {
            let excess = x.iter().map(|v| v.abs()).sum::<f64>() - 1.0 / c;
            // Euclidean distance from x to the l1 ball of radius 1/c.
            if excess > 0.0 {
                excess / (dim as f64).sqrt()
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    let inside = ball_covering_radius(&scaled.ball, dim, t, 1.0 / c);
    Ok(ShapeDefect {
        metric_defect,
        covering_defect: outside.max(inside),
    })
}

/// sup over a grid of `{|z|₁ <= radius}` (including its vertices) of the
/// Euclidean distance from z to `ball.sites / t`.
fn ball_covering_radius(ball: &Ball, dim: usize, t: f64, radius: f64) -> f64 {
    let members: HashSet<Site> = ball.sites.iter().copied().collect();
    let per_axis = match dim {
        1 => 4000,
        2 => 400,
        _ => 60,
    };
    let h = 2.0 * radius / per_axis as f64;
    let mut grid: Vec<Vec<f64>> = Vec::new();
    let steps = per_axis as i64;
    let axis_vals: Vec<f64> = (0..=steps).map(|k| -radius + k as f64 * h).collect();
    let mut idx = vec![0usize; dim];
    loop {
        let z: Vec<f64> = idx.iter().map(|&k| axis_vals[k]).collect();
        if z.iter().map(|v| v.abs()).sum::<f64>() <= radius * (1.0 + 1e-12) {
            grid.push(z);
        }
        let mut a = 0;
        loop {
            if a == dim {
                break;
            }
            idx[a] += 1;
            if idx[a] <= per_axis {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
        if a == dim {
            break;
        }
    }
    for a in 0..dim {
        for sign in [-1.0, 1.0] {
            let mut v = vec![0.0; dim];
            v[a] = sign * radius;
            grid.push(v);
        }
    }
    grid.par_iter()
        .map(|z| nearest_site_distance(&members, z, t))
        .reduce(|| 0.0, f64::max)
}

fn nearest_site_distance(members: &HashSet<Site>, z: &[f64], t: f64) -> f64 {
    let dim = z.len();
    let target: Vec<f64> = z.iter().map(|v| v * t).collect();
    let mut center = ORIGIN;
    for a in 0..dim {
        center[a] = target[a].round() as i64;
    }
    let mut best = f64::INFINITY;
    let mut r: i64 = 0;
    // Sites at l∞ offset r from the rounded center are at least r - 0.5 away.
    while (r as f64 - 0.5) < best {
        for_each_shell_site(center, dim, r, |s| {
            if members.contains(&s) {
                let d: f64 = (0..dim)
                    .map(|a| (s[a] as f64 - target[a]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                best = best.min(d);
            }
        });
        r += 1;
        if r > 1_000_000 {
            break;
        }
    }
    best / t
}

fn for_each_shell_site(center: Site, dim: usize, r: i64, mut f: impl FnMut(Site)) {
    let mut off = vec![-r; dim];
    loop {
        if off.iter().any(|&o| o.abs() == r) {
            let mut s = center;
            for a in 0..dim {
                s[a] += off[a];
            }
            f(s);
        }
        let mut a = 0;
        while a < dim {
            off[a] += 1;
            if off[a] <= r {
                break;
            }
            off[a] = -r;
            a += 1;
        }
        if a == dim {
            return;
        }
    }
}
