//! Exact balanced transportation problem by the primal transportation simplex
//! (MODI pricing on a spanning-tree basis).

use crate::error::{MmError, Result};

const MAX_PIVOTS: usize = 5_000_000;

/// Switch from most-negative pricing to first-negative pricing after this many
/// consecutive degenerate pivots; Bland-style selection cannot cycle.
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows × cols` flows.
    pub flow: Vec<f64>,
    pub cost: f64,
    /// Dual potentials certifying optimality: `u_i + v_j <= c_ij` everywhere,
    /// with equality on basic cells.
    pub row_potentials: Vec<f64>,
    pub col_potentials: Vec<f64>,
    pub pivots: usize,
}

/// Minimizes `Σ c_ij x_ij` subject to row sums `supply` and column sums `demand`.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportPlan> {
    let (r, c) = (supply.len(), demand.len());
    if r == 0 || c == 0 {
        return Err(MmError::invalid("transport problem needs nonempty marginals"));
    }
    if cost.len() != r * c {
        return Err(MmError::invalid("cost matrix has the wrong size"));
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(MmError::invalid("costs must be finite"));
    }
    let mut solver = Simplex::northwest_corner(supply, demand, cost);
    solver.run()?;
    Ok(solver.into_plan())
}

struct Simplex<'a> {
    r: usize,
    c: usize,
    cost: &'a [f64],
    flow: Vec<f64>,
    basic: Vec<bool>,
    /// Basic cells as (row, col); always r + c - 1 of them forming a spanning tree.
    basis: Vec<(usize, usize)>,
    u: Vec<f64>,
    v: Vec<f64>,
    pivots: usize,
}

impl<'a> Simplex<'a> {
    fn northwest_corner(supply: &[f64], demand: &[f64], cost: &'a [f64]) -> Self {
        let (r, c) = (supply.len(), demand.len());
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let mut flow = vec![0.0; r * c];
        let mut basic = vec![false; r * c];
        let mut basis = Vec::with_capacity(r + c - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let x = s[i].min(d[j]).max(0.0);
            flow[i * c + j] = x;
            basic[i * c + j] = true;
            basis.push((i, j));
            s[i] -= x;
            d[j] -= x;
            if i == r - 1 && j == c - 1 {
                break;
            }
            if j == c - 1 || (i < r - 1 && s[i] <= d[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
        Simplex {
            r,
            c,
            cost,
            flow,
            basic,
            basis,
            u: vec![0.0; r],
            v: vec![0.0; c],
            pivots: 0,
        }
    }

    /// Tree adjacency: nodes `0..r` are rows, `r..r+c` are columns.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.r + self.c];
        for &(i, j) in &self.basis {
            adj[i].push(self.r + j);
            adj[self.r + j].push(i);
        }
        adj
    }

    fn update_potentials(&mut self, adj: &[Vec<usize>]) -> Result<()> {
        let total = self.r + self.c;
        let mut seen = vec![false; total];
        let mut queue = vec![0usize];
        seen[0] = true;
        self.u[0] = 0.0;
        let mut head = 0;
        while head < queue.len() {
            let node = queue[head];
            head += 1;
            for &next in &adj[node] {
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                if node < self.r {
                    let j = next - self.r;
                    self.v[j] = self.cost[node * self.c + j] - self.u[node];
                } else {
                    let j = node - self.r;
                    self.u[next] = self.cost[next * self.c + j] - self.v[j];
                }
                queue.push(next);
            }
        }
        if queue.len() != total {
            return Err(MmError::Internal(format!(
                "basis is not a spanning tree ({} of {total} nodes reached, {} basic cells)",
                queue.len(),
                self.basis.len()
            )));
        }
        Ok(())
    }

    fn run(&mut self) -> Result<()> {
        let scale = self.cost.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let eps = 1e-12 * scale;
        let mut degenerate_run = 0;
        loop {
            let adj = self.adjacency();
            self.update_potentials(&adj)?;
            let bland = degenerate_run >= DEGENERATE_STREAK;
            let Some((ei, ej)) = self.price(eps, bland) else {
                return Ok(());
            };
            if self.pivots >= MAX_PIVOTS {
                return Err(MmError::Internal(format!(
                    "transport simplex did not converge in {MAX_PIVOTS} pivots ({}x{})",
                    self.r, self.c
                )));
            }
            let theta = self.pivot(&adj, ei, ej)?;
            self.pivots += 1;
            if theta > 0.0 {
                degenerate_run = 0;
            } else {
                degenerate_run += 1;
            }
        }
    }

    fn price(&self, eps: f64, bland: bool) -> Option<(usize, usize)> {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..self.r {
            for j in 0..self.c {
                if self.basic[i * self.c + j] {
                    continue;
                }
                let reduced = self.cost[i * self.c + j] - self.u[i] - self.v[j];
                if reduced < -eps {
                    if bland {
                        return Some((i, j));
                    }
                    if best.is_none_or(|(b, _, _)| reduced < b) {
                        best = Some((reduced, i, j));
                    }
                }
            }
        }
        best.map(|(_, i, j)| (i, j))
    }

    /// Enters cell `(ei, ej)` and returns the amount of flow moved.
    fn pivot(&mut self, adj: &[Vec<usize>], ei: usize, ej: usize) -> Result<f64> {
        let total = self.r + self.c;
        // Tree path from the column node of the entering cell to its row node.
        let start = self.r + ej;
        let mut parent = vec![usize::MAX; total];
        parent[start] = start;
        let mut queue = vec![start];
        let mut head = 0;
        while head < queue.len() && parent[ei] == usize::MAX {
            let node = queue[head];
            head += 1;
            for &next in &adj[node] {
                if parent[next] == usize::MAX {
                    parent[next] = node;
                    queue.push(next);
                }
            }
        }
        if parent[ei] == usize::MAX {
            return Err(MmError::Internal("entering cell closes no cycle".into()));
        }
        // Walking from the row node back to the column node, the first edge is a
        // donor (flow decreases), then edges alternate.
        let mut cells = Vec::new();
        let mut node = ei;
        while node != start {
            let p = parent[node];
            let (i, j) = if node < self.r {
                (node, p - self.r)
            } else {
                (p, node - self.r)
            };
            cells.push((i, j));
            node = p;
        }
        let mut theta = f64::INFINITY;
        let mut leaving = None;
        for (pos, &(i, j)) in cells.iter().enumerate() {
            if pos % 2 == 0 {
                let x = self.flow[i * self.c + j];
                let better = match leaving {
                    None => true,
                    Some((li, lj)) => x < theta || (x == theta && (i, j) < (li, lj)),
                };
                if better {
                    theta = x;
                    leaving = Some((i, j));
                }
            }
        }
        let (li, lj) = leaving.ok_or_else(|| MmError::Internal("empty pivot cycle".into()))?;
        let theta = theta.max(0.0);
        for (pos, &(i, j)) in cells.iter().enumerate() {
            let f = &mut self.flow[i * self.c + j];
            if pos % 2 == 0 {
                *f = (*f - theta).max(0.0);
            } else {
                *f += theta;
            }
        }
        self.flow[ei * self.c + ej] = theta;
        self.flow[li * self.c + lj] = 0.0;
        self.basic[li * self.c + lj] = false;
        self.basic[ei * self.c + ej] = true;
        let slot = self
            .basis
            .iter()
            .position(|&cell| cell == (li, lj))
            .expect("leaving cell is basic");
        self.basis[slot] = (ei, ej);
        Ok(theta)
    }

    fn into_plan(self) -> TransportPlan {
        let cost = self
            .flow
            .iter()
            .zip(self.cost)
            .map(|(x, c)| x * c)
            .sum();
        TransportPlan {
            rows: self.r,
            cols: self.c,
            flow: self.flow,
            cost,
            row_potentials: self.u,
            col_potentials: self.v,
            pivots: self.pivots,
        }
    }
}
