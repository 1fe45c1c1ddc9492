//! Dijkstra over adjacency lists with nonnegative weights.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::error::{MmError, Result};
use crate::matrix::DistanceMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
struct State {
    cost: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Undirected weighted graph stored as adjacency lists.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    adj: Vec<Vec<(usize, f64)>>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph {
            adj: vec![Vec::new(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn add_edge(&mut self, a: usize, b: usize, w: f64) {
        debug_assert!(w >= 0.0);
        self.adj[a].push((b, w));
        self.adj[b].push((a, w));
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adj[v]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Single-source distances; unreachable vertices get `f64::INFINITY`.
    pub fn dijkstra(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(State {
            cost: 0.0,
            node: source,
        });
        while let Some(State { cost, node }) = heap.pop() {
            if cost > dist[node] {
                continue;
            }
            for &(next, w) in &self.adj[node] {
                let c = cost + w;
                if c < dist[next] {
                    dist[next] = c;
                    heap.push(State { cost: c, node: next });
                }
            }
        }
        dist
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut label = vec![usize::MAX; n];
        let mut out = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut comp = vec![start];
            label[start] = id;
            let mut head = 0;
            while head < comp.len() {
                let v = comp[head];
                head += 1;
                for &(w, _) in &self.adj[v] {
                    if label[w] == usize::MAX {
                        label[w] = id;
                        comp.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// All-pairs distances; fails with the component structure if disconnected.
    pub fn all_pairs(&self, hint: &str) -> Result<DistanceMatrix> {
        let comps = self.components();
        if comps.len() > 1 {
            return Err(MmError::Disconnected {
                components: comps,
                hint: hint.to_string(),
            });
        }
        let n = self.len();
        let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|s| self.dijkstra(s)).collect();
        let mut m = DistanceMatrix::from_row_major(n, rows.concat())?;
        symmetrize_min(&mut m);
        Ok(m)
    }
}

/// Forces exact symmetry by taking the smaller of the two directed values;
/// Dijkstra from opposite ends can differ in the last bit.
pub(crate) fn symmetrize_min(m: &mut DistanceMatrix) {
    let n = m.len();
    for i in 0..n {
        m.set(i, i, 0.0);
        for j in (i + 1)..n {
            let v = m.get(i, j).min(m.get(j, i));
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
}
