//! Unit-edge graphs with an integer height on every vertex.

use std::collections::VecDeque;

pub const UNREACHABLE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeveledGraph {
    heights: Vec<i32>,
    adj: Vec<Vec<usize>>,
}

impl LeveledGraph {
    /// Build from heights and an undirected edge list. Self loops and
    /// duplicate edges are dropped; neighbor lists are kept sorted.
    pub fn from_edges(heights: Vec<i32>, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); heights.len()];
        for &(u, v) in edges {
            if u != v {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        for l in &mut adj {
            l.sort_unstable();
            l.dedup();
        }
        Self { heights, adj }
    }

    /// A vertical chain of `len` vertices starting at height `bottom`.
    pub fn chain(bottom: i32, len: usize) -> Self {
        let heights = (0..len).map(|i| bottom + i as i32).collect();
        let edges: Vec<_> = (1..len).map(|i| (i - 1, i)).collect();
        Self::from_edges(heights, &edges)
    }

    pub fn len(&self) -> usize {
        self.heights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heights.is_empty()
    }

    #[inline]
    pub fn height(&self, v: usize) -> i32 {
        self.heights[v]
    }

    pub fn heights(&self) -> &[i32] {
        &self.heights
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, l)| l.iter().copied().filter(move |&v| v > u).map(move |v| (u, v)))
    }

    /// Hop distances from `s`; unreachable vertices get [`UNREACHABLE`].
    pub fn bfs(&self, s: usize) -> Vec<u32> {
        let mut dist = vec![UNREACHABLE; self.len()];
        let mut q = VecDeque::new();
        dist[s] = 0;
        q.push_back(s);
        while let Some(u) = q.pop_front() {
            for &w in &self.adj[u] {
                if dist[w] == UNREACHABLE {
                    dist[w] = dist[u] + 1;
                    q.push_back(w);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.is_empty() || self.bfs(0).iter().all(|&d| d != UNREACHABLE)
    }
}
