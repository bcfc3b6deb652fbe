//! The truncated hyperbolic filling of a finite metric space.
//!
//! Level `n` holds one vertex per point of a greedy maximal `a^n`-separated
//! net; vertex `(x, n)` owns the open ball `B(x, tau a^n)`. Two vertices whose
//! heights differ by at most one are joined when their balls meet. Vertices
//! are numbered level by level from the bottom, in net order, so growing the
//! window upward never renumbers existing vertices.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::LeveledGraph;
use crate::metric::{FiniteMetricSpace, NetOrder};

#[derive(Debug, Error)]
pub enum FillingError {
    #[error("a must lie in (0,1), got {0}")]
    BadA(f64),
    #[error("tau = {tau} violates tau > max(3, 1/(1-a)) = {bound}")]
    Tau { tau: f64, bound: f64 },
    #[error("empty window [{0}, {1}]")]
    EmptyWindow(i32, i32),
    #[error("vertices {0} and {1} share no descending cone point; lower n_min")]
    NoConePoint(usize, usize),
    #[error("no center within (tau/3)a^{level} of point {point}")]
    RayGap { point: usize, level: i32 },
    #[error("ray vertices {0} and {1} are not adjacent")]
    RayBroken(usize, usize),
    #[error("level {0} outside the window")]
    LevelOutOfRange(i32),
    #[error("unknown point {0}")]
    UnknownPoint(String),
    #[error("malformed graph json: {0}")]
    Json(String),
    #[error("graph has {0} vertices, DOT export is limited to 2000")]
    TooLargeForDot(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IntersectionMode {
    /// Balls meet when some point of Z lies in both (open balls).
    #[default]
    WitnessScan,
    /// Balls meet when the centers are closer than the sum of radii.
    CenterSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FillingParams {
    pub a: f64,
    pub tau: f64,
    pub n_min: i32,
    pub n_max: i32,
    #[serde(default)]
    pub intersection_mode: IntersectionMode,
    /// `None` keeps input order for the nets; `Some(s)` shuffles with seed `s`.
    #[serde(default)]
    pub order_seed: Option<u64>,
}

impl FillingParams {
    pub fn new(a: f64, tau: f64, n_min: i32, n_max: i32) -> Self {
        Self { a, tau, n_min, n_max, intersection_mode: IntersectionMode::WitnessScan, order_seed: None }
    }

    pub fn tau_bound(a: f64) -> f64 {
        3f64.max(1.0 / (1.0 - a))
    }

    pub fn validate(&self) -> Result<(), FillingError> {
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(FillingError::BadA(self.a));
        }
        let bound = Self::tau_bound(self.a);
        if !(self.tau > bound) {
            return Err(FillingError::Tau { tau: self.tau, bound });
        }
        if self.n_min > self.n_max {
            return Err(FillingError::EmptyWindow(self.n_min, self.n_max));
        }
        Ok(())
    }

    /// Net separation `a^n` at level `n`.
    pub fn scale(&self, n: i32) -> f64 {
        self.a.powi(n)
    }

    /// Ball radius `tau a^n` at level `n`.
    pub fn radius(&self, n: i32) -> f64 {
        self.tau * self.a.powi(n)
    }

    pub fn levels(&self) -> usize {
        (self.n_max - self.n_min + 1).max(0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: usize,
    pub level: i32,
    /// Index of the center in the metric space.
    pub center: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeLabel {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone)]
pub struct FillingGraph {
    space: Arc<FiniteMetricSpace>,
    params: FillingParams,
    vertices: Vec<Vertex>,
    /// `level_start[k]..level_start[k+1]` are the vertices at level `n_min + k`.
    level_start: Vec<usize>,
    graph: LeveledGraph,
    balls: Vec<Vec<u64>>,
}

impl PartialEq for FillingGraph {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params && self.vertices == other.vertices && self.graph == other.graph
    }
}

fn ball_bits(space: &FiniteMetricSpace, center: usize, r: f64) -> Vec<u64> {
    let mut bits = vec![0u64; space.len().div_ceil(64)];
    for z in 0..space.len() {
        if space.d(z, center) < r {
            bits[z / 64] |= 1 << (z % 64);
        }
    }
    bits
}

impl FillingGraph {
    pub fn build(space: Arc<FiniteMetricSpace>, params: FillingParams) -> Result<Self, FillingError> {
        params.validate()?;
        let order = NetOrder::from_seed(params.order_seed).permutation(space.len());
        let mut vertices = Vec::new();
        let mut level_start = vec![0];
        for n in params.n_min..=params.n_max {
            for c in space.maximal_separated_net(params.scale(n), &order) {
                vertices.push(Vertex { id: vertices.len(), level: n, center: c });
            }
            level_start.push(vertices.len());
        }
        let mut g = Self::assemble(space, params, vertices, level_start, &[]);
        let mut edges = Vec::new();
        for n in params.n_min..=params.n_max {
            let cur = g.level_range(n);
            for v in cur.clone() {
                for w in (v + 1)..cur.end {
                    if g.balls_intersect(v, w) {
                        edges.push((v, w));
                    }
                }
                if n < params.n_max {
                    for w in g.level_range(n + 1) {
                        if g.balls_intersect(v, w) {
                            edges.push((v, w));
                        }
                    }
                }
            }
        }
        g.graph = LeveledGraph::from_edges(g.vertices.iter().map(|v| v.level).collect(), &edges);
        Ok(g)
    }

    fn assemble(
        space: Arc<FiniteMetricSpace>,
        params: FillingParams,
        vertices: Vec<Vertex>,
        level_start: Vec<usize>,
        edges: &[(usize, usize)],
    ) -> Self {
        let balls = vertices.iter().map(|v| ball_bits(&space, v.center, params.radius(v.level))).collect();
        let graph = LeveledGraph::from_edges(vertices.iter().map(|v| v.level).collect(), edges);
        Self { space, params, vertices, level_start, graph, balls }
    }

    pub fn space(&self) -> &Arc<FiniteMetricSpace> {
        &self.space
    }

    pub fn params(&self) -> &FillingParams {
        &self.params
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Vertex {
        self.vertices[v]
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// The underlying unit-edge graph with heights.
    pub fn graph(&self) -> &LeveledGraph {
        &self.graph
    }

    pub fn height(&self, v: usize) -> i32 {
        self.vertices[v].level
    }

    pub fn center(&self, v: usize) -> usize {
        self.vertices[v].center
    }

    pub fn level_range(&self, n: i32) -> std::ops::Range<usize> {
        if n < self.params.n_min || n > self.params.n_max {
            return 0..0;
        }
        let k = (n - self.params.n_min) as usize;
        self.level_start[k]..self.level_start[k + 1]
    }

    pub fn edge_label(&self, u: usize, v: usize) -> EdgeLabel {
        if self.height(u) == self.height(v) {
            EdgeLabel::Horizontal
        } else {
            EdgeLabel::Vertical
        }
    }

    pub fn edges(&self) -> Vec<(usize, usize, EdgeLabel)> {
        self.graph.edges().map(|(u, v)| (u, v, self.edge_label(u, v))).collect()
    }

    /// Does `B(v)` meet `B(w)` under the configured intersection mode?
    pub fn balls_intersect(&self, v: usize, w: usize) -> bool {
        match self.params.intersection_mode {
            IntersectionMode::WitnessScan => self.balls[v].iter().zip(&self.balls[w]).any(|(x, y)| x & y != 0),
            IntersectionMode::CenterSum => {
                let (hv, hw) = (self.height(v), self.height(w));
                let r = self.params.tau * (self.params.scale(hv) + self.params.scale(hw));
                self.space.d(self.center(v), self.center(w)) < r
            }
        }
    }

    /// Is point `z` in the open ball of `v`?
    pub fn ball_contains(&self, v: usize, z: usize) -> bool {
        self.balls[v][z / 64] >> (z % 64) & 1 == 1
    }

    pub fn is_connected(&self) -> bool {
        self.graph.is_connected()
    }

    /// Everything reachable from `v` by height-decreasing vertical edges,
    /// `v` included, in increasing id order.
    pub fn descending_closure(&self, v: usize) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        seen[v] = true;
        let mut frontier = vec![v];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for u in frontier {
                for &w in self.graph.neighbors(u) {
                    if self.height(w) == self.height(u) - 1 && !seen[w] {
                        seen[w] = true;
                        next.push(w);
                    }
                }
            }
            frontier = next;
        }
        (0..self.len()).filter(|&u| seen[u]).collect()
    }

    /// Descending closures of every vertex as bitsets.
    pub fn closure_table(&self) -> ClosureTable {
        let words = self.len().div_ceil(64);
        let mut bits = vec![0u64; self.len() * words];
        // vertices are sorted by level, so lower closures are ready first
        for v in 0..self.len() {
            let (lo, hi) = (v * words, (v + 1) * words);
            bits[lo + v / 64] |= 1 << (v % 64);
            for &w in self.graph.neighbors(v) {
                if self.height(w) + 1 == self.height(v) {
                    for k in 0..words {
                        let x = bits[w * words + k];
                        bits[lo + k] |= x;
                    }
                }
            }
            debug_assert!(hi <= bits.len());
        }
        ClosureTable { words, bits }
    }

    /// Common descending cone points of `v` and `w`.
    pub fn cone_points(&self, v: usize, w: usize) -> Vec<usize> {
        let cv = self.descending_closure(v);
        let cw = self.descending_closure(w);
        cv.into_iter().filter(|u| cw.binary_search(u).is_ok()).collect()
    }

    /// A cone point of maximal height, ties to the smallest id.
    pub fn branch_point(&self, v: usize, w: usize) -> Result<usize, FillingError> {
        self.branch_point_with(&self.closure_table(), v, w)
    }

    pub fn branch_point_with(&self, t: &ClosureTable, v: usize, w: usize) -> Result<usize, FillingError> {
        let top = self.height(v).min(self.height(w));
        for n in (self.params.n_min..=top).rev() {
            if let Some(u) = self.level_range(n).find(|&u| t.contains(v, u) && t.contains(w, u)) {
                return Ok(u);
            }
        }
        Err(FillingError::NoConePoint(v, w))
    }

    /// Vertex at level `n` whose center is nearest to `z`, ties to smallest id.
    pub fn nearest_at_level(&self, z: usize, n: i32) -> Option<usize> {
        self.level_range(n).min_by(|&u, &w| {
            let (du, dw) = (self.space.d(z, self.center(u)), self.space.d(z, self.center(w)));
            du.total_cmp(&dw).then(u.cmp(&w))
        })
    }

    /// Ray anchored at point `z`, from level `n_top` down to `n_min`.
    pub fn anchored_descending_ray(&self, z: usize, n_top: i32) -> Result<Vec<usize>, FillingError> {
        if n_top < self.params.n_min || n_top > self.params.n_max {
            return Err(FillingError::LevelOutOfRange(n_top));
        }
        let mut ray: Vec<usize> = Vec::new();
        for n in (self.params.n_min..=n_top).rev() {
            let v = self.nearest_at_level(z, n).ok_or(FillingError::RayGap { point: z, level: n })?;
            if !(self.space.d(z, self.center(v)) < self.params.tau / 3.0 * self.params.scale(n)) {
                return Err(FillingError::RayGap { point: z, level: n });
            }
            if let Some(&prev) = ray.last() {
                if !self.graph.has_edge(prev, v) {
                    return Err(FillingError::RayBroken(prev, v));
                }
            }
            ray.push(v);
        }
        Ok(ray)
    }

    /// Vertex and edge counts per level.
    pub fn summary(&self) -> BuildSummary {
        let levels = (self.params.n_min..=self.params.n_max)
            .map(|n| {
                let r = self.level_range(n);
                let mut horizontal = 0;
                let mut up = 0;
                for v in r.clone() {
                    for &w in self.graph.neighbors(v) {
                        if w > v && self.height(w) == n {
                            horizontal += 1;
                        } else if self.height(w) == n + 1 {
                            up += 1;
                        }
                    }
                }
                LevelSummary { n, vertices: r.len(), horizontal_edges: horizontal, vertical_edges_up: up }
            })
            .collect();
        BuildSummary {
            vertices: self.len(),
            edges: self.graph.edge_count(),
            connected: self.is_connected(),
            levels,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let levels: Vec<_> = (self.params.n_min..=self.params.n_max)
            .map(|n| {
                let vs: Vec<_> = self
                    .level_range(n)
                    .map(|v| serde_json::json!({"id": v, "center": self.space.id(self.center(v))}))
                    .collect();
                serde_json::json!({"n": n, "vertices": vs})
            })
            .collect();
        let edges: Vec<_> = self
            .edges()
            .into_iter()
            .map(|(u, v, l)| serde_json::json!({"u": u, "v": v, "label": l}))
            .collect();
        serde_json::json!({"params": self.params, "levels": levels, "edges": edges})
    }

    /// Inverse of [`FillingGraph::to_json`]; centers are resolved against `space`.
    pub fn from_json(value: &serde_json::Value, space: Arc<FiniteMetricSpace>) -> Result<Self, FillingError> {
        #[derive(Deserialize)]
        struct V {
            id: usize,
            center: String,
        }
        #[derive(Deserialize)]
        struct L {
            n: i32,
            vertices: Vec<V>,
        }
        #[derive(Deserialize)]
        struct E {
            u: usize,
            v: usize,
            label: EdgeLabel,
        }
        #[derive(Deserialize)]
        struct G {
            params: FillingParams,
            levels: Vec<L>,
            edges: Vec<E>,
        }
        let bad = |m: String| FillingError::Json(m);
        let g: G = serde_json::from_value(value.clone()).map_err(|e| bad(e.to_string()))?;
        let mut vertices = Vec::new();
        let mut level_start = vec![0];
        for (k, l) in g.levels.iter().enumerate() {
            if l.n != g.params.n_min + k as i32 {
                return Err(bad(format!("level {} out of sequence", l.n)));
            }
            for v in &l.vertices {
                if v.id != vertices.len() {
                    return Err(bad(format!("vertex id {} out of sequence", v.id)));
                }
                let c = space.index_of(&v.center).ok_or_else(|| FillingError::UnknownPoint(v.center.clone()))?;
                vertices.push(Vertex { id: v.id, level: l.n, center: c });
            }
            level_start.push(vertices.len());
        }
        if g.levels.len() != g.params.levels() {
            return Err(bad("level count does not match the window".into()));
        }
        let mut edges = Vec::new();
        for e in &g.edges {
            if e.u >= vertices.len() || e.v >= vertices.len() {
                return Err(bad(format!("edge ({}, {}) out of range", e.u, e.v)));
            }
            let same = vertices[e.u].level == vertices[e.v].level;
            if same != (e.label == EdgeLabel::Horizontal) {
                return Err(bad(format!("edge ({}, {}) mislabeled", e.u, e.v)));
            }
            edges.push((e.u, e.v));
        }
        Ok(Self::assemble(space, g.params, vertices, level_start, &edges))
    }

    pub fn to_dot(&self) -> Result<String, FillingError> {
        if self.len() > 2000 {
            return Err(FillingError::TooLargeForDot(self.len()));
        }
        let mut s = String::from("graph filling {\n  node [shape=point];\n");
        for v in &self.vertices {
            let _ = writeln!(s, "  v{} [label=\"{}@{}\"];", v.id, self.space.id(v.center), v.level);
        }
        for (u, v, l) in self.edges() {
            let style = if l == EdgeLabel::Horizontal { "dashed" } else { "solid" };
            let _ = writeln!(s, "  v{u} -- v{v} [style={style}];");
        }
        s.push_str("}\n");
        Ok(s)
    }
}

/// Bitset table: row `v` marks the descending closure of `v`.
#[derive(Debug, Clone)]
pub struct ClosureTable {
    words: usize,
    bits: Vec<u64>,
}

impl ClosureTable {
    #[inline]
    pub fn contains(&self, v: usize, u: usize) -> bool {
        self.bits[v * self.words + u / 64] >> (u % 64) & 1 == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub n: i32,
    pub vertices: usize,
    pub horizontal_edges: usize,
    pub vertical_edges_up: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub vertices: usize,
    pub edges: usize,
    pub connected: bool,
    pub levels: Vec<LevelSummary>,
}
