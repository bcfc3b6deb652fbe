//! Hop distances, Gromov products, four-point hyperbolicity, triangle
//! diagnostics and Busemann estimates on a leveled graph.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{LeveledGraph, UNREACHABLE};

/// Above this many vertices hop distances are computed per source on demand.
pub const DENSE_LIMIT: usize = 5000;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("vertices {0} and {1} are disconnected")]
    Disconnected(usize, usize),
    #[error("ray must have at least 2 vertices")]
    ShortRay,
    #[error("busemann maximand increased at vertex {vertex}, depth {depth}")]
    NotMonotone { vertex: usize, depth: usize },
}

/// All-pairs hop distances: a dense table for small graphs, memoized
/// single-source searches beyond [`DENSE_LIMIT`].
pub struct HopDistances<'g> {
    graph: &'g LeveledGraph,
    dense: Option<Vec<u32>>,
    cache: Mutex<HashMap<usize, Arc<Vec<u32>>>>,
}

impl<'g> HopDistances<'g> {
    pub fn new(graph: &'g LeveledGraph) -> Self {
        let n = graph.len();
        let dense = (n <= DENSE_LIMIT).then(|| {
            let rows: Vec<Vec<u32>> = (0..n).into_par_iter().map(|s| graph.bfs(s)).collect();
            rows.concat()
        });
        Self { graph, dense, cache: Mutex::new(HashMap::new()) }
    }

    pub fn graph(&self) -> &'g LeveledGraph {
        self.graph
    }

    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    fn row(&self, u: usize) -> Arc<Vec<u32>> {
        let mut c = self.cache.lock().expect("bfs cache poisoned");
        c.entry(u).or_insert_with(|| Arc::new(self.graph.bfs(u))).clone()
    }

    /// Raw hop count, [`UNREACHABLE`] for disconnected pairs.
    #[inline]
    pub fn hops(&self, u: usize, v: usize) -> u32 {
        match &self.dense {
            Some(t) => t[u * self.graph.len() + v],
            None => self.row(u)[v],
        }
    }

    /// Hop distance as a float (infinite when disconnected).
    #[inline]
    pub fn d(&self, u: usize, v: usize) -> f64 {
        match self.hops(u, v) {
            UNREACHABLE => f64::INFINITY,
            k => k as f64,
        }
    }

    pub fn graph_distance(&self, u: usize, v: usize) -> Result<u32, AnalysisError> {
        match self.hops(u, v) {
            UNREACHABLE => Err(AnalysisError::Disconnected(u, v)),
            k => Ok(k),
        }
    }

    /// A geodesic from `u` to `v`; each step back from `v` takes the
    /// smallest-id predecessor.
    pub fn geodesic(&self, u: usize, v: usize) -> Result<GeodesicPath, AnalysisError> {
        let mut cur_d = self.graph_distance(u, v)?;
        let mut path = vec![v];
        let mut cur = v;
        while cur_d > 0 {
            let prev = self
                .graph
                .neighbors(cur)
                .iter()
                .copied()
                .find(|&w| self.hops(u, w) == cur_d - 1)
                .expect("bfs layers are consistent");
            path.push(prev);
            cur = prev;
            cur_d -= 1;
        }
        path.reverse();
        Ok(GeodesicPath { vertices: path })
    }

    pub fn gromov_product_base(&self, u: usize, v: usize, p: usize) -> f64 {
        gromov_product(self.d(u, p), self.d(v, p), self.d(u, v))
    }

    pub fn gromov_product_height(&self, u: usize, v: usize) -> f64 {
        let h = |x: usize| self.graph.height(x) as f64;
        gromov_product(h(u), h(v), self.d(u, v))
    }
}

/// `(x|y) = (a + b - c) / 2` for `a = |xp|`, `b = |yp|`, `c = |xy|`.
#[inline]
pub fn gromov_product(a: f64, b: f64, c: f64) -> f64 {
    0.5 * (a + b - c)
}

/// `(u|v)_b` for a function `b` with values `bu`, `bv`.
#[inline]
pub fn gromov_product_busemann(bu: f64, bv: f64, duv: f64) -> f64 {
    gromov_product(bu, bv, duv)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeodesicPath {
    pub vertices: Vec<usize>,
}

impl GeodesicPath {
    pub fn hop_length(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaMode {
    Exact,
    Sampled { seed: u64, count: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub delta: f64,
    pub quadruples: u64,
    /// A quadruple attaining `delta`.
    pub witness: [usize; 4],
}

/// Four-point defect of one quadruple: half the gap between the two largest
/// of the three pair sums.
#[inline]
pub fn quadruple_delta(d: &HopDistances, q: [usize; 4]) -> f64 {
    let [x, y, z, w] = q;
    let mut s = [d.d(x, y) + d.d(z, w), d.d(x, z) + d.d(y, w), d.d(x, w) + d.d(y, z)];
    s.sort_by(f64::total_cmp);
    0.5 * (s[2] - s[1])
}

/// Smallest `delta'` with `(x|z)_p >= min((x|y)_p, (y|z)_p) - delta'`.
pub fn delta_four_point(d: &HopDistances, mode: DeltaMode) -> DeltaEstimate {
    let n = d.len();
    let none = DeltaEstimate { delta: 0.0, quadruples: 0, witness: [0; 4] };
    if n == 0 {
        return none;
    }
    let better = |a: DeltaEstimate, b: DeltaEstimate| {
        let q = a.quadruples + b.quadruples;
        let mut best = if b.delta > a.delta { b } else { a };
        best.quadruples = q;
        best
    };
    match mode {
        DeltaMode::Exact => (0..n)
            .into_par_iter()
            .map(|i| {
                let mut best = none;
                for j in (i + 1)..n {
                    for k in (j + 1)..n {
                        for l in (k + 1)..n {
                            let q = [i, j, k, l];
                            let dl = quadruple_delta(d, q);
                            best.quadruples += 1;
                            if dl > best.delta {
                                best.delta = dl;
                                best.witness = q;
                            }
                        }
                    }
                }
                best
            })
            .reduce(|| none, better),
        DeltaMode::Sampled { seed, count } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut best = none;
            for _ in 0..count {
                let q = [rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n)];
                let dl = quadruple_delta(d, q);
                best.quadruples += 1;
                if dl > best.delta {
                    best.delta = dl;
                    best.witness = q;
                }
            }
            best
        }
    }
}

/// True iff the two smallest entries differ by at most `delta`.
pub fn delta_triple(t: [f64; 3], delta: f64) -> bool {
    let mut s = t;
    s.sort_by(f64::total_cmp);
    s[1] - s[0] <= delta
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TetrahedronOutcome {
    pub hypotheses_hold: bool,
    pub conclusion_holds: bool,
}

impl TetrahedronOutcome {
    /// The implication itself.
    pub fn holds(&self) -> bool {
        !self.hypotheses_hold || self.conclusion_holds
    }
}

/// `d = [d12, d13, d14, d23, d24, d34]`. Hypotheses: the four face triples
/// are `delta`-triples; conclusion: the opposite-edge sums form a
/// `2 delta`-triple.
pub fn tetrahedron_check(d: [f64; 6], delta: f64) -> TetrahedronOutcome {
    let [d12, d13, d14, d23, d24, d34] = d;
    let hyp = delta_triple([d23, d24, d34], delta)
        && delta_triple([d13, d14, d34], delta)
        && delta_triple([d12, d14, d24], delta)
        && delta_triple([d12, d13, d23], delta);
    let concl = delta_triple([d12 + d34, d13 + d24, d14 + d23], 2.0 * delta);
    TetrahedronOutcome { hypotheses_hold: hyp, conclusion_holds: concl }
}

/// A vertex triangle with its three chosen sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triangle {
    pub x: usize,
    pub y: usize,
    pub z: usize,
    pub xy: GeodesicPath,
    pub xz: GeodesicPath,
    pub yz: GeodesicPath,
}

impl Triangle {
    pub fn new(d: &HopDistances, x: usize, y: usize, z: usize) -> Result<Self, AnalysisError> {
        Ok(Self { x, y, z, xy: d.geodesic(x, y)?, xz: d.geodesic(x, z)?, yz: d.geodesic(y, z)? })
    }

    /// Equiradii `((y|z)_x, (x|z)_y, (x|y)_z)`.
    pub fn radii(&self) -> [f64; 3] {
        let (a, b, c) = (self.yz.hop_length() as f64, self.xz.hop_length() as f64, self.xy.hop_length() as f64);
        [0.5 * (b + c - a), 0.5 * (a + c - b), 0.5 * (a + b - c)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equiradial {
    /// Vertices on `yz`, `xz`, `xy` respectively.
    pub points: [usize; 3],
    pub diameter: f64,
}

/// Equiradial points rounded toward the triangle vertex they are measured from.
pub fn canonical_equiradial(d: &HopDistances, t: &Triangle) -> Equiradial {
    let [rx, ry, _] = t.radii();
    let on = |p: &GeodesicPath, s: f64| p.vertices[(s.floor() as usize).min(p.hop_length())];
    let zh = on(&t.xy, rx);
    let yh = on(&t.xz, rx);
    let xh = on(&t.yz, ry);
    let diameter = d.d(xh, yh).max(d.d(xh, zh)).max(d.d(yh, zh));
    Equiradial { points: [xh, yh, zh], diameter }
}

/// Largest `| |T(p)T(q)| - |pq| |` over vertex pairs on the sides, where `T`
/// folds the triangle onto its comparison tripod.
pub fn tripod_defect(d: &HopDistances, t: &Triangle) -> f64 {
    let [rx, ry, _] = t.radii();
    let mut pts: Vec<(usize, usize, f64)> = Vec::new();
    let mut side = |p: &GeodesicPath, r: f64, near: usize, far: usize| {
        for (s, &v) in p.vertices.iter().enumerate() {
            let s = s as f64;
            pts.push(if s <= r { (v, near, r - s) } else { (v, far, s - r) });
        }
    };
    side(&t.xy, rx, 0, 1);
    side(&t.xz, rx, 0, 2);
    side(&t.yz, ry, 1, 2);
    let mut worst = 0.0f64;
    for (i, &(p, lp, rp)) in pts.iter().enumerate() {
        for &(q, lq, rq) in &pts[i + 1..] {
            let tri = if lp == lq { (rp - rq).abs() } else { rp + rq };
            worst = worst.max((tri - d.d(p, q)).abs());
        }
    }
    worst
}

/// Truncated Busemann function of a descending ray, evaluated everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusemannEstimate {
    pub anchor: usize,
    /// `ray[t]` is `gamma(t)`; `ray[0]` is the start.
    pub ray: Vec<usize>,
    /// Height of the deepest ray vertex.
    pub truncation_level: i32,
    /// `d(gamma(t_max), x) - t_max` per vertex.
    pub values: Vec<f64>,
    /// Change of the maximand over the last step of the ray, per vertex.
    pub last_increment: Vec<f64>,
    /// Number of trailing zero increments, per vertex.
    pub stable_steps: Vec<usize>,
}

impl BusemannEstimate {
    pub fn value(&self, x: usize) -> f64 {
        self.values[x]
    }

    /// Has the maximand at `x` stopped changing for `k` consecutive levels?
    pub fn stabilized(&self, x: usize, k: usize) -> bool {
        self.stable_steps[x] >= k
    }

    pub fn all_stabilized(&self, k: usize) -> bool {
        self.stable_steps.iter().all(|&s| s >= k)
    }
}

/// `d(gamma(t), x) - t` is nonincreasing in `t` by the triangle inequality,
/// so the deepest value is the tightest available; this is checked.
pub fn busemann_estimate(d: &HopDistances, anchor: usize, ray: &[usize]) -> Result<BusemannEstimate, AnalysisError> {
    if ray.len() < 2 {
        return Err(AnalysisError::ShortRay);
    }
    let n = d.len();
    let mut values: Vec<f64> = (0..n).map(|x| d.d(ray[0], x)).collect();
    let mut last_increment = vec![0.0; n];
    let mut stable_steps = vec![0usize; n];
    for (t, &g) in ray.iter().enumerate().skip(1) {
        for x in 0..n {
            let v = d.d(g, x) - t as f64;
            let inc = v - values[x];
            if inc > 0.0 {
                return Err(AnalysisError::NotMonotone { vertex: x, depth: t });
            }
            stable_steps[x] = if inc == 0.0 { stable_steps[x] + 1 } else { 0 };
            last_increment[x] = inc;
            values[x] = v;
        }
    }
    Ok(BusemannEstimate {
        anchor,
        ray: ray.to_vec(),
        truncation_level: d.graph().height(*ray.last().expect("nonempty")),
        values,
        last_increment,
        stable_steps,
    })
}

/// Adaptedness defect of `f` along a geodesic: put `t = 0` at the first
/// minimizer of `f` and compare `f(eta(t))` with `|t| + (x|y)_f`.
pub fn adapted_defect(path: &GeodesicPath, f: impl Fn(usize) -> f64) -> f64 {
    let vals: Vec<f64> = path.vertices.iter().map(|&v| f(v)).collect();
    let Some(&last) = vals.last() else { return 0.0 };
    let prod = gromov_product(vals[0], last, path.hop_length() as f64);
    let t0 = (0..vals.len()).fold(0, |m, i| if vals[i] < vals[m] { i } else { m });
    vals.iter()
        .enumerate()
        .map(|(i, &v)| (v - (i as f64 - t0 as f64).abs() - prod).abs())
        .fold(0.0, f64::max)
}
