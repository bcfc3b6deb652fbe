//! Uniformization of the filling by the density `e^{-eps h}`.
//!
//! Every edge gets the exact line integral of the density with the height
//! interpolated linearly, and `d_eps` is the weighted shortest-path metric on
//! vertices.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::filling::{FillingError, FillingGraph};
use crate::graph::LeveledGraph;
use crate::hyperbolic::{GeodesicPath, HopDistances};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonWeighting {
    pub epsilon: f64,
    /// `-eps / ln a`.
    pub beta: f64,
}

impl EpsilonWeighting {
    pub fn new(epsilon: f64, a: f64) -> Self {
        assert!(epsilon > 0.0, "epsilon must be positive");
        Self { epsilon, beta: -epsilon / a.ln() }
    }

    /// `eps` outside `(0, -ln a]`, i.e. `beta > 1`.
    pub fn out_of_range(&self) -> bool {
        self.beta > 1.0 + 1e-12
    }

    #[inline]
    pub fn density(&self, h: f64) -> f64 {
        (-self.epsilon * h).exp()
    }

    /// Horizontal edge at height `k`.
    #[inline]
    pub fn horizontal(&self, k: i32) -> f64 {
        self.density(k as f64)
    }

    /// Vertical edge between heights `k` and `k + 1`.
    #[inline]
    pub fn vertical(&self, k: i32) -> f64 {
        -(-self.epsilon).exp_m1() / self.epsilon * self.density(k as f64)
    }

    pub fn edge(&self, h1: i32, h2: i32) -> f64 {
        match h1.cmp(&h2) {
            Ordering::Equal => self.horizontal(h1),
            Ordering::Less => self.vertical(h1),
            Ordering::Greater => self.vertical(h2),
        }
    }

    /// `eps^{-1} e^{-eps n}`: length of a vertical ray from height `n` upward.
    pub fn tail_length(&self, n: i32) -> f64 {
        self.density(n as f64) / self.epsilon
    }

    /// Length of the vertical segment from height `n` to `n_top`.
    pub fn truncated_tail(&self, n: i32, n_top: i32) -> f64 {
        (self.density(n as f64) - self.density(n_top as f64)) / self.epsilon
    }

    pub fn path_length(&self, g: &LeveledGraph, path: &[usize]) -> f64 {
        path.windows(2).map(|e| self.edge(g.height(e[0]), g.height(e[1]))).sum()
    }
}

#[derive(Copy, Clone, PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Single-source weighted distances.
pub fn dijkstra(g: &LeveledGraph, w: &EpsilonWeighting, s: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; g.len()];
    let mut heap = BinaryHeap::new();
    dist[s] = 0.0;
    heap.push(Item(0.0, s));
    while let Some(Item(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &v in g.neighbors(u) {
            let nd = d + w.edge(g.height(u), g.height(v));
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Item(nd, v));
            }
        }
    }
    dist
}

/// All-pairs `d_eps`.
pub struct WeightedDistances<'g> {
    graph: &'g LeveledGraph,
    weighting: EpsilonWeighting,
    table: Vec<f64>,
}

impl<'g> WeightedDistances<'g> {
    pub fn new(graph: &'g LeveledGraph, weighting: EpsilonWeighting) -> Self {
        let rows: Vec<Vec<f64>> = (0..graph.len()).into_par_iter().map(|s| dijkstra(graph, &weighting, s)).collect();
        Self { graph, weighting, table: rows.concat() }
    }

    pub fn weighting(&self) -> &EpsilonWeighting {
        &self.weighting
    }

    #[inline]
    pub fn d(&self, u: usize, v: usize) -> f64 {
        self.table[u * self.graph.len() + v]
    }

    /// A shortest weighted path from `u` to `v`; each step back from `v`
    /// takes the smallest-id predecessor that is tight up to rounding.
    pub fn path(&self, u: usize, v: usize) -> Option<Vec<usize>> {
        if !self.d(u, v).is_finite() {
            return None;
        }
        let mut path = vec![v];
        let mut cur = v;
        while cur != u {
            let dc = self.d(u, cur);
            let prev = self.graph.neighbors(cur).iter().copied().find(|&p| {
                let via = self.d(u, p) + self.weighting.edge(self.graph.height(p), self.graph.height(cur));
                self.d(u, p) < dc && (via - dc).abs() <= 1e-12 * dc.max(1e-300)
            })?;
            path.push(prev);
            cur = prev;
        }
        path.reverse();
        Some(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDistanceInterval {
    pub center: f64,
    pub lower: f64,
    pub upper: f64,
    pub level_used: i32,
    /// Tail of one ray above `level_used`.
    pub tail_bound: f64,
}

impl BoundaryDistanceInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, other: &Self) -> bool {
        self.lower <= other.lower + 1e-12 && other.upper <= self.upper + 1e-12
    }
}

/// Distance between the boundary points of `z1` and `z2`, measured between the
/// top vertices of their anchored rays. Each ray continues upward by at most
/// `tail_bound`, so the true value lies within `2 tail_bound` of the center.
pub fn boundary_distance(
    g: &FillingGraph,
    wd: &WeightedDistances,
    z1: usize,
    z2: usize,
) -> Result<BoundaryDistanceInterval, FillingError> {
    let n_top = g.params().n_max;
    let m = g.space().len();
    for z in [z1, z2] {
        if z >= m {
            return Err(FillingError::UnknownPoint(z.to_string()));
        }
    }
    let v1 = g.anchored_descending_ray(z1, n_top)?[0];
    let v2 = g.anchored_descending_ray(z2, n_top)?[0];
    let center = wd.d(v1, v2);
    let tail = wd.weighting().tail_length(n_top);
    Ok(BoundaryDistanceInterval {
        center,
        lower: (center - 2.0 * tail).max(0.0),
        upper: center + 2.0 * tail,
        level_used: n_top,
        tail_bound: tail,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    Proxy,
    Empirical,
}

/// Top vertices of the anchored rays of every point, deduplicated.
pub fn top_vertices(g: &FillingGraph) -> Vec<usize> {
    let n = g.params().n_max;
    let mut v: Vec<usize> = (0..g.space().len()).filter_map(|z| g.nearest_at_level(z, n)).collect();
    v.sort_unstable();
    v.dedup();
    v
}

pub fn dist_to_boundary(g: &FillingGraph, wd: &WeightedDistances, x: usize, mode: BoundaryMode) -> f64 {
    let w = wd.weighting();
    match mode {
        BoundaryMode::Proxy => w.tail_length(g.height(x)),
        BoundaryMode::Empirical => {
            let tail = w.tail_length(g.params().n_max);
            top_vertices(g).into_iter().map(|t| wd.d(x, t) + tail).fold(f64::INFINITY, f64::min)
        }
    }
}

/// Empirical distance to the boundary for every vertex.
pub fn empirical_boundary_distances(g: &FillingGraph, wd: &WeightedDistances) -> Vec<f64> {
    let tail = wd.weighting().tail_length(g.params().n_max);
    let tops = top_vertices(g);
    (0..g.len()).map(|x| tops.iter().map(|&t| wd.d(x, t) + tail).fold(f64::INFINITY, f64::min)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformCurve {
    /// `l_eps(path) / d_eps(endpoints)`.
    pub length_ratio: f64,
    /// Worst `min(l_eps of the two pieces) / distance to boundary`.
    pub cigar_ratio: f64,
}

impl UniformCurve {
    pub fn constant(&self) -> f64 {
        self.length_ratio.max(self.cigar_ratio)
    }
}

/// Both uniform-curve ratios of a path; `to_boundary[v]` is the distance to
/// the boundary used for the cigar condition.
pub fn check_uniform_curve(g: &LeveledGraph, wd: &WeightedDistances, path: &[usize], to_boundary: &[f64]) -> UniformCurve {
    let w = wd.weighting();
    let mut prefix = vec![0.0];
    for e in path.windows(2) {
        prefix.push(prefix.last().unwrap() + w.edge(g.height(e[0]), g.height(e[1])));
    }
    let total = *prefix.last().unwrap();
    let (&a, &b) = (path.first().unwrap(), path.last().unwrap());
    let length_ratio = if a == b { 1.0 } else { total / wd.d(a, b) };
    let cigar_ratio = path
        .iter()
        .zip(&prefix)
        .map(|(&v, &l)| l.min(total - l) / to_boundary[v])
        .fold(0.0, f64::max);
    UniformCurve { length_ratio, cigar_ratio }
}

/// Largest `l_eps(hop geodesic) / d_eps` over the given pairs.
pub fn measure_admissibility(hop: &HopDistances, wd: &WeightedDistances, pairs: &[(usize, usize)]) -> f64 {
    let g = hop.graph();
    pairs
        .par_iter()
        .filter(|(u, v)| u != v)
        .map(|&(u, v)| {
            let p = hop.geodesic(u, v).expect("connected filling");
            wd.weighting().path_length(g, &p.vertices) / wd.d(u, v)
        })
        .reduce(|| 1.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub min: f64,
    pub max: f64,
    pub count: u64,
}

impl Default for RatioStats {
    fn default() -> Self {
        Self { min: f64::INFINITY, max: f64::NEG_INFINITY, count: 0 }
    }
}

impl RatioStats {
    pub fn push(&mut self, r: f64) {
        self.min = self.min.min(r);
        self.max = self.max.max(r);
        self.count += 1;
    }

    pub fn merge(mut self, o: Self) -> Self {
        self.min = self.min.min(o.min);
        self.max = self.max.max(o.max);
        self.count += o.count;
        self
    }

    /// Smallest `C` with every ratio in `[1/C, C]`.
    pub fn constant(&self) -> f64 {
        if self.count == 0 {
            1.0
        } else {
            self.max.max(1.0 / self.min).max(1.0)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.count == 0 || (self.min > 0.0 && self.max.is_finite())
    }
}

/// One row of the pair dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub u: usize,
    pub v: usize,
    pub hops: u32,
    pub d_eps: f64,
    pub predicted: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `|xy| >= 2`, predicted `e^{-eps (x|y)_h}`.
    Large,
    /// `|xy| <= 2`, predicted `e^{-eps (x|y)_h} |xy|`.
    Small,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub large: RatioStats,
    pub small: RatioStats,
    /// Same comparison with the Gromov product based at a Busemann estimate.
    pub busemann_both: Option<RatioStats>,
    /// `rho(x) eps^{-1} (1 - e^{-eps|xy|}) / d_eps`; its max is the measured Harnack `M`.
    pub arc_harnack_lower: RatioStats,
    /// Pairs breaking `d_eps <= rho(x) eps^{-1} (e^{eps|xy|} - 1)`.
    pub arc_harnack_upper_failures: Vec<(usize, usize)>,
    /// Edges breaking `e^{-eps} <= rho(u)/rho(v) <= e^{eps}`.
    pub harnack_edge_failures: Vec<(usize, usize)>,
    pub pairs_checked: u64,
}

#[derive(Default, Clone)]
struct RegimeAcc {
    large: RatioStats,
    small: RatioStats,
    both: RatioStats,
    lower: RatioStats,
    upper_fail: Vec<(usize, usize)>,
    rows: Vec<PairRecord>,
    pairs: u64,
}

/// Compare `d_eps` with the closed-form predictions over every vertex pair.
/// `busemann` optionally supplies Busemann values for the `(x|y)_b` variant.
/// Returns the report and one dump row per pair.
pub fn verify_distance_regimes(
    hop: &HopDistances,
    wd: &WeightedDistances,
    busemann: Option<&[f64]>,
) -> (RegimeReport, Vec<PairRecord>) {
    let g = hop.graph();
    let w = *wd.weighting();
    let eps = w.epsilon;
    let n = g.len();
    let acc = (0..n)
        .into_par_iter()
        .fold(RegimeAcc::default, |mut acc, u| {
            for v in (u + 1)..n {
                let k = hop.hops(u, v);
                let hops = k as f64;
                let de = wd.d(u, v);
                let base = (-eps * hop.gromov_product_height(u, v)).exp();
                acc.pairs += 1;
                if k >= 2 {
                    acc.large.push(de / base);
                }
                if k <= 2 {
                    acc.small.push(de / (base * hops));
                }
                let pred = if k >= 2 { base } else { base * hops };
                acc.rows.push(PairRecord {
                    u,
                    v,
                    hops: k,
                    d_eps: de,
                    predicted: pred,
                    regime: if k >= 2 { Regime::Large } else { Regime::Small },
                });
                if let Some(b) = busemann {
                    let pb = 0.5 * (b[u] + b[v] - hops);
                    let p = if eps * hops <= 1.0 { (-eps * pb).exp() * hops } else { (-eps * pb).exp() / eps };
                    acc.both.push(de / p);
                }
                for x in [u, v] {
                    let rho = w.density(g.height(x) as f64);
                    let upper = rho * (eps * hops).exp_m1() / eps;
                    if de > upper * (1.0 + 1e-9) {
                        acc.upper_fail.push((u, v));
                    }
                    acc.lower.push(rho * -(-eps * hops).exp_m1() / eps / de);
                }
            }
            acc
        })
        .reduce(RegimeAcc::default, |mut a, b| {
            a.large = a.large.merge(b.large);
            a.small = a.small.merge(b.small);
            a.both = a.both.merge(b.both);
            a.lower = a.lower.merge(b.lower);
            a.upper_fail.extend(b.upper_fail);
            a.rows.extend(b.rows);
            a.pairs += b.pairs;
            a
        });
    let mut harnack_edge_failures = Vec::new();
    for (u, v) in g.edges() {
        let r = w.density(g.height(u) as f64) / w.density(g.height(v) as f64);
        let (lo, hi) = ((-eps).exp(), eps.exp());
        if r < lo * (1.0 - 1e-12) || r > hi * (1.0 + 1e-12) {
            harnack_edge_failures.push((u, v));
        }
    }
    let mut rows = acc.rows;
    rows.sort_by_key(|r| (r.u, r.v));
    let mut upper_fail = acc.upper_fail;
    upper_fail.sort_unstable();
    (
        RegimeReport {
            large: acc.large,
            small: acc.small,
            busemann_both: busemann.map(|_| acc.both),
            arc_harnack_lower: acc.lower,
            arc_harnack_upper_failures: upper_fail,
            harnack_edge_failures,
            pairs_checked: acc.pairs,
        },
        rows,
    )
}

/// Length of `path` under `w` (for reports).
pub fn geodesic_length(g: &LeveledGraph, w: &EpsilonWeighting, p: &GeodesicPath) -> f64 {
    w.path_length(g, &p.vertices)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn closed_form_edges() {
        let w = EpsilonWeighting::new(LN2, 0.5);
        assert!((w.horizontal(0) - 1.0).abs() < 1e-15);
        assert!((w.vertical(0) - 0.5 / LN2).abs() < 1e-15);
        assert!((w.beta - 1.0).abs() < 1e-15);
        assert!(!w.out_of_range());
        assert!(EpsilonWeighting::new(1.0, 0.5).out_of_range());
    }

    #[test]
    fn quadrature_matches_vertical_weight() {
        for &eps in &[0.1, LN2, 1.7] {
            let w = EpsilonWeighting::new(eps, 0.5);
            for k in -3..4 {
                let m = 20000;
                let q: f64 = (0..m).map(|i| w.density(k as f64 + (i as f64 + 0.5) / m as f64)).sum::<f64>() / m as f64;
                assert!((q - w.vertical(k)).abs() < 1e-9 * w.vertical(k), "{eps} {k}");
            }
        }
    }

    #[test]
    fn tails() {
        let w = EpsilonWeighting::new(1.0, 0.3);
        assert_eq!(w.truncated_tail(4, 4), 0.0);
        assert!((w.tail_length(0) - 1.0).abs() < 1e-15);
        let s: f64 = (-2..5).map(|k| w.vertical(k)).sum();
        assert!((s - w.truncated_tail(-2, 5)).abs() < 1e-12);
    }

    #[test]
    fn chain_distances_telescope() {
        let g = LeveledGraph::chain(-2, 6);
        let w = EpsilonWeighting::new(LN2, 0.5);
        let wd = WeightedDistances::new(&g, w);
        assert!((wd.d(0, 5) - w.truncated_tail(-2, 3)).abs() < 1e-12);
        assert_eq!(wd.path(0, 5).unwrap(), (0..6).collect::<Vec<_>>());
        let hop = HopDistances::new(&g);
        let pairs: Vec<_> = (0..6).flat_map(|u| (0..6).map(move |v| (u, v))).collect();
        assert!((measure_admissibility(&hop, &wd, &pairs) - 1.0).abs() < 1e-12);
    }
}
