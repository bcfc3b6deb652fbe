//! Run configuration, the comparison suites and their report.
//!
//! Exact invariants become [`Violation`]s; measured constants become
//! [`LemmaRecord`]s and never fail a run on their own.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filling::{BuildSummary, FillingError, FillingGraph, FillingParams, IntersectionMode};
use crate::halfplane;
use crate::hyperbolic::{self, DeltaMode, HopDistances, Triangle};
use crate::metric::{self, FiniteMetricSpace, InputFormat, MetricError, MetricKind, NetOrder, ScaleStats};
use crate::uniform::{self, BoundaryMode, EpsilonWeighting, PairRecord, RatioStats, WeightedDistances};

/// Relative float slack for exact invariants.
pub const FLOAT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Filling(#[from] FillingError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Filling,
    Hyperbolicity,
    Busemann,
    Uniformization,
    Boundary,
    Halfplane,
}

impl Suite {
    pub const ALL: [Suite; 6] =
        [Suite::Filling, Suite::Hyperbolicity, Suite::Busemann, Suite::Uniformization, Suite::Boundary, Suite::Halfplane];
}

fn default_a() -> f64 {
    0.5
}
fn default_tau() -> f64 {
    4.0
}
fn default_pad() -> i32 {
    3
}
fn default_max_levels() -> usize {
    14
}
fn default_seed() -> u64 {
    7
}
fn default_triangles() -> usize {
    2000
}
fn default_suites() -> Vec<Suite> {
    Suite::ALL.to_vec()
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub format: InputFormat,
    #[serde(default)]
    pub metric: MetricKind,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Empty means `[-ln a, -ln a / 2]`.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub n_min: Option<i32>,
    #[serde(default)]
    pub n_max: Option<i32>,
    /// Singleton levels added below the suggested window when `n_min` is auto.
    #[serde(default = "default_pad")]
    pub pad_below: i32,
    #[serde(default = "default_max_levels")]
    pub max_levels: usize,
    #[serde(default)]
    pub intersection_mode: IntersectionMode,
    #[serde(default)]
    pub order_seed: Option<u64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Quadruple budget for sampled hyperbolicity; `None` is exact up to 250 vertices.
    #[serde(default)]
    pub delta_samples: Option<u64>,
    #[serde(default = "default_triangles")]
    pub triangle_samples: usize,
    #[serde(default = "default_suites")]
    pub suites: Vec<Suite>,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl RunConfig {
    pub fn epsilon_list(&self) -> Vec<f64> {
        if self.epsilons.is_empty() {
            let e = -self.a.ln();
            vec![e, e / 2.0]
        } else {
            self.epsilons.clone()
        }
    }

    pub fn validate(&self) -> Result<(), VerifyError> {
        if !(self.a > 0.0 && self.a < 1.0) {
            return Err(VerifyError::Filling(FillingError::BadA(self.a)));
        }
        let bound = FillingParams::tau_bound(self.a);
        if !(self.tau > bound) {
            return Err(VerifyError::Filling(FillingError::Tau { tau: self.tau, bound }));
        }
        if self.epsilon_list().iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(VerifyError::Config("every epsilon must be positive".into()));
        }
        if let (Some(lo), Some(hi)) = (self.n_min, self.n_max) {
            if lo > hi {
                return Err(VerifyError::Filling(FillingError::EmptyWindow(lo, hi)));
            }
        }
        if self.pad_below < 0 {
            return Err(VerifyError::Config("pad_below must be nonnegative".into()));
        }
        let mut s = self.suites.clone();
        s.sort();
        s.dedup();
        if s.len() != self.suites.len() {
            return Err(VerifyError::Config("suite listed twice".into()));
        }
        Ok(())
    }

    pub fn load_space(&self) -> Result<FiniteMetricSpace, VerifyError> {
        let path = self.input.as_ref().ok_or_else(|| VerifyError::Config("no input given".into()))?;
        Ok(metric::load_from_path(path, self.format, self.metric)?)
    }

    /// Filling parameters for `space`, resolving an automatic window.
    pub fn filling_params(&self, space: &FiniteMetricSpace) -> (FillingParams, ScaleStats) {
        let stats = space.scale_stats(self.a, self.max_levels);
        let n_min = self.n_min.unwrap_or(stats.suggested_n_min - self.pad_below);
        let n_max = self.n_max.unwrap_or(stats.suggested_n_max.max(n_min));
        let p = FillingParams {
            a: self.a,
            tau: self.tau,
            n_min,
            n_max,
            intersection_mode: self.intersection_mode,
            order_seed: self.order_seed,
        };
        (p, stats)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantKind {
    /// Hard invariant; `measured` is the worst slack.
    Exact,
    Additive,
    Multiplicative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaRecord {
    pub lemma_id: String,
    pub constant_kind: ConstantKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub n_window: [i32; 2],
    pub measured: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub additive_defect_max: Option<f64>,
    pub pairs_checked: u64,
    pub seed: u64,
    /// Comparison against a stated bound, when there is one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub within_bound: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    pub witness: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub records: Vec<LemmaRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub tool_version: String,
    pub config: RunConfig,
    pub scale: ScaleStats,
    pub params: FillingParams,
    pub graph: BuildSummary,
    pub warnings: Vec<String>,
    pub suites: Vec<SuiteReport>,
    pub violations: Vec<Violation>,
    /// Wall time per phase in milliseconds; excluded from [`ComparisonReport::body`].
    pub timings: BTreeMap<String, f64>,
}

impl ComparisonReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Everything except timings, as JSON.
    pub fn body(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().expect("object").remove("timings");
        v
    }

    pub fn record(&self, lemma_id: &str) -> Option<&LemmaRecord> {
        self.suites.iter().flat_map(|s| &s.records).find(|r| r.lemma_id == lemma_id)
    }

    pub fn records(&self, lemma_id: &str) -> Vec<&LemmaRecord> {
        self.suites.iter().flat_map(|s| &s.records).filter(|r| r.lemma_id == lemma_id).collect()
    }
}

/// Shared state of one verification run.
pub struct Context<'a> {
    pub filling: &'a FillingGraph,
    pub hop: HopDistances<'a>,
    pub seed: u64,
    pub window: [i32; 2],
    violations: Vec<Violation>,
}

impl<'a> Context<'a> {
    pub fn new(filling: &'a FillingGraph, seed: u64) -> Self {
        let p = filling.params();
        Self { filling, hop: HopDistances::new(filling.graph()), seed, window: [p.n_min, p.n_max], violations: Vec::new() }
    }

    fn rec(&self, id: &str, kind: ConstantKind, measured: f64, pairs: u64) -> LemmaRecord {
        LemmaRecord {
            lemma_id: id.into(),
            constant_kind: kind,
            regime: None,
            epsilon: None,
            n_window: self.window,
            measured,
            ratio_min: None,
            ratio_max: None,
            additive_defect_max: None,
            pairs_checked: pairs,
            seed: self.seed,
            within_bound: None,
            note: None,
        }
    }

    fn ratio_rec(&self, id: &str, s: &RatioStats) -> LemmaRecord {
        let mut r = self.rec(id, ConstantKind::Multiplicative, s.constant(), s.count);
        if s.count > 0 {
            r.ratio_min = Some(s.min);
            r.ratio_max = Some(s.max);
        }
        r
    }

    /// Record an exact invariant; every failure becomes a violation.
    fn exact(&mut self, id: &str, checked: u64, fails: Vec<String>, worst: f64) -> LemmaRecord {
        let mut r = self.rec(id, ConstantKind::Exact, worst, checked);
        r.within_bound = Some(fails.is_empty());
        for w in fails.into_iter().take(20) {
            self.violations.push(Violation { check: id.into(), witness: w });
        }
        r
    }

    fn all_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.filling.len();
        (0..n).flat_map(|u| ((u + 1)..n).map(move |v| (u, v))).collect()
    }
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= FLOAT_TOL * x.abs().max(y.abs()).max(1.0)
}

pub fn filling_suite(ctx: &mut Context) -> Vec<LemmaRecord> {
    let g = ctx.filling;
    let p = *g.params();
    let n = g.len();
    let space = g.space().clone();
    let mut out = Vec::new();

    // edge rule: every edge obeys it and every admissible pair is an edge
    let mut fails = Vec::new();
    let mut checked = 0;
    for v in 0..n {
        for w in (v + 1)..n {
            let dh = (g.height(v) - g.height(w)).abs();
            let edge = g.graph().has_edge(v, w);
            let should = dh <= 1 && g.balls_intersect(v, w);
            checked += 1;
            if edge != should {
                fails.push(format!("pair ({v}, {w}) edge={edge} rule={should}"));
            }
        }
    }
    out.push(ctx.exact("edge_rule", checked, fails, 0.0));

    let connected = g.is_connected();
    let mut r = ctx.rec("connected_filling", ConstantKind::Exact, if connected { 0.0 } else { 1.0 }, n as u64);
    r.within_bound = Some(connected);
    out.push(r);
    if !connected {
        ctx.violations.push(Violation { check: "connected_filling".into(), witness: "graph is disconnected".into() });
    }

    let closures = g.closure_table();

    // height connection: intersecting balls at different heights are joined by a
    // monotone vertical path (the common point is a witness at every level)
    let mut fails = Vec::new();
    let mut checked = 0;
    if p.intersection_mode == IntersectionMode::WitnessScan {
        for v in 0..n {
            for w in (v + 1)..n {
                if g.height(v) != g.height(w) && g.balls_intersect(v, w) {
                    checked += 1;
                    let (lo, hi) = if g.height(v) < g.height(w) { (v, w) } else { (w, v) };
                    if !closures.contains(hi, lo) {
                        fails.push(format!("pair ({v}, {w})"));
                    }
                }
            }
        }
    }
    let mut r = ctx.exact("height_connection", checked, fails, 0.0);
    if p.intersection_mode != IntersectionMode::WitnessScan {
        r.note = Some("only checked in witness_scan mode".into());
    }
    out.push(r);

    // geometric series along vertical paths
    let mut fails = Vec::new();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for hi in 0..n {
        for lo in 0..n {
            if lo != hi && closures.contains(hi, lo) {
                checked += 1;
                let bound = 2.0 * p.tau * p.scale(g.height(lo)) / (1.0 - p.a);
                let d = space.d(g.center(hi), g.center(lo));
                worst = worst.max(d / bound);
                if d > bound * (1.0 + FLOAT_TOL) {
                    fails.push(format!("vertical pair ({lo}, {hi}) d={d} bound={bound}"));
                }
            }
        }
    }
    out.push(ctx.exact("geometric_series", checked, fails, worst));

    // cone adjacent: same-level neighbors share a cone point one level down
    let mut fails = Vec::new();
    let mut checked = 0;
    for (v, w) in g.graph().edges() {
        let h = g.height(v);
        if h == g.height(w) && h > p.n_min {
            checked += 1;
            match g.branch_point_with(&closures, v, w) {
                Ok(u) if g.height(u) == h - 1 => {}
                Ok(u) => fails.push(format!("pair ({v}, {w}) branch {u} at height {}", g.height(u))),
                Err(e) => fails.push(format!("pair ({v}, {w}): {e}")),
            }
        }
    }
    out.push(ctx.exact("cone_adjacent", checked, fails, 0.0));

    // branch comparison a^{h(u)} vs d(v,w) + a^{min h}
    let pairs = ctx.all_pairs();
    let (stats, fails) = pairs
        .par_iter()
        .fold(
            || (RatioStats::default(), Vec::new()),
            |(mut s, mut f), &(v, w)| {
                match g.branch_point_with(&closures, v, w) {
                    Ok(u) => {
                        let hm = g.height(v).min(g.height(w));
                        let den = space.d(g.center(v), g.center(w)) + p.scale(hm);
                        s.push(p.scale(g.height(u)) / den);
                    }
                    Err(e) => f.push(format!("pair ({v}, {w}): {e}")),
                }
                (s, f)
            },
        )
        .reduce(
            || (RatioStats::default(), Vec::new()),
            |(a, mut fa), (b, fb)| {
                fa.extend(fb);
                (a.merge(b), fa)
            },
        );
    out.push(ctx.ratio_rec("branch_comparison", &stats));
    if !fails.is_empty() {
        out.push(ctx.exact("branch_point_exists", pairs.len() as u64, fails, 0.0));
    }

    // anchored rays: validity, bounded distance vertical, starlike
    let m = space.len();
    let mut rays = Vec::with_capacity(m);
    let mut fails = Vec::new();
    for z in 0..m {
        match g.anchored_descending_ray(z, p.n_max) {
            Ok(r) => rays.push(Some(r)),
            Err(e) => {
                fails.push(format!("point {}: {e}", space.id(z)));
                rays.push(None);
            }
        }
    }
    out.push(ctx.exact("anchored_ray", m as u64, fails, 0.0));

    let mut fails = Vec::new();
    let mut checked = 0;
    for y in 0..m {
        for z in (y + 1)..m {
            let (Some(ry), Some(rz)) = (&rays[y], &rays[z]) else { continue };
            for (i, (&a, &b)) in ry.iter().zip(rz).enumerate() {
                let k = p.n_max - i as i32;
                if p.tau / 3.0 * p.scale(k) > space.d(y, z) {
                    checked += 1;
                    if a != b && !g.graph().has_edge(a, b) {
                        fails.push(format!("points ({}, {}) level {k}", space.id(y), space.id(z)));
                    }
                }
            }
        }
    }
    out.push(ctx.exact("bounded_distance_vertical", checked, fails, 0.0));

    let mut fails = Vec::new();
    for v in 0..n {
        let on = rays[g.center(v)].as_ref().is_some_and(|r| r.contains(&v));
        if !on {
            fails.push(format!("vertex {v}"));
        }
    }
    out.push(ctx.exact("starlike", n as u64, fails, 0.0));
    out
}

pub fn hyperbolicity_suite(ctx: &mut Context, delta_samples: Option<u64>, triangle_samples: usize) -> Vec<LemmaRecord> {
    let g = ctx.filling;
    let p = *g.params();
    let n = g.len();
    let hop = &ctx.hop;
    let mut out = Vec::new();

    // h is 1-Lipschitz and (x|y)_h <= min h
    let mut fails = Vec::new();
    let mut checked = 0;
    for u in 0..n {
        for v in (u + 1)..n {
            checked += 1;
            let d = hop.d(u, v);
            let (hu, hv) = (g.height(u) as f64, g.height(v) as f64);
            if (hu - hv).abs() > d {
                fails.push(format!("lipschitz pair ({u}, {v})"));
            }
            if hop.gromov_product_height(u, v) > hu.min(hv) {
                fails.push(format!("lip height pair ({u}, {v})"));
            }
        }
    }
    out.push(ctx.exact("lip_height", checked, fails, 0.0));

    let hop = &ctx.hop;
    let closures = g.closure_table();
    let space = g.space();
    let (add, mult, cnt) = ctx
        .all_pairs()
        .par_iter()
        .map(|&(v, w)| {
            let u = g.branch_point_with(&closures, v, w).ok();
            let prod = hop.gromov_product_height(v, w);
            let hm = g.height(v).min(g.height(w));
            let den = space.d(g.center(v), g.center(w)) + p.scale(hm);
            let mut s = RatioStats::default();
            s.push(p.a.powf(prod) / den);
            (u.map_or(f64::INFINITY, |u| (g.height(u) as f64 - prod).abs()), s, 1u64)
        })
        .reduce(|| (0.0, RatioStats::default(), 0), |a, b| (a.0.max(b.0), a.1.merge(b.1), a.2 + b.2));
    let mut r = ctx.rec("branch_estimate_additive", ConstantKind::Additive, add, cnt);
    r.additive_defect_max = Some(add);
    out.push(r);
    out.push(ctx.ratio_rec("branch_estimate_multiplicative", &mult));

    // (u|w)_h >= min((u|v)_h, (v|w)_h) - c'
    let hop = &ctx.hop;
    let cprime = (0..n)
        .into_par_iter()
        .map(|v| {
            let mut worst = f64::NEG_INFINITY;
            for u in 0..n {
                let uv = hop.gromov_product_height(u, v);
                for w in (u + 1)..n {
                    let m = uv.min(hop.gromov_product_height(v, w));
                    worst = worst.max(m - hop.gromov_product_height(u, w));
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    let mut r = ctx.rec("delta_inequality_filling", ConstantKind::Additive, cprime, (n * n * n / 2) as u64);
    r.additive_defect_max = Some(cprime);
    out.push(r);

    let mode = match delta_samples {
        Some(count) => DeltaMode::Sampled { seed: ctx.seed, count },
        None if n <= 250 => DeltaMode::Exact,
        None => DeltaMode::Sampled { seed: ctx.seed, count: 100_000 },
    };
    let delta = hyperbolic::delta_four_point(hop, mode);
    let mut r = ctx.rec("delta_four_point", ConstantKind::Additive, delta.delta, delta.quadruples);
    r.regime = Some(if mode == DeltaMode::Exact { "exact" } else { "sampled" }.into());
    r.note = Some(format!("witness {:?}", delta.witness));
    out.push(r);

    // triangles: equiradial diameter and tripod defect against the four-point delta
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 0x7269_616e);
    let triples: Vec<[usize; 3]> = if n.pow(3) / 6 <= triangle_samples {
        (0..n).flat_map(|x| ((x + 1)..n).flat_map(move |y| ((y + 1)..n).map(move |z| [x, y, z]))).collect()
    } else {
        (0..triangle_samples).map(|_| [rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n)]).collect()
    };
    let dl = delta.delta;
    let (chi, defect, eq_ok, tri_ok) = triples
        .par_iter()
        .map(|&[x, y, z]| {
            let t = Triangle::new(hop, x, y, z).expect("connected filling");
            let e = hyperbolic::canonical_equiradial(hop, &t);
            let df = hyperbolic::tripod_defect(hop, &t);
            (e.diameter, df, e.diameter <= 4.0 * dl + 2.0, df <= 6.0 * e.diameter + 16.0 * dl + 2.0)
        })
        .reduce(|| (0.0, 0.0, true, true), |a, b| (a.0.max(b.0), a.1.max(b.1), a.2 && b.2, a.3 && b.3));
    let mut r = ctx.rec("equiradial_diameter", ConstantKind::Additive, chi, triples.len() as u64);
    r.within_bound = Some(eq_ok);
    r.note = Some("bound 4 delta + 2 (rounding toward the triangle vertex)".into());
    out.push(r);
    let mut r = ctx.rec("tripod_defect", ConstantKind::Additive, defect, triples.len() as u64);
    r.within_bound = Some(tri_ok);
    r.note = Some("bound 6 chi + 16 delta + 2".into());
    out.push(r);
    out
}

/// Start of the Busemann ray: height 0 when the window allows at least three
/// steps below it.
pub fn busemann_start(p: &FillingParams) -> i32 {
    0.clamp((p.n_min + 3).min(p.n_max), p.n_max)
}

/// Anchor of the Busemann ray: the first point of the net order, which is a
/// center at every level.
pub fn busemann_anchor(g: &FillingGraph) -> usize {
    NetOrder::from_seed(g.params().order_seed).permutation(g.space().len())[0]
}

pub fn busemann_suite(ctx: &mut Context) -> (Vec<LemmaRecord>, Option<Vec<f64>>) {
    let g = ctx.filling;
    let p = *g.params();
    let n = g.len();
    let mut out = Vec::new();
    let anchor = busemann_anchor(g);
    let start = busemann_start(&p);
    let ray = match g.anchored_descending_ray(anchor, start) {
        Ok(r) => r,
        Err(e) => {
            out.push(ctx.exact("busemann_ray", 1, vec![e.to_string()], 0.0));
            return (out, None);
        }
    };
    let b = match hyperbolic::busemann_estimate(&ctx.hop, anchor, &ray) {
        Ok(b) => b,
        Err(e) => {
            out.push(ctx.exact("busemann_monotone", 1, vec![e.to_string()], 0.0));
            return (out, None);
        }
    };
    out.push(ctx.exact("busemann_monotone", n as u64, Vec::new(), 0.0));

    // on the ray the estimate is exactly -t
    let fails: Vec<String> = ray
        .iter()
        .enumerate()
        .filter(|&(t, &v)| b.value(v) != -(t as f64))
        .map(|(t, &v)| format!("ray vertex {v} at t={t} has value {}", b.value(v)))
        .collect();
    out.push(ctx.exact("busemann_on_ray", ray.len() as u64, fails, 0.0));

    let h0 = g.height(ray[0]) as f64;
    let defect = (0..n).map(|x| (b.value(x) - (g.height(x) as f64 - h0)).abs()).fold(0.0, f64::max);
    let stabilized = (0..n).filter(|&x| b.stabilized(x, 3)).count();
    let mut r = ctx.rec("height_busemann", ConstantKind::Additive, defect, n as u64);
    r.additive_defect_max = Some(defect);
    r.within_bound = Some(defect <= 3.0);
    r.note = Some(format!(
        "ray from height {} to {}; {stabilized}/{n} vertices stable for 3 levels",
        start, b.truncation_level
    ));
    out.push(r);

    let hop = &ctx.hop;
    let (gap, fails) = ctx
        .all_pairs()
        .par_iter()
        .map(|&(u, v)| {
            let d = hop.d(u, v);
            let pb = hyperbolic::gromov_product_busemann(b.value(u), b.value(v), d);
            let ph = hop.gromov_product_height(u, v);
            let bad = pb > b.value(u).min(b.value(v)) + FLOAT_TOL;
            ((pb - (ph - h0)).abs(), if bad { vec![format!("pair ({u}, {v})")] } else { Vec::new() })
        })
        .reduce(
            || (0.0, Vec::new()),
            |mut a, b| {
                a.1.extend(b.1);
                (a.0.max(b.0), a.1)
            },
        );
    out.push(ctx.exact("both_busemann", (n * (n - 1) / 2) as u64, fails, 0.0));
    let mut r = ctx.rec("gromov_product_busemann_vs_height", ConstantKind::Additive, gap, (n * (n - 1) / 2) as u64);
    r.additive_defect_max = Some(gap);
    r.within_bound = Some(gap <= 3.0);
    out.push(r);

    // along every anchored ray, b changes like the height
    let mut worst = 0.0f64;
    let mut checked = 0;
    for z in 0..g.space().len() {
        if let Ok(r) = g.anchored_descending_ray(z, p.n_max) {
            for i in 0..r.len() {
                for j in (i + 1)..r.len() {
                    checked += 1;
                    let db = b.value(r[i]) - b.value(r[j]);
                    worst = worst.max((db - (j - i) as f64).abs());
                }
            }
        }
    }
    let mut r = ctx.rec("geodesic_busemann", ConstantKind::Additive, worst, checked);
    r.additive_defect_max = Some(worst);
    r.within_bound = Some(worst <= 6.0);
    out.push(r);

    // adaptedness of h and b along BFS geodesics
    let hop = &ctx.hop;
    let (dh, db, cnt) = ctx
        .all_pairs()
        .par_iter()
        .map(|&(u, v)| {
            let path = hop.geodesic(u, v).expect("connected filling");
            let dh = hyperbolic::adapted_defect(&path, |x| g.height(x) as f64);
            let db = hyperbolic::adapted_defect(&path, |x| b.value(x));
            (dh, db, 1u64)
        })
        .reduce(|| (0.0, 0.0, 0), |a, b| (a.0.max(b.0), a.1.max(b.1), a.2 + b.2));
    let mut r = ctx.rec("adapted_defect", ConstantKind::Additive, dh, cnt);
    r.regime = Some("height".into());
    r.additive_defect_max = Some(dh);
    out.push(r);
    let mut r = ctx.rec("adapted_defect", ConstantKind::Additive, db, cnt);
    r.regime = Some("busemann".into());
    r.additive_defect_max = Some(db);
    out.push(r);
    (out, Some(b.values.clone()))
}

/// Output of the uniformization suite at one `eps`.
pub struct UniformOutcome {
    pub records: Vec<LemmaRecord>,
    pub pairs: Vec<PairRecord>,
    pub warning: Option<String>,
}

pub fn uniformization_suite(ctx: &mut Context, eps: f64, busemann: Option<&[f64]>) -> UniformOutcome {
    let g = ctx.filling;
    let p = *g.params();
    let n = g.len();
    let w = EpsilonWeighting::new(eps, p.a);
    let warning = w
        .out_of_range()
        .then(|| format!("epsilon {eps} lies outside (0, -ln a] = (0, {}]", -p.a.ln()));
    let wd = WeightedDistances::new(g.graph(), w);
    let mut out = Vec::new();
    let tag = |mut r: LemmaRecord| {
        r.epsilon = Some(eps);
        r
    };

    // d_eps is a metric
    let fails: Vec<String> = (0..n)
        .into_par_iter()
        .flat_map_iter(|u| {
            let wd = &wd;
            let mut f = Vec::new();
            for v in 0..n {
                let duv = wd.d(u, v);
                if u != v && !(duv > 0.0 && duv.is_finite()) {
                    f.push(format!("positivity ({u}, {v})"));
                }
                if duv != wd.d(v, u) && !close(duv, wd.d(v, u)) {
                    f.push(format!("symmetry ({u}, {v})"));
                }
                for x in 0..n {
                    if wd.d(u, x) > (duv + wd.d(v, x)) * (1.0 + FLOAT_TOL) {
                        f.push(format!("triangle ({u}, {v}, {x})"));
                    }
                }
            }
            f
        })
        .collect();
    let r = ctx.exact("d_eps_metric", (n * n * n) as u64, fails, 0.0);
    out.push(tag(r));

    let hop = &ctx.hop;
    let (reg, pairs) = uniform::verify_distance_regimes(hop, &wd, busemann);
    let harnack: Vec<String> = reg.harnack_edge_failures.iter().map(|e| format!("edge {e:?}")).collect();
    let r = ctx.exact("harnack_edge", g.graph().edge_count() as u64, harnack, 0.0);
    out.push(tag(r));
    let arc: Vec<String> = reg.arc_harnack_upper_failures.iter().map(|e| format!("pair {e:?}")).collect();
    let r = ctx.exact("arc_harnack_upper", reg.pairs_checked, arc, 0.0);
    out.push(tag(r));
    let mut r = ctx.ratio_rec("arc_harnack_lower", &reg.arc_harnack_lower);
    r.measured = reg.arc_harnack_lower.max.max(1.0);
    out.push(tag(r));
    let mut r = ctx.ratio_rec("large_distance", &reg.large);
    r.regime = Some("hops>=2".into());
    out.push(tag(r));
    let mut r = ctx.ratio_rec("nonvertex", &reg.small);
    r.regime = Some("hops<=2".into());
    out.push(tag(r));
    if let Some(both) = &reg.busemann_both {
        let r = ctx.ratio_rec("estimate_both", both);
        out.push(tag(r));
    }

    // tails telescope and match the ray sums
    let mut fails = Vec::new();
    let mut checked = 0;
    for a in p.n_min..=p.n_max {
        for b in a..=p.n_max {
            for c in b..=p.n_max {
                checked += 1;
                let lhs = w.truncated_tail(a, b) + w.truncated_tail(b, c);
                if !close(lhs, w.truncated_tail(a, c)) {
                    fails.push(format!("levels ({a}, {b}, {c})"));
                }
            }
        }
    }
    for z in 0..g.space().len() {
        if let Ok(ray) = g.anchored_descending_ray(z, p.n_max) {
            checked += 1;
            let s = w.path_length(g.graph(), &ray);
            if !close(s, w.truncated_tail(p.n_min, p.n_max)) {
                fails.push(format!("ray of point {z}"));
            }
        }
    }
    let r = ctx.exact("tail_telescoping", checked, fails, 0.0);
    out.push(tag(r));

    let all = ctx.all_pairs();
    let m_adm = uniform::measure_admissibility(&ctx.hop, &wd, &all);
    let r = ctx.rec("filling_admissible", ConstantKind::Multiplicative, m_adm, all.len() as u64);
    out.push(tag(r));

    // distance to the boundary: proxy against empirical
    let emp = uniform::empirical_boundary_distances(g, &wd);
    let mut ratio = RatioStats::default();
    let mut fails = Vec::new();
    for (x, &e) in emp.iter().enumerate() {
        let proxy = uniform::dist_to_boundary(g, &wd, x, BoundaryMode::Proxy);
        ratio.push(e / proxy);
        // every vertex lies on a ray, so climbing it bounds the empirical value
        if e > proxy * (1.0 + FLOAT_TOL) {
            fails.push(format!("vertex {x} empirical {e} > tail {proxy}"));
        }
    }
    let r = ctx.exact("boundary_distance_ray_bound", n as u64, fails, 0.0);
    out.push(tag(r));
    let r = ctx.ratio_rec("compute_distance", &ratio);
    out.push(tag(r));

    // uniform curves over BFS geodesics
    let hop = &ctx.hop;
    let (len_r, cig_r) = all
        .par_iter()
        .map(|&(u, v)| {
            let path = hop.geodesic(u, v).expect("connected filling");
            let c = uniform::check_uniform_curve(g.graph(), &wd, &path.vertices, &emp);
            (c.length_ratio, c.cigar_ratio)
        })
        .reduce(|| (1.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    let mut r = ctx.rec("uniform_curve", ConstantKind::Multiplicative, len_r.max(cig_r), all.len() as u64);
    r.ratio_max = Some(len_r);
    r.note = Some(format!("length condition {len_r:.6}, cigar condition {cig_r:.6}"));
    out.push(tag(r));

    UniformOutcome { records: out, pairs, warning }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryStats {
    pub bilip: RatioStats,
    /// Worst `width / center` over distinct pairs.
    pub width_to_center_max: f64,
    pub pairs: u64,
}

pub fn boundary_stats(g: &FillingGraph, wd: &WeightedDistances) -> Result<BoundaryStats, FillingError> {
    let m = g.space().len();
    let mut bilip = RatioStats::default();
    let mut width = 0.0f64;
    let mut pairs = 0;
    for z1 in 0..m {
        for z2 in (z1 + 1)..m {
            let iv = uniform::boundary_distance(g, wd, z1, z2)?;
            bilip.push(iv.center / g.space().d(z1, z2));
            width = width.max(iv.width() / iv.center);
            pairs += 1;
        }
    }
    Ok(BoundaryStats { bilip, width_to_center_max: width, pairs })
}

pub fn boundary_suite(ctx: &mut Context) -> Vec<LemmaRecord> {
    let g = ctx.filling;
    let eps = -g.params().a.ln();
    let wd = WeightedDistances::new(g.graph(), EpsilonWeighting::new(eps, g.params().a));
    let mut out = Vec::new();
    match boundary_stats(g, &wd) {
        Ok(s) => {
            let mut r = ctx.ratio_rec("bilip_boundary", &s.bilip);
            r.epsilon = Some(eps);
            out.push(r);
            let mut r = ctx.rec("boundary_interval_width", ConstantKind::Multiplicative, s.width_to_center_max, s.pairs);
            r.epsilon = Some(eps);
            r.within_bound = Some(s.width_to_center_max < 0.05);
            r.note = Some("largest width / center over distinct pairs; target < 0.05".into());
            out.push(r);
        }
        Err(e) => out.push(ctx.exact("bilip_boundary", 1, vec![e.to_string()], 0.0)),
    }
    let mut fails = Vec::new();
    for z in 0..g.space().len() {
        match uniform::boundary_distance(g, &wd, z, z) {
            Ok(iv) if iv.center == 0.0 && iv.lower == 0.0 => {}
            Ok(iv) => fails.push(format!("point {z}: {iv:?}")),
            Err(e) => fails.push(format!("point {z}: {e}")),
        }
    }
    out.push(ctx.exact("boundary_self_distance", g.space().len() as u64, fails, 0.0));
    out
}

pub fn halfplane_records(ctx: &Context) -> Vec<LemmaRecord> {
    let r = halfplane::run_oracle();
    let mut a = ctx.rec("halfplane_busemann", ConstantKind::Additive, r.busemann_residual_max, r.grid_points as u64);
    a.additive_defect_max = Some(r.busemann_residual_max);
    a.within_bound = Some(r.busemann_residual_max <= r.busemann_tolerance);
    a.note = Some(format!("residual at t=5 is {:.3e} (informational)", r.busemann_residual_t5));
    let mut b = ctx.rec("halfplane_segment_length", ConstantKind::Multiplicative, r.segment_rel_error_max, r.segments_checked as u64);
    b.within_bound = Some(r.segment_rel_error_max <= r.segment_tolerance && r.vertical_error <= 1e-8);
    vec![a, b]
}

/// All artifacts of one verification run.
pub struct VerifyOutput {
    pub report: ComparisonReport,
    pub filling: FillingGraph,
    pub pairs: Vec<(f64, PairRecord)>,
}

/// Build the filling of `space` and run the configured suites.
pub fn run_verify(config: &RunConfig, space: FiniteMetricSpace) -> Result<VerifyOutput, VerifyError> {
    config.validate()?;
    let mut timings = BTreeMap::new();
    let t = Instant::now();
    let (params, scale) = config.filling_params(&space);
    let mut warnings: Vec<String> = space.warnings().iter().map(|v| format!("metric: {v}")).collect();
    if scale.degenerate {
        warnings.push("one-point space: the filling is a single vertical line".into());
    }
    if scale.clamped {
        warnings.push(format!("window clamped to {} levels", config.max_levels));
    }
    let filling = FillingGraph::build(Arc::new(space), params)?;
    timings.insert("build".into(), t.elapsed().as_secs_f64() * 1e3);

    let t = Instant::now();
    let mut ctx = Context::new(&filling, config.seed);
    timings.insert("hop_distances".into(), t.elapsed().as_secs_f64() * 1e3);

    let mut suites = Vec::new();
    let mut pairs = Vec::new();
    let mut busemann_values = None;
    let mut order = config.suites.clone();
    order.sort();
    for suite in order {
        let t = Instant::now();
        let records = match suite {
            Suite::Filling => filling_suite(&mut ctx),
            Suite::Hyperbolicity => hyperbolicity_suite(&mut ctx, config.delta_samples, config.triangle_samples),
            Suite::Busemann => {
                let (r, b) = busemann_suite(&mut ctx);
                busemann_values = b;
                r
            }
            Suite::Uniformization => {
                let mut recs = Vec::new();
                for eps in config.epsilon_list() {
                    let o = uniformization_suite(&mut ctx, eps, busemann_values.as_deref());
                    recs.extend(o.records);
                    pairs.extend(o.pairs.into_iter().map(|p| (eps, p)));
                    warnings.extend(o.warning);
                }
                recs
            }
            Suite::Boundary => boundary_suite(&mut ctx),
            Suite::Halfplane => halfplane_records(&ctx),
        };
        timings.insert(format!("{suite:?}").to_lowercase(), t.elapsed().as_secs_f64() * 1e3);
        suites.push(SuiteReport { suite, records });
    }
    let violations = std::mem::take(&mut ctx.violations);
    drop(ctx);
    let report = ComparisonReport {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config: config.clone(),
        scale,
        params,
        graph: filling.summary(),
        warnings,
        suites,
        violations,
        timings,
    };
    Ok(VerifyOutput { report, filling, pairs })
}

/// CSV dump of `(pair, d, d_eps, predicted)` rows.
pub fn pairs_csv(pairs: &[(f64, PairRecord)]) -> Result<String, VerifyError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epsilon", "u", "v", "d", "d_eps", "predicted", "regime"]).map_err(csv_err)?;
    for (eps, p) in pairs {
        let regime = match p.regime {
            uniform::Regime::Large => "large",
            uniform::Regime::Small => "small",
        };
        w.write_record([
            eps.to_string(),
            p.u.to_string(),
            p.v.to_string(),
            p.hops.to_string(),
            p.d_eps.to_string(),
            p.predicted.to_string(),
            regime.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| VerifyError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn csv_err(e: csv::Error) -> VerifyError {
    VerifyError::Io(std::io::Error::other(e))
}
