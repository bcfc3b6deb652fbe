//! Finite metric spaces: ingestion, validation, greedy nets and scale statistics.
//!
//! Distances are stored as a dense row-major table indexed by point position.
//! Point ids are opaque strings that only matter for I/O and reports.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default ingestion tolerance, relative to the diameter.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("empty input")]
    Empty,
    #[error("snowflake exponent must lie in (0, 1], got {0}")]
    BadTheta(f64),
    #[error("scale factor must be positive, got {0}")]
    BadScale(f64),
    #[error("metric violation: {}", .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Invalid(Vec<Violation>),
    #[error("unknown point id {0}")]
    UnknownPoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NonFinite,
    Diagonal,
    Asymmetry,
    Coincident,
    Negative,
    Triangle,
}

/// One failed axiom. `points` names the offending pair or triple; for a
/// triangle violation `(p, q, r)` means `d(p,r) > d(p,q) + d(q,r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub points: Vec<String>,
    pub slack: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at ({}) by {:.3e}", self.kind, self.points.join(", "), self.slack)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Violations beyond tolerance.
    pub violations: Vec<Violation>,
    /// Violations within tolerance.
    pub warnings: Vec<Violation>,
    /// Largest amount by which any axiom failed (0 when none did).
    pub worst_slack: f64,
    pub tolerance: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the metric axioms on a raw square table.
///
/// `tol` is relative to the largest entry.
pub fn validate_matrix(ids: &[String], rows: &[Vec<f64>], tol: f64) -> ValidationReport {
    let n = ids.len();
    let scale = rows
        .iter()
        .flatten()
        .filter(|x| x.is_finite())
        .fold(0.0f64, |m, &x| m.max(x.abs()));
    let tol_abs = if scale > 0.0 { tol * scale } else { tol };
    let mut rep = ValidationReport { tolerance: tol_abs, ..Default::default() };
    let mut push = |kind, pts: &[usize], slack: f64, hard: bool| {
        let v = Violation { kind, points: pts.iter().map(|&i| ids[i].clone()).collect(), slack };
        rep.worst_slack = rep.worst_slack.max(slack);
        if hard {
            rep.violations.push(v);
        } else {
            rep.warnings.push(v);
        }
    };
    let mut finite = true;
    for i in 0..n {
        for j in 0..n {
            if !rows[i][j].is_finite() {
                push(ViolationKind::NonFinite, &[i, j], f64::INFINITY, true);
                finite = false;
            }
        }
    }
    if !finite {
        return rep;
    }
    for i in 0..n {
        let d = rows[i][i].abs();
        if d > 0.0 {
            push(ViolationKind::Diagonal, &[i], d, d > tol_abs);
        }
        for j in 0..n {
            if i == j {
                continue;
            }
            if rows[i][j] < 0.0 {
                push(ViolationKind::Negative, &[i, j], -rows[i][j], true);
            }
            if i < j {
                let gap = (rows[i][j] - rows[j][i]).abs();
                if gap > 0.0 {
                    push(ViolationKind::Asymmetry, &[i, j], gap, gap > tol_abs);
                }
                if rows[i][j] <= 0.0 && rows[j][i] <= 0.0 {
                    push(ViolationKind::Coincident, &[i, j], 0.0, true);
                }
            }
        }
    }
    for p in 0..n {
        for q in 0..n {
            if q == p {
                continue;
            }
            for r in (p + 1)..n {
                if r == q {
                    continue;
                }
                let excess = rows[p][r] - rows[p][q] - rows[q][r];
                if excess > 0.0 {
                    push(ViolationKind::Triangle, &[p, q, r], excess, excess > tol_abs);
                }
            }
        }
    }
    rep
}

/// How point-cloud coordinates become distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricKind {
    #[default]
    Euclidean,
    Max,
    /// Euclidean distance raised to the power `theta`.
    Snowflake { theta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    /// Square CSV table with a header row of point ids.
    #[default]
    Csv,
    /// JSON array of `{id, coords}`.
    PointCloud,
}

/// Where a metric comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub path: PathBuf,
    pub format: InputFormat,
    /// For CSV input only `Snowflake` has an effect (applied entrywise).
    pub metric: MetricKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMetricSpace {
    ids: Vec<String>,
    dist: Vec<f64>,
    coords: Option<Vec<Vec<f64>>>,
    warnings: Vec<Violation>,
}

impl FiniteMetricSpace {
    /// Validate and wrap a distance table. Entries that are asymmetric within
    /// tolerance are averaged and kept as warnings.
    pub fn from_matrix(ids: Vec<String>, rows: Vec<Vec<f64>>, tol: f64) -> Result<Self, MetricError> {
        let n = ids.len();
        if n == 0 {
            return Err(MetricError::Empty);
        }
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(MetricError::Parse(format!("expected a {n}x{n} table")));
        }
        let rep = validate_matrix(&ids, &rows, tol);
        if !rep.is_valid() {
            return Err(MetricError::Invalid(rep.violations));
        }
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = 0.5 * (rows[i][j] + rows[j][i]);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Ok(Self { ids, dist, coords: None, warnings: rep.warnings })
    }

    pub fn from_points(ids: Vec<String>, coords: Vec<Vec<f64>>, kind: MetricKind) -> Result<Self, MetricError> {
        if ids.len() != coords.len() {
            return Err(MetricError::Parse("ids and coordinates differ in length".into()));
        }
        if let Some(c) = coords.first() {
            if coords.iter().any(|x| x.len() != c.len()) {
                return Err(MetricError::Parse("coordinates of mixed dimension".into()));
            }
        }
        let n = ids.len();
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let (p, q) = (&coords[i], &coords[j]);
                rows[i][j] = match kind {
                    MetricKind::Max => p.iter().zip(q).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())),
                    _ => p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
                };
            }
        }
        if let MetricKind::Snowflake { theta } = kind {
            snowflake_rows(&mut rows, theta)?;
        }
        let mut m = Self::from_matrix(ids, rows, DEFAULT_TOL)?;
        m.coords = Some(coords);
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    /// Within-tolerance irregularities found at ingestion.
    pub fn warnings(&self) -> &[Violation] {
        &self.warnings
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.ids.len() + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n).map(|i| self.dist[i * n..(i + 1) * n].to_vec()).collect()
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().fold(0.0, |m, &x| m.max(x))
    }

    pub fn min_positive_distance(&self) -> Option<f64> {
        self.dist.iter().filter(|&&x| x > 0.0).fold(None, |m: Option<f64>, &x| Some(m.map_or(x, |m| m.min(x))))
    }

    pub fn validate(&self) -> ValidationReport {
        validate_matrix(&self.ids, &self.rows(), DEFAULT_TOL)
    }

    /// Multiply every distance by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self, MetricError> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(MetricError::BadScale(s));
        }
        let mut out = self.clone();
        out.dist.iter_mut().for_each(|x| *x *= s);
        Ok(out)
    }

    /// Apply `d -> d^theta` entrywise and revalidate.
    pub fn snowflake(&self, theta: f64) -> Result<Self, MetricError> {
        let mut rows = self.rows();
        snowflake_rows(&mut rows, theta)?;
        let mut m = Self::from_matrix(self.ids.clone(), rows, DEFAULT_TOL)?;
        m.coords = self.coords.clone();
        Ok(m)
    }

    /// Greedy maximal `r`-separated net: walk `order` and keep a point when it
    /// is at distance `>= r` from everything kept so far.
    pub fn maximal_separated_net(&self, r: f64, order: &[usize]) -> Vec<usize> {
        let mut net: Vec<usize> = Vec::new();
        for &p in order {
            if net.iter().all(|&s| self.d(p, s) >= r) {
                net.push(p);
            }
        }
        net
    }

    pub fn scale_stats(&self, a: f64, max_levels: usize) -> ScaleStats {
        scale_stats(self, a, max_levels)
    }
}

fn snowflake_rows(rows: &mut [Vec<f64>], theta: f64) -> Result<(), MetricError> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(MetricError::BadTheta(theta));
    }
    for x in rows.iter_mut().flatten() {
        if *x > 0.0 {
            *x = x.powf(theta);
        }
    }
    Ok(())
}

/// Point ordering used by the greedy nets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NetOrder {
    #[default]
    Input,
    Shuffled(u64),
}

impl NetOrder {
    pub fn from_seed(seed: Option<u64>) -> Self {
        seed.map_or(NetOrder::Input, NetOrder::Shuffled)
    }

    pub fn permutation(self, n: usize) -> Vec<usize> {
        let mut v: Vec<usize> = (0..n).collect();
        if let NetOrder::Shuffled(seed) = self {
            v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleStats {
    pub diameter: f64,
    pub min_positive_distance: Option<f64>,
    pub suggested_n_min: i32,
    pub suggested_n_max: i32,
    /// One-point space: the filling is a single vertical line.
    pub degenerate: bool,
    /// The window was cut to the configured level budget.
    pub clamped: bool,
}

/// Largest `n` with `a^n > diameter` and smallest `n` with
/// `a^n < min_positive_distance`.
pub fn scale_stats(m: &FiniteMetricSpace, a: f64, max_levels: usize) -> ScaleStats {
    assert!(a > 0.0 && a < 1.0, "a must lie in (0,1)");
    let diameter = m.diameter();
    let Some(mind) = m.min_positive_distance() else {
        return ScaleStats {
            diameter,
            min_positive_distance: None,
            suggested_n_min: 0,
            suggested_n_max: 0,
            degenerate: true,
            clamped: false,
        };
    };
    let la = a.ln();
    let mut lo = (diameter.ln() / la).floor() as i32;
    while a.powi(lo) <= diameter {
        lo -= 1;
    }
    while a.powi(lo + 1) > diameter {
        lo += 1;
    }
    let mut hi = (mind.ln() / la).ceil() as i32;
    while a.powi(hi) >= mind {
        hi += 1;
    }
    while a.powi(hi - 1) < mind {
        hi -= 1;
    }
    let mut clamped = false;
    let budget = max_levels.max(1) as i32;
    if hi - lo + 1 > budget {
        hi = lo + budget - 1;
        clamped = true;
    }
    ScaleStats {
        diameter,
        min_positive_distance: Some(mind),
        suggested_n_min: lo,
        suggested_n_max: hi,
        degenerate: false,
        clamped,
    }
}

/// Parse a CSV distance table. The header row holds point ids; an empty first
/// header cell, or rows one field longer than the header, mean each row starts
/// with its own label.
pub fn parse_csv(text: &str, tol: f64) -> Result<FiniteMetricSpace, MetricError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| MetricError::Parse(e.to_string()))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        records.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
    }
    let (header, body) = records.split_first().ok_or(MetricError::Empty)?;
    let mut ids = header.clone();
    let labeled_header = ids.first().is_some_and(|s| s.is_empty());
    if labeled_header {
        ids.remove(0);
    }
    let n = ids.len();
    if n == 0 {
        return Err(MetricError::Empty);
    }
    if body.len() != n {
        return Err(MetricError::Parse(format!("{} ids but {} rows", n, body.len())));
    }
    let mut rows = Vec::with_capacity(n);
    for (i, rec) in body.iter().enumerate() {
        let fields: &[String] = if rec.len() == n + 1 {
            if rec[0] != ids[i] {
                return Err(MetricError::Parse(format!("row {} labeled {:?}, expected {:?}", i, rec[0], ids[i])));
            }
            &rec[1..]
        } else if rec.len() == n {
            rec
        } else {
            return Err(MetricError::Parse(format!("row {} has {} fields, expected {}", i, rec.len(), n)));
        };
        let row = fields
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| MetricError::Parse(format!("row {i}: {f:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    FiniteMetricSpace::from_matrix(ids, rows, tol)
}

#[derive(Debug, Deserialize)]
struct CloudPoint {
    id: serde_json::Value,
    coords: Vec<f64>,
}

pub fn parse_point_cloud(text: &str, kind: MetricKind) -> Result<FiniteMetricSpace, MetricError> {
    let pts: Vec<CloudPoint> = serde_json::from_str(text).map_err(|e| MetricError::Parse(e.to_string()))?;
    if pts.is_empty() {
        return Err(MetricError::Empty);
    }
    let ids = pts
        .iter()
        .map(|p| match &p.id {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        })
        .collect();
    FiniteMetricSpace::from_points(ids, pts.into_iter().map(|p| p.coords).collect(), kind)
}

pub fn load_metric(source: &Source) -> Result<FiniteMetricSpace, MetricError> {
    load_from_path(&source.path, source.format, source.metric)
}

pub fn load_from_path(path: &Path, format: InputFormat, metric: MetricKind) -> Result<FiniteMetricSpace, MetricError> {
    let text = std::fs::read_to_string(path)?;
    match format {
        InputFormat::Csv => {
            let m = parse_csv(&text, DEFAULT_TOL)?;
            match metric {
                MetricKind::Snowflake { theta } => m.snowflake(theta),
                _ => Ok(m),
            }
        }
        InputFormat::PointCloud => parse_point_cloud(&text, metric),
    }
}

/// Render a space as a CSV table with a header row of ids.
pub fn to_csv(m: &FiniteMetricSpace) -> String {
    let mut out = m.ids().join(",");
    out.push('\n');
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// `n` seeded uniform points in the unit square.
pub fn random_cloud(n: usize, seed: u64) -> FiniteMetricSpace {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()]).collect();
    let ids = (0..n).map(|i| format!("p{i}")).collect();
    FiniteMetricSpace::from_points(ids, coords, MetricKind::Euclidean).expect("random cloud is a metric")
}

/// Points `0, 1, ..., n-1` on the real line.
pub fn line_points(n: usize) -> FiniteMetricSpace {
    let ids = (0..n).map(|i| i.to_string()).collect();
    let coords = (0..n).map(|i| vec![i as f64]).collect();
    FiniteMetricSpace::from_points(ids, coords, MetricKind::Euclidean).expect("line is a metric")
}
