//! Analytic checks in the upper half-plane model of the hyperbolic plane.
//!
//! The vertical ray `t -> (0, e^t)` has Busemann function `-ln y`, and the
//! density `e^{-b} = y` turns hyperbolic length into Euclidean length.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HalfPlaneError {
    #[error("point ({0}, {1}) is not in the upper half-plane")]
    NotInHalfPlane(f64, f64),
    #[error("a polyline needs at least 2 points")]
    TooFewPoints,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlanePoint {
    pub x: f64,
    pub y: f64,
}

impl HalfPlanePoint {
    pub fn new(x: f64, y: f64) -> Result<Self, HalfPlaneError> {
        if y > 0.0 && x.is_finite() && y.is_finite() {
            Ok(Self { x, y })
        } else {
            Err(HalfPlaneError::NotInHalfPlane(x, y))
        }
    }
}

/// `arccosh(1 + |p-q|^2 / (2 p_y q_y))`, evaluated as `2 asinh(|p-q| / (2 sqrt(p_y q_y)))`
/// to keep precision for nearby points.
pub fn hyp_distance(p: HalfPlanePoint, q: HalfPlanePoint) -> f64 {
    let e = (p.x - q.x).hypot(p.y - q.y);
    2.0 * (e / (2.0 * (p.y * q.y).sqrt())).asinh()
}

/// `d((0, e^t), p) - t`.
pub fn busemann_numeric(p: HalfPlanePoint, t: f64) -> f64 {
    hyp_distance(HalfPlanePoint { x: 0.0, y: t.exp() }, p) - t
}

/// Closed form of the limit of [`busemann_numeric`].
pub fn busemann_exact(p: HalfPlanePoint) -> f64 {
    -p.y.ln()
}

/// Hyperbolic geodesic from `p` to `q`, parametrized by hyperbolic arclength.
enum Arc {
    Vertical { x: f64, y0: f64, sign: f64 },
    Circle { c: f64, r: f64, u0: f64, sign: f64 },
}

impl Arc {
    fn new(p: HalfPlanePoint, q: HalfPlanePoint) -> Self {
        let dx = q.x - p.x;
        if dx.abs() <= 1e-14 * (p.y + q.y) {
            return Arc::Vertical { x: p.x, y0: p.y, sign: if q.y >= p.y { 1.0 } else { -1.0 } };
        }
        // circle centered on the real axis through p and q
        let c = (q.x * q.x + q.y * q.y - p.x * p.x - p.y * p.y) / (2.0 * dx);
        let r = (p.x - c).hypot(p.y);
        let th = |z: HalfPlanePoint| (z.y).atan2(z.x - c);
        // along the circle, hyperbolic arclength is ln tan(theta/2)
        let u = |t: f64| (t / 2.0).tan().ln();
        let (u0, u1) = (u(th(p)), u(th(q)));
        Arc::Circle { c, r, u0, sign: if u1 >= u0 { 1.0 } else { -1.0 } }
    }

    fn y_at(&self, s: f64) -> f64 {
        match *self {
            Arc::Vertical { y0, sign, .. } => y0 * (sign * s).exp(),
            Arc::Circle { r, u0, sign, .. } => {
                let theta = 2.0 * (u0 + sign * s).exp().atan();
                r * theta.sin()
            }
        }
    }

    #[allow(dead_code)]
    fn x_at(&self, s: f64) -> f64 {
        match *self {
            Arc::Vertical { x, .. } => x,
            Arc::Circle { c, r, u0, sign } => c + r * (2.0 * (u0 + sign * s).exp().atan()).cos(),
        }
    }
}

/// Composite midpoint rule for `int_0^L y(s) ds` along one geodesic segment,
/// doubling the panel count until two successive values agree to `1e-8`.
fn segment_length(p: HalfPlanePoint, q: HalfPlanePoint) -> f64 {
    let len = hyp_distance(p, q);
    if len == 0.0 {
        return 0.0;
    }
    let arc = Arc::new(p, q);
    let rule = |m: usize| {
        let h = len / m as f64;
        (0..m).map(|i| arc.y_at((i as f64 + 0.5) * h)).sum::<f64>() * h
    };
    let mut m = 4;
    let mut prev = rule(m);
    loop {
        m *= 2;
        let cur = rule(m);
        if (cur - prev).abs() < 1e-8 || m >= 1 << 22 {
            return cur;
        }
        prev = cur;
    }
}

/// Length of a polyline of hyperbolic geodesic segments under the density `y`.
pub fn uniformized_polyline_length(points: &[HalfPlanePoint]) -> Result<f64, HalfPlaneError> {
    if points.len() < 2 {
        return Err(HalfPlaneError::TooFewPoints);
    }
    Ok(points.windows(2).map(|w| segment_length(w[0], w[1])).sum())
}

/// `2^k + 1` evenly spaced points on the Euclidean segment `p q`.
pub fn refine_segment(p: HalfPlanePoint, q: HalfPlanePoint, k: u32) -> Vec<HalfPlanePoint> {
    let m = 1usize << k;
    (0..=m)
        .map(|i| {
            let t = i as f64 / m as f64;
            HalfPlanePoint { x: p.x + t * (q.x - p.x), y: p.y + t * (q.y - p.y) }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// Worst `|busemann_numeric(p, 30) + ln p_y|` over the grid.
    pub busemann_residual_max: f64,
    pub busemann_tolerance: f64,
    pub grid_points: usize,
    /// Same residual at `t = 5`; informational only.
    pub busemann_residual_t5: f64,
    /// Worst relative error of refined straight segments against Euclidean length.
    pub segment_rel_error_max: f64,
    pub segment_tolerance: f64,
    pub segments_checked: usize,
    /// `|length((0,1)-(0,2)) - 1|`.
    pub vertical_error: f64,
    pub passed: bool,
}

/// Grid of `p_x` in `[-10, 10]` and `p_y` in `[1e-3, 1e3]` (log spaced).
pub fn oracle_grid() -> Vec<HalfPlanePoint> {
    let mut g = Vec::new();
    for i in 0..=20 {
        let x = -10.0 + i as f64;
        for j in 0..=24 {
            let y = 10f64.powf(-3.0 + 0.25 * j as f64);
            g.push(HalfPlanePoint { x, y });
        }
    }
    g
}

pub fn run_oracle() -> OracleReport {
    let grid = oracle_grid();
    let resid = |t: f64| grid.iter().map(|&p| (busemann_numeric(p, t) - busemann_exact(p)).abs()).fold(0.0, f64::max);
    let segments = [
        ((0.0, 1.0), (1.0, 1.0)),
        ((0.0, 1.0), (0.0, 2.0)),
        ((-2.0, 0.5), (3.0, 4.0)),
        ((1.0, 0.1), (1.5, 0.2)),
        ((-5.0, 2.0), (5.0, 2.0)),
        ((0.0, 3.0), (0.3, 0.05)),
    ];
    let mut seg_err = 0.0f64;
    for &((px, py), (qx, qy)) in &segments {
        let (p, q) = (HalfPlanePoint { x: px, y: py }, HalfPlanePoint { x: qx, y: qy });
        let e = (px - qx).hypot(py - qy);
        let l = uniformized_polyline_length(&refine_segment(p, q, 10)).expect("two points");
        seg_err = seg_err.max((l - e).abs() / e);
    }
    let v = uniformized_polyline_length(&[HalfPlanePoint { x: 0.0, y: 1.0 }, HalfPlanePoint { x: 0.0, y: 2.0 }])
        .expect("two points");
    let b = resid(30.0);
    let mut r = OracleReport {
        busemann_residual_max: b,
        busemann_tolerance: 1e-6,
        grid_points: grid.len(),
        busemann_residual_t5: resid(5.0),
        segment_rel_error_max: seg_err,
        segment_tolerance: 1e-4,
        segments_checked: segments.len(),
        vertical_error: (v - 1.0).abs(),
        passed: false,
    };
    r.passed = b <= r.busemann_tolerance && seg_err <= r.segment_tolerance && r.vertical_error <= 1e-8;
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64, y: f64) -> HalfPlanePoint {
        HalfPlanePoint::new(x, y).unwrap()
    }

    #[test]
    fn distances() {
        assert_eq!(hyp_distance(pt(1.0, 2.0), pt(1.0, 2.0)), 0.0);
        assert!((hyp_distance(pt(0.0, 1.0), pt(0.0, std::f64::consts::E)) - 1.0).abs() < 1e-15);
        let (p, q) = (pt(0.3, 0.7), pt(-2.0, 5.0));
        let direct = (1.0 + ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)) / (2.0 * p.y * q.y)).acosh();
        assert!((hyp_distance(p, q) - direct).abs() < 1e-13);
        assert!(HalfPlanePoint::new(0.0, 0.0).is_err());
    }

    #[test]
    fn busemann_examples() {
        assert!(busemann_numeric(pt(0.0, 1.0), 7.0).abs() < 1e-12);
        assert!((busemann_numeric(pt(0.0, (-1f64).exp()), 30.0) - 1.0).abs() < 1e-6);
        assert!((busemann_numeric(pt(3.0, 2.0), 30.0) + 2f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn arc_parametrization_hits_endpoint() {
        let (p, q) = (pt(-1.0, 0.5), pt(2.0, 3.0));
        let a = Arc::new(p, q);
        let l = hyp_distance(p, q);
        assert!((a.x_at(l) - q.x).abs() < 1e-9 && (a.y_at(l) - q.y).abs() < 1e-9);
        // closed form: the Euclidean arc length r * dtheta
        if let Arc::Circle { c, r, .. } = a {
            let th = |z: HalfPlanePoint| z.y.atan2(z.x - c);
            let exact = r * (th(p) - th(q)).abs();
            assert!((segment_length(p, q) - exact).abs() < 1e-7);
        } else {
            panic!("expected a circular arc");
        }
    }

    #[test]
    fn vertical_segment_exact() {
        let l = uniformized_polyline_length(&[pt(0.0, 1.0), pt(0.0, 2.0)]).unwrap();
        assert!((l - 1.0).abs() < 1e-8, "{l}");
        assert_eq!(uniformized_polyline_length(&[pt(0.0, 1.0)]), Err(HalfPlaneError::TooFewPoints));
    }

    #[test]
    fn horizontal_refinement_converges_monotonically() {
        let mut prev = f64::INFINITY;
        for k in 0..8 {
            let l = uniformized_polyline_length(&refine_segment(pt(0.0, 1.0), pt(1.0, 1.0), k)).unwrap();
            let err = l - 1.0;
            assert!(err >= -1e-9 && err < prev, "k={k} err={err}");
            prev = err;
        }
    }

    #[test]
    fn oracle_passes() {
        let r = run_oracle();
        assert!(r.passed, "{r:?}");
        assert!(r.busemann_residual_t5 > 1e-6);
    }
}
