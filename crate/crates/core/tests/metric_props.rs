use hypfill::metric::{self, FiniteMetricSpace, MetricError, MetricKind, NetOrder, ViolationKind};
use proptest::prelude::*;

fn cloud_strategy(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..max)
}

fn space(pts: &[(f64, f64)], kind: MetricKind) -> FiniteMetricSpace {
    let ids = (0..pts.len()).map(|i| format!("p{i}")).collect();
    let coords = pts.iter().map(|&(x, y)| vec![x, y]).collect();
    FiniteMetricSpace::from_points(ids, coords, kind).expect("metric")
}

/// Exhaustive triple scan, kept apart from the library's own validator.
fn triangle_ok(m: &FiniteMetricSpace) -> bool {
    let n = m.len();
    (0..n).all(|i| (0..n).all(|j| (0..n).all(|k| m.d(i, k) <= m.d(i, j) + m.d(j, k) + 1e-9)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn point_clouds_are_metrics(pts in cloud_strategy(25), theta in 0.05..1.0f64) {
        for kind in [MetricKind::Euclidean, MetricKind::Max, MetricKind::Snowflake { theta }] {
            let m = space(&pts, kind);
            prop_assert!(m.validate().is_valid());
            prop_assert!(triangle_ok(&m));
            for i in 0..m.len() {
                prop_assert_eq!(m.d(i, i), 0.0);
            }
        }
    }

    #[test]
    fn snowflake_of_matrix_matches_powers(pts in cloud_strategy(15), theta in 0.1..1.0f64) {
        let m = space(&pts, MetricKind::Euclidean);
        let s = m.snowflake(theta).unwrap();
        for i in 0..m.len() {
            for j in 0..m.len() {
                prop_assert!((s.d(i, j) - m.d(i, j).powf(theta)).abs() <= 1e-12 * (1.0 + s.d(i, j)));
            }
        }
        prop_assert!(triangle_ok(&s));
    }

    #[test]
    fn greedy_nets_are_separated_and_maximal(pts in cloud_strategy(40), r in 0.01..5.0f64, seed in any::<u64>()) {
        let m = space(&pts, MetricKind::Euclidean);
        for order in [NetOrder::Input, NetOrder::Shuffled(seed)] {
            let perm = order.permutation(m.len());
            let net = m.maximal_separated_net(r, &perm);
            prop_assert!(!net.is_empty());
            prop_assert_eq!(net[0], perm[0]);
            for (i, &a) in net.iter().enumerate() {
                for &b in &net[i + 1..] {
                    prop_assert!(m.d(a, b) >= r);
                }
            }
            for z in 0..m.len() {
                prop_assert!(net.iter().any(|&c| m.d(z, c) < r));
            }
        }
    }

    #[test]
    fn permutations_are_permutations(n in 0usize..200, seed in any::<u64>()) {
        let mut p = NetOrder::Shuffled(seed).permutation(n);
        p.sort_unstable();
        prop_assert_eq!(p, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn csv_round_trip(pts in cloud_strategy(12)) {
        let m = space(&pts, MetricKind::Euclidean);
        let back = metric::parse_csv(&metric::to_csv(&m), metric::DEFAULT_TOL).unwrap();
        prop_assert_eq!(back.ids(), m.ids());
        for i in 0..m.len() {
            for j in 0..m.len() {
                prop_assert_eq!(back.d(i, j), m.d(i, j));
            }
        }
    }

    #[test]
    fn suggested_window_brackets_scales(pts in cloud_strategy(30), a in 0.1..0.9f64) {
        let m = space(&pts, MetricKind::Euclidean);
        let s = m.scale_stats(a, 1000);
        match m.min_positive_distance() {
            None => prop_assert!(s.degenerate),
            Some(mind) => {
                prop_assert!(a.powi(s.suggested_n_min) > m.diameter());
                prop_assert!(a.powi(s.suggested_n_min + 1) <= m.diameter());
                prop_assert!(a.powi(s.suggested_n_max) < mind);
                prop_assert!(a.powi(s.suggested_n_max - 1) >= mind);
            }
        }
    }
}

#[test]
fn broken_triangle_is_reported_with_witness() {
    let ids: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    let rows = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
    let rep = metric::validate_matrix(&ids, &rows, metric::DEFAULT_TOL);
    assert!(!rep.is_valid());
    let v = rep.violations.iter().find(|v| v.kind == ViolationKind::Triangle).expect("triangle");
    assert!((v.slack - 3.0).abs() < 1e-12);
    match FiniteMetricSpace::from_matrix(ids, rows, metric::DEFAULT_TOL) {
        Err(MetricError::Invalid(vs)) => assert!(!vs.is_empty()),
        other => panic!("expected rejection, got {other:?}"),
    }
}

#[test]
fn scaling_rejects_nonpositive() {
    let m = metric::line_points(3);
    assert!(m.scaled(0.0).is_err());
    assert_eq!(m.scaled(2.0).unwrap().d(0, 2), 2.0 * m.d(0, 2));
}
