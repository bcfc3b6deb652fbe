use std::sync::Arc;

use hypfill::filling::{EdgeLabel, FillingError, FillingGraph, FillingParams, IntersectionMode};
use hypfill::metric::{self, FiniteMetricSpace};
use proptest::prelude::*;

fn build(m: &FiniteMetricSpace, p: FillingParams) -> FillingGraph {
    FillingGraph::build(Arc::new(m.clone()), p).unwrap()
}

fn auto(m: &FiniteMetricSpace) -> FillingParams {
    let s = m.scale_stats(0.5, 14);
    FillingParams::new(0.5, 4.0, s.suggested_n_min - 3, s.suggested_n_max)
}

/// Edge rule straight from the metric: some point lies in both open balls.
fn expected_edge(g: &FillingGraph, v: usize, w: usize) -> bool {
    let (hv, hw) = (g.height(v), g.height(w));
    if (hv - hw).abs() > 1 || v == w {
        return false;
    }
    let p = g.params();
    let m = g.space();
    match p.intersection_mode {
        IntersectionMode::WitnessScan => (0..m.len())
            .any(|z| m.d(z, g.center(v)) < p.tau * p.a.powi(hv) && m.d(z, g.center(w)) < p.tau * p.a.powi(hw)),
        IntersectionMode::CenterSum => m.d(g.center(v), g.center(w)) < p.tau * (p.a.powi(hv) + p.a.powi(hw)),
    }
}

/// Reachability through height-decreasing vertical edges by transitive closure.
fn closure_oracle(g: &FillingGraph) -> Vec<Vec<bool>> {
    let n = g.len();
    let mut r = vec![vec![false; n]; n];
    for v in 0..n {
        r[v][v] = true;
        for u in 0..n {
            if g.graph().has_edge(v, u) && g.height(u) + 1 == g.height(v) {
                r[v][u] = true;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

#[test]
fn cone_points_and_branch_points_match_brute_force() {
    let m = metric::random_cloud(10, 99);
    let g = build(&m, auto(&m));
    let r = closure_oracle(&g);
    let table = g.closure_table();
    for v in 0..g.len() {
        let c: Vec<usize> = (0..g.len()).filter(|&u| r[v][u]).collect();
        assert_eq!(g.descending_closure(v), c);
        for u in 0..g.len() {
            assert_eq!(table.contains(v, u), r[v][u]);
        }
    }
    for v in 0..g.len() {
        for w in 0..g.len() {
            let cone: Vec<usize> = (0..g.len()).filter(|&u| r[v][u] && r[w][u]).collect();
            assert_eq!(g.cone_points(v, w), cone);
            let top = cone.iter().map(|&u| g.height(u)).max().expect("bottom level is one vertex");
            let b = g.branch_point(v, w).unwrap();
            assert_eq!(b, *cone.iter().find(|&&u| g.height(u) == top).unwrap());
        }
    }
}

#[test]
fn vertex_numbering_is_level_major() {
    let m = metric::random_cloud(25, 3);
    let g = build(&m, auto(&m));
    for (i, v) in g.vertices().iter().enumerate() {
        assert_eq!(v.id, i);
        assert!(g.level_range(v.level).contains(&i));
    }
    assert!(g.vertices().windows(2).all(|w| w[0].level <= w[1].level));
}

#[test]
fn scaling_the_metric_by_a_shifts_levels() {
    let m = metric::random_cloud(18, 4);
    let p = auto(&m);
    let g = build(&m, p);
    let shifted = build(&m.scaled(0.5).unwrap(), FillingParams { n_min: p.n_min + 1, n_max: p.n_max + 1, ..p });
    assert_eq!(g.len(), shifted.len());
    for v in 0..g.len() {
        assert_eq!(g.center(v), shifted.center(v));
        assert_eq!(g.height(v) + 1, shifted.height(v));
        assert_eq!(g.graph().neighbors(v), shifted.graph().neighbors(v));
    }
}

#[test]
fn raising_n_max_keeps_lower_levels() {
    let m = metric::random_cloud(15, 5);
    let p = auto(&m);
    let g = build(&m, p);
    let big = build(&m, FillingParams { n_max: p.n_max + 2, ..p });
    for v in 0..g.len() {
        assert_eq!(g.vertex(v), big.vertex(v));
        let below: Vec<usize> = big.graph().neighbors(v).iter().copied().filter(|&w| w < g.len()).collect();
        assert_eq!(g.graph().neighbors(v), below.as_slice());
    }
}

#[test]
fn tau_and_a_are_checked() {
    let m = metric::line_points(3);
    let bad = FillingParams::new(0.5, 2.0, 0, 3);
    assert!(matches!(FillingGraph::build(Arc::new(m.clone()), bad), Err(FillingError::Tau { .. })));
    // 1/(1-a) dominates for a > 2/3
    let p = FillingParams::new(0.8, 4.9, 0, 3);
    assert!(matches!(FillingGraph::build(Arc::new(m.clone()), p), Err(FillingError::Tau { .. })));
    assert!(FillingGraph::build(Arc::new(m.clone()), FillingParams::new(0.8, 5.1, 0, 3)).is_ok());
    assert!(matches!(FillingGraph::build(Arc::new(m), FillingParams::new(1.0, 9.0, 0, 3)), Err(FillingError::BadA(_))));
}

#[test]
fn build_is_deterministic() {
    let m = metric::random_cloud(20, 6);
    let p = FillingParams { order_seed: Some(11), ..auto(&m) };
    assert_eq!(build(&m, p).to_json(), build(&m, p).to_json());
}

#[test]
fn dot_export_lists_every_edge() {
    let m = metric::random_cloud(8, 8);
    let g = build(&m, auto(&m));
    let dot = g.to_dot().unwrap();
    assert_eq!(dot.matches(" -- ").count(), g.graph().edge_count());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn filling_invariants(n in 1usize..18, seed in any::<u64>(), center_sum in any::<bool>(), shuffle in any::<bool>()) {
        let m = metric::random_cloud(n, seed);
        let mode = if center_sum { IntersectionMode::CenterSum } else { IntersectionMode::WitnessScan };
        let p = FillingParams { intersection_mode: mode, order_seed: shuffle.then_some(seed), ..auto(&m) };
        let g = build(&m, p);
        prop_assert!(g.is_connected());
        for v in 0..g.len() {
            for w in 0..g.len() {
                prop_assert_eq!(g.graph().has_edge(v, w), expected_edge(&g, v, w), "{} {}", v, w);
            }
        }
        for (u, v, label) in g.edges() {
            let same = g.height(u) == g.height(v);
            prop_assert_eq!(label == EdgeLabel::Horizontal, same);
        }
        // every level above the bottom hangs on the level below
        for v in 0..g.len() {
            if g.height(v) > p.n_min {
                prop_assert!(g.graph().neighbors(v).iter().any(|&w| g.height(w) + 1 == g.height(v)));
            }
        }
        for z in 0..m.len() {
            let ray = g.anchored_descending_ray(z, p.n_max).unwrap();
            prop_assert_eq!(ray.len(), p.levels());
            for w in ray.windows(2) {
                prop_assert!(g.graph().has_edge(w[0], w[1]));
                prop_assert_eq!(g.height(w[0]), g.height(w[1]) + 1);
            }
        }
        let back = FillingGraph::from_json(&g.to_json(), g.space().clone()).unwrap();
        prop_assert_eq!(back.to_json(), g.to_json());
    }
}
