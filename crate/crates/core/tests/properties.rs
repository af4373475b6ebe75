use hklab_core::heat_kernel::{rate_scaled_curve, return_probability_dense};
use hklab_core::{TimeGrid, WeightedGraph};
use proptest::prelude::*;

fn random_graph() -> impl Strategy<Value = WeightedGraph> {
    (1usize..16).prop_flat_map(|n| {
        let m = n * (n - 1) / 2;
        (
            proptest::collection::vec(any::<bool>(), m),
            proptest::collection::vec(0.1f64..10.0, m),
        )
            .prop_map(move |(keep, weights)| {
                let pairs = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b)));
                let edges = pairs
                    .zip(keep.into_iter().zip(weights))
                    .filter(|(_, (k, _))| *k)
                    .map(|((a, b), (_, w))| (a, b, w));
                WeightedGraph::new(n, edges).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn laplacian_rows_sum_to_zero(g in random_graph()) {
        let lap = g.laplacian();
        for x in 0..g.vertex_count() {
            let scale = 1.0 + lap.diagonal()[x];
            prop_assert!(lap.row_sum(x).abs() <= 1e-12 * scale);
            prop_assert_eq!(lap.diagonal()[x], g.incident_weight(x));
        }
        for ((x, y), v) in lap.off_diagonal() {
            prop_assert_eq!(lap.get(y, x), v);
        }
    }

    #[test]
    fn truncation_keeps_fewer_edges_at_lower_levels(
        g in random_graph(),
        a in 0.0f64..60.0,
        b in 0.0f64..60.0,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let small = g.truncate_weights(lo);
        let large = g.truncate_weights(hi);
        for e in small.edges() {
            let kept = large.edge_between(e.tail, e.head).map(|id| large.edge(id).weight);
            prop_assert_eq!(kept, Some(e.weight));
        }
        let untouched = g.truncate_weights(f64::INFINITY);
        prop_assert_eq!(untouched.edges(), g.edges());
    }

    #[test]
    fn curves_are_nonincreasing_and_convex(g in random_graph(), root_pick in 0usize..16) {
        let root = root_pick % g.vertex_count();
        let grid = TimeGrid::linear(0.0, 3.0, 61).unwrap();
        let curve = return_probability_dense(&g, root, &grid).unwrap();
        let v = curve.values();
        prop_assert_eq!(v[0], 1.0);
        for w in v.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        for w in v.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-10);
        }
    }

    #[test]
    fn rate_scaling_is_a_time_change(
        g in random_graph(),
        factor in 0.1f64..10.0,
        root_pick in 0usize..16,
    ) {
        let root = root_pick % g.vertex_count();
        let grid = TimeGrid::new(vec![0.0, 0.05, 0.4, 1.3, 3.0]).unwrap();
        let scaled = g.scaled(factor).unwrap();
        let direct = return_probability_dense(&scaled, root, &grid).unwrap();
        let via_time = rate_scaled_curve(&g, root, factor, &grid).unwrap();
        for (a, b) in direct.values().iter().zip(via_time.values()) {
            prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
        }
    }
}
