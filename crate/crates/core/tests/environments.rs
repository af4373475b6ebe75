use std::sync::Arc;

use hklab_core::environments::{
    bernoulli_bond, bernoulli_site, estimate_stats, largest_cluster, site_percolation_ensemble,
    torus, Ensemble,
};
use hklab_core::harness::{averaged_curve_g, averaged_curve_h, Method};
use hklab_core::heat_kernel::{return_probability_dense, uniformized_curve};
use hklab_core::TimeGrid;
use rand::{Rng, SeedableRng};

/// `I_0(x)` by its power series.
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= q / (k * k) as f64;
        sum += term;
    }
    sum
}

#[test]
fn torus_roots_are_interchangeable() {
    let g = torus(2, 7, 1.3).unwrap();
    let grid = TimeGrid::new(vec![0.1, 1.0, 4.0]).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for _ in 0..3 {
        let a = rng.random_range(0..g.vertex_count());
        let b = rng.random_range(0..g.vertex_count());
        let ca = return_probability_dense(&g, a, &grid).unwrap();
        let cb = return_probability_dense(&g, b, &grid).unwrap();
        for (x, y) in ca.values().iter().zip(cb.values()) {
            assert!((x - y).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn large_torus_matches_lattice_bessel_form() {
    // On Z² the return probability factorizes into two 1-d walks at rate 1.
    let g = torus(2, 64, 1.0).unwrap();
    let grid = TimeGrid::new(vec![1.0]).unwrap();
    let u = uniformized_curve(&g, 0, &grid, 1e-12).unwrap();
    let lattice = ((-2.0f64).exp() * bessel_i0(2.0)).powi(2);
    assert!((lattice - 0.095_177_385_1).abs() < 1e-9);
    assert!((u.values()[0] - lattice).abs() < 1e-4);
}

#[test]
fn supercritical_giant_component() {
    let parent = Arc::new(torus(2, 32, 1.0).unwrap());
    let big = (0..1000u64)
        .filter(|&seed| {
            let h = bernoulli_bond(&parent, 0.9, 1.0, seed).unwrap();
            let c = largest_cluster(&h).unwrap();
            c.retained_vertex_count() as f64 >= 0.95 * parent.vertex_count() as f64
        })
        .count();
    assert!(big >= 990, "{big} of 1000");
}

#[test]
fn site_retention_and_edge_conditional() {
    let parent = Arc::new(torus(2, 32, 1.0).unwrap());
    let mut kept = 0usize;
    for seed in 0..200 {
        kept += bernoulli_site(&parent, 0.3, 1.0, seed)
            .unwrap()
            .retained_vertex_count();
    }
    let total: f64 = 200.0 * 1024.0;
    let sigma = (0.3 * 0.7 / total).sqrt();
    assert!((kept as f64 / total - 0.3).abs() <= 3.0 * sigma);

    let e = site_percolation_ensemble(2, 32, 1.0, 0.3, 1.0).unwrap();
    let stats = estimate_stats(&e, 400, 9).unwrap();
    let class = &stats.classes[0];
    assert!((class.edge_probability - 0.3).abs() < 0.01, "{class:?}");
    assert!((stats.delta_hat - 0.3).abs() <= 3.0 * stats.delta_se + 0.002);
}

#[test]
fn monte_carlo_averages_agree_with_dense() {
    let e = site_percolation_ensemble(2, 8, 1.0, 0.6, 1.5).unwrap();
    let grid = TimeGrid::new(vec![0.0, 0.2, 1.0, 3.0]).unwrap();
    let dense = averaged_curve_h(&e, &grid, 30, Method::Dense, 2, 1.0).unwrap();
    let mc = averaged_curve_h(
        &e,
        &grid,
        30,
        Method::MonteCarlo {
            walk_count: 20_000,
            max_jumps: 1_000_000,
        },
        2,
        1.0,
    )
    .unwrap();
    // Same subgraphs, so only walk noise separates the two.
    assert_eq!(dense.retained_fractions, mc.retained_fractions);
    let mc_err = mc.errors();
    for i in 1..grid.len() {
        assert!(
            (dense.values()[i] - mc.values()[i]).abs() <= 4.0 * mc_err[i],
            "t index {i}"
        );
    }

    let g = Ensemble::identity(Arc::new(torus(2, 6, 0.7).unwrap()));
    let exact = averaged_curve_g(&g, &grid, Method::Dense, 0).unwrap();
    let uni = averaged_curve_g(&g, &grid, Method::Uniformized { eps: 1e-10 }, 0).unwrap();
    for (a, b) in exact.values().iter().zip(uni.values()) {
        assert!((a - b).abs() <= 1e-10 + 1e-12);
    }
}
