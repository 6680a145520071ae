mod common;

use common::oracles;
use coherent_core::model::RealMat;
use coherent_core::numerics::{hinf_norm, is_positive_definite, solve_lyapunov};
use coherent_core::registry;
use proptest::prelude::*;

#[test]
fn lyapunov_matches_integral_oracle() {
    let m = RealMat::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -2.0]);
    let q = RealMat::identity(2, 2);
    let p = solve_lyapunov(&m, &q).unwrap().p;
    assert!((p - oracles::lyapunov_integral(&m, &q)).norm() < 1e-8);

    let mut rng = common::rng(21);
    for i in 0..50 {
        let n = 1 + i % 6;
        let m = common::random_stable(&mut rng, n, 0.3);
        let b = common::real(&mut rng, n, 2);
        let q = &b * b.transpose();
        let sol = solve_lyapunov(&m, &q).unwrap();
        let oracle = oracles::lyapunov_integral(&m, &q);
        assert!((&sol.p - &oracle).norm() < 1e-6 * oracle.norm().max(1.0), "draw {i}");
        assert!(sol.residual < 1e-10 * q.norm().max(1.0));
        assert_eq!(sol.p, sol.p.transpose());
    }
}

#[test]
fn lyapunov_solution_is_positive_definite_for_controllable_pairs() {
    let mut rng = common::rng(22);
    for _ in 0..50 {
        let m = common::random_stable(&mut rng, 4, 0.1);
        let b = common::real(&mut rng, 4, 4);
        let p = solve_lyapunov(&m, &(&b * b.transpose())).unwrap().p;
        assert!(is_positive_definite(&p));
    }
}

#[test]
fn hinf_bisection_matches_frequency_sweep() {
    let mut rng = common::rng(23);
    for i in 0..100 {
        let n = 1 + i % 8;
        let m = common::random_stable(&mut rng, n, 0.05);
        let h = common::real(&mut rng, n, 2);
        let g = common::real(&mut rng, 2, n);
        let bis = hinf_norm(&m, &h, &g, 1e-12).unwrap();
        let sweep = oracles::hinf_sweep(&m, &h, &g);
        assert!((bis - sweep).abs() <= 1e-6 * sweep, "draw {i}: {bis} vs {sweep}");
    }
}

#[test]
fn riccati_example_closed_forms() {
    for delta in [1e-2, 1e-3] {
        let bound = 0.4f64.sqrt() * delta;
        let y = registry::riccati_example_y(delta, 2.0 * bound);
        let r = registry::riccati_example(delta, 2.0 * bound).y_residual(&y).unwrap();
        assert!(r.norm() < 1e-8, "{}", r.norm());
        assert!(is_positive_definite(&y));
        let below = registry::riccati_example_y(delta, 0.5 * bound);
        assert!(below.diagonal().iter().any(|v| *v <= 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hinf_scales_with_input_gain(seed in 0u64..10_000, c in -4.0f64..4.0) {
        prop_assume!(c.abs() > 1e-3);
        let mut rng = common::rng(seed);
        let m = common::random_stable(&mut rng, 3, 0.2);
        let h = common::real(&mut rng, 3, 2);
        let g = common::real(&mut rng, 2, 3);
        let base = hinf_norm(&m, &h, &g, 1e-12).unwrap();
        let scaled = hinf_norm(&m, &(&h * c), &g, 1e-12).unwrap();
        prop_assert!((scaled - c.abs() * base).abs() <= 1e-8 * scaled.max(1e-12));
    }
}
