mod common;

use common::oracles;
use coherent_core::closedloop::{assemble_closed_loop, ChannelDims, ControllerRealization};
use coherent_core::model::RealMat;
use coherent_core::numerics::is_hurwitz;
use coherent_core::performance::{
    check_relaxed_hinf, check_relaxed_lqg, check_relaxed_mixed, hinf_objective, lqg_index, lqg_lower_bound,
};
use coherent_core::registry;
use proptest::prelude::*;

fn stable_loop(seed: u64) -> coherent_core::closedloop::ClosedLoopSystem {
    let plant = if seed.is_multiple_of(2) { registry::cavity() } else { registry::dpa() };
    let dims = ChannelDims::for_plant(&plant);
    let mut rng = common::rng(seed);
    loop {
        let k = common::random_controller(&mut rng, dims, 1.5, seed.is_multiple_of(3));
        let cl = assemble_closed_loop(&plant, &k, None).unwrap();
        if is_hurwitz(&cl.m) {
            return cl;
        }
    }
}

#[test]
fn lqg_floor_holds_on_both_plants() {
    for plant in [registry::cavity(), registry::dpa()] {
        let bound = lqg_lower_bound(&plant.cz, &plant.dz, &RealMat::identity(2, 2)).unwrap();
        assert_eq!(bound, 1.0);
        let (min, _) = common::lqg_floor(&plant, 1000, 31);
        assert!(min >= bound - 1e-9, "{min}");
    }
}

#[test]
fn lqg_matches_integral_oracle() {
    for seed in 0..10 {
        let cl = stable_loop(seed);
        let p = oracles::lyapunov_integral(&cl.m, &(&cl.n * cl.n.transpose() * 0.5));
        let oracle = (&cl.psi * p * cl.psi.transpose()).trace();
        assert!((lqg_index(&cl).unwrap() - oracle).abs() < 1e-6, "seed {seed}");
    }
}

#[test]
fn hinf_of_damped_cavity_loop_matches_sweep() {
    let plant = registry::cavity();
    let mut p = coherent_core::model::SlhParams::zeros(1, 3);
    for ch in 0..3 {
        p.c_minus[(ch, 0)] = num_complex::Complex64::new(1.5, 0.0);
    }
    let k = coherent_core::closedloop::build_controller_from_slh(&p, ChannelDims::for_plant(&plant)).unwrap();
    let cl = assemble_closed_loop(&plant, &k, None).unwrap();
    let h = hinf_objective(&cl).unwrap();
    let sweep = oracles::hinf_sweep(&cl.m, &cl.h, &cl.gamma);
    assert!((h - sweep).abs() <= 1e-6 * sweep);
}

fn rotate(k: &ControllerRealization, phi: f64) -> ControllerRealization {
    let (s, c) = phi.sin_cos();
    let t = RealMat::from_row_slice(2, 2, &[c, -s, s, c]);
    ControllerRealization {
        ak: &t * &k.ak * t.transpose(),
        bk1: &t * &k.bk1,
        bk2: &t * &k.bk2,
        bk3: &t * &k.bk3,
        ck: &k.ck * t.transpose(),
        theta_k: k.theta_k.clone(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lqg_is_invariant_under_symplectic_rotation(seed in 0u64..10_000, phi in -3.2f64..3.2) {
        let plant = registry::cavity();
        let dims = ChannelDims::for_plant(&plant);
        let mut rng = common::rng(seed);
        let k = common::random_controller(&mut rng, dims, 1.5, true);
        let cl = assemble_closed_loop(&plant, &k, None).unwrap();
        prop_assume!(is_hurwitz(&cl.m));
        let kr = rotate(&k, phi);
        let (d, o) = coherent_core::closedloop::controller_pr_residual(&kr);
        prop_assert!(d < 1e-12 && o < 1e-12);
        let cr = assemble_closed_loop(&plant, &kr, None).unwrap();
        let (a, b) = (lqg_index(&cl).unwrap(), lqg_index(&cr).unwrap());
        prop_assert!((a - b).abs() < 1e-9 * a.max(1.0));
    }

    #[test]
    fn hinf_reads_only_the_disturbance_channel(seed in 0u64..10_000, fill in -3.0f64..3.0) {
        let mut cl = stable_loop(seed);
        let before = hinf_objective(&cl).unwrap();
        cl.n.fill(fill);
        cl.pi.fill(fill);
        cl.psi.fill(fill);
        prop_assert_eq!(hinf_objective(&cl).unwrap(), before);
    }

    #[test]
    fn relaxed_predicates_are_monotone(seed in 0u64..10_000, g in 0.0f64..3.0, dg in 0.0f64..3.0) {
        let cl = stable_loop(seed);
        if check_relaxed_lqg(&cl, g) {
            prop_assert!(check_relaxed_lqg(&cl, g + dg));
        }
        if check_relaxed_hinf(&cl, g) {
            prop_assert!(check_relaxed_hinf(&cl, g + dg));
        }
        prop_assert_eq!(check_relaxed_mixed(&cl, g, dg), check_relaxed_lqg(&cl, g) && check_relaxed_hinf(&cl, dg));
    }
}
