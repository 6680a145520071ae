#![allow(dead_code)]

use coherent_core::closedloop::{build_controller_from_slh, ChannelDims, ControllerRealization};
use coherent_core::model::{ComplexMat, RealMat, SlhParams};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cplx<R: Rng>(rng: &mut R, r: usize, c: usize) -> ComplexMat {
    ComplexMat::from_fn(r, c, |_, _| Complex64::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)))
}

pub fn real<R: Rng>(rng: &mut R, r: usize, c: usize) -> RealMat {
    RealMat::from_fn(r, c, |_, _| rng.random_range(-1.0..=1.0))
}

/// Uniform entries in [-1, 1]; `Omega-` made Hermitian, `Omega+` symmetric, `S = I`.
pub fn random_slh<R: Rng>(rng: &mut R, modes: usize, channels: usize) -> SlhParams {
    let om = cplx(rng, modes, modes);
    let op = cplx(rng, modes, modes);
    SlhParams {
        s: ComplexMat::identity(channels, channels),
        c_minus: cplx(rng, channels, modes),
        c_plus: cplx(rng, channels, modes),
        omega_minus: (&om + om.adjoint()) * Complex64::new(0.5, 0.0),
        omega_plus: (&op + op.transpose()) * Complex64::new(0.5, 0.0),
        k_minus: None,
        k_plus: None,
    }
}

/// One-mode controller over the three channel groups with `S = I`.
pub fn random_controller_slh<R: Rng>(rng: &mut R, scale: f64, passive: bool) -> SlhParams {
    let mut p = SlhParams::zeros(1, 3);
    p.c_minus = cplx(rng, 3, 1) * Complex64::new(scale, 0.0);
    p.omega_minus[(0, 0)] = Complex64::new(rng.random_range(-scale..=scale), 0.0);
    if !passive {
        p.c_plus = cplx(rng, 3, 1) * Complex64::new(0.3 * scale, 0.0);
        p.omega_plus[(0, 0)] = Complex64::new(rng.random_range(-0.3..=0.3), rng.random_range(-0.3..=0.3)) * scale;
    }
    p
}

pub fn random_controller<R: Rng>(rng: &mut R, dims: ChannelDims, scale: f64, passive: bool) -> ControllerRealization {
    build_controller_from_slh(&random_controller_slh(rng, scale, passive), dims).expect("valid partition")
}

/// Random Hurwitz matrix with spectral abscissa at most `-margin`.
pub fn random_stable<R: Rng>(rng: &mut R, n: usize, margin: f64) -> RealMat {
    let a = real(rng, n, n) * 2.0;
    let shift = coherent_core::numerics::spectral_abscissa(&a) + margin;
    a - RealMat::identity(n, n) * shift.max(0.0)
}
pub mod oracles;

/// Smallest LQG index over `count` random realizable controllers that stabilize
/// `plant`; half are passive. Returns `(min J, draws needed)`.
pub fn lqg_floor(plant: &coherent_core::closedloop::PlantModel, count: usize, seed: u64) -> (f64, usize) {
    use coherent_core::closedloop::assemble_closed_loop;
    use coherent_core::numerics::is_hurwitz;
    use coherent_core::performance::lqg_index;
    let dims = ChannelDims::for_plant(plant);
    let mut rng = rng(seed);
    let (mut found, mut draws, mut min) = (0, 0, f64::INFINITY);
    while found < count {
        draws += 1;
        assert!(draws < 100 * count, "too few stabilizing draws");
        let k = random_controller(&mut rng, dims, 2.0, draws % 2 == 0);
        let cl = assemble_closed_loop(plant, &k, None).unwrap();
        if !is_hurwitz(&cl.m) {
            continue;
        }
        found += 1;
        min = min.min(lqg_index(&cl).unwrap());
    }
    (min, draws)
}
