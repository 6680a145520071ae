//! Independent reference computations.

#![allow(dead_code)]

use coherent_core::model::{ComplexMat, RealMat};
use num_complex::Complex64;

/// `int_0^inf e^{Mt} Q e^{M^T t} dt` by composite Simpson on a horizon where
/// the propagator has decayed below `1e-13`.
pub fn lyapunov_integral(m: &RealMat, q: &RealMat) -> RealMat {
    let n = m.nrows();
    let h = 2e-3 / m.norm().max(1.0);
    let step = (m * h).exp();
    let mut e = RealMat::identity(n, n);
    let f = |e: &RealMat| e * q * e.transpose();
    let mut acc = f(&e);
    let mut k = 0usize;
    loop {
        let mid = &e * &step;
        let end = &mid * &step;
        acc += f(&mid) * 4.0 + f(&end) * 2.0;
        e = end;
        k += 2;
        if e.norm() < 1e-13 && k > 100 {
            break;
        }
    }
    // The last endpoint was counted with weight 2 instead of 1.
    acc -= f(&e);
    acc * (h / 3.0)
}

/// Largest singular value of `Gamma (i w I - M)^{-1} H`, through a complex LU solve.
pub fn gain(m: &RealMat, h: &RealMat, g: &RealMat, w: f64) -> f64 {
    let n = m.nrows();
    let a = ComplexMat::from_fn(n, n, |i, j| {
        Complex64::new(-m[(i, j)], if i == j { w } else { 0.0 })
    });
    let hc = h.map(|x| Complex64::new(x, 0.0));
    let x = a.lu().solve(&hc).expect("iwI - M invertible for Hurwitz M");
    let t = g.map(|x| Complex64::new(x, 0.0)) * x;
    t.svd(false, false).singular_values.max()
}

/// Peak gain from `1e4` log-spaced frequencies over `[1e-4, 1e4] * scale`
/// plus DC, with golden-section refinement around the best grid points.
pub fn hinf_sweep(m: &RealMat, h: &RealMat, g: &RealMat) -> f64 {
    let scale = m.norm().max(1.0);
    let pts = 10_000;
    let grid: Vec<f64> = (0..pts)
        .map(|i| scale * 10f64.powf(-4.0 + 8.0 * i as f64 / (pts - 1) as f64))
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&w| gain(m, h, g, w)).collect();
    let mut best = gain(m, h, g, 0.0);
    let mut order: Vec<usize> = (0..pts).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    for &i in order.iter().take(8) {
        let lo = if i == 0 { 0.0 } else { grid[i - 1] };
        let hi = grid[(i + 1).min(pts - 1)];
        best = best.max(golden_max(|w| gain(m, h, g, w), lo, hi));
    }
    best.max(vals[order[0]])
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-14 * b.abs().max(1e-300) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}
