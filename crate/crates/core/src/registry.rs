//! Benchmark plants: an optical cavity and a degenerate parametric amplifier,
//! plus the small Riccati example with a vanishing measurement feedthrough.

use crate::closedloop::PlantModel;
use crate::model::{diag_f, RealMat};
use crate::numerics::RiccatiInputs;

fn eye(scale: f64) -> RealMat {
    RealMat::identity(2, 2) * scale
}

/// Optical cavity with decay rates `kappa = (2.6, 0.2, 0.2)` on channels `(v, w, u)`.
/// The measurement leaves through the `w` mirror.
pub fn cavity() -> PlantModel {
    let (k1, k2, k3): (f64, f64, f64) = (2.6, 0.2, 0.2);
    let gamma = 3.0;
    PlantModel {
        a: eye(-gamma / 2.0),
        b0: eye(-k1.sqrt()),
        b1: eye(-k2.sqrt()),
        b2: eye(-k3.sqrt()),
        c2: eye(k2.sqrt()),
        d20: eye(0.0),
        d21: eye(1.0),
        c1: eye(k3.sqrt()),
        d12: eye(1.0),
        cz: eye(1.0),
        dz: eye(1.0),
        theta: diag_f(1),
    }
}

/// Degenerate parametric amplifier with squeezing `epsilon = 0.01` and decay rates
/// `kappa = (0.5, 0.2, 0.2)` on `(v, w, u)`. The measurement leaves through the `v` mirror.
pub fn dpa() -> PlantModel {
    let (k1, k2, k3): (f64, f64, f64) = (0.5, 0.2, 0.2);
    let eps = 0.01;
    let gamma = 0.9;
    PlantModel {
        a: RealMat::from_diagonal(&nalgebra::DVector::from_vec(vec![-(gamma - eps) / 2.0, -(gamma + eps) / 2.0])),
        b0: eye(-k1.sqrt()),
        b1: eye(-k2.sqrt()),
        b2: eye(-k3.sqrt()),
        c2: eye(k1.sqrt()),
        d20: eye(1.0),
        d21: eye(0.0),
        c1: eye(k2.sqrt()),
        d12: eye(1.0),
        cz: eye(1.0),
        dz: eye(1.0),
        theta: diag_f(1),
    }
}

/// DPA-like plant whose measurement sees the disturbance only through `D21 = delta I`.
pub fn riccati_example(delta: f64, gamma_inf: f64) -> RiccatiInputs {
    let d = dpa();
    RiccatiInputs {
        a: d.a,
        b1: eye(-0.2f64.sqrt()),
        b2: eye(-0.2f64.sqrt()),
        c1: eye(0.2f64.sqrt()),
        c2: eye(0.5f64.sqrt()),
        d12: eye(1.0),
        d21: eye(delta),
        gamma_inf,
    }
}

/// Diagonal solution of the Y equation of [`riccati_example`], one entry per quadrature.
pub fn riccati_example_y(delta: f64, gamma_inf: f64) -> RealMat {
    let y = |a: f64| (a - 2.0 * 0.1f64.sqrt() / delta) / (0.2 / (gamma_inf * gamma_inf) - 0.5 / (delta * delta));
    RealMat::from_diagonal(&nalgebra::DVector::from_vec(vec![y(0.89), y(0.91)]))
}
