//! LQG and H-infinity indices of a closed loop, the order-2 LQG floor, and the
//! relaxed feasibility predicates certified spectrally.
//!
//! The relaxed LQG and H-infinity problems ask for LMI certificates; given
//! stability, those exist exactly when `J < gamma_l` and `||G||_inf < gamma_inf`,
//! so the predicates test the indices directly.

use serde::{Deserialize, Serialize};

use crate::closedloop::{assemble_closed_loop, ClosedLoopSystem, ControllerRealization, DirectCoupling, PlantModel};
use crate::error::{Error, Result};
use crate::model::RealMat;
use crate::numerics::{hinf_norm, is_hurwitz, solve_lyapunov, spectral_abscissa, DEFAULT_HINF_TOL};

/// `J = Tr(Psi P Psi^T)` with `M P + P M^T + N N^T / 2 = 0`.
pub fn lqg_index(cl: &ClosedLoopSystem) -> Result<f64> {
    let q = &cl.n * cl.n.transpose() * 0.5;
    let sol = solve_lyapunov(&cl.m, &q)?;
    Ok((&cl.psi * sol.p * cl.psi.transpose()).trace())
}

/// H-infinity norm of the disturbance channel `Gamma (sI - M)^{-1} H`.
pub fn hinf_objective(cl: &ClosedLoopSystem) -> Result<f64> {
    hinf_norm(&cl.m, &cl.h, &cl.gamma, DEFAULT_HINF_TOL)
}

/// `(c1 + c3) / 2 + d2 (ck1 ck3 + ck2 ck4)`, reading `c` from `Cz^T Cz`,
/// `d` from `Dz^T Dz` and `ck` row-major from `Ck`. Defined for order 2 only.
pub fn lqg_lower_bound(cz: &RealMat, dz: &RealMat, ck: &RealMat) -> Result<f64> {
    let czz = cz.transpose() * cz;
    let dzz = dz.transpose() * dz;
    if czz.shape() != (2, 2) || dzz.shape() != (2, 2) || ck.shape() != (2, 2) {
        return Err(Error::WrongOrder(format!(
            "lower bound needs 2x2 data, got Cz^T Cz {:?}, Dz^T Dz {:?}, Ck {:?}",
            czz.shape(),
            dzz.shape(),
            ck.shape()
        )));
    }
    let (c1, c3) = (czz[(0, 0)], czz[(1, 1)]);
    let d2 = dzz[(0, 1)];
    Ok((c1 + c3) / 2.0 + d2 * (ck[(0, 0)] * ck[(1, 0)] + ck[(0, 1)] * ck[(1, 1)]))
}

pub fn check_relaxed_lqg(cl: &ClosedLoopSystem, gamma_l: f64) -> bool {
    is_hurwitz(&cl.m) && lqg_index(cl).is_ok_and(|j| j < gamma_l)
}

pub fn check_relaxed_hinf(cl: &ClosedLoopSystem, gamma_inf: f64) -> bool {
    is_hurwitz(&cl.m) && hinf_objective(cl).is_ok_and(|h| h < gamma_inf)
}

pub fn check_relaxed_mixed(cl: &ClosedLoopSystem, gamma_l: f64, gamma_inf: f64) -> bool {
    check_relaxed_lqg(cl, gamma_l) && check_relaxed_hinf(cl, gamma_inf)
}

/// Indices of one closed loop. Unstable loops carry no index values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub stable: bool,
    pub spectral_abscissa: f64,
    pub j_lqg: Option<f64>,
    pub hinf: Option<f64>,
    pub lqg_lower_bound: Option<f64>,
}

impl PerformanceReport {
    pub fn from_closed_loop(cl: &ClosedLoopSystem, lower_bound: Option<f64>) -> Self {
        let abscissa = spectral_abscissa(&cl.m);
        let stable = is_hurwitz(&cl.m);
        let (j_lqg, hinf) = if stable {
            (lqg_index(cl).ok(), hinf_objective(cl).ok())
        } else {
            (None, None)
        };
        Self { stable: stable && j_lqg.is_some() && hinf.is_some(), spectral_abscissa: abscissa, j_lqg, hinf, lqg_lower_bound: lower_bound }
    }

    pub const CSV_HEADER: &'static str = "stable,spectral_abscissa,j_lqg,hinf,lqg_lower_bound";

    /// Flat record; absent values are written as `NA`.
    pub fn csv_fields(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), crate::io::fmt_sig);
        vec![
            self.stable.to_string(),
            crate::io::fmt_sig(self.spectral_abscissa),
            opt(self.j_lqg),
            opt(self.hinf),
            opt(self.lqg_lower_bound),
        ]
    }
}

/// Assembles the loop and reports both indices and, for order-2 data, the LQG floor.
pub fn evaluate(
    plant: &PlantModel,
    k: &ControllerRealization,
    coupling: Option<&DirectCoupling>,
) -> Result<(ClosedLoopSystem, PerformanceReport)> {
    let cl = assemble_closed_loop(plant, k, coupling)?;
    let bound = lqg_lower_bound(&plant.cz, &plant.dz, &k.ck).ok();
    let report = PerformanceReport::from_closed_loop(&cl, bound);
    Ok((cl, report))
}
