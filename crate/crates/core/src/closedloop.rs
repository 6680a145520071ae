//! Plant, coherent controller and their feedback interconnection.
//!
//! The plant has inputs `(v, w, u)`, measurement `y`, H-infinity output `z_inf`
//! and LQG output `z_l`. The controller is driven by its own vacuum channels
//! `b_vk1`, `b_vk2` and by `y`; its output channel on `b_vk1` is the plant
//! input `u = C_k xi dt + db_vk1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{complex_rows, real_rows};
use crate::model::{
    check_physical_realizability, diag_f, direct_coupling_blocks, quadrature_image, ComplexMat, PrReport,
    QuadratureSystem, RealMat, SlhParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantModel {
    #[serde(with = "real_rows")]
    pub a: RealMat,
    #[serde(with = "real_rows")]
    pub b0: RealMat,
    #[serde(with = "real_rows")]
    pub b1: RealMat,
    #[serde(with = "real_rows")]
    pub b2: RealMat,
    #[serde(with = "real_rows")]
    pub c2: RealMat,
    #[serde(with = "real_rows")]
    pub d20: RealMat,
    #[serde(with = "real_rows")]
    pub d21: RealMat,
    #[serde(with = "real_rows")]
    pub c1: RealMat,
    #[serde(with = "real_rows")]
    pub d12: RealMat,
    #[serde(with = "real_rows")]
    pub cz: RealMat,
    #[serde(with = "real_rows")]
    pub dz: RealMat,
    #[serde(with = "real_rows")]
    pub theta: RealMat,
}

impl PlantModel {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn n_v(&self) -> usize {
        self.b0.ncols()
    }
    pub fn n_w(&self) -> usize {
        self.b1.ncols()
    }
    pub fn n_u(&self) -> usize {
        self.b2.ncols()
    }
    pub fn n_y(&self) -> usize {
        self.c2.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let (nv, nw, nu, ny) = (self.n_v(), self.n_w(), self.n_u(), self.n_y());
        let checks = [
            ("A", self.a.shape(), (n, n)),
            ("B0", self.b0.shape(), (n, nv)),
            ("B1", self.b1.shape(), (n, nw)),
            ("B2", self.b2.shape(), (n, nu)),
            ("C2", self.c2.shape(), (ny, n)),
            ("D20", self.d20.shape(), (ny, nv)),
            ("D21", self.d21.shape(), (ny, nw)),
            ("C1", self.c1.shape(), (self.c1.nrows(), n)),
            ("D12", self.d12.shape(), (self.c1.nrows(), nu)),
            ("Cz", self.cz.shape(), (self.cz.nrows(), n)),
            ("Dz", self.dz.shape(), (self.cz.nrows(), nu)),
            ("Theta", self.theta.shape(), (n, n)),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(Error::Dimension(format!("plant {name} is {got:?}, expected {want:?}")));
            }
        }
        if [n, nv, nw, nu, ny].iter().any(|d| d % 2 != 0) {
            return Err(Error::Dimension("quadrature dimensions must be even".into()));
        }
        if self.a.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("plant A has non-finite entries".into()));
        }
        Ok(())
    }

    /// The plant as a single quadrature system with the input channel groups
    /// ordered so that the measurement feedthrough reads `[I 0]`.
    pub fn quadrature_system(&self) -> Result<QuadratureSystem> {
        self.validate()?;
        let groups = [
            (&self.b0, self.d20.clone()),
            (&self.b1, self.d21.clone()),
            (&self.b2, RealMat::zeros(self.n_y(), self.n_u())),
        ];
        const ORDERS: [[usize; 3]; 6] = [[0, 1, 2], [1, 0, 2], [2, 0, 1], [0, 2, 1], [1, 2, 0], [2, 1, 0]];
        let total = self.n_v() + self.n_w() + self.n_u();
        let build = |order: &[usize; 3]| {
            let mut b = RealMat::zeros(self.n(), total);
            let mut d = RealMat::zeros(self.n_y(), total);
            let mut col = 0;
            for &g in order {
                let (bg, dg) = &groups[g];
                b.columns_mut(col, bg.ncols()).copy_from(*bg);
                d.columns_mut(col, dg.ncols()).copy_from(dg);
                col += bg.ncols();
            }
            (b, d)
        };
        let target = RealMat::identity(self.n_y(), total);
        let best = ORDERS
            .iter()
            .min_by(|x, y| {
                let ex = (&build(x).1 - &target).norm();
                let ey = (&build(y).1 - &target).norm();
                ex.total_cmp(&ey)
            })
            .expect("non-empty");
        let (b, d) = build(best);
        Ok(QuadratureSystem { a: self.a.clone(), b, c: self.c2.clone(), d, theta: self.theta.clone() })
    }

    pub fn pr_report(&self) -> Result<PrReport> {
        Ok(check_physical_realizability(&self.quadrature_system()?))
    }
}

/// Controller matrices `(A_k, B_k1, B_k2, B_k3, C_k)` and its commutation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerRealization {
    #[serde(with = "real_rows")]
    pub ak: RealMat,
    #[serde(with = "real_rows")]
    pub bk1: RealMat,
    #[serde(with = "real_rows")]
    pub bk2: RealMat,
    #[serde(with = "real_rows")]
    pub bk3: RealMat,
    #[serde(with = "real_rows")]
    pub ck: RealMat,
    #[serde(with = "real_rows")]
    pub theta_k: RealMat,
}

impl ControllerRealization {
    pub fn zeros(n_k: usize, dims: ChannelDims) -> Self {
        Self {
            ak: RealMat::zeros(n_k, n_k),
            bk1: RealMat::zeros(n_k, dims.n_u),
            bk2: RealMat::zeros(n_k, dims.n_vk2),
            bk3: RealMat::zeros(n_k, dims.n_y),
            ck: RealMat::zeros(dims.n_u, n_k),
            theta_k: diag_f(n_k / 2),
        }
    }

    pub fn n_k(&self) -> usize {
        self.ak.nrows()
    }

    /// `B_wk = [B_k1 B_k2 B_k3]`.
    pub fn bwk(&self) -> RealMat {
        let n = self.n_k();
        let (a, b, c) = (self.bk1.ncols(), self.bk2.ncols(), self.bk3.ncols());
        let mut out = RealMat::zeros(n, a + b + c);
        out.columns_mut(0, a).copy_from(&self.bk1);
        out.columns_mut(a, b).copy_from(&self.bk2);
        out.columns_mut(a + b, c).copy_from(&self.bk3);
        out
    }
}

/// Quadrature widths of the controller's three input channel groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelDims {
    pub n_u: usize,
    pub n_vk2: usize,
    pub n_y: usize,
}

impl ChannelDims {
    /// One auxiliary vacuum mode on `b_vk2`.
    pub fn for_plant(p: &PlantModel) -> Self {
        Self { n_u: p.n_u(), n_vk2: 2, n_y: p.n_y() }
    }

    pub fn total(&self) -> usize {
        self.n_u + self.n_vk2 + self.n_y
    }
}

/// Realizes a controller from physical parameters. Channel groups follow the
/// row order of `C_minus`: `b_vk1` first, then `b_vk2`, then `y`.
pub fn build_controller_from_slh(p: &SlhParams, dims: ChannelDims) -> Result<ControllerRealization> {
    if [dims.n_u, dims.n_vk2, dims.n_y].iter().any(|d| d % 2 != 0) {
        return Err(Error::ChannelPartition(format!("odd channel width in {dims:?}")));
    }
    if 2 * p.channels() != dims.total() {
        return Err(Error::ChannelPartition(format!(
            "{} field channels cannot be split as {dims:?}",
            p.channels()
        )));
    }
    let q = QuadratureSystem::from_slh(p)?;
    // u = C_k xi + b_vk1 requires the vk1 rows of D to be [I 0 0].
    let d_vk1 = q.d.rows(0, dims.n_u);
    if (d_vk1 - RealMat::identity(dims.n_u, dims.total())).norm() > 1e-9 {
        return Err(Error::ChannelPartition("scattering mixes the b_vk1 output with other channels".into()));
    }
    Ok(ControllerRealization {
        bk1: q.b.columns(0, dims.n_u).into_owned(),
        bk2: q.b.columns(dims.n_u, dims.n_vk2).into_owned(),
        bk3: q.b.columns(dims.n_u + dims.n_vk2, dims.n_y).into_owned(),
        ck: q.c.rows(0, dims.n_u).into_owned(),
        ak: q.a,
        theta_k: q.theta,
    })
}

/// Residual norms of the controller realizability conditions: the drift balance
/// over all three input groups, and `B_k1 = Theta_k C_k^T diag(F)`.
pub fn controller_pr_residual(k: &ControllerRealization) -> (f64, f64) {
    let th = &k.theta_k;
    let mut drift = &k.ak * th + th * k.ak.transpose();
    for b in [&k.bk1, &k.bk2, &k.bk3] {
        if b.ncols() % 2 != 0 {
            return (f64::INFINITY, f64::INFINITY);
        }
        drift += b * diag_f(b.ncols() / 2) * b.transpose();
    }
    if !k.ck.nrows().is_multiple_of(2) || k.bk1.shape() != (k.ck.ncols(), k.ck.nrows()) {
        return (drift.norm(), f64::INFINITY);
    }
    let out = &k.bk1 - th * k.ck.transpose() * diag_f(k.ck.nrows() / 2);
    (drift.norm(), out.norm())
}

/// Plant-controller direct coupling `(K_minus, K_plus)`, each `N_controller x N_plant`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectCoupling {
    #[serde(with = "complex_rows")]
    pub k_minus: ComplexMat,
    #[serde(with = "complex_rows")]
    pub k_plus: ComplexMat,
}

impl DirectCoupling {
    pub fn from_slh(p: &SlhParams) -> Option<Self> {
        match (&p.k_minus, &p.k_plus) {
            (None, None) => None,
            (Some(km), kp) => Some(Self {
                k_plus: kp.clone().unwrap_or_else(|| ComplexMat::zeros(km.nrows(), km.ncols())),
                k_minus: km.clone(),
            }),
            (None, Some(kp)) => Some(Self { k_minus: ComplexMat::zeros(kp.nrows(), kp.ncols()), k_plus: kp.clone() }),
        }
    }

    /// Quadrature drift blocks `(plant <- controller, controller <- plant)`.
    pub fn quadrature_blocks(&self) -> Result<(RealMat, RealMat)> {
        let (b12, b21) = direct_coupling_blocks(&self.k_minus, &self.k_plus)?;
        Ok((quadrature_image(&b12)?, quadrature_image(&b21)?))
    }
}

/// `d eta = M eta dt + N dw_cl + H beta_w dt`, `dz_inf = Gamma eta dt + Pi dw_cl`, `z_l = Psi eta`,
/// with `w_cl = (v, w, b_vk1, b_vk2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopSystem {
    #[serde(with = "real_rows")]
    pub m: RealMat,
    #[serde(with = "real_rows")]
    pub n: RealMat,
    #[serde(with = "real_rows")]
    pub h: RealMat,
    #[serde(with = "real_rows")]
    pub gamma: RealMat,
    #[serde(with = "real_rows")]
    pub pi: RealMat,
    #[serde(with = "real_rows")]
    pub psi: RealMat,
}

fn blocks(rows: &[&[&RealMat]]) -> RealMat {
    let h: usize = rows.iter().map(|r| r[0].nrows()).sum();
    let w: usize = rows[0].iter().map(|b| b.ncols()).sum();
    let mut out = RealMat::zeros(h, w);
    let mut r0 = 0;
    for row in rows {
        let mut c0 = 0;
        for b in row.iter() {
            out.view_mut((r0, c0), b.shape()).copy_from(*b);
            c0 += b.ncols();
        }
        r0 += row[0].nrows();
    }
    out
}

pub fn assemble_closed_loop(
    p: &PlantModel,
    k: &ControllerRealization,
    coupling: Option<&DirectCoupling>,
) -> Result<ClosedLoopSystem> {
    p.validate()?;
    let (n, nk) = (p.n(), k.n_k());
    let ok = k.ak.shape() == (nk, nk)
        && k.bk1.shape() == (nk, p.n_u())
        && k.bk2.nrows() == nk
        && k.bk3.shape() == (nk, p.n_y())
        && k.ck.shape() == (p.n_u(), nk);
    if !ok {
        return Err(Error::Dimension(format!(
            "controller (n_k = {nk}) does not match plant (n_u = {}, n_y = {})",
            p.n_u(),
            p.n_y()
        )));
    }
    let b2ck = &p.b2 * &k.ck;
    let bk3c2 = &k.bk3 * &p.c2;
    let mut m = blocks(&[&[&p.a, &b2ck], &[&bk3c2, &k.ak]]);
    if let Some(c) = coupling {
        if c.k_minus.shape() != (nk / 2, n / 2) {
            return Err(Error::Dimension(format!(
                "coupling is {:?}, expected {:?}",
                c.k_minus.shape(),
                (nk / 2, n / 2)
            )));
        }
        let (b12, b21) = c.quadrature_blocks()?;
        let mut upper = m.view_mut((0, n), (n, nk));
        upper += &b12;
        let mut lower = m.view_mut((n, 0), (nk, n));
        lower += &b21;
    }
    let nvk2 = k.bk2.ncols();
    let zero_v2 = RealMat::zeros(n, nvk2);
    let n_mat = blocks(&[
        &[&p.b0, &p.b1, &p.b2, &zero_v2],
        &[&(&k.bk3 * &p.d20), &(&k.bk3 * &p.d21), &k.bk1, &k.bk2],
    ]);
    let h = blocks(&[&[&p.b1], &[&(&k.bk3 * &p.d21)]]);
    let gamma = blocks(&[&[&p.c1, &(&p.d12 * &k.ck)]]);
    let ninf = p.c1.nrows();
    let pi = blocks(&[&[
        &RealMat::zeros(ninf, p.n_v()),
        &RealMat::zeros(ninf, p.n_w()),
        &p.d12,
        &RealMat::zeros(ninf, nvk2),
    ]]);
    let psi = blocks(&[&[&p.cz, &(&p.dz * &k.ck)]]);
    Ok(ClosedLoopSystem { m, n: n_mat, h, gamma, pi, psi })
}
