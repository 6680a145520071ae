//! Rank-constrained LMI route to mixed LQG / H-infinity synthesis.
//!
//! The controller is hidden behind the change of variables
//!
//! ```text
//! A_hat = Xi A_k Sigma^T + Xi B_wk C X + Y B2 C_k Sigma^T + Y A X
//! B_hat = Xi B_wk
//! C_hat = C_k Sigma^T,        Sigma Xi^T = I - X Y
//! ```
//!
//! which makes both performance conditions linear. Realizability stays
//! bilinear and is handled by lifting 31 block variables into
//! `Z = V V^T`, `V = [I; M1..M13; W1..W18]`, with linear equalities on the
//! blocks of `Z` and `rank(Z) <= n`.
//!
//! Block index map used throughout: `0` is the identity block, `m_i` is `i`,
//! `w_i` is `13 + i`. `Z_(a,b) = V_a V_b^T`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::closedloop::{
    assemble_closed_loop, build_controller_from_slh, controller_pr_residual, ChannelDims, ControllerRealization,
    PlantModel,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ga::{SearchMode, SearchSpace};
use crate::io::real_rows;
use crate::model::{diag_f, RealMat};
use crate::numerics::{is_hurwitz, max_sym_eigenvalue, min_sym_eigenvalue, solve_lyapunov};
use crate::performance::{hinf_objective, lqg_index};

/// Relative tolerance on `Sigma Xi^T = I - X Y`.
pub const FACTOR_TOL: f64 = 1e-10;
/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-8;
/// Equality and realizability residual accepted by [`verify_candidate`].
pub const VERIFY_TOL: f64 = 1e-8;
/// Number of block rows of `V`.
pub const LIFT_BLOCKS: usize = 32;

fn m_idx(i: usize) -> usize {
    i
}
fn w_idx(i: usize) -> usize {
    13 + i
}

fn hcat(parts: &[&RealMat]) -> RealMat {
    let rows = parts[0].nrows();
    let cols = parts.iter().map(|p| p.ncols()).sum();
    let mut out = RealMat::zeros(rows, cols);
    let mut c = 0;
    for p in parts {
        out.columns_mut(c, p.ncols()).copy_from(*p);
        c += p.ncols();
    }
    out
}

fn vcat(parts: &[&RealMat]) -> RealMat {
    let cols = parts[0].ncols();
    let rows = parts.iter().map(|p| p.nrows()).sum();
    let mut out = RealMat::zeros(rows, cols);
    let mut r = 0;
    for p in parts {
        out.rows_mut(r, p.nrows()).copy_from(*p);
        r += p.nrows();
    }
    out
}

fn grid(rows: &[Vec<RealMat>]) -> RealMat {
    let strips: Vec<RealMat> = rows.iter().map(|r| hcat(&r.iter().collect::<Vec<_>>())).collect();
    vcat(&strips.iter().collect::<Vec<_>>())
}

fn sym(x: &RealMat) -> RealMat {
    (x + x.transpose()) * 0.5
}

fn zeros(r: usize, c: usize) -> RealMat {
    RealMat::zeros(r, c)
}

fn eye(n: usize) -> RealMat {
    RealMat::identity(n, n)
}

/// Plant rewritten with the stacked noise `w_cl = (v, w, b_vk1, b_vk2)` and the
/// stacked controller input `y' = (b_vk1, b_vk2, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModifiedPlant {
    #[serde(with = "real_rows")]
    pub a: RealMat,
    #[serde(with = "real_rows")]
    pub bw: RealMat,
    #[serde(with = "real_rows")]
    pub b1: RealMat,
    #[serde(with = "real_rows")]
    pub b2: RealMat,
    #[serde(with = "real_rows")]
    pub c: RealMat,
    /// `beta_w` feedthrough into `y'`. The measurement row is `D21`.
    #[serde(with = "real_rows")]
    pub d: RealMat,
    #[serde(with = "real_rows")]
    pub d_inf: RealMat,
    #[serde(with = "real_rows")]
    pub dw: RealMat,
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
    pub dims: ChannelDims,
    pub n_v: usize,
}

pub fn build_modified_plant(p: &PlantModel) -> Result<ModifiedPlant> {
    p.validate()?;
    let dims = ChannelDims::for_plant(p);
    let (n, nv, nw, nu, nk2, ny) = (p.n(), p.n_v(), p.n_w(), p.n_u(), dims.n_vk2, p.n_y());
    let ninf = p.c1.nrows();
    let bw = hcat(&[&p.b0, &p.b1, &p.b2, &zeros(n, nk2)]);
    let c = vcat(&[&zeros(nu, n), &zeros(nk2, n), &p.c2]);
    let d = vcat(&[&zeros(nu, nw), &zeros(nk2, nw), &p.d21]);
    let d_inf = hcat(&[&zeros(ninf, nv), &zeros(ninf, nw), &p.d12, &zeros(ninf, nk2)]);
    let dw = grid(&[
        vec![zeros(nu, nv), zeros(nu, nw), eye(nu), zeros(nu, nk2)],
        vec![zeros(nk2, nv), zeros(nk2, nw), zeros(nk2, nu), eye(nk2)],
        vec![p.d20.clone(), p.d21.clone(), zeros(ny, nu), zeros(ny, nk2)],
    ]);
    Ok(ModifiedPlant {
        a: p.a.clone(),
        bw,
        b1: p.b1.clone(),
        b2: p.b2.clone(),
        c,
        d,
        d_inf,
        dw,
        c1: p.c1.clone(),
        d12: p.d12.clone(),
        cz: p.cz.clone(),
        dz: p.dz.clone(),
        theta: p.theta.clone(),
        dims,
        n_v: nv,
    })
}

impl ModifiedPlant {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    fn n_w(&self) -> usize {
        self.b1.ncols()
    }

    pub fn c2(&self) -> RealMat {
        self.c.rows(self.dims.n_u + self.dims.n_vk2, self.dims.n_y).into_owned()
    }

    /// The original plant blocks.
    pub fn to_plant(&self) -> PlantModel {
        let (nv, nw, nu) = (self.n_v, self.n_w(), self.dims.n_u);
        let y_row = self.dims.n_u + self.dims.n_vk2;
        PlantModel {
            a: self.a.clone(),
            b0: self.bw.columns(0, nv).into_owned(),
            b1: self.bw.columns(nv, nw).into_owned(),
            b2: self.bw.columns(nv + nw, nu).into_owned(),
            c2: self.c2(),
            d20: self.dw.view((y_row, 0), (self.dims.n_y, nv)).into_owned(),
            d21: self.dw.view((y_row, nv), (self.dims.n_y, nw)).into_owned(),
            c1: self.c1.clone(),
            d12: self.d12.clone(),
            cz: self.cz.clone(),
            dz: self.dz.clone(),
            theta: self.theta.clone(),
        }
    }
}

/// `(X, Y, Xi, Sigma)` with `Sigma Xi^T = I - X Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coordinates {
    #[serde(with = "real_rows")]
    pub x: RealMat,
    #[serde(with = "real_rows")]
    pub y: RealMat,
    #[serde(with = "real_rows")]
    pub xi: RealMat,
    #[serde(with = "real_rows")]
    pub sigma: RealMat,
}

impl Coordinates {
    pub fn factor_residual(&self) -> f64 {
        let n = self.x.nrows();
        (&self.sigma * self.xi.transpose() - (eye(n) - &self.x * &self.y)).norm()
    }

    fn check(&self) -> Result<()> {
        let n = self.x.nrows();
        let scale = 1.0f64.max((&self.x * &self.y).norm());
        let residual = self.factor_residual();
        if [&self.y, &self.xi, &self.sigma].iter().any(|m| m.shape() != (n, n)) {
            return Err(Error::Dimension("coordinates must all be n x n".into()));
        }
        if !(residual <= FACTOR_TOL * scale) {
            return Err(Error::ConstraintViolated { residual });
        }
        Ok(())
    }

    /// Splits `I - X Y` as `Sigma = I - X Y`, `Xi = I` when that is well conditioned,
    /// otherwise as balanced square roots of its singular value decomposition.
    pub fn factor(x: RealMat, y: RealMat) -> Result<Self> {
        let n = x.nrows();
        let target = eye(n) - &x * &y;
        let svd = target.clone().svd(true, true);
        let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
        if !(smin > 0.0) {
            return Err(Error::SingularTransform("I - X Y is singular".into()));
        }
        if smax / smin < 1e8 {
            return Ok(Self { x, y, xi: eye(n), sigma: target });
        }
        let root = RealMat::from_diagonal(&svd.singular_values.map(f64::sqrt));
        let u = svd.u.expect("requested");
        let vt = svd.v_t.expect("requested");
        Ok(Self { x, y, sigma: u * &root, xi: vt.transpose() * root })
    }
}

/// `(A_hat, B_hat, C_hat)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hatted {
    #[serde(with = "real_rows")]
    pub a_hat: RealMat,
    #[serde(with = "real_rows")]
    pub b_hat: RealMat,
    #[serde(with = "real_rows")]
    pub c_hat: RealMat,
}

pub fn forward_change(mp: &ModifiedPlant, k: &ControllerRealization, c: &Coordinates) -> Result<Hatted> {
    c.check()?;
    let bwk = k.bwk();
    if k.ak.shape() != c.x.shape() || bwk.ncols() != mp.c.nrows() {
        return Err(Error::Dimension("controller does not match the modified plant".into()));
    }
    let (x, y, xi, sg) = (&c.x, &c.y, &c.xi, &c.sigma);
    let a_hat = xi * &k.ak * sg.transpose()
        + xi * &bwk * &mp.c * x
        + y * &mp.b2 * &k.ck * sg.transpose()
        + y * &mp.a * x;
    Ok(Hatted { a_hat, b_hat: xi * bwk, c_hat: &k.ck * sg.transpose() })
}

fn inverse(m: &RealMat, name: &str) -> Result<RealMat> {
    let n = m.nrows();
    let svd = m.clone().svd(false, false);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > 1e-13 * smax.max(1e-300)) || n == 0 {
        return Err(Error::SingularTransform(format!("{name} is singular")));
    }
    m.clone().try_inverse().ok_or_else(|| Error::SingularTransform(format!("{name} is singular")))
}

pub fn recover_controller(mp: &ModifiedPlant, h: &Hatted, c: &Coordinates) -> Result<ControllerRealization> {
    let xi_inv = inverse(&c.xi, "Xi")?;
    let sg_inv_t = inverse(&c.sigma, "Sigma")?.transpose();
    let ck = &h.c_hat * &sg_inv_t;
    let bwk = &xi_inv * &h.b_hat;
    let ak = &xi_inv
        * (&h.a_hat - &c.xi * &bwk * &mp.c * &c.x - &c.y * &mp.b2 * &ck * c.sigma.transpose() - &c.y * &mp.a * &c.x)
        * &sg_inv_t;
    let d = mp.dims;
    Ok(ControllerRealization {
        bk1: bwk.columns(0, d.n_u).into_owned(),
        bk2: bwk.columns(d.n_u, d.n_vk2).into_owned(),
        bk3: bwk.columns(d.n_u + d.n_vk2, d.n_y).into_owned(),
        ck,
        theta_k: diag_f(ak.nrows() / 2),
        ak,
    })
}

/// Full variable set of the linearized problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableChange {
    pub coords: Coordinates,
    pub hatted: Hatted,
    #[serde(with = "real_rows")]
    pub q: RealMat,
}

impl VariableChange {
    pub fn theta_k(&self) -> RealMat {
        diag_f(self.coords.x.nrows() / 2)
    }
    pub fn xi_tilde(&self) -> RealMat {
        &self.coords.xi * self.theta_k()
    }
    fn sigma_inv_t(&self) -> Result<RealMat> {
        Ok(inverse(&self.coords.sigma, "Sigma")?.transpose())
    }
    pub fn a_check(&self) -> Result<RealMat> {
        Ok(&self.hatted.a_hat * self.sigma_inv_t()?)
    }
    pub fn x_check(&self) -> Result<RealMat> {
        Ok(&self.coords.x * self.sigma_inv_t()?)
    }
    pub fn ck(&self) -> Result<RealMat> {
        Ok(&self.hatted.c_hat * self.sigma_inv_t()?)
    }
    /// `B_tilde_k1..3 = Xi B_k1..3`, the column groups of `B_hat`.
    pub fn b_tilde(&self, dims: ChannelDims) -> [RealMat; 3] {
        let b = &self.hatted.b_hat;
        [
            b.columns(0, dims.n_u).into_owned(),
            b.columns(dims.n_u, dims.n_vk2).into_owned(),
            b.columns(dims.n_u + dims.n_vk2, dims.n_y).into_owned(),
        ]
    }
}

/// Blocks of the two LQG inequalities, the trace gap `Tr(Q) - gamma_l`, and the
/// H-infinity block, with the starred entries filled by symmetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiBlocks {
    #[serde(with = "real_rows")]
    pub lqg_block1: RealMat,
    #[serde(with = "real_rows")]
    pub lqg_block2: RealMat,
    pub trace_gap: f64,
    #[serde(with = "real_rows")]
    pub hinf_block: RealMat,
}

impl LmiBlocks {
    pub fn lqg_feasible(&self) -> bool {
        max_sym_eigenvalue(&self.lqg_block1) < 0.0 && min_sym_eigenvalue(&self.lqg_block2) > 0.0 && self.trace_gap < 0.0
    }
    pub fn hinf_feasible(&self) -> bool {
        max_sym_eigenvalue(&self.hinf_block) < 0.0
    }
}

fn lmi_core(mp: &ModifiedPlant, x: &RealMat, y: &RealMat, h: &Hatted) -> (RealMat, RealMat, RealMat, RealMat) {
    let b2c = &mp.b2 * &h.c_hat;
    let bc = &h.b_hat * &mp.c;
    let b11 = &mp.a * x + x * mp.a.transpose() + &b2c + b2c.transpose();
    let b21 = &h.a_hat + mp.a.transpose();
    let b22 = mp.a.transpose() * y + y * &mp.a + &bc + bc.transpose();
    (b11, b21.transpose(), b21, b22)
}

pub fn eval_lmi_blocks(mp: &ModifiedPlant, vc: &VariableChange, gamma_l: f64, gamma_inf: f64) -> Result<LmiBlocks> {
    let n = mp.n();
    let (x, y) = (&vc.coords.x, &vc.coords.y);
    let h = &vc.hatted;
    let nb = mp.c.nrows();
    if x.shape() != (n, n) || y.shape() != (n, n) || h.a_hat.shape() != (n, n) || h.b_hat.shape() != (n, nb) {
        return Err(Error::Dimension("variable change does not match the plant".into()));
    }
    if h.c_hat.shape() != (mp.b2.ncols(), n) || vc.q.shape() != (mp.cz.nrows(), mp.cz.nrows()) {
        return Err(Error::Dimension("C_hat or Q has the wrong shape".into()));
    }
    let (b11, b12, b21, b22) = lmi_core(mp, x, y, h);
    let nwcl = mp.bw.ncols();
    let ybw = y * &mp.bw + &h.b_hat * &mp.dw;
    let lqg_block1 = grid(&[
        vec![b11.clone(), b12.clone(), mp.bw.clone()],
        vec![b21.clone(), b22.clone(), ybw.clone()],
        vec![mp.bw.transpose(), ybw.transpose(), -eye(nwcl)],
    ]);
    let czx = &mp.cz * x + &mp.dz * &h.c_hat;
    let lqg_block2 = grid(&[
        vec![x.clone(), eye(n), czx.transpose()],
        vec![eye(n), y.clone(), mp.cz.transpose()],
        vec![czx.clone(), mp.cz.clone(), vc.q.clone()],
    ]);
    let (nw, ninf) = (mp.n_w(), mp.c1.nrows());
    let yb1 = y * &mp.b1 + &h.b_hat * &mp.d;
    let c1x = &mp.c1 * x + &mp.d12 * &h.c_hat;
    let hinf_block = grid(&[
        vec![b11, b12, mp.b1.clone(), c1x.transpose()],
        vec![b21, b22, yb1.clone(), mp.c1.transpose()],
        vec![mp.b1.transpose(), yb1.transpose(), -eye(nw) * gamma_inf, zeros(nw, ninf)],
        vec![c1x, mp.c1.clone(), zeros(ninf, nw), -eye(ninf) * gamma_inf],
    ]);
    Ok(LmiBlocks {
        lqg_block1: sym(&lqg_block1),
        lqg_block2: sym(&lqg_block2),
        trace_gap: vc.q.trace() - gamma_l,
        hinf_block: sym(&hinf_block),
    })
}

/// Residual matrices of the linearized realizability conditions (drift, output).
pub fn linear_pr_matrices(mp: &ModifiedPlant, vc: &VariableChange) -> Option<(RealMat, RealMat)> {
    let (Ok(a_check), Ok(x_check), Ok(ck)) = (vc.a_check(), vc.x_check(), vc.ck()) else {
        return None;
    };
    let y = &vc.coords.y;
    let [b1, b2, b3] = vc.b_tilde(mp.dims);
    let xt = vc.xi_tilde();
    let ak_tilde = a_check - (&b3 * mp.c2() + y * &mp.a) * x_check - y * &mp.b2 * &ck;
    let mut r = -&ak_tilde * xt.transpose() + &xt * ak_tilde.transpose();
    for b in [&b1, &b2, &b3] {
        r += b * diag_f(b.ncols() / 2) * b.transpose();
    }
    let out = &b1 - &xt * ck.transpose() * diag_f(ck.nrows() / 2);
    Some((r, out))
}

/// Residual norms of the linearized realizability conditions (drift, output).
pub fn eval_linear_pr(mp: &ModifiedPlant, vc: &VariableChange) -> (f64, f64) {
    linear_pr_matrices(mp, vc).map_or((f64::INFINITY, f64::INFINITY), |(a, b)| (a.norm(), b.norm()))
}

/// Smallest feasible `Q` in the second LQG inequality, or `None` when
/// `[[X, I], [I, Y]]` is not positive definite.
pub fn optimal_q(mp: &ModifiedPlant, x: &RealMat, y: &RealMat, c_hat: &RealMat) -> Option<RealMat> {
    let n = mp.n();
    let xy = grid(&[vec![x.clone(), eye(n)], vec![eye(n), y.clone()]]);
    if min_sym_eigenvalue(&xy) <= 0.0 {
        return None;
    }
    let s = hcat(&[&(&mp.cz * x + &mp.dz * c_hat), &mp.cz]);
    let inv = xy.try_inverse()?;
    Some(sym(&(&s * inv * s.transpose())))
}

fn lift_dims_ok(mp: &ModifiedPlant) -> Result<()> {
    let n = mp.n();
    let d = mp.dims;
    if d.n_u != n || d.n_vk2 != n || d.n_y != n {
        return Err(Error::Dimension(format!(
            "lifting needs every channel group to have the state dimension {n}, got {d:?}"
        )));
    }
    Ok(())
}

/// `V` and `Z = V V^T` for a variable set, every block computed from its definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedProblem {
    pub n: usize,
    #[serde(with = "real_rows")]
    pub v: RealMat,
    #[serde(with = "real_rows")]
    pub z: RealMat,
}

impl LiftedProblem {
    pub fn block(&self, i: usize) -> RealMat {
        self.v.rows(i * self.n, self.n).into_owned()
    }
}

pub fn build_lifted(mp: &ModifiedPlant, vc: &VariableChange) -> Result<LiftedProblem> {
    lift_dims_ok(mp)?;
    let n = mp.n();
    let j = diag_f(n / 2);
    let [bk1, bk2, bk3] = vc.b_tilde(mp.dims);
    let (x, y) = (&vc.coords.x, &vc.coords.y);
    let xt = vc.xi_tilde();
    let ck = vc.ck()?;
    let a_check = vc.a_check()?;
    let x_check = vc.x_check()?;
    let w1 = &bk1 * &j;
    let w2 = &bk2 * &j;
    let w3 = &bk3 * &j;
    let w4 = y * &mp.b2;
    let w5 = &bk3 * mp.c2() + y * &mp.a;
    let w6 = &xt * ck.transpose();
    let w7 = &xt * x_check.transpose();
    let w8 = &a_check * xt.transpose();
    let w9 = y * x;
    let blocks = vec![
        eye(n),
        vc.hatted.a_hat.clone(),
        bk1.clone(),
        bk2.clone(),
        bk3.clone(),
        vc.hatted.c_hat.clone(),
        x.clone(),
        y.clone(),
        xt.clone(),
        vc.coords.sigma.clone(),
        vc.coords.xi.clone(),
        ck.clone(),
        a_check.clone(),
        x_check.clone(),
        w1.clone(),
        w2.clone(),
        w3.clone(),
        w4.clone(),
        w5.clone(),
        w6.clone(),
        w7.clone(),
        w8,
        w9,
        &w4 * w6.transpose(),
        &w5 * w7.transpose(),
        &w1 * bk1.transpose(),
        &w2 * bk2.transpose(),
        &w3 * bk3.transpose(),
        &vc.coords.xi * vc.coords.sigma.transpose(),
        &a_check * vc.coords.sigma.transpose(),
        &x_check * vc.coords.sigma.transpose(),
        &ck * vc.coords.sigma.transpose(),
    ];
    debug_assert_eq!(blocks.len(), LIFT_BLOCKS);
    let v = vcat(&blocks.iter().collect::<Vec<_>>());
    let z = &v * v.transpose();
    Ok(LiftedProblem { n, v, z })
}

/// One term `L Z_(a,b) R`.
#[derive(Debug, Clone, PartialEq)]
struct Term {
    left: RealMat,
    a: usize,
    b: usize,
    right: RealMat,
}

/// `sum(terms) = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZConstraint {
    pub label: &'static str,
    terms: Vec<Term>,
    rhs: RealMat,
}

impl ZConstraint {
    pub fn residual(&self, z: &RealMat, n: usize) -> RealMat {
        let mut r = -&self.rhs;
        for t in &self.terms {
            r += &t.left * z.view((t.a * n, t.b * n), (n, n)) * &t.right;
        }
        r
    }
}

/// The lifted equality constraints, including the two converted realizability conditions.
pub fn z_constraints(mp: &ModifiedPlant) -> Result<Vec<ZConstraint>> {
    lift_dims_ok(mp)?;
    let n = mp.n();
    let i = eye(n);
    let o = zeros(n, n);
    let j = diag_f(n / 2);
    let t = |s: f64, a: usize, b: usize, right: &RealMat| Term { left: &i * s, a, b, right: right.clone() };
    let plain = |s: f64, a: usize, b: usize| t(s, a, b, &i);
    let c = |label, terms, rhs: &RealMat| ZConstraint { label, terms, rhs: rhs.clone() };
    let (m, w) = (m_idx, w_idx);
    // Z_(w,0) - Z_(p,q) = 0
    let prod = |label, wi: usize, p: usize, q: usize| c(label, vec![plain(1.0, w(wi), 0), plain(-1.0, p, q)], &o);
    Ok(vec![
        c("Z00 = I", vec![plain(1.0, 0, 0)], &i),
        c("X symmetric", vec![plain(1.0, 0, m(6)), plain(-1.0, m(6), 0)], &o),
        c("Y symmetric", vec![plain(1.0, 0, m(7)), plain(-1.0, m(7), 0)], &o),
        c("W1 = Bk1 J", vec![plain(1.0, w(1), 0), t(-1.0, m(2), 0, &j)], &o),
        c("W2 = Bk2 J", vec![plain(1.0, w(2), 0), t(-1.0, m(3), 0, &j)], &o),
        c("W3 = Bk3 J", vec![plain(1.0, w(3), 0), t(-1.0, m(4), 0, &j)], &o),
        c("W4 = Y B2", vec![plain(1.0, w(4), 0), t(-1.0, m(7), 0, &mp.b2)], &o),
        c(
            "W5 = Bk3 C2 + Y A",
            vec![plain(1.0, w(5), 0), t(-1.0, m(4), 0, &mp.c2()), t(-1.0, m(7), 0, &mp.a)],
            &o,
        ),
        prod("W6 = Xi~ Ck^T", 6, m(8), m(11)),
        prod("W7 = Xi~ Xv^T", 7, m(8), m(13)),
        prod("W8 = Av Xi~^T", 8, m(12), m(8)),
        prod("W9 = Y X", 9, m(7), m(6)),
        prod("W10 = W4 W6^T", 10, w(4), w(6)),
        prod("W11 = W5 W7^T", 11, w(5), w(7)),
        prod("W12 = W1 Bk1^T", 12, w(1), m(2)),
        prod("W13 = W2 Bk2^T", 13, w(2), m(3)),
        prod("W14 = W3 Bk3^T", 14, w(3), m(4)),
        prod("W15 = Xi Sigma^T", 15, m(10), m(9)),
        prod("W16 = Av Sigma^T", 16, m(12), m(9)),
        prod("W17 = Xv Sigma^T", 17, m(13), m(9)),
        prod("W18 = Ck Sigma^T", 18, m(11), m(9)),
        c("W15 = I - W9", vec![plain(1.0, w(15), 0), plain(1.0, w(9), 0)], &i),
        c("M1 = W16", vec![plain(1.0, m(1), 0), plain(-1.0, w(16), 0)], &o),
        c("M6 = W17", vec![plain(1.0, m(6), 0), plain(-1.0, w(17), 0)], &o),
        c("Xi~ = Xi J", vec![plain(1.0, m(8), 0), t(-1.0, m(10), 0, &j)], &o),
        c("M5 = W18", vec![plain(1.0, m(5), 0), plain(-1.0, w(18), 0)], &o),
        c(
            "realizability (drift)",
            vec![
                plain(-1.0, w(8), 0),
                plain(1.0, 0, w(8)),
                plain(1.0, w(11), 0),
                plain(-1.0, 0, w(11)),
                plain(1.0, w(10), 0),
                plain(-1.0, 0, w(10)),
                plain(1.0, w(12), 0),
                plain(1.0, w(13), 0),
                plain(1.0, w(14), 0),
            ],
            &o,
        ),
        c("realizability (output)", vec![plain(1.0, m(2), 0), t(-1.0, w(6), 0, &j)], &o),
    ])
}

pub fn equality_residuals(constraints: &[ZConstraint], z: &RealMat, n: usize) -> Vec<f64> {
    constraints.iter().map(|c| c.residual(z, n).norm()).collect()
}

fn sorted_sym_eigen(z: &RealMat) -> (nalgebra::DVector<f64>, RealMat) {
    let e = nalgebra::SymmetricEigen::new(sym(z));
    let mut order: Vec<usize> = (0..e.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
    let vals = nalgebra::DVector::from_iterator(order.len(), order.iter().map(|&i| e.eigenvalues[i]));
    let vecs = RealMat::from_fn(z.nrows(), order.len(), |r, c| e.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Number of singular values above `RANK_TOL` times the largest.
pub fn numerical_rank(z: &RealMat) -> usize {
    let sv = z.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * smax).count()
}

/// Frobenius norm of everything beyond the top `n` eigenpairs, relative to `||Z||`.
fn rank_residual(z: &RealMat, n: usize) -> f64 {
    let (vals, _) = sorted_sym_eigen(z);
    let tail: f64 = vals.iter().skip(n).map(|v| v * v).sum();
    let neg: f64 = vals.iter().take(n).filter(|v| **v < 0.0).map(|v| v * v).sum();
    (tail + neg).sqrt() / z.norm().max(1e-300)
}

/// Variables read from the first block column of `Z`, normalized by `Z00`.
pub fn read_variables(mp: &ModifiedPlant, z: &RealMat) -> Result<(RealMat, VariableChange)> {
    let n = mp.n();
    let z00 = z.view((0, 0), (n, n)).into_owned();
    let v = z.columns(0, n) * inverse(&z00, "Z00")?;
    let blk = |i: usize| v.rows(i * n, n).into_owned();
    let x = sym(&blk(m_idx(6)));
    let y = sym(&blk(m_idx(7)));
    let c_hat = blk(m_idx(5));
    let q = optimal_q(mp, &x, &y, &c_hat).unwrap_or_else(|| RealMat::zeros(mp.cz.nrows(), mp.cz.nrows()));
    let vc = VariableChange {
        coords: Coordinates { x, y, xi: blk(m_idx(10)), sigma: blk(m_idx(9)) },
        hatted: Hatted {
            a_hat: blk(m_idx(1)),
            b_hat: hcat(&[&blk(m_idx(2)), &blk(m_idx(3)), &blk(m_idx(4))]),
            c_hat,
        },
        q,
    };
    Ok((v, vc))
}

/// Forward lift of a controller through a certificate `P` with
/// `M P + P M^T + N N^T = -eps S`, `S = [[I, I], [I, I]] + I / 10`: `X`, `Sigma`
/// are the first block row of `P` and `Y`, `Xi` the first block row of `P^{-1}`.
/// The correlated `S` keeps `Sigma` well scaled, since realizable loops have
/// nearly uncorrelated plant and controller states.
pub fn lift_controller(mp: &ModifiedPlant, k: &ControllerRealization) -> Result<VariableChange> {
    let plant = mp.to_plant();
    let cl = assemble_closed_loop(&plant, k, None)?;
    let nn = &cl.n * cl.n.transpose();
    let nt = cl.m.nrows();
    let n = mp.n();
    if nt != 2 * n {
        return Err(Error::Dimension("lifting needs a controller of the plant order".into()));
    }
    let p0 = solve_lyapunov(&cl.m, &nn)?.p;
    let eps = 0.1 * p0.norm().max(1.0);
    let s = grid(&[vec![eye(n), eye(n)], vec![eye(n), eye(n)]]) + eye(nt) * 0.1;
    let p = solve_lyapunov(&cl.m, &(nn + s * eps))?.p;
    let pinv = inverse(&p, "closed-loop Gramian")?;
    let x = sym(&p.view((0, 0), (n, n)).into_owned());
    let y = sym(&pinv.view((0, 0), (n, n)).into_owned());
    let coords = Coordinates {
        sigma: p.view((0, n), (n, n)).into_owned(),
        xi: pinv.view((0, n), (n, n)).into_owned(),
        x,
        y,
    };
    let hatted = forward_change(mp, k, &coords)?;
    let q = optimal_q(mp, &coords.x, &coords.y, &hatted.c_hat)
        .unwrap_or_else(|| sym(&(&cl.psi * &p * cl.psi.transpose())));
    Ok(VariableChange { coords, hatted, q })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub max_equality_residual: f64,
    pub equalities_pass: bool,
    pub numerical_rank: usize,
    pub rank_pass: bool,
    pub pr_residuals: (f64, f64),
    pub pr_pass: bool,
    pub stable: bool,
    pub j_lqg: Option<f64>,
    pub lqg_pass: bool,
    pub hinf: Option<f64>,
    pub hinf_pass: bool,
    /// Definiteness of the LMIs at the candidate's variables; not required to pass.
    pub lmi_lqg_feasible: bool,
    pub lmi_hinf_feasible: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merit {
    pub equality: f64,
    pub rank: f64,
    pub lmi: f64,
}

impl Merit {
    pub fn total(&self) -> f64 {
        self.equality + self.rank + self.lmi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSolution {
    #[serde(with = "real_rows")]
    pub z: RealMat,
    pub variables: Option<VariableChange>,
    pub controller: Option<ControllerRealization>,
    pub merit: Merit,
    pub initial_merit: Merit,
    pub iterations: usize,
    pub restart: usize,
    pub converged: bool,
}

/// Checks every acceptance condition of a candidate independently.
pub fn verify_candidate(c: &CandidateSolution, plant: &PlantModel, gamma_l: f64, gamma_inf: f64) -> Result<VerificationReport> {
    let mp = build_modified_plant(plant)?;
    let cons = z_constraints(&mp)?;
    let n = mp.n();
    let max_eq = equality_residuals(&cons, &c.z, n).into_iter().fold(0.0, f64::max);
    let rank = numerical_rank(&c.z);
    let vars = match &c.variables {
        Some(v) => Some(v.clone()),
        None => read_variables(&mp, &c.z).ok().map(|(_, v)| v),
    };
    let controller = vars.as_ref().and_then(|v| recover_controller(&mp, &v.hatted, &v.coords).ok());
    let pr = controller.as_ref().map_or((f64::INFINITY, f64::INFINITY), controller_pr_residual);
    let cl = controller.as_ref().and_then(|k| assemble_closed_loop(plant, k, None).ok());
    let stable = cl.as_ref().is_some_and(|cl| is_hurwitz(&cl.m));
    let (j, h) = match (&cl, stable) {
        (Some(cl), true) => (lqg_index(cl).ok(), hinf_objective(cl).ok()),
        _ => (None, None),
    };
    let blocks = vars.as_ref().and_then(|v| eval_lmi_blocks(&mp, v, gamma_l, gamma_inf).ok());
    let report = VerificationReport {
        max_equality_residual: max_eq,
        equalities_pass: max_eq < VERIFY_TOL,
        numerical_rank: rank,
        rank_pass: rank <= n,
        pr_residuals: pr,
        pr_pass: pr.0 < VERIFY_TOL && pr.1 < VERIFY_TOL,
        stable,
        j_lqg: j,
        lqg_pass: j.is_some_and(|j| j < gamma_l),
        hinf: h,
        hinf_pass: h.is_some_and(|h| h < gamma_inf),
        lmi_lqg_feasible: blocks.as_ref().is_some_and(LmiBlocks::lqg_feasible),
        lmi_hinf_feasible: blocks.as_ref().is_some_and(LmiBlocks::hinf_feasible),
        pass: false,
    };
    let pass = report.equalities_pass
        && report.rank_pass
        && report.pr_pass
        && report.stable
        && report.lqg_pass
        && report.hinf_pass;
    Ok(VerificationReport { pass, ..report })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Margin demanded of the definite blocks in the correction step.
    pub margin: f64,
    #[serde(default)]
    pub execution: Execution,
    /// Controller whose exact lift seeds restart 0.
    #[serde(default)]
    pub init: Option<ControllerRealization>,
}

impl Default for LmiConfig {
    fn default() -> Self {
        Self { restarts: 4, max_iterations: 300, seed: 0, margin: 1e-4, execution: Execution::available(), init: None }
    }
}

/// Orthogonal projection onto the affine set of the lifted equalities, in the
/// symmetric vectorization whose Euclidean norm is the Frobenius norm.
struct AffineProjector {
    dim: usize,
    l: RealMat,
    b: nalgebra::DVector<f64>,
    k: RealMat,
}

fn svec_index(r: usize, c: usize) -> usize {
    let (r, c) = if r <= c { (r, c) } else { (c, r) };
    c * (c + 1) / 2 + r
}

impl AffineProjector {
    fn new(constraints: &[ZConstraint], n: usize) -> Self {
        let dim = LIFT_BLOCKS * n;
        let cols = dim * (dim + 1) / 2;
        let rows = constraints.iter().map(|c| c.rhs.len()).sum();
        let mut l = RealMat::zeros(rows, cols);
        let mut b = nalgebra::DVector::zeros(rows);
        let s2 = std::f64::consts::SQRT_2;
        let mut row = 0;
        for c in constraints {
            for j in 0..c.rhs.ncols() {
                for i in 0..c.rhs.nrows() {
                    b[row] = c.rhs[(i, j)];
                    for t in &c.terms {
                        for p in 0..n {
                            for q in 0..n {
                                let coef = t.left[(i, p)] * t.right[(q, j)];
                                if coef == 0.0 {
                                    continue;
                                }
                                let (zr, zc) = (t.a * n + p, t.b * n + q);
                                let scale = if zr == zc { 1.0 } else { 1.0 / s2 };
                                l[(row, svec_index(zr, zc))] += coef * scale;
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
        let g = &l * l.transpose();
        let e = nalgebra::SymmetricEigen::new(g);
        let emax = e.eigenvalues.max();
        let inv = e.eigenvalues.map(|v| if v > 1e-12 * emax { 1.0 / v } else { 0.0 });
        let g_pinv = &e.eigenvectors * RealMat::from_diagonal(&inv) * e.eigenvectors.transpose();
        let k = l.transpose() * g_pinv;
        Self { dim, l, b, k }
    }

    fn to_svec(&self, z: &RealMat) -> nalgebra::DVector<f64> {
        let s2 = std::f64::consts::SQRT_2;
        let mut s = nalgebra::DVector::zeros(self.dim * (self.dim + 1) / 2);
        for c in 0..self.dim {
            for r in 0..=c {
                let v = 0.5 * (z[(r, c)] + z[(c, r)]);
                s[svec_index(r, c)] = if r == c { v } else { v * s2 };
            }
        }
        s
    }

    fn unvec(&self, s: &nalgebra::DVector<f64>) -> RealMat {
        let s2 = std::f64::consts::SQRT_2;
        RealMat::from_fn(self.dim, self.dim, |r, c| {
            let v = s[svec_index(r, c)];
            if r == c {
                v
            } else {
                v / s2
            }
        })
    }

    fn residual(&self, z: &RealMat) -> f64 {
        (&self.l * self.to_svec(z) - &self.b).norm()
    }

    fn project(&self, z: &RealMat) -> RealMat {
        let s = self.to_svec(z);
        let r = &self.l * &s - &self.b;
        self.unvec(&(s - &self.k * r))
    }
}

/// Nearest PSD matrix of rank at most `n`.
fn project_rank_psd(z: &RealMat, n: usize) -> RealMat {
    let (vals, vecs) = sorted_sym_eigen(z);
    let mut out = RealMat::zeros(z.nrows(), z.ncols());
    for i in 0..n.min(vals.len()) {
        if vals[i] > 0.0 {
            let v = vecs.column(i);
            out += v * v.transpose() * vals[i];
        }
    }
    out
}

/// Sum of the violations of the definiteness conditions at `vc`, with `Q` at its optimum.
fn lmi_violation(mp: &ModifiedPlant, vc: &VariableChange, gamma_l: f64, gamma_inf: f64) -> f64 {
    let Ok(b) = eval_lmi_blocks(mp, vc, gamma_l, gamma_inf) else {
        return f64::INFINITY;
    };
    let n = mp.n();
    let xy = grid(&[vec![vc.coords.x.clone(), eye(n)], vec![eye(n), vc.coords.y.clone()]]);
    let v_xy = (-min_sym_eigenvalue(&xy)).max(0.0);
    let v_tr = match optimal_q(mp, &vc.coords.x, &vc.coords.y, &vc.hatted.c_hat) {
        Some(q) => (q.trace() - gamma_l).max(0.0),
        None => 1.0,
    };
    max_sym_eigenvalue(&b.lqg_block1).max(0.0) + v_xy + v_tr + max_sym_eigenvalue(&b.hinf_block).max(0.0)
}

/// Parameters moved by the correction step: `X`, `Y` (upper triangles), `A_hat`, `B_hat`, `C_hat`, `Sigma`.
fn pack(vc: &VariableChange) -> Vec<f64> {
    let mut out = Vec::new();
    for m in [&vc.coords.x, &vc.coords.y] {
        for c in 0..m.ncols() {
            for r in 0..=c {
                out.push(m[(r, c)]);
            }
        }
    }
    for m in [&vc.hatted.a_hat, &vc.hatted.b_hat, &vc.hatted.c_hat, &vc.coords.sigma] {
        out.extend(m.iter().copied());
    }
    out
}

/// Variables at `theta`, with `Xi = (Sigma^{-1} (I - X Y))^T` and `Q` at its optimum.
fn consistent(mp: &ModifiedPlant, template: &VariableChange, theta: &[f64]) -> Option<VariableChange> {
    let mut vc = template.clone();
    let mut k = 0;
    for m in [&mut vc.coords.x, &mut vc.coords.y] {
        for c in 0..m.ncols() {
            for r in 0..=c {
                m[(r, c)] = theta[k];
                m[(c, r)] = theta[k];
                k += 1;
            }
        }
    }
    for m in [&mut vc.hatted.a_hat, &mut vc.hatted.b_hat, &mut vc.hatted.c_hat, &mut vc.coords.sigma] {
        for x in m.iter_mut() {
            *x = theta[k];
            k += 1;
        }
    }
    let n = mp.n();
    let sigma_inv = inverse(&vc.coords.sigma, "Sigma").ok()?;
    vc.coords.xi = (sigma_inv * (eye(n) - &vc.coords.x * &vc.coords.y)).transpose();
    let nq = mp.cz.nrows();
    vc.q = optimal_q(mp, &vc.coords.x, &vc.coords.y, &vc.hatted.c_hat).unwrap_or_else(|| RealMat::zeros(nq, nq));
    Some(vc)
}

/// Part of a symmetric block outside `B <= -margin I` (or `B >= margin I`).
fn definite_excess(b: &RealMat, margin: f64, negative: bool) -> RealMat {
    let (vals, vecs) = sorted_sym_eigen(b);
    let mut out = RealMat::zeros(b.nrows(), b.ncols());
    for i in 0..vals.len() {
        let excess = if negative { vals[i] + margin } else { margin - vals[i] };
        if excess > 0.0 {
            let v = vecs.column(i);
            out += v * v.transpose() * excess;
        }
    }
    out
}

/// Stacked realizability residuals and definiteness excesses; zero exactly at a
/// realizable point that meets every inequality with the margin.
fn residual_vector(mp: &ModifiedPlant, vc: &VariableChange, gamma_l: f64, gamma_inf: f64, margin: f64) -> Option<Vec<f64>> {
    let n = mp.n();
    let (ra, rb) = linear_pr_matrices(mp, vc)?;
    let b = eval_lmi_blocks(mp, vc, gamma_l, gamma_inf).ok()?;
    let xy = grid(&[vec![vc.coords.x.clone(), eye(n)], vec![eye(n), vc.coords.y.clone()]]);
    let tr = match optimal_q(mp, &vc.coords.x, &vc.coords.y, &vc.hatted.c_hat) {
        Some(q) => (q.trace() - gamma_l + margin).max(0.0),
        None => 0.0,
    };
    let mut out: Vec<f64> = ra.iter().chain(rb.iter()).copied().collect();
    out.extend(definite_excess(&b.lqg_block1, margin, true).iter());
    out.extend(definite_excess(&b.hinf_block, margin, true).iter());
    out.extend(definite_excess(&xy, margin, false).iter());
    out.push(tr);
    out.iter().all(|v| v.is_finite()).then_some(out)
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

struct Solver<'a> {
    plant: &'a PlantModel,
    mp: ModifiedPlant,
    projector: AffineProjector,
    gamma_l: f64,
    gamma_inf: f64,
    margin: f64,
}

impl Solver<'_> {
    fn merit(&self, z: &RealMat) -> Merit {
        let n = self.mp.n();
        let lmi = read_variables(&self.mp, z)
            .map(|(_, vc)| lmi_violation(&self.mp, &vc, self.gamma_l, self.gamma_inf))
            .unwrap_or(f64::INFINITY);
        Merit { equality: self.projector.residual(z), rank: rank_residual(z, n), lmi }
    }

    fn objective(&self, vc: &VariableChange) -> f64 {
        residual_vector(&self.mp, vc, self.gamma_l, self.gamma_inf, self.margin).map_or(f64::INFINITY, |r| sq_norm(&r))
    }

    fn candidate(&self, z: RealMat, variables: Option<VariableChange>, initial: &Merit, iterations: usize, restart: usize) -> CandidateSolution {
        let merit = self.merit(&z);
        let variables = variables.or_else(|| read_variables(&self.mp, &z).ok().map(|(_, v)| v));
        let controller = variables.as_ref().and_then(|v| recover_controller(&self.mp, &v.hatted, &v.coords).ok());
        CandidateSolution {
            z,
            variables,
            controller,
            merit,
            initial_merit: initial.clone(),
            iterations,
            restart,
            converged: false,
        }
    }

    fn verified(&self, c: &CandidateSolution) -> bool {
        verify_candidate(c, self.plant, self.gamma_l, self.gamma_inf).is_ok_and(|r| r.pass)
    }

    /// Damped Gauss-Newton step with a central-difference Jacobian. The damping
    /// grows until the objective decreases, which acts as the line search.
    fn correction(&self, vc: &VariableChange, lambda: &mut f64) -> Option<VariableChange> {
        let theta = pack(vc);
        let r0 = residual_vector(&self.mp, vc, self.gamma_l, self.gamma_inf, self.margin)?;
        let f0 = sq_norm(&r0);
        let mut jac = RealMat::zeros(r0.len(), theta.len());
        for k in 0..theta.len() {
            let h = 1e-7 * theta[k].abs().max(1.0);
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[k] += h;
            tm[k] -= h;
            let eval = |t: &[f64]| {
                consistent(&self.mp, vc, t)
                    .and_then(|v| residual_vector(&self.mp, &v, self.gamma_l, self.gamma_inf, self.margin))
                    .filter(|r| r.len() == r0.len())
            };
            if let (Some(rp), Some(rm)) = (eval(&tp), eval(&tm)) {
                for (row, (a, b)) in rp.iter().zip(&rm).enumerate() {
                    jac[(row, k)] = (a - b) / (2.0 * h);
                }
            }
        }
        let r = nalgebra::DVector::from_vec(r0);
        let normal = jac.transpose() * &jac;
        let grad = jac.transpose() * r;
        let diag = RealMat::from_diagonal(&normal.diagonal().map(|d| d.max(1e-12)));
        for _ in 0..12 {
            let lhs = &normal + &diag * *lambda;
            if let Some(chol) = lhs.cholesky() {
                let delta = chol.solve(&(-&grad));
                let stepped: Vec<f64> = theta.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
                if let Some(next) = consistent(&self.mp, vc, &stepped) {
                    if self.objective(&next) < f0 {
                        *lambda = (*lambda / 3.0).max(1e-12);
                        return Some(next);
                    }
                }
            }
            *lambda *= 4.0;
        }
        None
    }

    fn run(&self, z0: RealMat, max_iterations: usize, restart: usize) -> CandidateSolution {
        let n = self.mp.n();
        let initial = self.merit(&z0);
        let first = self.candidate(z0.clone(), None, &initial, 0, restart);
        if self.verified(&first) {
            return CandidateSolution { converged: true, ..first };
        }
        let mut best = first;
        let Some(mut vc) = read_variables(&self.mp, &z0).ok().and_then(|(_, v)| consistent(&self.mp, &v, &pack(&v))) else {
            return best;
        };
        let mut z = z0;
        let mut lambda = 1e-3;
        let mut used = 0;
        for it in 1..=max_iterations {
            used = it;
            let zr = project_rank_psd(&self.projector.project(&z), n);
            if let Some(projected) = read_variables(&self.mp, &zr).ok().and_then(|(_, v)| consistent(&self.mp, &v, &pack(&v))) {
                if self.objective(&projected) < self.objective(&vc) {
                    vc = projected;
                }
            }
            match self.correction(&vc, &mut lambda) {
                Some(next) => vc = next,
                None if it > 1 => break,
                None => {}
            }
            let Ok(lift) = build_lifted(&self.mp, &vc) else { break };
            z = lift.z;
            let c = self.candidate(z.clone(), Some(vc.clone()), &initial, it, restart);
            if self.verified(&c) {
                return CandidateSolution { converged: true, ..c };
            }
            if c.merit.total() < best.merit.total() {
                best = c;
            }
        }
        CandidateSolution { iterations: used, ..best }
    }
}

fn random_lift(mp: &ModifiedPlant, plant: &PlantModel, rng: &mut ChaCha8Rng) -> Result<LiftedProblem> {
    let space = SearchSpace::for_plant(plant, SearchMode::PassiveOnly);
    for _ in 0..1000 {
        let params = space.sample(rng);
        let k = build_controller_from_slh(&space.params_to_slh(&params)?, space.dims)?;
        let Ok(cl) = assemble_closed_loop(plant, &k, None) else { continue };
        if !is_hurwitz(&cl.m) {
            continue;
        }
        if let Ok(vc) = lift_controller(mp, &k) {
            if let Ok(l) = build_lifted(mp, &vc) {
                return Ok(l);
            }
        }
    }
    Err(Error::NoFeasible)
}

/// Alternating projections between the lifted equalities and the rank-`n` PSD
/// set, each round followed by a damped correction of the recovered variables
/// toward realizability and LMI feasibility and an exact re-lift.
/// Restarts run independently; the first verified candidate in restart order wins.
pub fn alternating_projection_solve(
    plant: &PlantModel,
    gamma_l: f64,
    gamma_inf: f64,
    cfg: &LmiConfig,
) -> Result<CandidateSolution> {
    if !(gamma_l > 0.0 && gamma_inf > 0.0) {
        return Err(Error::Config("thresholds must be positive".into()));
    }
    if cfg.restarts == 0 {
        return Err(Error::Config("at least one restart is needed".into()));
    }
    let mp = build_modified_plant(plant)?;
    let cons = z_constraints(&mp)?;
    let solver = Solver {
        plant,
        projector: AffineProjector::new(&cons, mp.n()),
        mp,
        gamma_l,
        gamma_inf,
        margin: cfg.margin,
    };
    let starts: Vec<Result<RealMat>> = (0..cfg.restarts)
        .map(|r| match (&cfg.init, r) {
            (Some(k), 0) => Ok(build_lifted(&solver.mp, &lift_controller(&solver.mp, k)?)?.z),
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(r as u64);
                Ok(random_lift(&solver.mp, plant, &mut rng)?.z)
            }
        })
        .collect();
    let results: Vec<Option<CandidateSolution>> = cfg.execution.map(starts.len(), |r| {
        starts[r].as_ref().ok().map(|z0| solver.run(z0.clone(), cfg.max_iterations, r))
    });
    let mut done: Vec<CandidateSolution> = results.into_iter().flatten().collect();
    if done.is_empty() {
        return Err(starts.into_iter().find_map(|s| s.err()).unwrap_or(Error::NoFeasible));
    }
    if let Some(i) = done.iter().position(|c| c.converged) {
        return Ok(done.swap_remove(i));
    }
    let best = done
        .into_iter()
        .min_by(|a, b| a.merit.total().total_cmp(&b.merit.total()).then(a.restart.cmp(&b.restart)))
        .expect("non-empty");
    Err(Error::MaxIterations { iterations: cfg.max_iterations, best: Box::new(best) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;
    use num_complex::Complex64;

    fn cavity_controller() -> ControllerRealization {
        let mut p = crate::model::SlhParams::zeros(1, 3);
        p.c_minus = crate::model::ComplexMat::from_row_slice(
            3,
            1,
            &[Complex64::new(0.4, 0.1), Complex64::new(1.3, -0.2), Complex64::new(0.6, 0.3)],
        );
        p.omega_minus[(0, 0)] = Complex64::new(0.2, 0.0);
        build_controller_from_slh(&p, ChannelDims::for_plant(&registry::cavity())).unwrap()
    }

    #[test]
    fn modified_plant_structure() {
        let plant = registry::cavity();
        let mp = build_modified_plant(&plant).unwrap();
        let s = |x: f64| RealMat::identity(2, 2) * x;
        assert_eq!(mp.bw.columns(0, 2), s(-2.6f64.sqrt()));
        assert_eq!(mp.bw.columns(2, 2), s(-0.2f64.sqrt()));
        assert_eq!(mp.bw.columns(4, 2), s(-0.2f64.sqrt()));
        assert_eq!(mp.bw.columns(6, 2).norm(), 0.0);
        assert_eq!(mp.dw.view((0, 4), (2, 2)), s(1.0));
        assert_eq!(mp.dw.view((2, 6), (2, 2)), s(1.0));
        assert_eq!(mp.dw.view((4, 2), (2, 2)), plant.d21);
        assert_eq!(mp.to_plant(), plant);
        let dpa = registry::dpa();
        assert_eq!(build_modified_plant(&dpa).unwrap().to_plant(), dpa);
    }

    #[test]
    fn identity_change() {
        let mp = build_modified_plant(&registry::cavity()).unwrap();
        let k = cavity_controller();
        let c = Coordinates { x: zeros(2, 2), y: zeros(2, 2), xi: eye(2), sigma: eye(2) };
        let h = forward_change(&mp, &k, &c).unwrap();
        assert_eq!((&h.a_hat, &h.b_hat, &h.c_hat), (&k.ak, &k.bwk(), &k.ck));
        let back = recover_controller(&mp, &h, &c).unwrap();
        assert_eq!(back, k);
    }

    #[test]
    fn zero_controller_term_dropout() {
        let mp = build_modified_plant(&registry::dpa()).unwrap();
        let mut k = cavity_controller();
        k.bk1.fill(0.0);
        k.bk2.fill(0.0);
        k.bk3.fill(0.0);
        k.ck.fill(0.0);
        let x = RealMat::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.2]);
        let y = RealMat::from_row_slice(2, 2, &[0.5, -0.2, -0.2, 0.4]);
        let c = Coordinates::factor(x.clone(), y.clone()).unwrap();
        let h = forward_change(&mp, &k, &c).unwrap();
        let expect = &c.xi * &k.ak * c.sigma.transpose() + &y * &mp.a * &x;
        assert!((h.a_hat - expect).norm() < 1e-14);
    }

    #[test]
    fn factorization_is_checked() {
        let mp = build_modified_plant(&registry::cavity()).unwrap();
        let c = Coordinates { x: eye(2), y: eye(2), xi: eye(2), sigma: eye(2) };
        assert!(matches!(forward_change(&mp, &cavity_controller(), &c), Err(Error::ConstraintViolated { .. })));
        let singular = Coordinates { x: zeros(2, 2), y: zeros(2, 2), xi: zeros(2, 2), sigma: eye(2) };
        let h = Hatted { a_hat: eye(2), b_hat: zeros(2, 6), c_hat: zeros(2, 2) };
        assert!(matches!(recover_controller(&mp, &h, &singular), Err(Error::SingularTransform(_))));
    }

    #[test]
    fn balanced_factorization_for_ill_conditioned_targets() {
        let x = RealMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5]);
        let y = RealMat::from_row_slice(2, 2, &[1.0 - 1e-10, 0.0, 0.0, 0.3]);
        let c = Coordinates::factor(x, y).unwrap();
        assert!(c.factor_residual() < 1e-14);
        assert!(c.xi != eye(2));
    }

    #[test]
    fn lifted_controller_satisfies_everything() {
        let plant = registry::cavity();
        let mp = build_modified_plant(&plant).unwrap();
        let k = cavity_controller();
        let vc = lift_controller(&mp, &k).unwrap();
        let (ra, rb) = eval_linear_pr(&mp, &vc);
        assert!(ra < 1e-8 && rb < 1e-8, "{ra} {rb}");
        let back = recover_controller(&mp, &vc.hatted, &vc.coords).unwrap();
        assert!((back.ak - &k.ak).norm() < 1e-8);
        let lifted = build_lifted(&mp, &vc).unwrap();
        assert_eq!(lifted.block(0), eye(2));
        assert!(numerical_rank(&lifted.z) <= 2);
        let cons = z_constraints(&mp).unwrap();
        assert_eq!(cons.len(), 28);
        let worst = equality_residuals(&cons, &lifted.z, 2).into_iter().fold(0.0, f64::max);
        assert!(worst < 1e-10, "{worst}");
        let proj = AffineProjector::new(&cons, 2);
        assert!(proj.residual(&lifted.z) < 1e-10);
    }

    #[test]
    fn linear_pr_detects_broken_b1() {
        let mp = build_modified_plant(&registry::cavity()).unwrap();
        let mut vc = lift_controller(&mp, &cavity_controller()).unwrap();
        vc.hatted.b_hat.columns_mut(0, 2).fill(0.0);
        assert!(eval_linear_pr(&mp, &vc).1 > 1e-3);
        let zero = VariableChange {
            coords: Coordinates { x: zeros(2, 2), y: zeros(2, 2), xi: eye(2), sigma: eye(2) },
            hatted: Hatted { a_hat: zeros(2, 2), b_hat: zeros(2, 6), c_hat: zeros(2, 2) },
            q: zeros(2, 2),
        };
        assert_eq!(eval_linear_pr(&mp, &zero), (0.0, 0.0));
    }

    #[test]
    fn lmi_blocks_are_symmetric_and_zero_candidate_is_rejected() {
        let mp = build_modified_plant(&registry::cavity()).unwrap();
        let vc = lift_controller(&mp, &cavity_controller()).unwrap();
        let b = eval_lmi_blocks(&mp, &vc, 2.5, 0.5).unwrap();
        for m in [&b.lqg_block1, &b.lqg_block2, &b.hinf_block] {
            assert_eq!(m, &m.transpose());
        }
        let zero = VariableChange {
            coords: Coordinates { x: zeros(2, 2), y: zeros(2, 2), xi: eye(2), sigma: eye(2) },
            hatted: Hatted { a_hat: zeros(2, 2), b_hat: zeros(2, 6), c_hat: zeros(2, 2) },
            q: zeros(2, 2),
        };
        let z = eval_lmi_blocks(&mp, &zero, 2.5, 0.5).unwrap();
        assert!(!z.lqg_feasible() && !z.hinf_feasible());
    }

    #[test]
    fn rank_check_catches_extra_rank() {
        let plant = registry::cavity();
        let mp = build_modified_plant(&plant).unwrap();
        let vc = lift_controller(&mp, &cavity_controller()).unwrap();
        let lifted = build_lifted(&mp, &vc).unwrap();
        let mut z = lifted.z.clone();
        let mut e = RealMat::zeros(64, 1);
        e[(63, 0)] = 1.0;
        z += &e * e.transpose() * 1e-3 * lifted.z.norm();
        assert_eq!(numerical_rank(&z), 3);
        let cand = CandidateSolution {
            z,
            variables: None,
            controller: None,
            merit: Merit { equality: 0.0, rank: 0.0, lmi: 0.0 },
            initial_merit: Merit { equality: 0.0, rank: 0.0, lmi: 0.0 },
            iterations: 0,
            restart: 0,
            converged: false,
        };
        let r = verify_candidate(&cand, &plant, 100.0, 100.0).unwrap();
        assert!(!r.rank_pass && !r.pass);
    }

    #[test]
    fn projections_are_idempotent() {
        let mp = build_modified_plant(&registry::cavity()).unwrap();
        let cons = z_constraints(&mp).unwrap();
        let proj = AffineProjector::new(&cons, 2);
        let z = RealMat::from_fn(64, 64, |r, c| ((r * 7 + c * 3) % 11) as f64 / 11.0 - 0.5);
        let z = sym(&z);
        let p1 = proj.project(&z);
        assert!(proj.residual(&p1) < 1e-9);
        assert!((proj.project(&p1) - &p1).norm() < 1e-9);
        let r1 = project_rank_psd(&p1, 2);
        assert!(numerical_rank(&r1) <= 2);
        assert!((project_rank_psd(&r1, 2) - &r1).norm() < 1e-9 * r1.norm().max(1.0));
    }

    fn sequential(restarts: usize, iters: usize) -> LmiConfig {
        LmiConfig { restarts, max_iterations: iters, seed: 3, execution: Execution::Sequential, ..Default::default() }
    }

    #[test]
    fn exact_lift_is_a_fixed_point() {
        let plant = registry::cavity();
        let k = cavity_controller();
        let cfg = LmiConfig { init: Some(k.clone()), ..sequential(1, 5) };
        let c = alternating_projection_solve(&plant, 100.0, 100.0, &cfg).unwrap();
        assert!(c.converged && c.iterations == 0);
        assert!(c.merit.equality < 1e-8 && c.merit.rank < 1e-8);
        let back = c.controller.unwrap();
        assert!((back.ck - k.ck).norm() < 1e-8);
    }

    #[test]
    fn best_so_far_never_worse_than_start() {
        let plant = registry::cavity();
        match alternating_projection_solve(&plant, 1.0, 1e-4, &sequential(2, 3)) {
            Err(Error::MaxIterations { best, .. }) => {
                assert!(best.merit.total() <= best.initial_merit.total());
                assert!(!best.converged);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn verified_solution_beats_thresholds() {
        let plant = registry::cavity();
        if let Ok(c) = alternating_projection_solve(&plant, 2.5, 0.1, &sequential(3, 60)) {
            let r = verify_candidate(&c, &plant, 2.5, 0.1).unwrap();
            assert!(r.pass);
            assert!(r.hinf.unwrap() < 0.1 && r.j_lqg.unwrap() < 2.5);
        }
    }

    #[test]
    fn corrupted_b1_fails_only_realizability() {
        let plant = registry::cavity();
        let mp = build_modified_plant(&plant).unwrap();
        let mut vc = lift_controller(&mp, &cavity_controller()).unwrap();
        let good = build_lifted(&mp, &vc).unwrap();
        vc.hatted.b_hat[(0, 0)] += 0.3;
        let cand = CandidateSolution {
            z: good.z,
            variables: Some(vc),
            controller: None,
            merit: Merit { equality: 0.0, rank: 0.0, lmi: 0.0 },
            initial_merit: Merit { equality: 0.0, rank: 0.0, lmi: 0.0 },
            iterations: 0,
            restart: 0,
            converged: false,
        };
        let r = verify_candidate(&cand, &plant, 100.0, 100.0).unwrap();
        assert!(!r.pr_pass && !r.pass);
        assert!(r.equalities_pass && r.rank_pass);
    }

    #[test]
    fn invalid_thresholds_rejected() {
        let plant = registry::cavity();
        assert!(matches!(alternating_projection_solve(&plant, 0.0, 1.0, &sequential(1, 1)), Err(Error::Config(_))));
    }
}
