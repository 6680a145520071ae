//! Linear quantum system representations.
//!
//! An open oscillator system is given physically by its `(S, L, H)` parameters
//! ([`SlhParams`]). From those we build the annihilation-creation matrices
//! ([`AccrSystem`]) and then the real quadrature form ([`QuadratureSystem`])
//! in interleaved ordering `(q1, p1, q2, p2, ...)` with canonical commutation
//! matrix `Theta = diag(F, ..., F)`, `F = [0 1; -1 0]`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{complex_rows, opt_complex_rows, real_rows};

pub type RealMat = DMatrix<f64>;
pub type ComplexMat = DMatrix<Complex64>;

/// Frobenius threshold for the realizability identities.
pub const PR_TOL: f64 = 1e-9;
/// Largest imaginary part tolerated when truncating a quadrature image to real.
pub const IMAG_TOL: f64 = 1e-10;
/// Threshold below which a "plus" parameter counts as zero.
pub const PASSIVE_TOL: f64 = 1e-10;

const PARAM_TOL: f64 = 1e-9;

pub fn f_block() -> RealMat {
    RealMat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
}

/// `diag(F, ..., F)` with `modes` diagonal blocks.
pub fn diag_f(modes: usize) -> RealMat {
    let mut m = RealMat::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        m[(2 * k, 2 * k + 1)] = 1.0;
        m[(2 * k + 1, 2 * k)] = -1.0;
    }
    m
}

/// `J_k = diag(I_k, -I_k)`.
pub fn j_matrix(k: usize) -> ComplexMat {
    ComplexMat::from_fn(2 * k, 2 * k, |i, j| {
        if i != j {
            Complex64::new(0.0, 0.0)
        } else if i < k {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(-1.0, 0.0)
        }
    })
}

/// Doubled-up matrix `[U V; V# U#]`, `#` being entrywise conjugation.
pub fn doubled_up(u: &ComplexMat, v: &ComplexMat) -> Result<ComplexMat> {
    if u.shape() != v.shape() {
        return Err(Error::Dimension(format!(
            "doubled_up: U is {:?} but V is {:?}",
            u.shape(),
            v.shape()
        )));
    }
    let (r, k) = u.shape();
    let mut out = ComplexMat::zeros(2 * r, 2 * k);
    out.view_mut((0, 0), (r, k)).copy_from(u);
    out.view_mut((0, k), (r, k)).copy_from(v);
    out.view_mut((r, 0), (r, k)).copy_from(&v.map(|z| z.conj()));
    out.view_mut((r, k), (r, k)).copy_from(&u.map(|z| z.conj()));
    Ok(out)
}

/// `X^flat = J_M X^dagger J_N` for a `2N x 2M` matrix `X`.
pub fn flat(x: &ComplexMat) -> Result<ComplexMat> {
    let (r, c) = x.shape();
    if r % 2 != 0 || c % 2 != 0 {
        return Err(Error::Dimension(format!("flat: odd shape {r}x{c}")));
    }
    let (n, m) = (r / 2, c / 2);
    // J_M X^† J_N only flips signs, so do it entrywise.
    Ok(ComplexMat::from_fn(c, r, |i, j| {
        let s = if (i < m) == (j < n) { 1.0 } else { -1.0 };
        x[(j, i)].conj() * s
    }))
}

/// The unitary `Lambda_n = (1/sqrt 2) [I I; -iI iI]` with `n/2`-sized identities.
pub fn lambda_matrix(n: usize) -> Result<ComplexMat> {
    if !n.is_multiple_of(2) || n == 0 {
        return Err(Error::Dimension(format!("lambda_matrix: n = {n} must be positive and even")));
    }
    let h = n / 2;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ok(ComplexMat::from_fn(n, n, |i, j| {
        if i % h != j % h {
            return Complex64::new(0.0, 0.0);
        }
        match (i < h, j < h) {
            (true, _) => Complex64::new(s, 0.0),
            (false, true) => Complex64::new(0.0, -s),
            (false, false) => Complex64::new(0.0, s),
        }
    }))
}

/// Source index for each interleaved slot: `(q1..qN, p1..pN) -> (q1, p1, ..., qN, pN)`.
fn interleave(n: usize) -> Vec<usize> {
    let h = n / 2;
    (0..n).map(|i| if i % 2 == 0 { i / 2 } else { h + i / 2 }).collect()
}

/// Real quadrature image `Lambda_r X Lambda_c^dagger` of a doubled-up block,
/// reordered to interleaved quadratures on both axes.
pub fn quadrature_image(x: &ComplexMat) -> Result<RealMat> {
    let (r, c) = x.shape();
    let lr = lambda_matrix(r)?;
    let lc = lambda_matrix(c)?;
    let y = &lr * x * lc.adjoint();
    let (pr, pc) = (interleave(r), interleave(c));
    let mut residue = 0.0f64;
    let out = RealMat::from_fn(r, c, |i, j| {
        let z = y[(pr[i], pc[j])];
        residue = residue.max(z.im.abs());
        z.re
    });
    if residue > IMAG_TOL || !residue.is_finite() {
        return Err(Error::ImaginaryResidue { residue });
    }
    Ok(out)
}

/// Physical parameters of an open linear quantum system.
///
/// `L = C_minus a + C_plus a#` and `H = 1/2 a^dagger Delta(Omega_minus, Omega_plus) a`.
/// `k_minus`/`k_plus` describe an optional direct coupling to another system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlhParams {
    #[serde(with = "complex_rows")]
    pub s: ComplexMat,
    #[serde(with = "complex_rows")]
    pub c_minus: ComplexMat,
    #[serde(with = "complex_rows")]
    pub c_plus: ComplexMat,
    #[serde(with = "complex_rows")]
    pub omega_minus: ComplexMat,
    #[serde(with = "complex_rows")]
    pub omega_plus: ComplexMat,
    #[serde(default, with = "opt_complex_rows", skip_serializing_if = "Option::is_none")]
    pub k_minus: Option<ComplexMat>,
    #[serde(default, with = "opt_complex_rows", skip_serializing_if = "Option::is_none")]
    pub k_plus: Option<ComplexMat>,
}

impl SlhParams {
    /// All-zero parameters with `S = I`.
    pub fn zeros(modes: usize, channels: usize) -> Self {
        Self {
            s: ComplexMat::identity(channels, channels),
            c_minus: ComplexMat::zeros(channels, modes),
            c_plus: ComplexMat::zeros(channels, modes),
            omega_minus: ComplexMat::zeros(modes, modes),
            omega_plus: ComplexMat::zeros(modes, modes),
            k_minus: None,
            k_plus: None,
        }
    }

    pub fn modes(&self) -> usize {
        self.omega_minus.nrows()
    }

    pub fn channels(&self) -> usize {
        self.s.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.modes();
        let nw = self.channels();
        let bad = |what: &str| Err(Error::InvalidParams(what.to_string()));
        if n == 0 {
            return bad("system needs at least one mode");
        }
        if self.s.ncols() != nw {
            return Err(Error::Dimension(format!("S must be square, got {:?}", self.s.shape())));
        }
        for (name, m, shape) in [
            ("C_minus", &self.c_minus, (nw, n)),
            ("C_plus", &self.c_plus, (nw, n)),
            ("Omega_minus", &self.omega_minus, (n, n)),
            ("Omega_plus", &self.omega_plus, (n, n)),
        ] {
            if m.shape() != shape {
                return Err(Error::Dimension(format!("{name} is {:?}, expected {shape:?}", m.shape())));
            }
        }
        match (&self.k_minus, &self.k_plus) {
            (Some(a), Some(b)) if a.shape() != b.shape() => {
                return Err(Error::Dimension("K_minus and K_plus shapes differ".into()))
            }
            _ => {}
        }
        let all = [
            Some(&self.s),
            Some(&self.c_minus),
            Some(&self.c_plus),
            Some(&self.omega_minus),
            Some(&self.omega_plus),
            self.k_minus.as_ref(),
            self.k_plus.as_ref(),
        ];
        if all.iter().flatten().any(|m| m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
            return bad("non-finite entry");
        }
        if nw > 0 && (&self.s * self.s.adjoint() - ComplexMat::identity(nw, nw)).norm() > PARAM_TOL {
            return bad("S is not unitary");
        }
        if (&self.omega_minus - self.omega_minus.adjoint()).norm() > PARAM_TOL {
            return bad("Omega_minus is not Hermitian");
        }
        if (&self.omega_plus - self.omega_plus.transpose()).norm() > PARAM_TOL {
            return bad("Omega_plus is not symmetric");
        }
        Ok(())
    }
}

/// Annihilation-creation form `(A, B, C, D)` (all doubled-up, complex).
#[derive(Debug, Clone, PartialEq)]
pub struct AccrSystem {
    pub a: ComplexMat,
    pub b: ComplexMat,
    pub c: ComplexMat,
    pub d: ComplexMat,
}

pub fn build_accr_system(p: &SlhParams) -> Result<AccrSystem> {
    p.validate()?;
    let n = p.modes();
    let nw = p.channels();
    let c = doubled_up(&p.c_minus, &p.c_plus)?;
    let c_flat = flat(&c)?;
    let d = doubled_up(&p.s, &ComplexMat::zeros(nw, nw))?;
    let hamiltonian = doubled_up(&p.omega_minus, &p.omega_plus)?;
    let minus_i = Complex64::new(0.0, -1.0);
    let a = &c_flat * &c * Complex64::new(-0.5, 0.0) + j_matrix(n) * hamiltonian * minus_i;
    let b = -(&c_flat * &d);
    Ok(AccrSystem { a, b, c, d })
}

/// Real state-space form `dx = A x dt + B dw`, `dy = C x dt + D dw`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSystem {
    #[serde(with = "real_rows")]
    pub a: RealMat,
    #[serde(with = "real_rows")]
    pub b: RealMat,
    #[serde(with = "real_rows")]
    pub c: RealMat,
    #[serde(with = "real_rows")]
    pub d: RealMat,
    #[serde(with = "real_rows")]
    pub theta: RealMat,
}

impl QuadratureSystem {
    pub fn from_slh(p: &SlhParams) -> Result<Self> {
        accr_to_quadrature(&build_accr_system(p)?)
    }
}

pub fn accr_to_quadrature(sys: &AccrSystem) -> Result<QuadratureSystem> {
    let n = sys.a.nrows();
    if sys.a.ncols() != n
        || sys.b.nrows() != n
        || sys.c.ncols() != n
        || sys.d.nrows() != sys.c.nrows()
        || sys.d.ncols() != sys.b.ncols()
    {
        return Err(Error::Dimension("inconsistent annihilation-creation matrices".into()));
    }
    Ok(QuadratureSystem {
        a: quadrature_image(&sys.a)?,
        b: quadrature_image(&sys.b)?,
        c: quadrature_image(&sys.c)?,
        d: quadrature_image(&sys.d)?,
        theta: diag_f(n / 2),
    })
}

/// Residuals of the three realizability identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrReport {
    pub residual_dyn: f64,
    pub residual_out: f64,
    pub residual_feed: f64,
    pub pass: bool,
}

/// Checks `A Theta + Theta A^T + B diag(F) B^T = 0`, `B [I; 0] = Theta C^T diag(F)`
/// and `D = [I 0]`. The first `n_y` input columns are taken to be the channels
/// that produce the outputs.
pub fn check_physical_realizability(q: &QuadratureSystem) -> PrReport {
    check_physical_realizability_tol(q, PR_TOL)
}

pub fn check_physical_realizability_tol(q: &QuadratureSystem, tol: f64) -> PrReport {
    let n = q.a.nrows();
    let nw = q.b.ncols();
    let ny = q.c.nrows();
    let shapes_ok = q.a.ncols() == n
        && q.b.nrows() == n
        && q.c.ncols() == n
        && q.d.shape() == (ny, nw)
        && q.theta.shape() == (n, n)
        && nw.is_multiple_of(2)
        && ny.is_multiple_of(2)
        && ny <= nw;
    if !shapes_ok {
        return PrReport {
            residual_dyn: f64::INFINITY,
            residual_out: f64::INFINITY,
            residual_feed: f64::INFINITY,
            pass: false,
        };
    }
    let th = &q.theta;
    let residual_dyn = (&q.a * th + th * q.a.transpose() + &q.b * diag_f(nw / 2) * q.b.transpose()).norm();
    let residual_out = (q.b.columns(0, ny) - th * q.c.transpose() * diag_f(ny / 2)).norm();
    let residual_feed = (&q.d - RealMat::identity(ny, nw)).norm();
    let pass = residual_dyn < tol && residual_out < tol && residual_feed < tol;
    PrReport { residual_dyn, residual_out, residual_feed, pass }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PassivityClass {
    Passive,
    NonPassive,
}

pub fn classify(p: &SlhParams) -> PassivityClass {
    let k_plus = p.k_plus.as_ref().map_or(0.0, |k| k.norm());
    if p.c_plus.norm() < PASSIVE_TOL && p.omega_plus.norm() < PASSIVE_TOL && k_plus < PASSIVE_TOL {
        PassivityClass::Passive
    } else {
        PassivityClass::NonPassive
    }
}

/// Drift blocks of a direct coupling: `B12 = -Delta(K-, K+)^flat`, `B21 = Delta(K-, K+)`.
pub fn direct_coupling_blocks(k_minus: &ComplexMat, k_plus: &ComplexMat) -> Result<(ComplexMat, ComplexMat)> {
    let b21 = doubled_up(k_minus, k_plus)?;
    let b12 = -flat(&b21)?;
    Ok((b12, b21))
}
