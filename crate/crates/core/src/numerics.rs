//! Dense kernels: eigenvalues, Lyapunov solves, H-infinity norm by Hamiltonian
//! bisection, definiteness tests and Riccati residuals.
//!
//! Every problem in this crate is at most a few dozen states, so everything is
//! dense and favours simple, deterministic algorithms.

use nalgebra::{Schur, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::real_rows;
use crate::model::{ComplexMat, RealMat};

/// Hurwitz iff the spectral abscissa is below this.
pub const HURWITZ_MARGIN: f64 = -1e-12;
/// An eigenvalue of the bisection Hamiltonian closer than this to the imaginary axis counts as on it.
pub const IMAG_AXIS_TOL: f64 = 1e-8;
pub const DEFINITE_TOL: f64 = 1e-10;
pub const DEFAULT_HINF_TOL: f64 = 1e-10;

/// Eigenvalues of a real square matrix (real Schur form, Francis QR).
pub fn eigenvalues(m: &RealMat) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("eigenvalues of a {:?} matrix", m.shape())));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigenNoConvergence);
    }
    // The Francis iteration has no exceptional shifts and can cycle on
    // near-repeated pairs; a looser deflation test or an orthogonal
    // similarity breaks the cycle.
    for eps in [f64::EPSILON, 8.0 * f64::EPSILON, 256.0 * f64::EPSILON] {
        if let Some(schur) = Schur::try_new(m.clone(), eps, 2000 * n) {
            return Ok(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    let q = fixed_rotation(n);
    let rotated = q.transpose() * m * &q;
    let schur = Schur::try_new(rotated, 256.0 * f64::EPSILON, 4000 * n).ok_or(Error::EigenNoConvergence)?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Deterministic dense orthogonal matrix.
fn fixed_rotation(n: usize) -> RealMat {
    let seed = RealMat::from_fn(n, n, |i, j| ((i * 31 + j * 17 + 7) % 13) as f64 / 13.0 - 0.5 + if i == j { 1.0 } else { 0.0 });
    seed.qr().q()
}

/// Largest real part over the spectrum. Non-convergence maps to `+inf`.
pub fn spectral_abscissa(m: &RealMat) -> f64 {
    match eigenvalues(m) {
        Ok(ev) => ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
        Err(_) => f64::INFINITY,
    }
}

pub fn is_hurwitz(m: &RealMat) -> bool {
    spectral_abscissa(m) < HURWITZ_MARGIN
}

fn ensure_hurwitz(m: &RealMat) -> Result<()> {
    let abscissa = spectral_abscissa(m);
    if abscissa < HURWITZ_MARGIN {
        Ok(())
    } else {
        Err(Error::NotHurwitz { abscissa })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSolution {
    #[serde(with = "real_rows")]
    pub p: RealMat,
    pub residual: f64,
}

/// Solves `M P + P M^T + Q = 0` through the Kronecker form
/// `(I (x) M + M (x) I) vec(P) = -vec(Q)`.
pub fn solve_lyapunov(m: &RealMat, q: &RealMat) -> Result<LyapunovSolution> {
    let n = m.nrows();
    if !m.is_square() || q.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "lyapunov: M is {:?}, Q is {:?}",
            m.shape(),
            q.shape()
        )));
    }
    ensure_hurwitz(m)?;
    let eye = RealMat::identity(n, n);
    let kron = eye.kronecker(m) + m.kronecker(&eye);
    // Column-major storage makes the vectorization a plain reshape.
    let rhs = nalgebra::DVector::from_iterator(n * n, q.iter().map(|x| -x));
    let sol = kron
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SingularSystem("Kronecker Lyapunov operator".into()))?;
    if sol.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularSystem("Kronecker Lyapunov operator".into()));
    }
    let p = RealMat::from_column_slice(n, n, sol.as_slice());
    let p = (&p + p.transpose()) * 0.5;
    let residual = (m * &p + &p * m.transpose() + q).norm();
    Ok(LyapunovSolution { p, residual })
}

fn sigma_max(m: &ComplexMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// `sigma_max(Gamma (i w I - M)^{-1} H)`.
pub fn frequency_gain(m: &RealMat, h: &RealMat, gamma: &RealMat, omega: f64) -> Result<f64> {
    let n = m.nrows();
    let shift = ComplexMat::from_fn(n, n, |i, j| {
        let d = if i == j { Complex64::new(0.0, omega) } else { Complex64::new(0.0, 0.0) };
        d - Complex64::new(m[(i, j)], 0.0)
    });
    let hc = h.map(|x| Complex64::new(x, 0.0));
    let x = shift
        .lu()
        .solve(&hc)
        .ok_or_else(|| Error::SingularSystem("resolvent at evaluation frequency".into()))?;
    Ok(sigma_max(&(gamma.map(|x| Complex64::new(x, 0.0)) * x)))
}

/// True when the scaled bounded-real Hamiltonian has an eigenvalue on the imaginary axis,
/// i.e. when `level` does not exceed the H-infinity norm.
fn hamiltonian_touches_axis(m: &RealMat, hht: &RealMat, gtg: &RealMat, level: f64) -> Result<bool> {
    let n = m.nrows();
    let mut ham = RealMat::zeros(2 * n, 2 * n);
    ham.view_mut((0, 0), (n, n)).copy_from(m);
    ham.view_mut((0, n), (n, n)).copy_from(&(hht / level));
    ham.view_mut((n, 0), (n, n)).copy_from(&(gtg / -level));
    ham.view_mut((n, n), (n, n)).copy_from(&(-m.transpose()));
    Ok(eigenvalues(&ham)?.iter().any(|z| z.re.abs() < IMAG_AXIS_TOL))
}

/// H-infinity norm of `Gamma (sI - M)^{-1} H` by bisection on the Hamiltonian
/// `[[M, H H^T / g], [-Gamma^T Gamma / g, -M^T]]`.
pub fn hinf_norm(m: &RealMat, h: &RealMat, gamma: &RealMat, tol: f64) -> Result<f64> {
    let n = m.nrows();
    if !m.is_square() || h.nrows() != n || gamma.ncols() != n {
        return Err(Error::Dimension(format!(
            "hinf_norm: M {:?}, H {:?}, Gamma {:?}",
            m.shape(),
            h.shape(),
            gamma.shape()
        )));
    }
    let eig = eigenvalues(m)?;
    let abscissa = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if abscissa >= HURWITZ_MARGIN {
        return Err(Error::NotHurwitz { abscissa });
    }
    if h.norm() == 0.0 || gamma.norm() == 0.0 {
        return Ok(0.0);
    }
    let hht = h * h.transpose();
    let gtg = gamma.transpose() * gamma;

    // Gains at DC and at the modal frequencies are valid lower bounds.
    let mut lo = frequency_gain(m, h, gamma, 0.0)?;
    for z in &eig {
        lo = lo.max(frequency_gain(m, h, gamma, z.im.abs())?);
    }
    let mut hi = (gamma.norm() * h.norm() / abscissa.abs()).max(2.0 * lo).max(f64::MIN_POSITIVE);
    let mut doublings = 0;
    while hamiltonian_touches_axis(m, &hht, &gtg, hi)? {
        lo = lo.max(hi);
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 || !hi.is_finite() {
            return Err(Error::SingularSystem("H-infinity upper bracket diverged".into()));
        }
    }
    while hi - lo >= tol * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if hamiltonian_touches_axis(m, &hht, &gtg, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn sym_eigenvalues(x: &RealMat) -> nalgebra::DVector<f64> {
    let s = (x + x.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues
}

pub fn max_sym_eigenvalue(x: &RealMat) -> f64 {
    sym_eigenvalues(x).max()
}

pub fn min_sym_eigenvalue(x: &RealMat) -> f64 {
    sym_eigenvalues(x).min()
}

pub fn is_negative_definite(x: &RealMat) -> bool {
    x.is_square() && x.nrows() > 0 && max_sym_eigenvalue(x) < -DEFINITE_TOL
}

pub fn is_positive_definite(x: &RealMat) -> bool {
    x.is_square() && x.nrows() > 0 && min_sym_eigenvalue(x) > DEFINITE_TOL
}

/// Data of the Riccati pair that characterizes H-infinity controller existence.
/// `E1 = D12^T D12` and `E2 = D21 D21^T` must be positive definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiccatiInputs {
    #[serde(with = "real_rows")]
    pub a: RealMat,
    #[serde(with = "real_rows")]
    pub b1: RealMat,
    #[serde(with = "real_rows")]
    pub b2: RealMat,
    #[serde(with = "real_rows")]
    pub c1: RealMat,
    #[serde(with = "real_rows")]
    pub c2: RealMat,
    #[serde(with = "real_rows")]
    pub d12: RealMat,
    #[serde(with = "real_rows")]
    pub d21: RealMat,
    pub gamma_inf: f64,
}

impl RiccatiInputs {
    pub fn e1(&self) -> RealMat {
        self.d12.transpose() * &self.d12
    }

    pub fn e2(&self) -> RealMat {
        &self.d21 * self.d21.transpose()
    }

    fn check(&self) -> Result<()> {
        let n = self.a.nrows();
        let ok = self.a.is_square()
            && self.b1.nrows() == n
            && self.b2.nrows() == n
            && self.c1.ncols() == n
            && self.c2.ncols() == n
            && self.d12.nrows() == self.c1.nrows()
            && self.d12.ncols() == self.b2.ncols()
            && self.d21.nrows() == self.c2.nrows()
            && self.d21.ncols() == self.b1.ncols();
        if !ok {
            return Err(Error::Dimension("inconsistent Riccati data".into()));
        }
        if !(self.gamma_inf > 0.0) {
            return Err(Error::InvalidParams("gamma_inf must be positive".into()));
        }
        if !is_positive_definite(&self.e1()) || !is_positive_definite(&self.e2()) {
            return Err(Error::InvalidParams("E1 and E2 must be positive definite".into()));
        }
        Ok(())
    }

    /// Left-hand side of the X equation at the candidate `x`.
    pub fn x_residual(&self, x: &RealMat) -> Result<RealMat> {
        self.check()?;
        let n = self.a.nrows();
        if x.shape() != (n, n) {
            return Err(Error::Dimension("X candidate".into()));
        }
        let e1_inv = self.e1().try_inverse().ok_or_else(|| Error::SingularSystem("E1".into()))?;
        let g2 = self.gamma_inf * self.gamma_inf;
        let ax = &self.a - &self.b2 * &e1_inv * self.d12.transpose() * &self.c1;
        let quad = &self.b1 * self.b1.transpose() - &self.b2 * &e1_inv * self.b2.transpose() * g2;
        let m = self.d12.nrows();
        let cons = self.c1.transpose()
            * (RealMat::identity(m, m) - &self.d12 * &e1_inv * self.d12.transpose())
            * &self.c1
            / g2;
        Ok(ax.transpose() * x + x * &ax + x * quad * x + cons)
    }

    /// Left-hand side of the Y equation at the candidate `y`.
    pub fn y_residual(&self, y: &RealMat) -> Result<RealMat> {
        self.check()?;
        let n = self.a.nrows();
        if y.shape() != (n, n) {
            return Err(Error::Dimension("Y candidate".into()));
        }
        let e2_inv = self.e2().try_inverse().ok_or_else(|| Error::SingularSystem("E2".into()))?;
        let g2 = self.gamma_inf * self.gamma_inf;
        let ay = &self.a - &self.b1 * self.d21.transpose() * &e2_inv * &self.c2;
        let quad = self.c1.transpose() * &self.c1 / g2 - self.c2.transpose() * &e2_inv * &self.c2;
        let k = self.d21.ncols();
        let cons = &self.b1
            * (RealMat::identity(k, k) - self.d21.transpose() * &e2_inv * &self.d21)
            * self.b1.transpose();
        Ok(&ay * y + y * ay.transpose() + y * quad * y + cons)
    }
}

pub fn riccati_residuals(r: &RiccatiInputs, x: &RealMat, y: &RealMat) -> Result<(RealMat, RealMat)> {
    Ok((r.x_residual(x)?, r.y_residual(y)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(r: usize, c: usize, v: &[f64]) -> RealMat {
        RealMat::from_row_slice(r, c, v)
    }

    #[test]
    fn lyapunov_scalar_balance() {
        let s = solve_lyapunov(&(RealMat::identity(2, 2) * -0.5), &(RealMat::identity(2, 2) * 0.5)).unwrap();
        assert!((s.p - RealMat::identity(2, 2) * 0.5).norm() < 1e-14);
        assert!(s.residual < 1e-14);
    }

    #[test]
    fn lyapunov_rejects_unstable() {
        let a = m(2, 2, &[0.1, 0.0, 0.0, -1.0]);
        assert!(matches!(
            solve_lyapunov(&a, &RealMat::identity(2, 2)),
            Err(Error::NotHurwitz { .. })
        ));
    }

    #[test]
    fn abscissa_examples() {
        let neg = RealMat::identity(3, 3) * -1.0;
        assert!((spectral_abscissa(&neg) + 1.0).abs() < 1e-14);
        assert!(is_hurwitz(&neg));
        let rot = m(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(spectral_abscissa(&rot).abs() < 1e-14);
        assert!(!is_hurwitz(&rot));
        // Cavity drift next to a zero controller block is only marginally stable.
        let mut blk = RealMat::zeros(4, 4);
        blk.view_mut((0, 0), (2, 2)).copy_from(&(RealMat::identity(2, 2) * -1.5));
        assert!(spectral_abscissa(&blk).abs() < 1e-14);
        assert!(!is_hurwitz(&blk));
    }

    #[test]
    fn eigenvalues_of_companion_matrix() {
        // roots of (s+1)(s+2)(s^2+2s+5): -1, -2, -1 +- 2i
        let c = m(4, 4, &[-5.0, -13.0, -19.0, -10.0, 1.0, 0., 0., 0., 0., 1., 0., 0., 0., 0., 1., 0.]);
        let ev = eigenvalues(&c).unwrap();
        assert_eq!(ev.len(), 4);
        let expect = [
            Complex64::new(-2.0, 0.0),
            Complex64::new(-1.0, -2.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(-1.0, 2.0),
        ];
        for b in expect {
            let d = ev.iter().map(|a| (a - b).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-10, "{b} missing from {ev:?}");
        }
    }

    #[test]
    fn hinf_first_order_and_dc_gain() {
        let one = m(1, 1, &[1.0]);
        let v = hinf_norm(&m(1, 1, &[-1.0]), &one, &one, 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "{v}");
        for a in [0.3, 2.0, 7.5] {
            let i2 = RealMat::identity(2, 2);
            let v = hinf_norm(&(&i2 * -a), &i2, &i2, 1e-12).unwrap();
            assert!((v - 1.0 / a).abs() < 1e-10 / a, "{v} vs {}", 1.0 / a);
        }
        let v = hinf_norm(&m(1, 1, &[-1.0]), &one, &m(1, 1, &[0.2f64.sqrt()]), 1e-12).unwrap();
        assert!((v - 0.2f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn hinf_resonant_peak() {
        // Lightly damped oscillator: peak gain 1 / (2 zeta sqrt(1 - zeta^2)) for w_n = 1.
        let zeta: f64 = 0.05;
        let a = m(2, 2, &[0.0, 1.0, -1.0, -2.0 * zeta]);
        let b = m(2, 1, &[0.0, 1.0]);
        let c = m(1, 2, &[1.0, 0.0]);
        let v = hinf_norm(&a, &b, &c, 1e-12).unwrap();
        let expect = 1.0 / (2.0 * zeta * (1.0 - zeta * zeta).sqrt());
        assert!((v - expect).abs() / expect < 1e-9, "{v} vs {expect}");
    }

    #[test]
    fn hinf_rejects_unstable() {
        let one = m(1, 1, &[1.0]);
        assert!(matches!(hinf_norm(&one, &one, &one, 1e-9), Err(Error::NotHurwitz { .. })));
    }

    #[test]
    fn definiteness_examples() {
        let i = RealMat::identity(2, 2);
        assert!(is_negative_definite(&-&i));
        assert!(!is_positive_definite(&-&i));
        let z = RealMat::zeros(2, 2);
        assert!(!is_negative_definite(&z) && !is_positive_definite(&z));
        let d = m(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(!is_negative_definite(&d) && !is_positive_definite(&d));
    }

    fn riccati_example(delta: f64, gamma_inf: f64) -> RiccatiInputs {
        let i2 = RealMat::identity(2, 2);
        RiccatiInputs {
            a: m(2, 2, &[-0.445, 0.0, 0.0, -0.455]),
            b1: &i2 * -(0.2f64.sqrt()),
            b2: &i2 * -(0.2f64.sqrt()),
            c1: &i2 * 0.2f64.sqrt(),
            c2: &i2 * 0.5f64.sqrt(),
            d12: i2.clone(),
            d21: &i2 * delta,
            gamma_inf,
        }
    }

    #[test]
    fn riccati_zero_candidates_leave_constant_terms() {
        let r = riccati_example(0.1, 0.7);
        let z = RealMat::zeros(2, 2);
        let (rx, ry) = riccati_residuals(&r, &z, &z).unwrap();
        let e1i = r.e1().try_inverse().unwrap();
        let e2i = r.e2().try_inverse().unwrap();
        let i2 = RealMat::identity(2, 2);
        let cx = r.c1.transpose() * (&i2 - &r.d12 * e1i * r.d12.transpose()) * &r.c1 / (0.7 * 0.7);
        let cy = &r.b1 * (&i2 - r.d21.transpose() * e2i * &r.d21) * r.b1.transpose();
        assert!((rx - cx).norm() < 1e-15);
        assert!((ry - cy).norm() < 1e-15);
    }

    #[test]
    fn riccati_requires_definite_e() {
        let mut r = riccati_example(0.1, 1.0);
        r.d21 = RealMat::zeros(2, 2);
        assert!(r.y_residual(&RealMat::zeros(2, 2)).is_err());
    }
}
