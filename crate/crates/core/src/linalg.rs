//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Schur, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue cut-off used by the symmetric pseudo-inverse.
pub const PINV_TOL: f64 = 1e-12;

/// Iteration cap for the eigenvalue decompositions, which otherwise may
/// cycle forever on some inputs.
const EIG_MAX_ITER: usize = 10_000;

fn sym_eigen(mut s: DMatrix<f64>) -> Option<SymmetricEigen<f64, nalgebra::Dyn>> {
    symmetrize(&mut s);
    if !all_finite(&s) {
        return None;
    }
    SymmetricEigen::try_new(s, f64::EPSILON, EIG_MAX_ITER)
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let k = m.nrows();
    for i in 0..k {
        for j in (i + 1)..k {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Inverse of a symmetric positive semidefinite matrix together with its
/// log (pseudo-)determinant.
///
/// Uses Cholesky when the matrix is numerically positive definite and falls
/// back to an eigenvalue pseudo-inverse otherwise; eigenvalues below
/// `PINV_TOL * max_eigenvalue` are treated as zero.
#[derive(Debug, Clone)]
pub struct SpdInverse {
    pub inverse: DMatrix<f64>,
    pub log_det: f64,
    pub pseudo: bool,
}

pub fn spd_inverse(a: &DMatrix<f64>) -> Result<SpdInverse> {
    if !all_finite(a) {
        return Err(Error::numerical("non-finite matrix passed to SPD inverse"));
    }
    if a.nrows() == 0 {
        return Ok(SpdInverse { inverse: a.clone(), log_det: 0.0, pseudo: false });
    }
    if let Some(chol) = Cholesky::new(a.clone()) {
        let l = chol.l_dirty();
        let log_det = 2.0 * (0..a.nrows()).map(|i| crate::math::ln(l[(i, i)])).sum::<f64>();
        if log_det.is_finite() {
            let mut inverse = chol.inverse();
            symmetrize(&mut inverse);
            return Ok(SpdInverse { inverse, log_det, pseudo: false });
        }
    }
    let (inverse, log_det) = sym_pinv(a)?;
    Ok(SpdInverse { inverse, log_det, pseudo: true })
}

/// Symmetric pseudo-inverse and log pseudo-determinant.
pub fn sym_pinv(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let eig = sym_eigen(a.clone()).ok_or_else(|| Error::numerical("symmetric eigendecomposition did not converge"))?;
    let max = eig.eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if !(max.is_finite()) || max == 0.0 {
        return Err(Error::numerical("singular matrix with no positive eigenvalue"));
    }
    let cut = PINV_TOL * max;
    let k = a.nrows();
    let mut inv = DMatrix::zeros(k, k);
    let mut log_det = 0.0;
    for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > cut {
            let v = eig.eigenvectors.column(idx);
            inv += (v * v.transpose()) / lambda;
            log_det += crate::math::ln(lambda);
        }
    }
    Ok((inv, log_det))
}

/// Solves `a x = b` for symmetric positive (semi)definite `a`.
pub fn spd_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = Cholesky::new(a.clone()) {
        let x = chol.solve(b);
        if x.iter().all(|v| v.is_finite()) {
            return Ok(x);
        }
    }
    let (inv, _) = sym_pinv(a)?;
    Ok(inv * b)
}

/// Smallest eigenvalue of the symmetric part; NaN if the decomposition fails.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    match sym_eigen(a.clone()) {
        Some(eig) => eig.eigenvalues.iter().fold(f64::INFINITY, |acc, &v| acc.min(v)),
        None => f64::NAN,
    }
}

/// Largest eigenvalue modulus of a square matrix; infinite for non-finite
/// input.
///
/// When the Schur iteration does not converge the radius is taken from
/// Gelfand's formula `||A^k||^(1/k)` with `k = 2^60`, built by normalised
/// repeated squaring.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    if !all_finite(a) {
        return f64::INFINITY;
    }
    match Schur::try_new(a.clone(), f64::EPSILON, EIG_MAX_ITER) {
        Some(schur) => schur.complex_eigenvalues().iter().fold(0.0_f64, |acc, z| acc.max(libm::hypot(z.re, z.im))),
        None => gelfand_radius(a),
    }
}

fn gelfand_radius(a: &DMatrix<f64>) -> f64 {
    // a^(2^k) = exp(log_scale) * b with ||b|| = 1
    let mut b = a.clone();
    let mut log_scale = 0.0;
    let mut power = 1.0;
    for _ in 0..=60 {
        let s = b.norm();
        if s == 0.0 {
            return 0.0;
        }
        b /= s;
        log_scale += crate::math::ln(s) / power;
        b = &b * &b;
        power *= 2.0;
    }
    crate::math::exp(log_scale)
}

/// Solves the discrete Lyapunov equation `X = A X A' + Q` by squaring.
///
/// Returns `None` unless `A` is stable (spectral radius below one).
pub fn discrete_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if spectral_radius(a) >= 1.0 {
        return None;
    }
    let mut x = q.clone();
    let mut ak = a.clone();
    for _ in 0..64 {
        let step = &ak * &x * ak.transpose();
        let done = step.amax() <= 1e-15 * x.amax().max(1e-300);
        x += step;
        if done {
            break;
        }
        ak = &ak * &ak;
    }
    symmetrize(&mut x);
    all_finite(&x).then_some(x)
}

/// Companion matrix for coefficient blocks `psi = [A_1 ... A_p]` (n x np).
pub fn companion(psi: &DMatrix<f64>) -> DMatrix<f64> {
    let n = psi.nrows();
    let np = psi.ncols();
    let mut c = DMatrix::zeros(np, np);
    c.view_mut((0, 0), (n, np)).copy_from(psi);
    for r in n..np {
        c[(r, r - n)] = 1.0;
    }
    c
}
