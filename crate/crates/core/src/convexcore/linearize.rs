//! First-order surrogates used by the successive approximation loops, and
//! small Hermitian-matrix helpers.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::channel::{CMatrix, CVector};

/// Affine minorant `S -> ||S0||_2 + tr(u u^H (S - S0))` of the spectral norm,
/// built at `S0` with `u` its leading unit eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralLowerBound {
    pub norm_at_prev: f64,
    pub u: CVector,
    /// `u^H S0 u`.
    pub quad_at_prev: f64,
}

impl SpectralLowerBound {
    pub fn eval(&self, s: &CMatrix) -> f64 {
        self.norm_at_prev + quad(&self.u, s) - self.quad_at_prev
    }

    /// `u u^H`, the gradient of the bound.
    pub fn gradient(&self) -> CMatrix {
        &self.u * self.u.adjoint()
    }
}

fn quad(u: &CVector, s: &CMatrix) -> f64 {
    u.dotc(&(s * u)).re
}

/// Leading eigenpair of a Hermitian matrix. Ties go to the lowest index of the
/// decomposition's output, which is deterministic for a given input.
pub fn leading_eigenpair(s: &CMatrix) -> (f64, CVector) {
    let eig = SymmetricEigen::new(hermitian_part(s));
    let mut best = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    (eig.eigenvalues[best], eig.eigenvectors.column(best).into_owned())
}

pub fn linearize_spectral_norm(s_prev: &CMatrix) -> SpectralLowerBound {
    let (_, u) = leading_eigenpair(s_prev);
    let quad_at_prev = quad(&u, s_prev);
    SpectralLowerBound {
        norm_at_prev: spectral_norm(s_prev),
        u,
        quad_at_prev,
    }
}

/// Largest singular value of a Hermitian matrix.
pub fn spectral_norm(s: &CMatrix) -> f64 {
    SymmetricEigen::new(hermitian_part(s))
        .eigenvalues
        .iter()
        .fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// `(S + S^H) / 2`.
pub fn hermitian_part(s: &CMatrix) -> CMatrix {
    (s + s.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Relative rank-one gap `(tr S - ||S||_2) / max(tr S, 1e-12)`.
pub fn rank_gap(s: &CMatrix) -> f64 {
    let tr = s.trace().re;
    (tr - spectral_norm(s)) / tr.max(1e-12)
}

/// Real symmetric embedding `[Re -Im; Im Re]`.
pub fn real_embedding(s: &CMatrix) -> DMatrix<f64> {
    let m = s.nrows();
    DMatrix::from_fn(2 * m, 2 * m, |p, q| match (p < m, q < m) {
        (true, true) => s[(p, q)].re,
        (false, false) => s[(p - m, q - m)].re,
        (false, true) => s[(p - m, q)].im,
        (true, false) => -s[(p, q - m)].im,
    })
}

/// Coefficients `(c_d, c_t, c_0)` of the expansion of `c d / (T - t)` at
/// `(d0, t0)`, so the surrogate is `c_d d + c_t t + c_0`.
pub fn taylor_ratio_coeffs(d0: f64, t0: f64, c: f64, t_total: f64) -> (f64, f64, f64) {
    let w0 = t_total - t0;
    let c_d = c / w0;
    let c_t = c * d0 / (w0 * w0);
    let c_0 = c * d0 / w0 - c_d * d0 - c_t * t0;
    (c_d, c_t, c_0)
}

/// `c d0/(T-t0) + c/(T-t0) (d-d0) + c d0/(T-t0)^2 (t-t0)`.
pub fn taylor_ratio_upper(d0: f64, t0: f64, d: f64, t: f64, c: f64, t_total: f64) -> f64 {
    let w0 = t_total - t0;
    c * d0 / w0 + c / w0 * (d - d0) + c * d0 / (w0 * w0) * (t - t0)
}

/// Coefficients `(c_d, c_t, c_0)` of the expansion of `c d / t` at `(d0, t0)`.
pub fn taylor_ratio_mec_coeffs(d0: f64, t0: f64, c: f64) -> (f64, f64, f64) {
    let c_d = c / t0;
    let c_t = -c * d0 / (t0 * t0);
    let c_0 = c * d0 / t0 - c_d * d0 - c_t * t0;
    (c_d, c_t, c_0)
}

/// `c d0/t0 + c/t0 (d-d0) - c d0/t0^2 (t-t0)`.
pub fn taylor_ratio_upper_mec(d0: f64, t0: f64, d: f64, t: f64, c: f64) -> f64 {
    c * d0 / t0 + c / t0 * (d - d0) - c * d0 / (t0 * t0) * (t - t0)
}
