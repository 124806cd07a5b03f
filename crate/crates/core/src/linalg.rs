//! Dense linear-algebra helpers shared by the GP and Lyapunov modules.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Smallest eigenvalue admitted for every learned positive-definite matrix.
pub const EIGEN_FLOOR: f64 = 0.01;

/// Refinement sweeps applied after the Cholesky solve. Noise-free kernel
/// matrices are close to singular, and a couple of sweeps bring the residual
/// down to the level the interpolation guarantees need.
const REFINEMENT_STEPS: usize = 3;

/// Cholesky factorization of `A + jitter * I` for a symmetric matrix `A`.
#[derive(Clone, Debug)]
pub struct SpdFactor {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    /// Factorizes `a + jitter * I`. `hint` is appended to the error message.
    pub fn new(mut a: DMatrix<f64>, jitter: f64, hint: &'static str) -> Result<Self> {
        let n = a.nrows();
        for i in 0..n {
            a[(i, i)] += jitter;
        }
        let not_pd = || Error::NotPositiveDefinite {
            size: n,
            jitter,
            hint,
        };
        if a.iter().any(|v| !v.is_finite()) {
            return Err(not_pd());
        }
        let chol = Cholesky::new(a.clone()).ok_or_else(not_pd)?;
        if chol.l_dirty().diagonal().iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(not_pd());
        }
        Ok(Self { matrix: a, chol })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// The factorized (jittered) matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Solves `(A + jitter I) x = b` with iterative refinement.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = self.chol.solve(b);
        for _ in 0..REFINEMENT_STEPS {
            let r = b - &self.matrix * &x;
            if r.iter().all(|v| *v == 0.0) {
                break;
            }
            let dx = self.chol.solve(&r);
            let candidate = &x + dx;
            let r_new = b - &self.matrix * &candidate;
            if r_new.norm() < r.norm() {
                x = candidate;
            } else {
                break;
            }
        }
        x
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    /// Relative residual `|A x - b| / |b|` (or the absolute residual when `b = 0`).
    pub fn relative_residual(&self, x: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let r = (&self.matrix * x - b).norm();
        let scale = b.norm();
        if scale > 0.0 {
            r / scale
        } else {
            r
        }
    }
}

/// Number of free entries in a lower-triangular `d x d` factor.
pub fn factor_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Builds `L L^T + EIGEN_FLOOR * I` from the row-major lower triangle of `L`.
///
/// Every matrix produced this way is symmetric with all eigenvalues at least
/// `EIGEN_FLOOR`, for any real parameter vector.
pub fn spd_from_factor(params: &[f64], d: usize) -> DMatrix<f64> {
    debug_assert_eq!(params.len(), factor_len(d));
    let mut l = DMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        for j in 0..=i {
            l[(i, j)] = params[k];
            k += 1;
        }
    }
    let mut p = &l * l.transpose();
    for i in 0..d {
        p[(i, i)] += EIGEN_FLOOR;
    }
    p
}

/// Inverse of [`spd_from_factor`]. Matrices whose eigenvalues do not clear
/// the floor are first lifted so the shifted matrix is positive definite.
pub fn factor_from_spd(p: &DMatrix<f64>) -> Vec<f64> {
    let d = p.nrows();
    let mut shifted = p.clone();
    let lift = (2.0 * EIGEN_FLOOR - min_eigenvalue(p)).max(0.0);
    for i in 0..d {
        shifted[(i, i)] += lift - EIGEN_FLOOR;
    }
    let l = Cholesky::new(shifted)
        .map(|c| c.l())
        .unwrap_or_else(|| DMatrix::identity(d, d));
    let mut out = Vec::with_capacity(factor_len(d));
    for i in 0..d {
        for j in 0..=i {
            out.push(l[(i, j)]);
        }
    }
    out
}

pub fn min_eigenvalue(p: &DMatrix<f64>) -> f64 {
    let sym = (p + p.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Rows of a matrix as owned vectors.
pub fn rows(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    (0..m.nrows()).map(|i| m.row(i).transpose()).collect()
}
