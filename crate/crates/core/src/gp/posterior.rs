use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kernel::{kernel_matrix, row_major, Hyperparameters};
use crate::error::{Error, Result};
use crate::linalg::SpdFactor;

/// Default diagonal regularizer on kernel matrices.
pub const DEFAULT_JITTER: f64 = 1e-14;

const JITTER_HINT: &str = " or remove repeated inputs";

/// Noise-free GP posterior mean for one output dimension.
#[derive(Clone, Debug)]
pub struct GpPosterior {
    hyper: Hyperparameters,
    train_inputs: DMatrix<f64>,
    inputs_row_major: Vec<f64>,
    targets: DVector<f64>,
    alpha: DVector<f64>,
    jitter: f64,
    factor: SpdFactor,
}

/// Serialized form of a posterior; the factorization is rebuilt on load.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GpPosteriorRecord {
    pub hyper: Hyperparameters,
    pub jitter: f64,
    pub train_inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Solves `(K + jitter I) alpha = y` through a Cholesky factorization.
pub fn fit_gp(x: &DMatrix<f64>, y: &DVector<f64>, hyper: &Hyperparameters, jitter: f64) -> Result<GpPosterior> {
    hyper.validate()?;
    Error::check_dim(x.nrows(), y.len())?;
    if !(jitter >= 0.0) {
        return Err(Error::InvalidConfig(format!("jitter must be nonnegative, got {jitter}")));
    }
    let k = kernel_matrix(hyper, x, x)?;
    let factor = SpdFactor::new(k, jitter, JITTER_HINT)?;
    let alpha = factor.solve(y);
    Ok(GpPosterior {
        hyper: hyper.clone(),
        inputs_row_major: row_major(x),
        train_inputs: x.clone(),
        targets: y.clone(),
        alpha,
        jitter,
        factor,
    })
}

impl GpPosterior {
    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn train_inputs(&self) -> &DMatrix<f64> {
        &self.train_inputs
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    pub fn dim(&self) -> usize {
        self.train_inputs.ncols()
    }

    /// `k(x)^T alpha`.
    pub fn predict_mean(&self, x: &DVector<f64>) -> Result<f64> {
        Error::check_dim(self.dim(), x.len())?;
        Ok(self.mean_unchecked(x.as_slice()))
    }

    #[inline]
    pub(crate) fn mean_unchecked(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        self.inputs_row_major
            .chunks_exact(d)
            .zip(self.alpha.iter())
            .map(|(row, a)| a * self.hyper.k(row, x))
            .sum()
    }

    /// Global bound `sigma_f^2 sqrt(N) |alpha|` on the magnitude of the mean.
    pub fn mean_bound(&self) -> f64 {
        self.hyper.signal_variance() * (self.alpha.len() as f64).sqrt() * self.alpha.norm()
    }

    /// Log marginal likelihood reusing the stored factorization.
    pub fn log_marginal_likelihood(&self) -> f64 {
        gaussian_log_likelihood(&self.targets, &self.alpha, &self.factor)
    }

    pub fn to_record(&self) -> GpPosteriorRecord {
        GpPosteriorRecord {
            hyper: self.hyper.clone(),
            jitter: self.jitter,
            train_inputs: crate::linalg::rows(&self.train_inputs)
                .into_iter()
                .map(|r| r.as_slice().to_vec())
                .collect(),
            targets: self.targets.as_slice().to_vec(),
            alpha: self.alpha.as_slice().to_vec(),
        }
    }

    /// Restores a posterior, keeping the stored weights bit-for-bit.
    pub fn from_record(rec: GpPosteriorRecord) -> Result<Self> {
        let n = rec.train_inputs.len();
        let d = rec.hyper.dim();
        for r in &rec.train_inputs {
            Error::check_dim(d, r.len())?;
        }
        Error::check_dim(n, rec.targets.len())?;
        Error::check_dim(n, rec.alpha.len())?;
        let x = DMatrix::from_row_iterator(n, d, rec.train_inputs.iter().flatten().copied());
        let mut post = fit_gp(&x, &DVector::from_vec(rec.targets), &rec.hyper, rec.jitter)?;
        post.alpha = DVector::from_vec(rec.alpha);
        Ok(post)
    }
}

pub(crate) fn gaussian_log_likelihood(y: &DVector<f64>, alpha: &DVector<f64>, factor: &SpdFactor) -> f64 {
    let n = y.len() as f64;
    -0.5 * y.dot(alpha) - 0.5 * factor.log_det() - 0.5 * n * (2.0 * PI).ln()
}

/// `-1/2 y^T (K + jitter I)^-1 y - 1/2 log det(K + jitter I) - N/2 log(2 pi)`.
pub fn log_marginal_likelihood(x: &DMatrix<f64>, y: &DVector<f64>, hyper: &Hyperparameters, jitter: f64) -> Result<f64> {
    Ok(fit_gp(x, y, hyper, jitter)?.log_marginal_likelihood())
}
