use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Squared-exponential ARD hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub lengthscales: Vec<f64>,
    pub signal_std: f64,
}

impl Hyperparameters {
    pub fn new(lengthscales: Vec<f64>, signal_std: f64) -> Result<Self> {
        let h = Self {
            lengthscales,
            signal_std,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn isotropic(d: usize, lengthscale: f64, signal_std: f64) -> Result<Self> {
        Self::new(vec![lengthscale; d], signal_std)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if self.lengthscales.is_empty() {
            return Err(Error::InvalidHyperparameters("no lengthscales".into()));
        }
        if !self.lengthscales.iter().all(|&l| ok(l)) || !ok(self.signal_std) {
            return Err(Error::InvalidHyperparameters(format!(
                "all parameters must be positive and finite: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_std * self.signal_std
    }

    /// Data-driven starting point: per-dimension input standard deviation and
    /// the standard deviation of the targets. Degenerate spreads fall back to 1.
    pub fn from_data(x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        let fallback = |s: f64| if s.is_finite() && s > 1e-12 { s } else { 1.0 };
        let lengthscales = (0..x.ncols())
            .map(|j| fallback(std_dev(x.column(j).iter().copied())))
            .collect();
        Self {
            lengthscales,
            signal_std: fallback(std_dev(y.iter().copied())),
        }
    }

    /// Log of `[l_1, ..., l_d, sigma_f]`.
    pub fn to_log_params(&self) -> Vec<f64> {
        self.lengthscales
            .iter()
            .chain(std::iter::once(&self.signal_std))
            .map(|v| v.ln())
            .collect()
    }

    pub fn from_log_params(p: &[f64]) -> Self {
        let d = p.len() - 1;
        Self {
            lengthscales: p[..d].iter().map(|v| v.exp()).collect(),
            signal_std: p[d].exp(),
        }
    }

    /// Unchecked kernel value on raw coordinate slices.
    #[inline]
    pub fn k(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((ai, bi), l) in a.iter().zip(b).zip(&self.lengthscales) {
            let r = (ai - bi) / l;
            s += r * r;
        }
        self.signal_variance() * (-0.5 * s).exp()
    }

    /// Adds `w * d/dx k(a, x)` to `grad`.
    #[inline]
    pub(crate) fn add_grad_wrt_second(&self, a: &[f64], x: &[f64], w: f64, grad: &mut [f64]) {
        let kv = self.k(a, x);
        for (((g, ai), xi), l) in grad.iter_mut().zip(a).zip(x).zip(&self.lengthscales) {
            *g -= w * kv * (xi - ai) / (l * l);
        }
    }
}

fn std_dev(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    (values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// `sigma_f^2 exp(-1/2 sum_i ((x_i - x'_i) / l_i)^2)`.
pub fn kernel_eval(hyper: &Hyperparameters, x: &DVector<f64>, x2: &DVector<f64>) -> Result<f64> {
    Error::check_dim(hyper.dim(), x.len())?;
    Error::check_dim(hyper.dim(), x2.len())?;
    Ok(hyper.k(x.as_slice(), x2.as_slice()))
}

/// Cross-kernel matrix between the rows of `a` and the rows of `b`.
pub fn kernel_matrix(hyper: &Hyperparameters, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Error::check_dim(hyper.dim(), a.ncols())?;
    Error::check_dim(hyper.dim(), b.ncols())?;
    let ra = row_major(a);
    let rb = row_major(b);
    let d = hyper.dim();
    Ok(DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        hyper.k(&ra[i * d..(i + 1) * d], &rb[j * d..(j + 1) * d])
    }))
}

/// Row-major copy of a matrix, so rows can be borrowed as contiguous slices.
pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}
