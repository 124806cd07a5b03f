//! Control Lyapunov functions: the nonparametric candidate and the
//! parametric baselines behind a common interface.

mod baseline;
mod np;

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use baseline::{
    fit_baseline, monomials, BaselineFit, BaselineParams, SosParams, SosRecord, WsaqfParams, WsaqfRecord,
};
pub use np::{
    build_kappa, clf_log_likelihood, fit_np_clf, optimize_clf_hyperparameters, NpClf, NpClfRecord, StageCost,
};

use crate::error::{Error, Result};
use crate::trajectory::PairSet;

/// A scalar Lyapunov candidate on raw coordinate slices. Implementations
/// assume `x.len() == self.dim()`.
pub trait Lyapunov: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Gradient, or a subgradient where the function is not differentiable.
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
}

impl Lyapunov for NpClf {
    fn dim(&self) -> usize {
        NpClf::dim(self)
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.value_unchecked(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.gradient_unchecked(x)
    }
}

/// `sum_m max{0, V(x_k+1^(m)) - V(x_k^(m))}`.
pub fn hinge_loss(clf: &dyn Lyapunov, pairs: &PairSet) -> f64 {
    (0..pairs.len())
        .map(|m| {
            let a = clf.value(pairs.input(m).as_slice());
            let b = clf.value(pairs.target(m).as_slice());
            (b - a).max(0.0)
        })
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClfKind {
    Np,
    Wsaqf,
    Sos,
}

impl ClfKind {
    pub const ALL: [ClfKind; 3] = [ClfKind::Np, ClfKind::Wsaqf, ClfKind::Sos];

    pub fn label(self) -> &'static str {
        match self {
            ClfKind::Np => "NP",
            ClfKind::Wsaqf => "WSAQF",
            ClfKind::Sos => "SOS",
        }
    }
}

impl std::str::FromStr for ClfKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "np" => Ok(ClfKind::Np),
            "wsaqf" => Ok(ClfKind::Wsaqf),
            "sos" => Ok(ClfKind::Sos),
            other => Err(Error::InvalidConfig(format!("unknown Lyapunov function kind {other:?}"))),
        }
    }
}

/// A fitted Lyapunov function of any kind together with the fingerprint of
/// the pairs it was fitted on.
#[derive(Clone, Debug)]
pub enum ClfModel {
    Np(NpClf),
    Baseline { params: BaselineParams, provenance: String },
}

/// Lyapunov function file: a JSON object tagged by `"kind"`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClfRecord {
    Np(NpClfRecord),
    Wsaqf(WsaqfRecord),
    Sos(SosRecord),
}

impl ClfModel {
    pub fn kind(&self) -> ClfKind {
        match self {
            ClfModel::Np(_) => ClfKind::Np,
            ClfModel::Baseline { params, .. } => params.kind(),
        }
    }

    pub fn provenance(&self) -> &str {
        match self {
            ClfModel::Np(c) => c.provenance(),
            ClfModel::Baseline { provenance, .. } => provenance,
        }
    }

    pub fn as_lyapunov(&self) -> &dyn Lyapunov {
        match self {
            ClfModel::Np(c) => c,
            ClfModel::Baseline { params, .. } => params.as_lyapunov(),
        }
    }

    pub fn evaluate(&self, x: &DVector<f64>) -> Result<f64> {
        let v = self.as_lyapunov();
        Error::check_dim(v.dim(), x.len())?;
        Ok(v.value(x.as_slice()))
    }

    pub fn to_record(&self) -> ClfRecord {
        match self {
            ClfModel::Np(c) => ClfRecord::Np(c.to_record()),
            ClfModel::Baseline { params, provenance } => params.to_record(provenance),
        }
    }

    pub fn from_record(rec: ClfRecord) -> Result<Self> {
        Ok(match rec {
            ClfRecord::Np(r) => ClfModel::Np(NpClf::from_record(r)?),
            ClfRecord::Wsaqf(r) => ClfModel::Baseline {
                params: BaselineParams::from_wsaqf_record(&r)?,
                provenance: r.provenance,
            },
            ClfRecord::Sos(r) => ClfModel::Baseline {
                params: BaselineParams::from_sos_record(&r)?,
                provenance: r.provenance,
            },
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, &self.to_record())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_record(crate::io::read_json(path)?)
    }
}
