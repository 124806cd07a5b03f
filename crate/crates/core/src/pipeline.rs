//! Training steps shared by the command-line tool and the benchmark.

use crate::clf::{
    fit_baseline, fit_np_clf, optimize_clf_hyperparameters, BaselineParams, ClfKind, ClfModel, StageCost,
};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::gp::Hyperparameters;
use crate::gpssm::{train_gpssm, Gpssm, HyperChoice};
use crate::trajectory::{to_pairs, PairSet, Trajectory};

/// Downsampled demonstrations (the references for the area metric) and the
/// training pairs built from them, with the origin pair appended.
pub struct Prepared {
    pub references: Vec<Trajectory>,
    pub pairs: PairSet,
}

/// Downsamples every demonstration and builds the training pairs. Trailing
/// copies of the origin are dropped before pairing because the appended
/// `(0, 0)` pair already covers the equilibrium.
pub fn prepare(demos: &[Trajectory], downsample: usize) -> Result<Prepared> {
    let references = demos
        .iter()
        .map(|d| d.downsample(downsample))
        .collect::<Result<Vec<_>>>()?;
    let trimmed = references
        .iter()
        .map(Trajectory::trim_origin_tail)
        .collect::<Result<Vec<_>>>()?;
    let pairs = to_pairs(&trimmed, true)?;
    Ok(Prepared { references, pairs })
}

pub fn train_nominal(pairs: &PairSet, cfg: &Config) -> Result<Gpssm> {
    train_gpssm(pairs, &HyperChoice::Optimize(cfg.gp_search.clone()), cfg.jitter)
}

/// Geometric mean over output dimensions of the dynamics hyperparameters:
/// the starting point of the Lyapunov kernel search.
pub fn clf_initial_hyper(nominal: &Gpssm) -> Result<Hyperparameters> {
    let hs = nominal.hyperparameters();
    let d = nominal.dim();
    let n = hs.len() as f64;
    let geo = |f: &dyn Fn(&Hyperparameters) -> f64| (hs.iter().map(|h| f(h).ln()).sum::<f64>() / n).exp();
    Hyperparameters::new(
        (0..d).map(|j| geo(&|h| h.lengthscales[j])).collect(),
        geo(&|h| h.signal_std),
    )
}

/// Fits a Lyapunov function of `kind` on the pairs the nominal model was
/// trained on.
pub fn fit_clf(kind: ClfKind, nominal: &Gpssm, cfg: &Config) -> Result<ClfModel> {
    let pairs = nominal.pairs().without_origin()?;
    if pairs.is_empty() {
        return Err(Error::EmptyPairs);
    }
    match kind {
        ClfKind::Np => {
            let init = clf_initial_hyper(nominal)?;
            let stage = StageCost::identity(pairs.dim());
            let (hyper, stage) = optimize_clf_hyperparameters(&pairs, &init, &stage, &cfg.clf_search, cfg.jitter);
            Ok(ClfModel::Np(fit_np_clf(&pairs, &stage, &hyper, cfg.jitter)?))
        }
        ClfKind::Wsaqf | ClfKind::Sos => {
            let init = BaselineParams::initial(&pairs, kind, &cfg.baseline).expect("parametric kind");
            Ok(ClfModel::Baseline {
                params: fit_baseline(&pairs, &init, &cfg.baseline),
                provenance: pairs.fingerprint(),
            })
        }
    }
}
