//! Nominal dynamics: one noise-free GP posterior per state dimension.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{
    feasible_start, multi_start, RESIDUAL_LIMIT,
    fit_gp, optimize_hyperparameters, GpPosterior, GpPosteriorRecord, Hyperparameters, SearchOptions,
};
use crate::trajectory::PairSet;

/// How kernel hyperparameters are chosen for each output dimension.
#[derive(Clone, Debug)]
pub enum HyperChoice {
    /// One set of hyperparameters per output dimension.
    Fixed(Vec<Hyperparameters>),
    /// Independent likelihood maximization per output dimension.
    Optimize(SearchOptions),
    /// A single set shared by all dimensions, maximizing the summed likelihood.
    OptimizeShared(SearchOptions),
}

#[derive(Clone, Debug)]
pub struct Gpssm {
    posteriors: Vec<GpPosterior>,
    pairs: PairSet,
    provenance: String,
}

pub fn train_gpssm(pairs: &PairSet, hyper: &HyperChoice, jitter: f64) -> Result<Gpssm> {
    let d = pairs.dim();
    let x = &pairs.inputs;
    let hypers: Vec<Hyperparameters> = match hyper {
        HyperChoice::Fixed(h) => {
            Error::check_dim(d, h.len())?;
            h.clone()
        }
        HyperChoice::Optimize(opts) => (0..d)
            .into_par_iter()
            .map(|i| {
                let y = pairs.targets.column(i).into_owned();
                let init = Hyperparameters::from_data(x, &y);
                let opts = SearchOptions {
                    seed: opts.seed.wrapping_add(i as u64),
                    ..opts.clone()
                };
                optimize_hyperparameters(x, &y, &init, &opts, jitter)
            })
            .collect(),
        HyperChoice::OptimizeShared(opts) => {
            let ys: Vec<DVector<f64>> = (0..d).map(|i| pairs.targets.column(i).into_owned()).collect();
            let init = Hyperparameters::from_data(x, &ys[0]);
            let objective = |p: &[f64]| {
                let h = Hyperparameters::from_log_params(p);
                let mut total = 0.0;
                for y in &ys {
                    match fit_gp(x, y, &h, jitter) {
                        Ok(post) if post.factor().relative_residual(post.alpha(), y) <= RESIDUAL_LIMIT => {
                            let v = post.log_marginal_likelihood();
                            if !v.is_finite() {
                                return f64::INFINITY;
                            }
                            total -= v;
                        }
                        _ => return f64::INFINITY,
                    }
                }
                total
            };
            let start = feasible_start(&objective, &init.to_log_params(), d);
            let best = multi_start(objective, &start, opts);
            vec![Hyperparameters::from_log_params(&best); d]
        }
    };
    let posteriors = hypers
        .par_iter()
        .enumerate()
        .map(|(i, h)| {
            Error::check_dim(d, h.dim()).and_then(|_| {
                fit_gp(x, &pairs.targets.column(i).into_owned(), h, jitter)
            })
            .map_err(|e| Error::Dimension {
                dim: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Gpssm {
        posteriors,
        provenance: pairs.fingerprint(),
        pairs: pairs.clone(),
    })
}

impl Gpssm {
    pub fn dim(&self) -> usize {
        self.posteriors.len()
    }

    pub fn posteriors(&self) -> &[GpPosterior] {
        &self.posteriors
    }

    pub fn pairs(&self) -> &PairSet {
        &self.pairs
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn jitter(&self) -> f64 {
        self.posteriors[0].jitter()
    }

    pub fn hyperparameters(&self) -> Vec<Hyperparameters> {
        self.posteriors.iter().map(|p| p.hyper().clone()).collect()
    }

    /// Nominal next state `mu(x)`.
    pub fn predict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Error::check_dim(self.dim(), x.len())?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.posteriors.iter().map(|p| p.mean_unchecked(x.as_slice())),
        )
    }

    /// Per-dimension global bound on `|mu_i(x)|`.
    pub fn mean_bound(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.posteriors.iter().map(|p| p.mean_bound()))
    }

    pub fn to_record(&self) -> GpssmRecord {
        let recs: Vec<GpPosteriorRecord> = self.posteriors.iter().map(|p| p.to_record()).collect();
        GpssmRecord {
            dim: self.dim(),
            jitter: self.jitter(),
            augmented_origin: self.pairs.augmented_origin,
            train_inputs: recs[0].train_inputs.clone(),
            dimensions: recs
                .into_iter()
                .map(|r| DimensionRecord {
                    hyper: r.hyper,
                    targets: r.targets,
                    alpha: r.alpha,
                })
                .collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn from_record(rec: GpssmRecord) -> Result<Self> {
        Error::check_dim(rec.dim, rec.dimensions.len())?;
        let n = rec.train_inputs.len();
        let inputs = DMatrix::from_row_iterator(n, rec.dim, rec.train_inputs.iter().flatten().copied());
        let mut targets = DMatrix::zeros(n, rec.dim);
        for (i, dr) in rec.dimensions.iter().enumerate() {
            Error::check_dim(n, dr.targets.len())?;
            targets.set_column(i, &DVector::from_column_slice(&dr.targets));
        }
        let pairs = PairSet::new(inputs, targets, rec.augmented_origin)?;
        if pairs.fingerprint() != rec.provenance {
            return Err(Error::InvalidConfig(
                "stored fingerprint does not match the stored training pairs".into(),
            ));
        }
        let posteriors = rec
            .dimensions
            .into_iter()
            .map(|dr| {
                GpPosterior::from_record(GpPosteriorRecord {
                    hyper: dr.hyper,
                    jitter: rec.jitter,
                    train_inputs: rec.train_inputs.clone(),
                    targets: dr.targets,
                    alpha: dr.alpha,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            posteriors,
            pairs,
            provenance: rec.provenance,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_json(path, &self.to_record())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_record(crate::io::read_json(path)?)
    }
}

/// JSON model file layout.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GpssmRecord {
    pub dim: usize,
    pub jitter: f64,
    pub augmented_origin: bool,
    pub train_inputs: Vec<Vec<f64>>,
    pub dimensions: Vec<DimensionRecord>,
    pub provenance: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DimensionRecord {
    pub hyper: Hyperparameters,
    pub targets: Vec<f64>,
    pub alpha: Vec<f64>,
}
