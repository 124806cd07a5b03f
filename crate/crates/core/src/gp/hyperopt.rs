use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::Hyperparameters;
use super::posterior::fit_gp;
use crate::optim::{bfgs, Minimum};

/// Box half-width (in natural-log units) around the starting point.
const LOG_BOX: f64 = 7.0;

/// Candidates whose weight solve leaves a larger relative residual are
/// rejected: the interpolation guarantees only hold for accurate solves.
pub(crate) const RESIDUAL_LIMIT: f64 = 1e-9;

/// Halves the lengthscales (the first `d` log parameters) until the objective
/// is finite, so an ill-conditioned starting point still yields a usable search.
pub(crate) fn feasible_start<F: Fn(&[f64]) -> f64>(objective: &F, init: &[f64], d: usize) -> Vec<f64> {
    let mut p = init.to_vec();
    for _ in 0..40 {
        if objective(&p).is_finite() {
            return p;
        }
        for v in &mut p[..d] {
            *v -= std::f64::consts::LN_2;
        }
    }
    init.to_vec()
}

/// Settings for multi-start likelihood maximization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    /// Total objective evaluations across all starts.
    pub budget: usize,
    /// Extra random starts in addition to the initial point.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            budget: 600,
            restarts: 2,
            seed: 0,
        }
    }
}

impl SearchOptions {
    pub fn with_budget(budget: usize) -> Self {
        Self {
            budget,
            ..Self::default()
        }
    }
}

/// Minimizes `objective` over a parameter vector with several BFGS starts.
///
/// The first start is `init`; the others are uniform perturbations drawn from
/// a generator seeded by `opts.seed`. Returns `init` unless a strictly better
/// point was found.
pub(crate) fn multi_start<F>(objective: F, init: &[f64], opts: &SearchOptions) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if opts.budget <= 1 {
        return init.to_vec();
    }
    let init_value = objective(init);
    let budget = opts.budget - 1;
    let starts = 1 + opts.restarts;
    let share = budget / starts;
    if share == 0 {
        return init.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut points = vec![init.to_vec()];
    if !init_value.is_finite() {
        // an infeasible start stalls BFGS immediately; spend its share on random starts
        points.clear();
    }
    while points.len() < starts {
        points.push(
            init.iter()
                .map(|v| v + rng.gen_range(-1.5..1.5))
                .collect::<Vec<f64>>(),
        );
    }
    let boxed = |p: &[f64]| {
        if p.iter().zip(init).any(|(v, c)| (v - c).abs() > LOG_BOX) {
            f64::INFINITY
        } else {
            objective(p)
        }
    };
    let results: Vec<Minimum> = points
        .par_iter()
        .map(|p| bfgs(boxed, p, 1.0, share))
        .collect();
    let mut best = (init.to_vec(), if init_value.is_nan() { f64::INFINITY } else { init_value });
    for r in results {
        if r.value < best.1 {
            best = (r.x, r.value);
        }
    }
    best.0
}

/// Maximizes the log marginal likelihood over log lengthscales and log signal
/// standard deviation. Candidates whose kernel matrix cannot be factorized,
/// or whose weight solve is not accurate to [`RESIDUAL_LIMIT`], are scored as
/// minus infinity.
pub fn optimize_hyperparameters(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    init: &Hyperparameters,
    opts: &SearchOptions,
    jitter: f64,
) -> Hyperparameters {
    let objective = |p: &[f64]| {
        let h = Hyperparameters::from_log_params(p);
        match fit_gp(x, y, &h, jitter) {
            Ok(post) if post.factor().relative_residual(post.alpha(), y) <= RESIDUAL_LIMIT => {
                let v = post.log_marginal_likelihood();
                if v.is_finite() {
                    -v
                } else {
                    f64::INFINITY
                }
            }
            _ => f64::INFINITY,
        }
    };
    if opts.budget <= 1 {
        return init.clone();
    }
    let start = feasible_start(&objective, &init.to_log_params(), init.dim());
    let best = multi_start(objective, &start, opts);
    Hyperparameters::from_log_params(&best)
}
