//! Nonparametric control Lyapunov function from Bellman-residual regression.
//!
//! The approximate infinite-horizon cost is a kernel expansion
//!
//! ```text
//! V_inf(x) = lambda^T (k(X_k, x) - k(X_k+1, x))
//! ```
//!
//! whose weights solve `kappa lambda = [l(x_k+1^(1)) ... l(x_k+1^(M))]`, with
//! `kappa` the kernel of the differences `phi(x_k) - phi(x_k+1)` in feature
//! space. This makes `V_inf(x_k) - V_inf(x_k+1) = l(x_k+1)` hold at every
//! training pair. The Lyapunov function adds the stage cost and a clipped,
//! shifted copy of `V_inf`:
//!
//! ```text
//! V(x) = l(x) + max{0, V_inf(x) + c},   c = -V_inf(0)
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{
    feasible_start, gaussian_log_likelihood, multi_start, row_major, Hyperparameters, SearchOptions, RESIDUAL_LIMIT,
};
use crate::linalg::{factor_from_spd, factor_len, min_eigenvalue, spd_from_factor, SpdFactor, EIGEN_FLOOR};
use crate::trajectory::{PairSet, DUPLICATE_TOLERANCE};

const KAPPA_HINT: &str = " or check the pairs for fixed points";

/// Quadratic stage cost `l(x) = x^T P0 x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StageCostRecord", into = "StageCostRecord")]
pub struct StageCost {
    p0: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct StageCostRecord {
    p0: Vec<Vec<f64>>,
}

impl TryFrom<StageCostRecord> for StageCost {
    type Error = Error;

    fn try_from(r: StageCostRecord) -> Result<Self> {
        StageCost::new(matrix_from_rows(&r.p0)?)
    }
}

impl From<StageCost> for StageCostRecord {
    fn from(s: StageCost) -> Self {
        StageCostRecord {
            p0: matrix_to_rows(&s.p0),
        }
    }
}

impl StageCost {
    /// Requires a symmetric matrix with all eigenvalues at least 0.01.
    pub fn new(p0: DMatrix<f64>) -> Result<Self> {
        if !p0.is_square() {
            return Err(Error::InvalidConfig("stage cost matrix must be square".into()));
        }
        let asym = (&p0 - p0.transpose()).abs().max();
        if asym > 1e-12 * (1.0 + p0.abs().max()) {
            return Err(Error::InvalidConfig("stage cost matrix must be symmetric".into()));
        }
        let min = min_eigenvalue(&p0);
        if min < EIGEN_FLOOR - 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "stage cost eigenvalue {min} below the floor {EIGEN_FLOOR}"
            )));
        }
        Ok(Self { p0 })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            p0: DMatrix::identity(d, d),
        }
    }

    pub fn from_factor(params: &[f64], d: usize) -> Self {
        Self {
            p0: spd_from_factor(params, d),
        }
    }

    pub fn to_factor(&self) -> Vec<f64> {
        factor_from_spd(&self.p0)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p0
    }

    pub fn dim(&self) -> usize {
        self.p0.nrows()
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        let d = x.len();
        let mut s = 0.0;
        for i in 0..d {
            let mut row = 0.0;
            for j in 0..d {
                row += self.p0[(i, j)] * x[j];
            }
            s += x[i] * row;
        }
        s
    }

    pub(crate) fn add_gradient(&self, x: &[f64], grad: &mut [f64]) {
        let d = x.len();
        for i in 0..d {
            for j in 0..d {
                grad[i] += (self.p0[(i, j)] + self.p0[(j, i)]) * x[j];
            }
        }
    }

    /// Stage costs of all pair targets.
    pub fn of_targets(&self, pairs: &PairSet) -> DVector<f64> {
        DVector::from_iterator(
            pairs.len(),
            (0..pairs.len()).map(|m| self.value(pairs.target(m).as_slice())),
        )
    }
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    for r in rows {
        Error::check_dim(c, r.len())?;
    }
    Ok(DMatrix::from_row_iterator(n, c, rows.iter().flatten().copied()))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Four-term difference kernel between all pairs.
pub fn build_kappa(pairs: &PairSet, hyper: &Hyperparameters) -> Result<DMatrix<f64>> {
    Error::check_dim(hyper.dim(), pairs.dim())?;
    let d = pairs.dim();
    let a = row_major(&pairs.inputs);
    let b = row_major(&pairs.targets);
    let row = |i: usize| i * d..(i + 1) * d;
    let m = pairs.len();
    let mut kappa = DMatrix::zeros(m, m);
    for i in 0..m {
        let (xi, yi) = (&a[row(i)], &b[row(i)]);
        for j in 0..=i {
            let (xj, yj) = (&a[row(j)], &b[row(j)]);
            let v = hyper.k(xi, xj) - hyper.k(yi, xj) - hyper.k(xi, yj) + hyper.k(yi, yj);
            kappa[(i, j)] = v;
            kappa[(j, i)] = v;
        }
    }
    Ok(kappa)
}

fn check_no_fixed_points(pairs: &PairSet) -> Result<()> {
    for m in 0..pairs.len() {
        let fixed = pairs
            .inputs
            .row(m)
            .iter()
            .zip(pairs.targets.row(m).iter())
            .all(|(a, b)| (a - b).abs() <= DUPLICATE_TOLERANCE);
        if fixed {
            return Err(Error::InvalidConfig(format!(
                "pair {m} is a fixed point; remove the (0, 0) pair before fitting the Lyapunov function"
            )));
        }
    }
    Ok(())
}

/// Fitted nonparametric control Lyapunov function.
#[derive(Clone, Debug)]
pub struct NpClf {
    pairs: PairSet,
    inputs_rm: Vec<f64>,
    targets_rm: Vec<f64>,
    hyper: Hyperparameters,
    lambda: DVector<f64>,
    shift: f64,
    stage: StageCost,
    jitter: f64,
    provenance: String,
}

/// Solves `(kappa + jitter I) lambda = l(X_k+1)` and sets the shift so `V(0) = 0`.
pub fn fit_np_clf(pairs: &PairSet, stage: &StageCost, hyper: &Hyperparameters, jitter: f64) -> Result<NpClf> {
    hyper.validate()?;
    Error::check_dim(pairs.dim(), stage.dim())?;
    check_no_fixed_points(pairs)?;
    let kappa = build_kappa(pairs, hyper)?;
    let factor = SpdFactor::new(kappa, jitter, KAPPA_HINT)?;
    let lambda = factor.solve(&stage.of_targets(pairs));
    Ok(assemble(pairs, stage, hyper, jitter, lambda, None))
}

fn assemble(
    pairs: &PairSet,
    stage: &StageCost,
    hyper: &Hyperparameters,
    jitter: f64,
    lambda: DVector<f64>,
    shift: Option<f64>,
) -> NpClf {
    let mut clf = NpClf {
        inputs_rm: row_major(&pairs.inputs),
        targets_rm: row_major(&pairs.targets),
        pairs: pairs.clone(),
        hyper: hyper.clone(),
        lambda,
        shift: 0.0,
        stage: stage.clone(),
        jitter,
        provenance: pairs.fingerprint(),
    };
    clf.shift = shift.unwrap_or_else(|| -clf.v_inf_unchecked(&vec![0.0; pairs.dim()]));
    clf
}

impl NpClf {
    pub fn dim(&self) -> usize {
        self.pairs.dim()
    }

    pub fn pairs(&self) -> &PairSet {
        &self.pairs
    }

    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn stage(&self) -> &StageCost {
        &self.stage
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    /// `lambda^T (k(X_k, x) - k(X_k+1, x))`.
    pub fn v_infinity(&self, x: &DVector<f64>) -> Result<f64> {
        Error::check_dim(self.dim(), x.len())?;
        Ok(self.v_inf_unchecked(x.as_slice()))
    }

    #[inline]
    pub(crate) fn v_inf_unchecked(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        self.inputs_rm
            .chunks_exact(d)
            .zip(self.targets_rm.chunks_exact(d))
            .zip(self.lambda.iter())
            .map(|((a, b), l)| l * (self.hyper.k(a, x) - self.hyper.k(b, x)))
            .sum()
    }

    /// `l(x) + max{0, V_inf(x) + c}`.
    pub fn evaluate(&self, x: &DVector<f64>) -> Result<f64> {
        Error::check_dim(self.dim(), x.len())?;
        Ok(self.value_unchecked(x.as_slice()))
    }

    /// Whether the clip `max{0, .}` is active (the shifted cost is negative) at `x`.
    pub fn clip_active(&self, x: &DVector<f64>) -> bool {
        self.v_inf_unchecked(x.as_slice()) + self.shift < 0.0
    }

    #[inline]
    pub(crate) fn value_unchecked(&self, x: &[f64]) -> f64 {
        self.stage.value(x) + (self.v_inf_unchecked(x) + self.shift).max(0.0)
    }

    /// Gradient of `V`; where the clip is active (or exactly at its switch)
    /// only the stage-cost gradient remains.
    pub(crate) fn gradient_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut g = vec![0.0; d];
        self.stage.add_gradient(x, &mut g);
        if self.v_inf_unchecked(x) + self.shift > 0.0 {
            for ((a, b), l) in self
                .inputs_rm
                .chunks_exact(d)
                .zip(self.targets_rm.chunks_exact(d))
                .zip(self.lambda.iter())
            {
                self.hyper.add_grad_wrt_second(a, x, *l, &mut g);
                self.hyper.add_grad_wrt_second(b, x, -*l, &mut g);
            }
        }
        g
    }

    pub fn to_record(&self) -> NpClfRecord {
        NpClfRecord {
            hyper: self.hyper.clone(),
            lambda: self.lambda.as_slice().to_vec(),
            shift: self.shift,
            p0: matrix_to_rows(self.stage.matrix()),
            jitter: self.jitter,
            inputs: matrix_to_rows(&self.pairs.inputs),
            targets: matrix_to_rows(&self.pairs.targets),
            provenance: self.provenance.clone(),
        }
    }

    pub fn from_record(rec: NpClfRecord) -> Result<Self> {
        let pairs = PairSet::new(matrix_from_rows(&rec.inputs)?, matrix_from_rows(&rec.targets)?, false)?;
        Error::check_dim(pairs.len(), rec.lambda.len())?;
        if pairs.fingerprint() != rec.provenance {
            return Err(Error::InvalidConfig(
                "stored fingerprint does not match the stored training pairs".into(),
            ));
        }
        let stage = StageCost::new(matrix_from_rows(&rec.p0)?)?;
        Error::check_dim(pairs.dim(), stage.dim())?;
        Error::check_dim(pairs.dim(), rec.hyper.dim())?;
        let mut clf = assemble(
            &pairs,
            &stage,
            &rec.hyper,
            rec.jitter,
            DVector::from_vec(rec.lambda),
            Some(rec.shift),
        );
        clf.provenance = rec.provenance;
        Ok(clf)
    }
}

/// JSON layout of a fitted nonparametric Lyapunov function.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NpClfRecord {
    pub hyper: Hyperparameters,
    pub lambda: Vec<f64>,
    pub shift: f64,
    pub p0: Vec<Vec<f64>>,
    pub jitter: f64,
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub provenance: String,
}

/// `-1/2 l^T (kappa + jitter I)^-1 l - 1/2 log|kappa + jitter I| - M/2 log(2 pi)`.
pub fn clf_log_likelihood(pairs: &PairSet, hyper: &Hyperparameters, stage: &StageCost, jitter: f64) -> Result<f64> {
    hyper.validate()?;
    let kappa = build_kappa(pairs, hyper)?;
    let factor = SpdFactor::new(kappa, jitter, KAPPA_HINT)?;
    let l = stage.of_targets(pairs);
    let lambda = factor.solve(&l);
    Ok(gaussian_log_likelihood(&l, &lambda, &factor))
}

/// Likelihood of the pairs, or `None` when `kappa` cannot be factorized or
/// the weight solve misses [`RESIDUAL_LIMIT`].
fn reliable_log_likelihood(pairs: &PairSet, hyper: &Hyperparameters, stage: &StageCost, jitter: f64) -> Option<f64> {
    let kappa = build_kappa(pairs, hyper).ok()?;
    let factor = SpdFactor::new(kappa, jitter, KAPPA_HINT).ok()?;
    let l = stage.of_targets(pairs);
    let lambda = factor.solve(&l);
    (factor.relative_residual(&lambda, &l) <= RESIDUAL_LIMIT).then(|| gaussian_log_likelihood(&l, &lambda, &factor))
}

/// Jointly maximizes [`clf_log_likelihood`] over the log kernel parameters
/// and the lower-triangular factor of the stage-cost matrix (`P0 = L L^T +
/// 0.01 I`), so every candidate respects the eigenvalue floor.
pub fn optimize_clf_hyperparameters(
    pairs: &PairSet,
    init_hyper: &Hyperparameters,
    init_stage: &StageCost,
    opts: &SearchOptions,
    jitter: f64,
) -> (Hyperparameters, StageCost) {
    let d = pairs.dim();
    let nh = d + 1;
    let mut init = init_hyper.to_log_params();
    init.extend(init_stage.to_factor());
    debug_assert_eq!(init.len(), nh + factor_len(d));
    let objective = |p: &[f64]| {
        let h = Hyperparameters::from_log_params(&p[..nh]);
        let s = StageCost::from_factor(&p[nh..], d);
        match reliable_log_likelihood(pairs, &h, &s, jitter) {
            Some(v) if v.is_finite() => -v,
            _ => f64::INFINITY,
        }
    };
    if opts.budget <= 1 {
        return (init_hyper.clone(), init_stage.clone());
    }
    let init_value = objective(&init);
    let start = feasible_start(&objective, &init, d);
    let best = multi_start(objective, &start, opts);
    if objective(&best) < init_value {
        (
            Hyperparameters::from_log_params(&best[..nh]),
            StageCost::from_factor(&best[nh..], d),
        )
    } else {
        (init_hyper.clone(), init_stage.clone())
    }
}
