//! Parametric Lyapunov candidates used as comparison baselines: weighted sums
//! of asymmetric quadratic functions (WSAQF) and sum-of-squares (SOS) forms
//! over a monomial vector. Both are fitted by minimizing the hinge loss on the
//! training pairs with every matrix parameterized as `L L^T + 0.01 I`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::np::{matrix_from_rows, matrix_to_rows};
use super::{hinge_loss, ClfKind, ClfRecord, Lyapunov};
use crate::error::{Error, Result};
use crate::linalg::{factor_from_spd, factor_len, min_eigenvalue, spd_from_factor, EIGEN_FLOOR};
use crate::optim::nelder_mead;
use crate::trajectory::PairSet;

#[derive(Clone, Debug, PartialEq)]
pub struct WsaqfParams {
    pub p0: DMatrix<f64>,
    pub matrices: Vec<DMatrix<f64>>,
    pub centers: Vec<DVector<f64>>,
}

impl WsaqfParams {
    pub fn new(p0: DMatrix<f64>, matrices: Vec<DMatrix<f64>>, centers: Vec<DVector<f64>>) -> Result<Self> {
        let d = p0.nrows();
        if matrices.len() != centers.len() {
            return Err(Error::InvalidConfig("one center per asymmetric term required".into()));
        }
        for m in std::iter::once(&p0).chain(&matrices) {
            Error::check_dim(d, m.nrows())?;
            Error::check_dim(d, m.ncols())?;
            check_floor(m)?;
        }
        for c in &centers {
            Error::check_dim(d, c.len())?;
        }
        Ok(Self { p0, matrices, centers })
    }

    /// `P_l = I` for all terms, centers drawn from the training inputs.
    pub fn initial(pairs: &PairSet, terms: usize, seed: u64) -> Self {
        let d = pairs.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = (0..terms)
            .map(|_| pairs.input(rng.gen_range(0..pairs.len())))
            .collect();
        Self {
            p0: DMatrix::identity(d, d),
            matrices: vec![DMatrix::identity(d, d); terms],
            centers,
        }
    }

    pub fn dim(&self) -> usize {
        self.p0.nrows()
    }

    pub fn terms(&self) -> usize {
        self.matrices.len()
    }

    /// Free parameters: one triangular factor per matrix plus the centers.
    pub fn parameter_count(&self) -> usize {
        let d = self.dim();
        (self.terms() + 1) * factor_len(d) + self.terms() * d
    }

    fn to_params(&self, scale: f64) -> Vec<f64> {
        let mut p = factor_from_spd(&self.p0);
        for m in &self.matrices {
            p.extend(factor_from_spd(m));
        }
        for c in &self.centers {
            p.extend(c.iter().map(|v| v / scale));
        }
        p
    }

    fn from_params(p: &[f64], d: usize, terms: usize, scale: f64) -> Self {
        let f = factor_len(d);
        let p0 = spd_from_factor(&p[..f], d);
        let matrices = (0..terms)
            .map(|l| spd_from_factor(&p[(l + 1) * f..(l + 2) * f], d))
            .collect();
        let off = (terms + 1) * f;
        let centers = (0..terms)
            .map(|l| DVector::from_iterator(d, p[off + l * d..off + (l + 1) * d].iter().map(|v| v * scale)))
            .collect();
        Self { p0, matrices, centers }
    }

    fn switched_terms(&self, x: &[f64]) -> impl Iterator<Item = (usize, f64)> + '_ {
        let xv = DVector::from_column_slice(x);
        self.matrices
            .iter()
            .zip(&self.centers)
            .enumerate()
            .map(move |(l, (p, c))| (l, xv.dot(&(p * (&xv - c)))))
    }
}

impl Lyapunov for WsaqfParams {
    fn dim(&self) -> usize {
        self.p0.nrows()
    }

    /// `x^T P0 x + sum_l beta_l(x) (x^T P_l (x - eps_l))^2`, with `beta_l = 1`
    /// when the inner product is nonnegative.
    fn value(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        let mut v = xv.dot(&(&self.p0 * &xv));
        for (_, s) in self.switched_terms(x) {
            if s >= 0.0 {
                v += s * s;
            }
        }
        v
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        let mut g = (&self.p0 + self.p0.transpose()) * &xv;
        for (l, s) in self.switched_terms(x) {
            if s >= 0.0 {
                let p = &self.matrices[l];
                let ds = p * (&xv - &self.centers[l]) + p.transpose() * &xv;
                g += ds * (2.0 * s);
            }
        }
        g.as_slice().to_vec()
    }
}

/// Exponent table of all monomials with total degree `1..=degree`, ordered by
/// degree and then lexicographically with higher powers of earlier variables
/// first: for `d = 2, degree = 2` this is `x1, x2, x1^2, x1 x2, x2^2`.
pub fn monomials(d: usize, degree: u32) -> Vec<Vec<u32>> {
    fn rec(d: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == d - 1 {
            prefix.push(remaining);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=remaining).rev() {
            prefix.push(e);
            rec(d, remaining - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for deg in 1..=degree {
        rec(d, deg, &mut Vec::new(), &mut out);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SosParams {
    pub p0: DMatrix<f64>,
    pub monomials: Vec<Vec<u32>>,
}

impl SosParams {
    pub fn new(p0: DMatrix<f64>, monomials: Vec<Vec<u32>>) -> Result<Self> {
        let n = monomials.len();
        Error::check_dim(n, p0.nrows())?;
        Error::check_dim(n, p0.ncols())?;
        check_floor(&p0)?;
        let d = monomials.first().map_or(0, Vec::len);
        for m in &monomials {
            Error::check_dim(d, m.len())?;
            if m.iter().all(|e| *e == 0) {
                return Err(Error::InvalidConfig("constant monomial not allowed".into()));
            }
        }
        Ok(Self { p0, monomials })
    }

    /// Identity Gram matrix over all monomials up to `degree`.
    pub fn initial(d: usize, degree: u32) -> Self {
        let monomials = monomials(d, degree);
        let n = monomials.len();
        Self {
            p0: DMatrix::identity(n, n),
            monomials,
        }
    }

    pub fn parameter_count(&self) -> usize {
        factor_len(self.monomials.len())
    }

    pub fn monomial_vector(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.monomials.len(),
            self.monomials
                .iter()
                .map(|e| e.iter().zip(x).map(|(p, xi)| xi.powi(*p as i32)).product::<f64>()),
        )
    }

    fn monomial_jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = x.len();
        DMatrix::from_fn(self.monomials.len(), d, |r, j| {
            let e = &self.monomials[r];
            if e[j] == 0 {
                return 0.0;
            }
            e.iter()
                .zip(x)
                .enumerate()
                .map(|(i, (p, xi))| {
                    if i == j {
                        *p as f64 * xi.powi(*p as i32 - 1)
                    } else {
                        xi.powi(*p as i32)
                    }
                })
                .product()
        })
    }
}

impl Lyapunov for SosParams {
    fn dim(&self) -> usize {
        self.monomials.first().map_or(0, Vec::len)
    }

    /// `m(x)^T P0 m(x)`.
    fn value(&self, x: &[f64]) -> f64 {
        let m = self.monomial_vector(x);
        m.dot(&(&self.p0 * &m))
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let m = self.monomial_vector(x);
        let j = self.monomial_jacobian(x);
        let g = j.transpose() * ((&self.p0 + self.p0.transpose()) * m);
        g.as_slice().to_vec()
    }
}

fn check_floor(m: &DMatrix<f64>) -> Result<()> {
    let min = min_eigenvalue(m);
    if min < EIGEN_FLOOR - 1e-9 || (m - m.transpose()).abs().max() > 1e-12 * (1.0 + m.abs().max()) {
        return Err(Error::InvalidConfig(format!(
            "matrix must be symmetric with eigenvalues >= {EIGEN_FLOOR} (min {min})"
        )));
    }
    Ok(())
}

/// Settings for hinge-loss fitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineFit {
    /// Objective evaluations per start.
    pub budget: usize,
    /// Random restarts in addition to the initial point.
    pub restarts: usize,
    pub seed: u64,
    /// Number of asymmetric terms in the WSAQF.
    pub wsaqf_terms: usize,
    /// Maximal total degree of the SOS monomials.
    pub sos_degree: u32,
}

impl Default for BaselineFit {
    fn default() -> Self {
        Self {
            budget: 20_000,
            restarts: 3,
            seed: 0,
            wsaqf_terms: 3,
            sos_degree: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BaselineParams {
    Wsaqf(WsaqfParams),
    Sos(SosParams),
}

impl BaselineParams {
    pub fn kind(&self) -> ClfKind {
        match self {
            BaselineParams::Wsaqf(_) => ClfKind::Wsaqf,
            BaselineParams::Sos(_) => ClfKind::Sos,
        }
    }

    /// Starting point for `kind`; `None` for the nonparametric kind.
    pub fn initial(pairs: &PairSet, kind: ClfKind, fit: &BaselineFit) -> Option<Self> {
        match kind {
            ClfKind::Wsaqf => Some(BaselineParams::Wsaqf(WsaqfParams::initial(pairs, fit.wsaqf_terms, fit.seed))),
            ClfKind::Sos => Some(BaselineParams::Sos(SosParams::initial(pairs.dim(), fit.sos_degree))),
            ClfKind::Np => None,
        }
    }

    pub fn as_lyapunov(&self) -> &dyn Lyapunov {
        match self {
            BaselineParams::Wsaqf(p) => p,
            BaselineParams::Sos(p) => p,
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            BaselineParams::Wsaqf(p) => p.parameter_count(),
            BaselineParams::Sos(p) => p.parameter_count(),
        }
    }

    /// All matrices of the candidate.
    pub fn matrices(&self) -> Vec<&DMatrix<f64>> {
        match self {
            BaselineParams::Wsaqf(p) => std::iter::once(&p.p0).chain(&p.matrices).collect(),
            BaselineParams::Sos(p) => vec![&p.p0],
        }
    }

    pub fn to_record(&self, provenance: &str) -> ClfRecord {
        let provenance = provenance.to_string();
        match self {
            BaselineParams::Wsaqf(p) => ClfRecord::Wsaqf(WsaqfRecord {
                p0: matrix_to_rows(&p.p0),
                matrices: p.matrices.iter().map(matrix_to_rows).collect(),
                centers: p.centers.iter().map(|c| c.as_slice().to_vec()).collect(),
                provenance,
            }),
            BaselineParams::Sos(p) => ClfRecord::Sos(SosRecord {
                p0: matrix_to_rows(&p.p0),
                monomials: p.monomials.clone(),
                provenance,
            }),
        }
    }

    pub fn from_wsaqf_record(rec: &WsaqfRecord) -> Result<Self> {
        Ok(BaselineParams::Wsaqf(WsaqfParams::new(
            matrix_from_rows(&rec.p0)?,
            rec.matrices.iter().map(|m| matrix_from_rows(m)).collect::<Result<_>>()?,
            rec.centers.iter().map(|c| DVector::from_column_slice(c)).collect(),
        )?))
    }

    pub fn from_sos_record(rec: &SosRecord) -> Result<Self> {
        Ok(BaselineParams::Sos(SosParams::new(
            matrix_from_rows(&rec.p0)?,
            rec.monomials.clone(),
        )?))
    }
}

/// JSON layout of a WSAQF candidate (matrices row-major).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WsaqfRecord {
    pub p0: Vec<Vec<f64>>,
    pub matrices: Vec<Vec<Vec<f64>>>,
    pub centers: Vec<Vec<f64>>,
    pub provenance: String,
}

/// JSON layout of an SOS candidate: Gram matrix (row-major) and the exponent
/// table of its monomial vector.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SosRecord {
    pub p0: Vec<Vec<f64>>,
    pub monomials: Vec<Vec<u32>>,
    pub provenance: String,
}

/// Minimizes the hinge loss from `init` with multi-start Nelder-Mead in
/// factor space. The returned candidate never has a larger loss than `init`.
pub fn fit_baseline(pairs: &PairSet, init: &BaselineParams, fit: &BaselineFit) -> BaselineParams {
    let init_loss = hinge_loss(init.as_lyapunov(), pairs);
    if fit.budget <= 1 || init_loss == 0.0 {
        return init.clone();
    }
    let d = pairs.dim();
    let scale = {
        let s = pairs.inputs.norm() / (pairs.len() as f64).sqrt();
        if s > 0.0 {
            s
        } else {
            1.0
        }
    };
    let (x0, decode): (Vec<f64>, Box<dyn Fn(&[f64]) -> BaselineParams + Sync>) = match init {
        BaselineParams::Wsaqf(p) => {
            let terms = p.terms();
            (
                p.to_params(scale),
                Box::new(move |v: &[f64]| BaselineParams::Wsaqf(WsaqfParams::from_params(v, d, terms, scale))),
            )
        }
        BaselineParams::Sos(p) => {
            let monos = p.monomials.clone();
            let n = monos.len();
            (
                factor_from_spd(&p.p0),
                Box::new(move |v: &[f64]| {
                    BaselineParams::Sos(SosParams {
                        p0: spd_from_factor(v, n),
                        monomials: monos.clone(),
                    })
                }),
            )
        }
    };
    let objective = |v: &[f64]| hinge_loss(decode(v).as_lyapunov(), pairs);
    let mut rng = ChaCha8Rng::seed_from_u64(fit.seed ^ 0x5eed);
    let mut starts = vec![x0.clone()];
    for _ in 0..fit.restarts {
        starts.push(x0.iter().map(|v| v + rng.gen_range(-0.5..0.5)).collect());
    }
    let results: Vec<_> = starts
        .par_iter()
        .map(|s| nelder_mead(objective, s, 0.3, fit.budget))
        .collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for r in results {
        if r.value < best.as_ref().map_or(init_loss, |b| b.1) {
            best = Some((r.x, r.value));
        }
    }
    match best {
        Some((x, _)) => decode(&x),
        None => init.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_table_for_plane() {
        assert_eq!(
            monomials(2, 2),
            vec![vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        assert_eq!(monomials(3, 2).len(), 9);
    }

    #[test]
    fn sos_identity_at_ones() {
        let p = SosParams::initial(2, 2);
        assert_eq!(p.value(&[1.0, 1.0]), 5.0);
        assert_eq!(p.value(&[0.0, 0.0]), 0.0);
        assert_eq!(p.parameter_count(), 15);
    }

    #[test]
    fn wsaqf_parameter_count() {
        let p = WsaqfParams {
            p0: DMatrix::identity(2, 2),
            matrices: vec![DMatrix::identity(2, 2); 3],
            centers: vec![DVector::zeros(2); 3],
        };
        assert_eq!(p.parameter_count(), 18);
        assert_eq!(p.value(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn wsaqf_without_terms_is_quadratic() {
        let p0 = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let p = WsaqfParams::new(p0.clone(), vec![], vec![]).unwrap();
        let x = DVector::from_vec(vec![0.7, -1.2]);
        assert!((p.value(x.as_slice()) - x.dot(&(&p0 * &x))).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let w = WsaqfParams::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]),
            vec![DMatrix::from_row_slice(2, 2, &[0.8, -0.1, -0.1, 0.4])],
            vec![DVector::from_vec(vec![0.3, -0.5])],
        )
        .unwrap();
        let s = SosParams::new(
            {
                let f: Vec<f64> = (0..15).map(|i| 0.1 * i as f64 - 0.6).collect();
                spd_from_factor(&f, 5)
            },
            monomials(2, 2),
        )
        .unwrap();
        for v in [&w as &dyn Lyapunov, &s] {
            let x = [0.9, 1.4];
            let g = v.gradient(&x);
            for i in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += 1e-6;
                xm[i] -= 1e-6;
                let fd = (v.value(&xp) - v.value(&xm)) / 2e-6;
                assert!((fd - g[i]).abs() < 1e-6 * (1.0 + fd.abs()), "{fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn floor_violations_rejected() {
        let bad = DMatrix::from_diagonal_element(2, 2, 0.001);
        assert!(WsaqfParams::new(bad.clone(), vec![], vec![]).is_err());
        assert!(SosParams::new(DMatrix::identity(2, 2), vec![vec![0, 0], vec![1, 0]]).is_err());
    }

    #[test]
    fn record_round_trip() {
        let p = BaselineParams::Sos(SosParams::initial(2, 2));
        let json = serde_json::to_string(&p.to_record("abc")).unwrap();
        assert!(json.contains(r#""kind":"sos""#));
        match serde_json::from_str(&json).unwrap() {
            ClfRecord::Sos(rec) => assert_eq!(BaselineParams::from_sos_record(&rec).unwrap(), p),
            other => panic!("unexpected record {other:?}"),
        }
    }
}
