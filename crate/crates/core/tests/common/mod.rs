#![allow(dead_code)]

pub mod oracle;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stabgp::trajectory::PairSet;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, d: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(lo..hi)).collect()
}

/// `m` contracting pairs `x -> a x + noise` with inputs in a box.
pub fn random_pairs(rng: &mut ChaCha8Rng, m: usize, d: usize) -> PairSet {
    let inputs = DMatrix::from_fn(m, d, |_, _| rng.gen_range(-3.0..3.0));
    let targets = DMatrix::from_fn(m, d, |i, j| 0.6 * inputs[(i, j)] + rng.gen_range(-0.2..0.2));
    PairSet::new(inputs, targets, false).expect("distinct random pairs")
}

/// Plain SE-ARD kernel written out term by term.
pub fn se_ard(a: &[f64], b: &[f64], ls: &[f64], sf: f64) -> f64 {
    let mut q = 0.0;
    for i in 0..a.len() {
        let r = (a[i] - b[i]) / ls[i];
        q += r * r;
    }
    sf * sf * (-0.5 * q).exp()
}

/// Gaussian elimination with partial pivoting: solution of `a x = b` and
/// `log |det a|`.
pub fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> (Vec<f64>, f64) {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(r, bi)| r.iter().copied().chain([*bi]).collect()).collect();
    let mut log_det = 0.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        log_det += piv.abs().ln();
        for r in c + 1..n {
            let f = m[r][c] / piv;
            for k in c..=n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    (x, log_det)
}

/// Gaussian log density of `y` under `N(0, a)`.
pub fn gauss_log_density(a: &[Vec<f64>], y: &[f64]) -> f64 {
    let (x, log_det) = gauss_solve(a, y);
    let quad: f64 = x.iter().zip(y).map(|(u, v)| u * v).sum();
    -0.5 * quad - 0.5 * log_det - 0.5 * y.len() as f64 * (2.0 * std::f64::consts::PI).ln()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

pub fn row(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

use stabgp::clf::{ClfKind, ClfModel};
use stabgp::config::Config;
use stabgp::gpssm::Gpssm;
use stabgp::pipeline::{fit_clf, prepare, train_nominal, Prepared};
use stabgp::synthetic::{demonstrations, Shape};

/// Three downsampled demonstrations of `shape` and a dynamics model on them.
pub fn shape_model(shape: Shape) -> (Prepared, Gpssm) {
    let demos = demonstrations(shape, 3, 250, 0).unwrap();
    let prepared = prepare(&demos, 10).unwrap();
    let nominal = train_nominal(&prepared.pairs, &Config::default()).unwrap();
    (prepared, nominal)
}

pub fn quick_config() -> Config {
    let mut cfg = Config::default();
    cfg.baseline.budget = 3000;
    cfg.baseline.restarts = 1;
    cfg
}

pub fn clf_for(kind: ClfKind, nominal: &Gpssm) -> ClfModel {
    fit_clf(kind, nominal, &quick_config()).unwrap()
}
