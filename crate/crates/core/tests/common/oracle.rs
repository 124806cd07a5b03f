//! Direct re-implementations of the library numerics. Each check runs
//! `instances` random small cases and returns the worst relative error.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stabgp::clf::{
    build_kappa, clf_log_likelihood, fit_np_clf, monomials, Lyapunov, SosParams, StageCost, WsaqfParams,
};
use stabgp::gp::{kernel_eval, kernel_matrix, log_marginal_likelihood, Hyperparameters};
use stabgp::linalg::spd_from_factor;
use stabgp::trajectory::PairSet;

use super::*;

fn rel(got: f64, want: f64) -> f64 {
    let d = (got - want).abs();
    if d == 0.0 {
        0.0
    } else {
        d / got.abs().max(want.abs())
    }
}

fn random_hyper(rng: &mut ChaCha8Rng, d: usize) -> Hyperparameters {
    Hyperparameters::new(uniform_vec(rng, d, 0.5, 2.0), rng.gen_range(0.3..3.0)).unwrap()
}

fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    spd_from_factor(&uniform_vec(rng, d * (d + 1) / 2, -1.5, 1.5), d)
}

pub fn kernel_eval_error(instances: usize) -> f64 {
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let d = r.gen_range(1..5);
        let h = random_hyper(&mut r, d);
        let a = uniform_vec(&mut r, d, -3.0, 3.0);
        let b = uniform_vec(&mut r, d, -3.0, 3.0);
        let got = kernel_eval(&h, &dvec(&a), &dvec(&b)).unwrap();
        worst = worst.max(rel(got, se_ard(&a, &b, &h.lengthscales, h.signal_std)));
    }
    worst
}

pub fn kernel_matrix_error(instances: usize) -> f64 {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let d = r.gen_range(1..4);
        let (n1, n2) = (r.gen_range(1..7), r.gen_range(1..7));
        let h = random_hyper(&mut r, d);
        let a = DMatrix::from_fn(n1, d, |_, _| r.gen_range(-3.0..3.0));
        let b = DMatrix::from_fn(n2, d, |_, _| r.gen_range(-3.0..3.0));
        let k = kernel_matrix(&h, &a, &b).unwrap();
        for i in 0..n1 {
            for j in 0..n2 {
                worst = worst.max(rel(k[(i, j)], se_ard(&row(&a, i), &row(&b, j), &h.lengthscales, h.signal_std)));
            }
        }
    }
    worst
}

pub fn kappa_oracle(pairs: &PairSet, h: &Hyperparameters) -> Vec<Vec<f64>> {
    let k = |a: &[f64], b: &[f64]| se_ard(a, b, &h.lengthscales, h.signal_std);
    (0..pairs.len())
        .map(|i| {
            let (xi, yi) = (row(&pairs.inputs, i), row(&pairs.targets, i));
            (0..pairs.len())
                .map(|j| {
                    let (xj, yj) = (row(&pairs.inputs, j), row(&pairs.targets, j));
                    k(&xi, &xj) - k(&yi, &xj) - k(&xi, &yj) + k(&yi, &yj)
                })
                .collect()
        })
        .collect()
}

/// Entries of `kappa` are differences of kernel values, so the error is
/// measured relative to the signal variance.
pub fn kappa_error(instances: usize) -> f64 {
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let d = r.gen_range(1..4);
        let m = r.gen_range(1..8);
        let pairs = random_pairs(&mut r, m, d);
        let h = random_hyper(&mut r, d);
        let kappa = build_kappa(&pairs, &h).unwrap();
        let want = kappa_oracle(&pairs, &h);
        for i in 0..m {
            for j in 0..m {
                worst = worst.max((kappa[(i, j)] - want[i][j]).abs() / h.signal_variance());
            }
        }
    }
    worst
}

pub fn gp_likelihood_error(instances: usize) -> f64 {
    let mut r = rng(4);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let d = r.gen_range(1..4);
        let n = r.gen_range(1..7);
        let h = random_hyper(&mut r, d);
        let jitter = 1e-6;
        let x = DMatrix::from_fn(n, d, |_, _| r.gen_range(-3.0..3.0));
        let y = DVector::from_fn(n, |_, _| r.gen_range(-2.0..2.0));
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        se_ard(&row(&x, i), &row(&x, j), &h.lengthscales, h.signal_std) + if i == j { jitter } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        let got = log_marginal_likelihood(&x, &y, &h, jitter).unwrap();
        worst = worst.max(rel(got, gauss_log_density(&a, y.as_slice())));
    }
    worst
}

pub fn clf_likelihood_error(instances: usize) -> f64 {
    let mut r = rng(5);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let d = r.gen_range(1..4);
        let m = r.gen_range(1..6);
        let pairs = random_pairs(&mut r, m, d);
        let h = random_hyper(&mut r, d);
        let stage = StageCost::new(random_spd(&mut r, d)).unwrap();
        let jitter = 1e-6;
        let mut a = kappa_oracle(&pairs, &h);
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += jitter;
        }
        let l: Vec<f64> = (0..m)
            .map(|k| {
                let y = pairs.target(k);
                y.dot(&(stage.matrix() * &y))
            })
            .collect();
        let got = clf_log_likelihood(&pairs, &h, &stage, jitter).unwrap();
        worst = worst.max(rel(got, gauss_log_density(&a, &l)));
    }
    worst
}

/// `V` of the nonparametric function against a direct evaluation with
/// weights from dense elimination; measured relative to `|V| + sum |lambda| sigma_f^2`
/// because `V` is a sum of cancelling kernel terms.
pub fn np_value_error(instances: usize) -> f64 {
    let mut r = rng(6);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let d = r.gen_range(1..4);
        let m = r.gen_range(1..6);
        let pairs = random_pairs(&mut r, m, d);
        let h = random_hyper(&mut r, d);
        let stage = StageCost::new(random_spd(&mut r, d)).unwrap();
        let jitter = 1e-6;
        let clf = fit_np_clf(&pairs, &stage, &h, jitter).unwrap();

        let mut a = kappa_oracle(&pairs, &h);
        for (i, row) in a.iter_mut().enumerate() {
            row[i] += jitter;
        }
        let l: Vec<f64> = (0..m).map(|k| stage.value(pairs.target(k).as_slice())).collect();
        let (lambda, _) = gauss_solve(&a, &l);
        let k = |a: &[f64], b: &[f64]| se_ard(a, b, &h.lengthscales, h.signal_std);
        let v_inf = |x: &[f64]| -> f64 {
            (0..m)
                .map(|i| lambda[i] * (k(&row(&pairs.inputs, i), x) - k(&row(&pairs.targets, i), x)))
                .sum()
        };
        let c = -v_inf(&vec![0.0; d]);
        let scale: f64 = lambda.iter().map(|v| v.abs()).sum::<f64>() * h.signal_variance();
        for _ in 0..5 {
            let x = uniform_vec(&mut r, d, -4.0, 4.0);
            let want = stage.value(&x) + (v_inf(&x) + c).max(0.0);
            worst = worst.max((clf.value(&x) - want).abs() / (want.abs() + scale));
        }
    }
    worst
}

fn wsaqf_oracle(p0: &DMatrix<f64>, ps: &[DMatrix<f64>], cs: &[DVector<f64>], x: &[f64]) -> f64 {
    let d = x.len();
    let quad = |p: &DMatrix<f64>, a: &[f64], b: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += a[i] * p[(i, j)] * b[j];
            }
        }
        s
    };
    let mut v = quad(p0, x, x);
    for (p, c) in ps.iter().zip(cs) {
        let shifted: Vec<f64> = (0..d).map(|i| x[i] - c[i]).collect();
        let s = quad(p, x, &shifted);
        let beta = if s >= 0.0 { 1.0 } else { 0.0 };
        v += beta * s * s;
    }
    v
}

pub fn wsaqf_error(instances: usize) -> f64 {
    let mut r = rng(7);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let d = r.gen_range(1..4);
        let terms = r.gen_range(0..4);
        let p0 = random_spd(&mut r, d);
        let ps: Vec<_> = (0..terms).map(|_| random_spd(&mut r, d)).collect();
        let cs: Vec<_> = (0..terms).map(|_| dvec(&uniform_vec(&mut r, d, -2.0, 2.0))).collect();
        let w = WsaqfParams::new(p0.clone(), ps.clone(), cs.clone()).unwrap();
        for _ in 0..5 {
            let x = uniform_vec(&mut r, d, -4.0, 4.0);
            worst = worst.max(rel(w.value(&x), wsaqf_oracle(&p0, &ps, &cs, &x)));
        }
        if w.value(&vec![0.0; d]) != 0.0 {
            return f64::INFINITY;
        }
    }
    worst
}

/// Planar degree-2 candidate against its hand-expanded monomial vector, and
/// the three-dimensional one against a generic monomial evaluation.
pub fn sos_error(instances: usize) -> f64 {
    let mut r = rng(8);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let p = random_spd(&mut r, 5);
        let sos = SosParams::new(p.clone(), monomials(2, 2)).unwrap();
        for _ in 0..5 {
            let x = uniform_vec(&mut r, 2, -4.0, 4.0);
            let z = [x[0], x[1], x[0] * x[0], x[0] * x[1], x[1] * x[1]];
            let mut want = 0.0;
            for i in 0..5 {
                for j in 0..5 {
                    want += z[i] * p[(i, j)] * z[j];
                }
            }
            worst = worst.max(rel(sos.value(&x), want));
        }
        let m = monomials(3, 2);
        let p = random_spd(&mut r, m.len());
        let sos = SosParams::new(p.clone(), m.clone()).unwrap();
        let x = uniform_vec(&mut r, 3, -2.0, 2.0);
        let z: Vec<f64> = m.iter().map(|e| x.iter().zip(e).map(|(v, k)| v.powi(*k as i32)).product()).collect();
        let want: f64 = (0..m.len())
            .flat_map(|i| (0..m.len()).map(move |j| (i, j)))
            .map(|(i, j)| z[i] * p[(i, j)] * z[j])
            .sum();
        worst = worst.max(rel(sos.value(&x), want));
    }
    worst
}

/// All checks by name.
pub fn all(instances: usize) -> Vec<(&'static str, f64)> {
    vec![
        ("kernel_eval", kernel_eval_error(instances)),
        ("kernel_matrix", kernel_matrix_error(instances)),
        ("kappa", kappa_error(instances)),
        ("gp log-likelihood", gp_likelihood_error(instances)),
        ("clf log-likelihood", clf_likelihood_error(instances)),
        ("np value", np_value_error(instances)),
        ("wsaqf", wsaqf_error(instances)),
        ("sos", sos_error(instances)),
    ]
}
