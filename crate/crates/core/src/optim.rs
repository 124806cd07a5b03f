//! Small derivative-free and quasi-Newton minimizers with evaluation budgets.
//!
//! Both minimizers treat non-finite objective values as infeasible and always
//! return the best point they evaluated, so the result is never worse than
//! the starting point.

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

struct Tracker<F> {
    f: F,
    evaluations: usize,
    max_evaluations: usize,
    best_x: Vec<f64>,
    best_value: f64,
}

impl<F: FnMut(&[f64]) -> f64> Tracker<F> {
    fn new(f: F, x0: &[f64], max_evaluations: usize) -> Self {
        Self {
            f,
            evaluations: 0,
            max_evaluations,
            best_x: x0.to_vec(),
            best_value: f64::INFINITY,
        }
    }

    /// `None` once the budget is spent.
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.evaluations >= self.max_evaluations {
            return None;
        }
        self.evaluations += 1;
        let mut v = (self.f)(x);
        if v.is_nan() {
            v = f64::INFINITY;
        }
        if v < self.best_value {
            self.best_value = v;
            self.best_x = x.to_vec();
        }
        Some(v)
    }

    fn finish(self) -> Minimum {
        Minimum {
            x: self.best_x,
            value: self.best_value,
            evaluations: self.evaluations,
        }
    }
}

/// Nelder-Mead simplex search with restarts until the budget is spent or a
/// restart no longer improves the best value.
pub fn nelder_mead<F>(f: F, x0: &[f64], step: f64, max_evaluations: usize) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut t = Tracker::new(f, x0, max_evaluations);
    if t.eval(x0).is_none() || n == 0 {
        return t.finish();
    }
    let mut start = x0.to_vec();
    let mut scale = step;
    loop {
        let before = t.best_value;
        if nm_run(&mut t, &start, scale).is_none() {
            break;
        }
        let gain = before - t.best_value;
        if !(gain > 1e-12 * (1.0 + before.abs())) && scale < step * 1e-3 {
            break;
        }
        start = t.best_x.clone();
        scale = if gain > 0.0 { step } else { scale * 0.1 };
    }
    t.finish()
}

fn nm_run<F: FnMut(&[f64]) -> f64>(t: &mut Tracker<F>, x0: &[f64], step: f64) -> Option<()> {
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const RHO: f64 = 0.5;
    const SIGMA: f64 = 0.5;
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), t.eval(x0)?));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = t.eval(&x)?;
        simplex.push((x, v));
    }
    let mut stall = 0usize;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let size = simplex
            .iter()
            .skip(1)
            .map(|(x, _)| dist(x, &simplex[0].0))
            .fold(0.0, f64::max);
        if size < 1e-10 * (1.0 + norm(&simplex[0].0)) || (best.is_finite() && (worst - best).abs() <= 1e-14 * (1.0 + best.abs()) && stall > 2 * n) {
            return Some(());
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let along = |coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + coef * (c - w))
                .collect()
        };
        let xr = along(ALPHA);
        let fr = t.eval(&xr)?;
        if fr < simplex[0].1 {
            let xe = along(GAMMA);
            let fe = t.eval(&xe)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(RHO * ALPHA);
                let fc = t.eval(&xc)?;
                (xc, fc)
            } else {
                let xc = along(-RHO);
                let fc = t.eval(&xc)?;
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = x_best
                        .iter()
                        .zip(&item.0)
                        .map(|(b, xi)| b + SIGMA * (xi - b))
                        .collect();
                    let v = t.eval(&x)?;
                    *item = (x, v);
                }
            }
        }
        if simplex.iter().map(|s| s.1).fold(f64::INFINITY, f64::min) < best {
            stall = 0;
        } else {
            stall += 1;
        }
    }
}

/// BFGS with central finite-difference gradients and a backtracking Armijo
/// line search. `max_step` caps the length of each search direction.
pub fn bfgs<F>(f: F, x0: &[f64], max_step: f64, max_evaluations: usize) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut t = Tracker::new(f, x0, max_evaluations);
    let Some(mut fx) = t.eval(x0) else {
        return t.finish();
    };
    if !fx.is_finite() || n == 0 {
        return t.finish();
    }
    let mut x = x0.to_vec();
    let Some(mut g) = fd_gradient(&mut t, &x, fx) else {
        return t.finish();
    };
    let mut h = vec![vec![0.0; n]; n];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..500 {
        if norm(&g) < 1e-8 {
            break;
        }
        let mut p: Vec<f64> = h.iter().map(|row| -dot(row, &g)).collect();
        if dot(&p, &g) >= 0.0 {
            for (i, row) in h.iter_mut().enumerate() {
                row.iter_mut().for_each(|v| *v = 0.0);
                row[i] = 1.0;
            }
            p = g.iter().map(|v| -v).collect();
        }
        let pn = norm(&p);
        if pn > max_step {
            p.iter_mut().for_each(|v| *v *= max_step / pn);
        }
        let slope = dot(&p, &g);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + step * b).collect();
            let fnew = match t.eval(&xn) {
                Some(v) => v,
                None => return t.finish(),
            };
            if fnew.is_finite() && fnew <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fnew));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew)) = accepted else { break };
        let Some(gn) = fd_gradient(&mut t, &xn, fnew) else {
            return t.finish();
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let improvement = fx - fnew;
        x = xn;
        fx = fnew;
        g = gn;
        if sy > 1e-12 * norm(&s) * norm(&y) {
            bfgs_update(&mut h, &s, &y, sy);
        }
        if improvement.abs() <= 1e-12 * (1.0 + fx.abs()) {
            break;
        }
    }
    t.finish()
}

fn fd_gradient<F: FnMut(&[f64]) -> f64>(t: &mut Tracker<F>, x: &[f64], fx: f64) -> Option<Vec<f64>> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * (1.0 + x[i].abs());
        xp[i] = x[i] + h;
        let fp = t.eval(&xp)?;
        xp[i] = x[i] - h;
        let fm = t.eval(&xp)?;
        xp[i] = x[i];
        g[i] = match (fp.is_finite(), fm.is_finite()) {
            (true, true) => (fp - fm) / (2.0 * h),
            (true, false) => (fp - fx) / h,
            (false, true) => (fx - fm) / h,
            (false, false) => 0.0,
        };
    }
    Some(g)
}

fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = h.iter().map(|row| dot(row, y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn bfgs_finds_rosenbrock_minimum() {
        let m = bfgs(rosenbrock, &[-1.2, 1.0], 1.0, 5000);
        assert!(m.value < 1e-8, "{m:?}");
    }

    #[test]
    fn nelder_mead_finds_rosenbrock_minimum() {
        let m = nelder_mead(rosenbrock, &[-1.2, 1.0], 0.5, 5000);
        assert!(m.value < 1e-8, "{m:?}");
    }

    #[test]
    fn budget_is_respected_and_start_is_kept() {
        let mut calls = 0;
        let m = nelder_mead(
            |x| {
                calls += 1;
                x[0] * x[0]
            },
            &[3.0],
            1.0,
            1,
        );
        assert_eq!(calls, 1);
        assert_eq!(m.x, vec![3.0]);
        let m = bfgs(|x| x[0] * x[0], &[3.0], 1.0, 0);
        assert_eq!(m.evaluations, 0);
        assert_eq!(m.x, vec![3.0]);
    }

    #[test]
    fn infeasible_region_is_avoided() {
        let f = |x: &[f64]| if x[0] < 0.5 { f64::INFINITY } else { x[0] * x[0] };
        let m = bfgs(f, &[3.0], 1.0, 2000);
        assert!(m.x[0] >= 0.5 && m.value < 9.0);
    }
}
