//! Minimally invasive virtual control and the stabilized model
//! `f(x) = mu(x) + u*(x)`.
//!
//! The control solves
//!
//! ```text
//! min_u 1/2 |u|^2   s.t.   V(mu(x) + u) - V(x) + rho log(1 + V(x)) <= 0
//! ```
//!
//! with a log-barrier method started from a strictly feasible point. The
//! target `x_next = 0` is always feasible for `x != 0`, so a feasible answer
//! exists for every query.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::clf::{ClfModel, Lyapunov};
use crate::error::{Error, Result};
use crate::gpssm::Gpssm;
use crate::trajectory::{PairSet, Trajectory};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Relaxation weight of the decrease condition.
    pub rho: f64,
    /// Total inner iterations across all barrier stages.
    pub max_iterations: usize,
    /// Slack accepted on the constraint when reporting convergence.
    pub constraint_tolerance: f64,
    /// First barrier weight relative to `1/2 |u0|^2`.
    pub barrier_initial: f64,
    /// Factor by which the barrier weight shrinks between stages.
    pub barrier_decrease: f64,
    /// Barrier weight (relative) at which the method stops.
    pub barrier_final: f64,
    /// The nominal step is kept when its constraint value is at most the
    /// negative of this tolerance.
    pub control_skip_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho: 0.01,
            max_iterations: 400,
            constraint_tolerance: 1e-9,
            barrier_initial: 1e-1,
            barrier_decrease: 10.0,
            barrier_final: 1e-10,
            control_skip_tolerance: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.rho)
            || !pos(self.constraint_tolerance)
            || !pos(self.control_skip_tolerance)
            || !pos(self.barrier_initial)
            || !pos(self.barrier_final)
            || !(self.barrier_decrease > 1.0)
            || self.max_iterations == 0
        {
            return Err(Error::InvalidConfig(format!("invalid solver configuration {self:?}")));
        }
        Ok(())
    }
}

/// `V(x_next) - V(x) + rho log(1 + V(x))`; feasible when `<= 0`.
pub fn constraint_value(clf: &dyn Lyapunov, x: &DVector<f64>, x_next: &DVector<f64>, rho: f64) -> Result<f64> {
    Error::check_dim(clf.dim(), x.len())?;
    Error::check_dim(clf.dim(), x_next.len())?;
    let vx = clf.value(x.as_slice());
    Ok(clf.value(x_next.as_slice()) - vx + rho * vx.ln_1p())
}

/// Where the optimizer started.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum InitialGuess {
    /// The candidate point with this index.
    Candidate(usize),
    /// `u0 = -mu(x)`, i.e. jump to the origin.
    Origin,
}

/// Training points (inputs, then targets not already listed, then the
/// origin) offered as initial targets for the optimizer.
pub fn candidate_points(pairs: &PairSet) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(2 * pairs.len() + 1);
    let mut push = |p: DVector<f64>| {
        if !out.iter().any(|q| q == &p) {
            out.push(p);
        }
    };
    for m in 0..pairs.len() {
        push(pairs.input(m));
    }
    for m in 0..pairs.len() {
        push(pairs.target(m));
    }
    push(DVector::zeros(pairs.dim()));
    out
}

/// Picks the candidate closest to `x` among those satisfying the relaxed
/// decrease condition as next state and returns `u0 = candidate - mu(x)`.
/// Falls back to `u0 = -mu(x)` when no candidate qualifies. Ties go to the
/// lower index.
pub fn select_initial_guess(
    candidates: &[DVector<f64>],
    clf: &dyn Lyapunov,
    x: &DVector<f64>,
    mu_x: &DVector<f64>,
    rho: f64,
) -> (DVector<f64>, InitialGuess) {
    let values: Vec<f64> = candidates.iter().map(|c| clf.value(c.as_slice())).collect();
    select_with_values(candidates, &values, clf.value(x.as_slice()), x, mu_x, rho)
}

fn select_with_values(
    candidates: &[DVector<f64>],
    values: &[f64],
    vx: f64,
    x: &DVector<f64>,
    mu_x: &DVector<f64>,
    rho: f64,
) -> (DVector<f64>, InitialGuess) {
    let bound = vx - rho * vx.ln_1p();
    let mut best: Option<(usize, f64)> = None;
    for (i, (c, v)) in candidates.iter().zip(values).enumerate() {
        if v - bound <= 0.0 {
            let dist = (c - x).norm_squared();
            if best.is_none_or(|(_, bd)| dist < bd) {
                best = Some((i, dist));
            }
        }
    }
    match best {
        Some((i, _)) => (&candidates[i] - mu_x, InitialGuess::Candidate(i)),
        None => (-mu_x, InitialGuess::Origin),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// The nominal step already satisfied the decrease condition.
    pub skipped: bool,
    pub initial_guess: Option<InitialGuess>,
    pub iterations: usize,
    /// False when the iteration limit cut the barrier schedule short.
    pub converged: bool,
    pub constraint_value: f64,
    pub initial_norm: f64,
}

/// Nominal model, Lyapunov function and solver settings.
#[derive(Clone, Debug)]
pub struct StabilizedModel {
    nominal: Gpssm,
    clf: ClfModel,
    solver: SolverConfig,
    candidates: Vec<DVector<f64>>,
    candidate_values: Vec<f64>,
}

impl StabilizedModel {
    /// Fails unless both parts were trained on the same pairs.
    pub fn new(nominal: Gpssm, clf: ClfModel, solver: SolverConfig) -> Result<Self> {
        solver.validate()?;
        Error::check_dim(nominal.dim(), clf.as_lyapunov().dim())?;
        if nominal.provenance() != clf.provenance() {
            return Err(Error::ProvenanceMismatch {
                nominal: nominal.provenance().to_string(),
                clf: clf.provenance().to_string(),
            });
        }
        let candidates = candidate_points(nominal.pairs());
        let v = clf.as_lyapunov();
        let candidate_values = candidates.iter().map(|c| v.value(c.as_slice())).collect();
        Ok(Self {
            nominal,
            clf,
            solver,
            candidates,
            candidate_values,
        })
    }

    pub fn nominal(&self) -> &Gpssm {
        &self.nominal
    }

    pub fn clf(&self) -> &ClfModel {
        &self.clf
    }

    pub fn solver(&self) -> &SolverConfig {
        &self.solver
    }

    pub fn dim(&self) -> usize {
        self.nominal.dim()
    }

    pub fn lyapunov(&self, x: &DVector<f64>) -> Result<f64> {
        self.clf.evaluate(x)
    }

    /// Virtual control `u*(x)`.
    pub fn stabilize_step(&self, x: &DVector<f64>) -> Result<(DVector<f64>, StepDiagnostics)> {
        Error::check_dim(self.dim(), x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(x.as_slice().to_vec()));
        }
        let mu = self.nominal.predict_unchecked(x);
        self.control_for(x, &mu)
    }

    fn control_for(&self, x: &DVector<f64>, mu: &DVector<f64>) -> Result<(DVector<f64>, StepDiagnostics)> {
        let v = self.clf.as_lyapunov();
        let rho = self.solver.rho;
        let vx = v.value(x.as_slice());
        let bound = vx - rho * vx.ln_1p();
        let g = |u: &DVector<f64>| v.value((mu + u).as_slice()) - bound;
        let mut diag = StepDiagnostics {
            skipped: false,
            initial_guess: None,
            iterations: 0,
            converged: true,
            constraint_value: 0.0,
            initial_norm: 0.0,
        };

        if x.iter().all(|c| *c == 0.0) {
            // The origin is a training pair, so mu(0) = 0 up to interpolation
            // error and the equilibrium needs no control.
            let zero = DVector::zeros(x.len());
            diag.constraint_value = g(&zero);
            return Ok((zero, diag));
        }

        let g_nominal = g(&DVector::zeros(x.len()));
        if g_nominal <= -self.solver.control_skip_tolerance {
            diag.skipped = true;
            diag.constraint_value = g_nominal;
            return Ok((DVector::zeros(x.len()), diag));
        }

        let (u0, choice) = select_with_values(&self.candidates, &self.candidate_values, vx, x, mu, rho);
        diag.initial_guess = Some(choice);
        diag.initial_norm = u0.norm();
        let g_init = g(&u0);
        let fallback = -mu;
        let start = if g_init < 0.0 { u0.clone() } else { fallback.clone() };
        let g_start = g(&start);
        if !(g_start < 0.0) {
            return Err(Error::InfeasibleControl {
                x: x.as_slice().to_vec(),
                value: g_start,
            });
        }

        let (u_barrier, iterations, converged) = barrier_solve(&g, |u| v.gradient((mu + u).as_slice()), start, &self.solver);
        diag.iterations = iterations;
        diag.converged = converged;
        let mut u = shrink_towards_zero(&g, u_barrier, g_nominal);

        if g_init <= 0.0 && u.norm() > u0.norm() {
            u = u0;
        }
        diag.constraint_value = g(&u);
        if diag.constraint_value > 0.0 {
            return Err(Error::InfeasibleControl {
                x: x.as_slice().to_vec(),
                value: diag.constraint_value,
            });
        }
        Ok((u, diag))
    }

    /// `mu(x) + u*(x)`.
    pub fn stabilized_predict(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let mu = self.nominal.predict(x)?;
        let (u, _) = self.stabilize_step(x)?;
        Ok(mu + u)
    }

    /// Iterates the stabilized model from `x0` until `|x| <= stop_radius` or
    /// `max_steps` steps were taken.
    pub fn simulate(&self, x0: &DVector<f64>, max_steps: usize, stop_radius: f64) -> Result<SimulationResult> {
        Error::check_dim(self.dim(), x0.len())?;
        let v = self.clf.as_lyapunov();
        let mut x = x0.clone();
        let mut result = SimulationResult {
            states: vec![x.clone()],
            controls: Vec::new(),
            lyapunov_values: vec![v.value(x.as_slice())],
            wall_times: Vec::new(),
            skipped: Vec::new(),
            termination: Termination::StepLimit,
        };
        loop {
            if x.norm() <= stop_radius {
                result.termination = Termination::ReachedRadius;
                break;
            }
            let step = result.controls.len();
            if step >= max_steps {
                break;
            }
            let start = Instant::now();
            let (u, diag) = self
                .stabilize_step(&x)
                .map_err(|e| Error::Step { step, source: Box::new(e) })?;
            let next = self.nominal.predict_unchecked(&x) + &u;
            result.wall_times.push(start.elapsed().as_secs_f64());
            result.skipped.push(diag.skipped);
            result.lyapunov_values.push(v.value(next.as_slice()));
            result.controls.push(u);
            result.states.push(next.clone());
            x = next;
        }
        Ok(result)
    }
}

/// Log-barrier minimization of `1/2 |u|^2` subject to `g(u) < 0`, using
/// Gauss-Newton steps on `1/2 |u|^2 - tau log(-g(u))`.
fn barrier_solve<G, D>(g: &G, grad_v: D, start: DVector<f64>, cfg: &SolverConfig) -> (DVector<f64>, usize, bool)
where
    G: Fn(&DVector<f64>) -> f64,
    D: Fn(&DVector<f64>) -> Vec<f64>,
{
    let scale = (0.5 * start.norm_squared()).max(1e-12);
    let mut tau = cfg.barrier_initial * scale;
    let tau_final = cfg.barrier_final * scale;
    let mut u = start;
    let mut gu = g(&u);
    let mut iterations = 0;
    let phi = |u: &DVector<f64>, gu: f64, tau: f64| 0.5 * u.norm_squared() - tau * (-gu).ln();
    loop {
        for _ in 0..50 {
            if iterations >= cfg.max_iterations {
                return (u, iterations, false);
            }
            iterations += 1;
            let a = DVector::from_vec(grad_v(&u));
            let grad = &u - &a * (tau / gu);
            // (I + c a a^T)^-1 grad via Sherman-Morrison.
            let c = tau / (gu * gu);
            let step = -(&grad - &a * (c * a.dot(&grad) / (1.0 + c * a.norm_squared())));
            let slope = grad.dot(&step);
            if -slope <= 1e-14 * (1.0 + phi(&u, gu, tau).abs()) {
                break;
            }
            let f0 = phi(&u, gu, tau);
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..40 {
                let cand = &u + &step * t;
                let gc = g(&cand);
                if gc < 0.0 && phi(&cand, gc, tau) <= f0 + 1e-4 * t * slope {
                    u = cand;
                    gu = gc;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        if tau <= tau_final {
            return (u, iterations, true);
        }
        tau /= cfg.barrier_decrease;
    }
}

/// Bisects on the segment between `0` (infeasible, constraint value
/// `g_zero`) and the feasible `u` for a shorter feasible control.
fn shrink_towards_zero<G: Fn(&DVector<f64>) -> f64>(g: &G, u: DVector<f64>, g_zero: f64) -> DVector<f64> {
    if g_zero <= 0.0 {
        return u * 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if g(&(&u * mid)) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    &u * hi
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedRadius,
    StepLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub states: Vec<DVector<f64>>,
    /// One control per transition.
    pub controls: Vec<DVector<f64>>,
    /// `V` at every state.
    pub lyapunov_values: Vec<f64>,
    /// Seconds spent computing each control.
    pub wall_times: Vec<f64>,
    /// Whether each step kept the nominal prediction.
    pub skipped: Vec<bool>,
    pub termination: Termination,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub steps: usize,
    pub termination: Termination,
    pub final_state: Vec<f64>,
    pub final_lyapunov: f64,
    pub nontrivial_controls: usize,
    pub total_wall_time: f64,
}

impl SimulationResult {
    pub fn steps(&self) -> usize {
        self.controls.len()
    }

    pub fn trajectory(&self, id: &str) -> Result<Trajectory> {
        if self.states.len() < 2 {
            // a rollout that starts inside the stop radius is a single point
            return Trajectory::new(id, vec![self.states[0].clone(), self.states[0].clone()]);
        }
        Trajectory::new(id, self.states.clone())
    }

    pub fn summary(&self) -> SimulationSummary {
        SimulationSummary {
            steps: self.steps(),
            termination: self.termination,
            final_state: self.states.last().map(|s| s.as_slice().to_vec()).unwrap_or_default(),
            final_lyapunov: self.lyapunov_values.last().copied().unwrap_or(0.0),
            nontrivial_controls: self.skipped.iter().filter(|s| !**s).count(),
            total_wall_time: self.wall_times.iter().sum(),
        }
    }

    /// One row per state: coordinates, the control applied from that state
    /// (empty on the last row), `V`, and the control's wall time.
    pub fn to_csv(&self) -> String {
        let d = self.states.first().map_or(0, |s| s.len());
        let mut out = String::new();
        let head: Vec<String> = (0..d)
            .map(|i| format!("x{i}"))
            .chain((0..d).map(|i| format!("u{i}")))
            .chain(["V".to_string(), "wall_time".to_string()])
            .collect();
        out.push_str(&head.join(","));
        out.push('\n');
        for (k, s) in self.states.iter().enumerate() {
            let mut cells: Vec<String> = s.iter().map(|v| format!("{v:?}")).collect();
            match self.controls.get(k) {
                Some(u) => cells.extend(u.iter().map(|v| format!("{v:?}"))),
                None => cells.extend(std::iter::repeat_n(String::new(), d)),
            }
            cells.push(format!("{:?}", self.lyapunov_values[k]));
            cells.push(self.wall_times.get(k).map(|t| format!("{t:?}")).unwrap_or_default());
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
