//! Grid timing of the virtual control and the reproduction benchmark over a
//! directory of demonstration sets.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clf::{hinge_loss, ClfKind};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::metrics::truncated_reproduction_error;
use crate::pipeline::{fit_clf, prepare, train_nominal};
use crate::stabilizer::{SimulationSummary, StabilizedModel, Termination};
use crate::trajectory::{csv_files, load_dataset, PairSet};

/// Nodes of an `n^d` grid, first coordinate varying slowest.
pub fn grid_nodes(bounds: &[[f64; 2]], n: usize) -> Vec<DVector<f64>> {
    let d = bounds.len();
    let total = n.checked_pow(d as u32).expect("grid size overflow");
    (0..total)
        .map(|mut idx| {
            let mut x = DVector::zeros(d);
            for i in (0..d).rev() {
                let k = idx % n;
                idx /= n;
                let [lo, hi] = bounds[i];
                x[i] = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            }
            x
        })
        .collect()
}

/// Bounding box of all pair inputs and targets, widened by `padding` of the
/// extent on each side.
pub fn data_bounds(pairs: &PairSet, padding: f64) -> Vec<[f64; 2]> {
    (0..pairs.dim())
        .map(|i| {
            let row = pairs.inputs.column(i).iter().chain(pairs.targets.column(i).iter()).copied().collect::<Vec<_>>();
            let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let pad = ((hi - lo) * padding).max(1e-9);
            [lo - pad, hi + pad]
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeTiming {
    pub point: Vec<f64>,
    pub seconds: f64,
    pub skipped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridTiming {
    pub nodes: usize,
    pub trivial: usize,
    pub nontrivial: usize,
    /// Mean seconds per query over nodes that needed a control; absent when
    /// there were none.
    pub mean_nontrivial_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub log: Vec<NodeTiming>,
}

impl GridTiming {
    pub fn from_log(log: Vec<NodeTiming>) -> Self {
        let nontrivial: Vec<f64> = log.iter().filter(|n| !n.skipped).map(|n| n.seconds).collect();
        let mean = (!nontrivial.is_empty()).then(|| nontrivial.iter().sum::<f64>() / nontrivial.len() as f64);
        Self {
            nodes: log.len(),
            trivial: log.len() - nontrivial.len(),
            nontrivial: nontrivial.len(),
            mean_nontrivial_seconds: mean,
            log,
        }
    }
}

/// Times the virtual control at every node of an `n^d` grid. A node counts
/// as trivial when the nominal step was kept.
pub fn grid_timing(model: &StabilizedModel, bounds: &[[f64; 2]], n: usize) -> Result<GridTiming> {
    Error::check_dim(model.dim(), bounds.len())?;
    if n < 2 {
        return Err(Error::InvalidConfig("grid needs at least 2 nodes per dimension".into()));
    }
    let log = grid_nodes(bounds, n)
        .par_iter()
        .map(|x| {
            let start = Instant::now();
            let (_, diag) = model.stabilize_step(x)?;
            Ok(NodeTiming {
                point: x.as_slice().to_vec(),
                seconds: start.elapsed().as_secs_f64(),
                skipped: diag.skipped,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GridTiming::from_log(log))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    pub id: String,
    pub delta_rep: f64,
    pub summary: SimulationSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClfResult {
    pub kind: ClfKind,
    /// Area per rollout averaged over the demonstrations of the shape.
    pub delta_rep_mean: Option<f64>,
    pub delta_rep_total: Option<f64>,
    /// Rollouts contributing to the area columns.
    pub delta_rep_count: usize,
    /// Seconds to fit the Lyapunov function.
    pub t_train: Option<f64>,
    /// Mean seconds per grid query needing a control.
    pub t_test: Option<f64>,
    /// Grid queries contributing to `t_test`.
    pub t_test_count: usize,
    pub grid_nodes: usize,
    pub hinge_loss: Option<f64>,
    pub step_limit_rollouts: usize,
    pub trajectories: Vec<TrajectoryResult>,
    pub error: Option<String>,
}

impl ClfResult {
    fn failed(kind: ClfKind, error: String) -> Self {
        Self {
            kind,
            delta_rep_mean: None,
            delta_rep_total: None,
            delta_rep_count: 0,
            t_train: None,
            t_test: None,
            t_test_count: 0,
            grid_nodes: 0,
            hinge_loss: None,
            step_limit_rollouts: 0,
            trajectories: Vec::new(),
            error: Some(error),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub name: String,
    pub demonstrations: usize,
    pub pairs: usize,
    /// Seconds to train the dynamics model.
    pub t_nominal: Option<f64>,
    pub results: Vec<ClfResult>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub kind: ClfKind,
    /// Shapes that produced an area value.
    pub shapes: usize,
    /// Mean over shapes of the per-shape mean area.
    pub delta_rep_mean: Option<f64>,
    /// Sum over shapes of the per-shape total area.
    pub delta_rep_total: Option<f64>,
    pub t_train_mean: Option<f64>,
    pub t_test_mean: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: Config,
    pub shapes: Vec<ShapeReport>,
    pub summary: Vec<KindSummary>,
    /// How the area of early-terminated rollouts is measured.
    pub notes: Vec<String>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Shape directories under `dataset_dir`, sorted by name. A directory that
/// holds demonstration files itself counts as a single shape.
pub fn shape_dirs(dataset_dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dataset_dir).map_err(|e| Error::io(dataset_dir, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dataset_dir, e))?.path();
        if path.is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    if dirs.is_empty() && !csv_files(dataset_dir)?.is_empty() {
        dirs.push(dataset_dir.to_path_buf());
    }
    Ok(dirs)
}

/// Trains the dynamics model and every configured Lyapunov function on each
/// shape, rolls out from every demonstration start and measures areas and
/// timings. Failures are recorded per shape or per kind. Rollout CSVs go to
/// `<rollout_dir>/<shape>/<kind>_<demo>.csv` when a directory is given.
pub fn run_benchmark(dataset_dir: &Path, cfg: &Config, rollout_dir: Option<&Path>) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let shapes = shape_dirs(dataset_dir)?
        .par_iter()
        .map(|dir| run_shape(dir, cfg, rollout_dir))
        .collect::<Vec<_>>();
    let summary = cfg
        .clf_kinds
        .iter()
        .map(|&kind| {
            let cells: Vec<&ClfResult> = shapes
                .iter()
                .flat_map(|s| s.results.iter().filter(move |r| r.kind == kind))
                .collect();
            let means: Vec<f64> = cells.iter().filter_map(|c| c.delta_rep_mean).collect();
            let totals: Vec<f64> = cells.iter().filter_map(|c| c.delta_rep_total).collect();
            let trains: Vec<f64> = cells.iter().filter_map(|c| c.t_train).collect();
            let tests: Vec<f64> = cells.iter().filter_map(|c| c.t_test).collect();
            KindSummary {
                kind,
                shapes: means.len(),
                delta_rep_mean: mean(&means),
                delta_rep_total: (!totals.is_empty()).then(|| totals.iter().sum()),
                t_train_mean: mean(&trains),
                t_test_mean: mean(&tests),
            }
        })
        .collect();
    Ok(BenchmarkReport {
        config: cfg.clone(),
        shapes,
        summary,
        notes: vec![format!(
            "rollouts stop once |x| <= {}; the remaining reference tail is compared with the straight segment \
             from the rollout end to the origin",
            cfg.stop_radius
        )],
    })
}

fn run_shape(dir: &Path, cfg: &Config, rollout_dir: Option<&Path>) -> ShapeReport {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut report = ShapeReport {
        name: name.clone(),
        demonstrations: 0,
        pairs: 0,
        t_nominal: None,
        results: Vec::new(),
        error: None,
    };
    let staged = (|| {
        let demos = load_dataset(dir)?;
        report.demonstrations = demos.len();
        let prepared = prepare(&demos, cfg.downsample)?;
        report.pairs = prepared.pairs.len();
        let start = Instant::now();
        let nominal = train_nominal(&prepared.pairs, cfg)?;
        report.t_nominal = Some(start.elapsed().as_secs_f64());
        info!("{name}: {} pairs, dynamics trained", report.pairs);
        Ok::<_, Error>((prepared, nominal))
    })();
    let (prepared, nominal) = match staged {
        Ok(v) => v,
        Err(e) => {
            warn!("{name}: {e}");
            report.error = Some(e.to_string());
            return report;
        }
    };
    let bounds = cfg.grid.bounds.clone().unwrap_or_else(|| data_bounds(&prepared.pairs, cfg.grid.padding));
    let shape_out = rollout_dir.map(|d| d.join(&name));
    report.results = cfg
        .clf_kinds
        .iter()
        .map(|&kind| {
            run_kind(kind, &prepared, &nominal, &bounds, cfg, shape_out.as_deref())
                .unwrap_or_else(|e| {
                    warn!("{name} {}: {e}", kind.label());
                    ClfResult::failed(kind, e.to_string())
                })
        })
        .collect();
    report
}

fn run_kind(
    kind: ClfKind,
    prepared: &crate::pipeline::Prepared,
    nominal: &crate::gpssm::Gpssm,
    bounds: &[[f64; 2]],
    cfg: &Config,
    out: Option<&Path>,
) -> Result<ClfResult> {
    let start = Instant::now();
    let clf = fit_clf(kind, nominal, cfg)?;
    let t_train = start.elapsed().as_secs_f64();
    let hinge = hinge_loss(clf.as_lyapunov(), &nominal.pairs().without_origin()?);
    let model = StabilizedModel::new(nominal.clone(), clf, cfg.solver.clone())?;

    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let trajectories = prepared
        .references
        .par_iter()
        .enumerate()
        .map(|(j, reference)| {
            let sim = model.simulate(reference.first(), cfg.max_steps, cfg.stop_radius)?;
            let delta = truncated_reproduction_error(reference, &sim.trajectory(&reference.id)?, cfg.resolution)?;
            if let Some(dir) = out {
                sim.write_csv(&dir.join(format!("{}_{j}.csv", kind.label().to_ascii_lowercase())))?;
            }
            Ok(TrajectoryResult {
                id: reference.id.clone(),
                delta_rep: delta,
                summary: sim.summary(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let areas: Vec<f64> = trajectories.iter().map(|t| t.delta_rep).collect();
    let timing = if cfg.skip_grid_timing {
        None
    } else {
        Some(grid_timing(&model, bounds, cfg.grid.n)?)
    };
    Ok(ClfResult {
        kind,
        delta_rep_mean: mean(&areas),
        delta_rep_total: (!areas.is_empty()).then(|| areas.iter().sum()),
        delta_rep_count: areas.len(),
        t_train: Some(t_train),
        t_test: timing.as_ref().and_then(|t| t.mean_nontrivial_seconds),
        t_test_count: timing.as_ref().map_or(0, |t| t.nontrivial),
        grid_nodes: timing.as_ref().map_or(0, |t| t.nodes),
        hinge_loss: Some(hinge),
        step_limit_rollouts: trajectories
            .iter()
            .filter(|t| t.summary.termination == Termination::StepLimit)
            .count(),
        trajectories,
        error: None,
    })
}

fn cell(v: Option<f64>, fmt: impl Fn(f64) -> String) -> String {
    v.map(fmt).unwrap_or_else(|| "–".into())
}

impl BenchmarkReport {
    /// Table with one row per shape plus a summary row; per kind the mean
    /// area per rollout, the CLF training time and the mean control time.
    pub fn to_markdown(&self) -> String {
        let kinds: Vec<ClfKind> = self.config.clf_kinds.clone();
        let mut out = String::new();
        let mut head = vec!["Shape".to_string()];
        for k in &kinds {
            head.push(format!("Δ_rep {}", k.label()));
        }
        for k in &kinds {
            head.push(format!("t_train {} [s]", k.label()));
        }
        for k in &kinds {
            head.push(format!("t_test {} [ms]", k.label()));
        }
        let _ = writeln!(out, "| {} |", head.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(head.len()));
        for s in &self.shapes {
            let find = |k: ClfKind| s.results.iter().find(|r| r.kind == k);
            let mut row = vec![s.name.clone()];
            for &k in &kinds {
                row.push(match find(k) {
                    Some(r) if r.error.is_none() => cell(r.delta_rep_mean, |v| format!("{v:.2}")),
                    _ => "failed".into(),
                });
            }
            for &k in &kinds {
                row.push(cell(find(k).and_then(|r| r.t_train), |v| format!("{v:.3}")));
            }
            for &k in &kinds {
                row.push(cell(find(k).and_then(|r| r.t_test), |v| format!("{:.2}", v * 1e3)));
            }
            if let Some(e) = &s.error {
                row = vec![format!("{} (failed: {e})", s.name)];
                row.extend(std::iter::repeat_n("–".to_string(), head.len() - 1));
            }
            let _ = writeln!(out, "| {} |", row.join(" | "));
        }
        let find = |k: ClfKind| self.summary.iter().find(|r| r.kind == k);
        let mut row = vec!["all (mean)".to_string()];
        for &k in &kinds {
            row.push(cell(find(k).and_then(|r| r.delta_rep_mean), |v| format!("{v:.2}")));
        }
        for &k in &kinds {
            row.push(cell(find(k).and_then(|r| r.t_train_mean), |v| format!("{v:.3}")));
        }
        for &k in &kinds {
            row.push(cell(find(k).and_then(|r| r.t_test_mean), |v| format!("{:.2}", v * 1e3)));
        }
        let _ = writeln!(out, "| {} |", row.join(" | "));
        let mut row = vec!["all (total)".to_string()];
        for &k in &kinds {
            row.push(cell(find(k).and_then(|r| r.delta_rep_total), |v| format!("{v:.2}")));
        }
        row.extend(std::iter::repeat_n("".to_string(), 2 * kinds.len()));
        let _ = writeln!(out, "| {} |", row.join(" | "));
        out.push('\n');
        out.push_str("Δ_rep: area between demonstration and rollout (mean per rollout; the total row sums all rollouts). ");
        out.push_str("t_test: mean over grid queries that needed a control.\n");
        for n in &self.notes {
            let _ = writeln!(out, "\n{n}");
        }
        out
    }

    /// Writes `report.json` and `report.md` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        crate::io::write_json(&dir.join("report.json"), self)?;
        let md = dir.join("report.md");
        std::fs::write(&md, self.to_markdown()).map_err(|e| Error::io(&md, e))
    }
}
