//! Run configuration shared by the command-line tool and the benchmark.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clf::{BaselineFit, ClfKind};
use crate::error::{Error, Result};
use crate::gp::{SearchOptions, DEFAULT_JITTER};
use crate::metrics::DEFAULT_RESOLUTION;
use crate::stabilizer::SolverConfig;

/// Axis-aligned evaluation grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    /// `[low, high]` per dimension; when absent the bounding box of the
    /// training data padded by `padding` of its extent is used.
    pub bounds: Option<Vec<[f64; 2]>>,
    /// Nodes per dimension.
    pub n: usize,
    pub padding: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            bounds: None,
            n: 100,
            padding: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    /// Demonstration file, directory of files, or (for the benchmark) a
    /// directory of shape subdirectories.
    pub dataset: Option<PathBuf>,
    pub downsample: usize,
    pub clf_kinds: Vec<ClfKind>,
    pub solver: SolverConfig,
    pub grid: GridConfig,
    /// Points per curve for the area metric.
    pub resolution: usize,
    pub seed: u64,
    pub jitter: f64,
    pub max_steps: usize,
    pub stop_radius: f64,
    /// Hyperparameter search for the dynamics model.
    pub gp_search: SearchOptions,
    /// Joint search over kernel and stage-cost parameters of the
    /// nonparametric Lyapunov function.
    pub clf_search: SearchOptions,
    pub baseline: BaselineFit,
    /// Skip the grid timing pass in the benchmark.
    pub skip_grid_timing: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            dataset: None,
            downsample: 10,
            clf_kinds: ClfKind::ALL.to_vec(),
            solver: SolverConfig::default(),
            grid: GridConfig::default(),
            resolution: DEFAULT_RESOLUTION,
            seed: 0,
            jitter: DEFAULT_JITTER,
            max_steps: 1000,
            stop_radius: 10.0,
            gp_search: SearchOptions::default(),
            clf_search: SearchOptions::default(),
            baseline: BaselineFit::default(),
            skip_grid_timing: false,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = crate::io::read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.downsample == 0 {
            return bad("downsample must be at least 1");
        }
        if self.resolution < 2 {
            return bad("resolution must be at least 2");
        }
        if self.grid.n < 2 {
            return bad("grid.n must be at least 2");
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return bad("jitter must be finite and non-negative");
        }
        if !(self.stop_radius >= 0.0) {
            return bad("stop_radius must be non-negative");
        }
        if let Some(b) = &self.grid.bounds {
            if b.iter().any(|[lo, hi]| !(lo < hi)) {
                return bad("grid bounds need low < high");
            }
        }
        Ok(())
    }

    /// Applies a seed to every randomized stage.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.gp_search.seed = seed;
        self.clf_search.seed = seed;
        self.baseline.seed = seed;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: Config = serde_json::from_str(r#"{"downsample": 5, "solver": {"rho": 0.02}}"#).unwrap();
        assert_eq!(cfg.downsample, 5);
        assert_eq!(cfg.solver.rho, 0.02);
        assert_eq!(cfg.solver.max_iterations, SolverConfig::default().max_iterations);
        assert_eq!(cfg.grid.n, 100);
        assert_eq!(cfg.clf_kinds, ClfKind::ALL.to_vec());
    }

    #[test]
    fn invalid_values_are_rejected() {
        let cfg = Config {
            downsample: 0,
            ..Config::default()
        };
        assert!(cfg.validate().is_err());
        let mut cfg = Config::default();
        cfg.grid.bounds = Some(vec![[1.0, 0.0]]);
        assert!(cfg.validate().is_err());
    }
}
