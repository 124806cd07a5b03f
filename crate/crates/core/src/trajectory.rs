//! Demonstration trajectories and the supervision pairs derived from them.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Per-coordinate tolerance under which two rows count as the same state.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;

/// An ordered sequence of states recorded from one demonstration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(id: impl Into<String>, states: Vec<DVector<f64>>) -> Result<Self> {
        let id = id.into();
        if states.len() < 2 {
            return Err(Error::TooShort { id });
        }
        let d = states[0].len();
        if d == 0 {
            return Err(Error::InvalidTrajectory {
                id,
                message: "zero-dimensional states".into(),
            });
        }
        for (k, s) in states.iter().enumerate() {
            if s.len() != d {
                return Err(Error::InvalidTrajectory {
                    id,
                    message: format!("state {k} has dimension {} (expected {d})", s.len()),
                });
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidTrajectory {
                    id,
                    message: format!("state {k} is not finite"),
                });
            }
        }
        Ok(Self { id, states })
    }

    /// Builds a trajectory from rows of coordinates.
    pub fn from_rows(id: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            id,
            rows.iter().map(|r| DVector::from_column_slice(r)).collect(),
        )
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn first(&self) -> &DVector<f64> {
        &self.states[0]
    }

    pub fn last(&self) -> &DVector<f64> {
        &self.states[self.states.len() - 1]
    }

    /// Keeps every `factor`-th state starting at index 0 and always the final state.
    pub fn downsample(&self, factor: usize) -> Result<Self> {
        let n = self.states.len();
        if factor == 0 || factor > n - 1 {
            return Err(Error::DownsampleFactor { factor, len: n });
        }
        let mut states: Vec<_> = self.states.iter().step_by(factor).cloned().collect();
        if (n - 1) % factor != 0 {
            states.push(self.states[n - 1].clone());
        }
        Self::new(self.id.clone(), states)
    }

    /// Drops trailing states that sit on the origin.
    ///
    /// Recorded demonstrations usually end exactly at the equilibrium. Those
    /// end points would collide with each other and with the augmented
    /// `(0, 0)` pair, so they are removed before pairing.
    pub fn trim_origin_tail(&self) -> Result<Self> {
        let mut states = self.states.clone();
        while states
            .last()
            .is_some_and(|s| s.iter().all(|v| v.abs() <= DUPLICATE_TOLERANCE))
        {
            states.pop();
        }
        Self::new(self.id.clone(), states)
    }

    /// Applies the same linear map to every state.
    pub fn map_states(&self, f: impl Fn(&DVector<f64>) -> DVector<f64>) -> Result<Self> {
        Self::new(self.id.clone(), self.states.iter().map(f).collect())
    }
}

/// Reads one trajectory from a CSV file: one row per step, comma separated,
/// lines starting with `#` and blank lines ignored.
pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = i + 1;
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            row,
            message,
        };
        let values = line
            .split(',')
            .map(|cell| {
                let cell = cell.trim();
                let v: f64 = cell
                    .parse()
                    .map_err(|_| parse_err(format!("non-numeric cell {cell:?}")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(parse_err(format!("non-finite cell {cell:?}")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != values.len() {
                return Err(parse_err(format!(
                    "ragged row: {} columns, expected {}",
                    values.len(),
                    first.len()
                )));
            }
        }
        rows.push(values);
    }
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Trajectory::from_rows(id, &rows).map_err(|e| match e {
        Error::TooShort { .. } => Error::TooShort {
            id: path.display().to_string(),
        },
        other => other,
    })
}

/// Loads every `*.csv` file of a directory (sorted by file name) or a single
/// CSV file as a list of demonstrations.
pub fn load_dataset(path: &Path) -> Result<Vec<Trajectory>> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or directory"),
        ));
    }
    if path.is_file() {
        return Ok(vec![load_trajectory(path)?]);
    }
    let files = csv_files(path)?;
    let trajs = files
        .par_iter()
        .map(|f| load_trajectory(f))
        .collect::<Result<Vec<_>>>()?;
    if let Some(first) = trajs.first() {
        for t in &trajs {
            Error::check_dim(first.dim(), t.dim())?;
        }
    }
    Ok(trajs)
}

pub fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

/// Writes a trajectory as CSV with a `#` header line.
pub fn save_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    let mut out = String::from("#");
    out.push_str(
        &(0..traj.dim())
            .map(|i| format!("x{i}"))
            .collect::<Vec<_>>()
            .join(","),
    );
    out.push('\n');
    for s in traj.states() {
        let row: Vec<String> = s.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Supervision pairs `(x_k, x_{k+1})` stacked row-wise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSet {
    pub inputs: DMatrix<f64>,
    pub targets: DMatrix<f64>,
    /// Set when the last row is the equilibrium pair `(0, 0)`.
    pub augmented_origin: bool,
}

impl PairSet {
    /// Validates distinctness and builds a pair set from explicit matrices.
    pub fn new(inputs: DMatrix<f64>, targets: DMatrix<f64>, augmented_origin: bool) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::EmptyPairs);
        }
        Error::check_dim(inputs.ncols(), targets.ncols())?;
        Error::check_dim(inputs.nrows(), targets.nrows())?;
        if inputs.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(vec![]));
        }
        check_distinct(&inputs, "input")?;
        check_distinct(&targets, "target")?;
        if augmented_origin {
            let last = inputs.nrows() - 1;
            if inputs.row(last).iter().chain(targets.row(last).iter()).any(|v| *v != 0.0) {
                return Err(Error::InvalidConfig(
                    "augmented pair set must end with the (0, 0) pair".into(),
                ));
            }
        }
        Ok(Self {
            inputs,
            targets,
            augmented_origin,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn input(&self, m: usize) -> DVector<f64> {
        self.inputs.row(m).transpose()
    }

    pub fn target(&self, m: usize) -> DVector<f64> {
        self.targets.row(m).transpose()
    }

    /// Number of demonstration pairs, excluding the augmented origin pair.
    pub fn demo_len(&self) -> usize {
        self.len() - usize::from(self.augmented_origin)
    }

    /// The same pairs with the augmented origin pair removed.
    pub fn without_origin(&self) -> Result<Self> {
        if !self.augmented_origin {
            return Ok(self.clone());
        }
        let m = self.demo_len();
        if m == 0 {
            return Err(Error::EmptyPairs);
        }
        Ok(Self {
            inputs: self.inputs.rows(0, m).into_owned(),
            targets: self.targets.rows(0, m).into_owned(),
            augmented_origin: false,
        })
    }

    /// Hex SHA-256 over the demonstration pairs (the augmented origin pair is
    /// excluded so models trained with and without it share a fingerprint).
    pub fn fingerprint(&self) -> String {
        let m = self.demo_len();
        let mut h = Sha256::new();
        h.update((m as u64).to_le_bytes());
        h.update((self.dim() as u64).to_le_bytes());
        for r in 0..m {
            for v in self.inputs.row(r).iter().chain(self.targets.row(r).iter()) {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

fn check_distinct(rows: &DMatrix<f64>, kind: &'static str) -> Result<()> {
    let n = rows.nrows();
    for a in 0..n {
        for b in (a + 1)..n {
            let same = rows
                .row(a)
                .iter()
                .zip(rows.row(b).iter())
                .all(|(x, y)| (x - y).abs() <= DUPLICATE_TOLERANCE);
            if same {
                return Err(Error::DuplicateRow {
                    kind,
                    first: a,
                    second: b,
                });
            }
        }
    }
    Ok(())
}

/// Concatenates consecutive-state pairs of all trajectories, optionally
/// appending the equilibrium pair `(0, 0)`.
pub fn to_pairs(trajs: &[Trajectory], augment_origin: bool) -> Result<PairSet> {
    let d = trajs.first().ok_or(Error::EmptyPairs)?.dim();
    let m: usize = trajs.iter().map(|t| t.len() - 1).sum::<usize>() + usize::from(augment_origin);
    let mut inputs = DMatrix::zeros(m, d);
    let mut targets = DMatrix::zeros(m, d);
    let mut row = 0;
    for t in trajs {
        Error::check_dim(d, t.dim())?;
        for w in t.states().windows(2) {
            inputs.set_row(row, &w[0].transpose());
            targets.set_row(row, &w[1].transpose());
            row += 1;
        }
    }
    PairSet::new(inputs, targets, augment_origin)
}
