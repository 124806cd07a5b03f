//! Grid exports of the learned fields for external plotting.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;

use crate::bench::grid_nodes;
use crate::error::{Error, Result};
use crate::stabilizer::StabilizedModel;

/// Files written by [`export_field`].
#[derive(Clone, Debug)]
pub struct FieldFiles {
    /// Nominal prediction `mu(x)`.
    pub nominal: PathBuf,
    /// Stabilized displacement `f(x) - x`.
    pub stabilized: PathBuf,
    pub lyapunov: PathBuf,
    pub sqrt_lyapunov: PathBuf,
}

fn header(d: usize, tail: &[String]) -> String {
    let mut cols: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
    cols.extend_from_slice(tail);
    cols.join(",") + "\n"
}

fn push_row(out: &mut String, x: &DVector<f64>, values: &[f64]) {
    let cells: Vec<String> = x.iter().chain(values).map(|v| format!("{v:?}")).collect();
    let _ = writeln!(out, "{}", cells.join(","));
}

/// Writes `nominal_field.csv`, `stabilized_field.csv`, `lyapunov.csv` and
/// `sqrt_lyapunov.csv` on an `n^d` grid into `out`, one row per node.
pub fn export_field(model: &StabilizedModel, bounds: &[[f64; 2]], n: usize, out: &Path) -> Result<FieldFiles> {
    let d = model.dim();
    Error::check_dim(d, bounds.len())?;
    if n < 2 {
        return Err(Error::InvalidConfig("grid needs at least 2 nodes per dimension".into()));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let nodes = grid_nodes(bounds, n);
    let rows = nodes
        .par_iter()
        .map(|x| {
            let mu = model.nominal().predict(x)?;
            let (u, _) = model.stabilize_step(x)?;
            let step = &mu + u - x;
            Ok((mu, step, model.lyapunov(x)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let names = |p: &str| (0..d).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let mut nominal = header(d, &names("mu"));
    let mut stabilized = header(d, &names("dx"));
    let mut lyapunov = header(d, &["V".to_string()]);
    let mut sqrt_lyapunov = header(d, &["sqrt_V".to_string()]);
    for (x, (mu, step, v)) in nodes.iter().zip(&rows) {
        push_row(&mut nominal, x, mu.as_slice());
        push_row(&mut stabilized, x, step.as_slice());
        push_row(&mut lyapunov, x, &[*v]);
        push_row(&mut sqrt_lyapunov, x, &[v.max(0.0).sqrt()]);
    }
    let files = FieldFiles {
        nominal: out.join("nominal_field.csv"),
        stabilized: out.join("stabilized_field.csv"),
        lyapunov: out.join("lyapunov.csv"),
        sqrt_lyapunov: out.join("sqrt_lyapunov.csv"),
    };
    for (path, body) in [
        (&files.nominal, nominal),
        (&files.stabilized, stabilized),
        (&files.lyapunov, lyapunov),
        (&files.sqrt_lyapunov, sqrt_lyapunov),
    ] {
        std::fs::write(path, body).map_err(|e| Error::io(path, e))?;
    }
    Ok(files)
}
