use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use nalgebra::DVector;
use serde_json::json;

use stabgp::bench::{data_bounds, grid_timing, run_benchmark};
use stabgp::clf::{hinge_loss, ClfKind, ClfModel};
use stabgp::config::Config;
use stabgp::export::export_field;
use stabgp::gpssm::Gpssm;
use stabgp::metrics::truncated_reproduction_error;
use stabgp::pipeline::{fit_clf, prepare, train_nominal};
use stabgp::stabilizer::StabilizedModel;
use stabgp::trajectory::load_dataset;

/// Learn stable dynamical systems from demonstrations.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// JSON configuration; missing fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every randomized stage (overrides the configuration).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Diagonal jitter for kernel matrices (overrides the configuration).
    #[arg(long, global = true)]
    jitter: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct DataArg {
    /// Demonstration CSV file or directory (defaults to `dataset` in the configuration).
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Dynamics model written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Lyapunov function written by `clf-fit`.
    #[arg(long)]
    clf: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the dynamics model; writes `gpssm.json`.
    Train(DataArg),
    /// Fit a Lyapunov function on the model's training pairs; writes `clf_<kind>.json`.
    ClfFit {
        #[arg(long)]
        model: PathBuf,
        /// np, wsaqf or sos.
        #[arg(long, default_value = "np")]
        kind: ClfKind,
    },
    /// Roll out the stabilized model; writes one CSV per start and `simulation.json`.
    Simulate {
        #[command(flatten)]
        models: ModelArgs,
        /// Start state as comma-separated coordinates; repeatable. Defaults to
        /// the first state of every training demonstration.
        #[arg(long, value_delimiter = ';')]
        x0: Vec<String>,
        #[arg(long)]
        max_steps: Option<usize>,
        #[arg(long)]
        stop_radius: Option<f64>,
    },
    /// Compare rollouts with demonstrations and time the control on a grid; writes `evaluation.json`.
    Evaluate {
        #[command(flatten)]
        models: ModelArgs,
        #[command(flatten)]
        data: DataArg,
        /// Skip the grid timing pass.
        #[arg(long)]
        no_timing: bool,
    },
    /// Run every configured Lyapunov function on each shape directory; writes `report.json` and `report.md`.
    Benchmark(DataArg),
    /// Write grid CSVs of the nominal and stabilized fields and of V.
    ExportField {
        #[command(flatten)]
        models: ModelArgs,
        /// Nodes per dimension (defaults to `grid.n`).
        #[arg(long)]
        n: Option<usize>,
    },
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(j) = cli.jitter {
        cfg.jitter = j;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dataset(arg: &DataArg, cfg: &Config) -> Result<PathBuf> {
    arg.data
        .clone()
        .or_else(|| cfg.dataset.clone())
        .context("no dataset given: pass --data or set `dataset` in the configuration")
}

fn load_models(args: &ModelArgs, cfg: &Config) -> Result<StabilizedModel> {
    let nominal = Gpssm::load(&args.model)?;
    let clf = ClfModel::load(&args.clf)?;
    Ok(StabilizedModel::new(nominal, clf, cfg.solver.clone())?)
}

fn parse_state(s: &str, d: usize) -> Result<DVector<f64>> {
    let v = s
        .split(',')
        .map(|c| c.trim().parse::<f64>().with_context(|| format!("bad coordinate {c:?} in {s:?}")))
        .collect::<Result<Vec<_>>>()?;
    if v.len() != d {
        bail!("start state {s:?} has {} coordinates, expected {d}", v.len());
    }
    Ok(DVector::from_vec(v))
}

fn grid_bounds(cfg: &Config, model: &StabilizedModel) -> Vec<[f64; 2]> {
    cfg.grid
        .bounds
        .clone()
        .unwrap_or_else(|| data_bounds(model.nominal().pairs(), cfg.grid.padding))
}

fn create_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let out = &cli.out;
    create_out(out)?;
    match &cli.command {
        Command::Train(data) => {
            let demos = load_dataset(&dataset(data, &cfg)?)?;
            let prepared = prepare(&demos, cfg.downsample)?;
            info!("{} demonstrations, {} pairs", demos.len(), prepared.pairs.len());
            let model = train_nominal(&prepared.pairs, &cfg)?;
            let path = out.join("gpssm.json");
            model.save(&path)?;
            println!("{}", path.display());
        }
        Command::ClfFit { model, kind } => {
            let nominal = Gpssm::load(model)?;
            let clf = fit_clf(*kind, &nominal, &cfg)?;
            let hinge = hinge_loss(clf.as_lyapunov(), &nominal.pairs().without_origin()?);
            info!("{} hinge loss {hinge}", kind.label());
            let path = out.join(format!("clf_{}.json", kind.label().to_ascii_lowercase()));
            clf.save(&path)?;
            println!("{}", path.display());
        }
        Command::Simulate {
            models,
            x0,
            max_steps,
            stop_radius,
        } => {
            let model = load_models(models, &cfg)?;
            let starts: Vec<DVector<f64>> = if x0.is_empty() {
                let pairs = model.nominal().pairs();
                // a demonstration starts where an input is nobody's target
                (0..pairs.demo_len())
                    .map(|m| pairs.input(m))
                    .filter(|x| (0..pairs.len()).all(|k| pairs.target(k) != *x))
                    .collect()
            } else {
                x0.iter().map(|s| parse_state(s, model.dim())).collect::<Result<_>>()?
            };
            let mut summaries = Vec::new();
            for (j, x) in starts.iter().enumerate() {
                let sim = model.simulate(
                    x,
                    max_steps.unwrap_or(cfg.max_steps),
                    stop_radius.unwrap_or(cfg.stop_radius),
                )?;
                sim.write_csv(&out.join(format!("rollout_{j}.csv")))?;
                summaries.push(json!({ "start": x.as_slice(), "summary": sim.summary() }));
            }
            stabgp::io::write_json(&out.join("simulation.json"), &summaries)?;
            println!("{} rollouts written to {}", starts.len(), out.display());
        }
        Command::Evaluate { models, data, no_timing } => {
            let model = load_models(models, &cfg)?;
            let demos = load_dataset(&dataset(data, &cfg)?)?;
            let prepared = prepare(&demos, cfg.downsample)?;
            let mut rows = Vec::new();
            for reference in &prepared.references {
                let sim = model.simulate(reference.first(), cfg.max_steps, cfg.stop_radius)?;
                let area = truncated_reproduction_error(reference, &sim.trajectory(&reference.id)?, cfg.resolution)?;
                println!("{}: delta_rep {area:.4}", reference.id);
                rows.push(json!({ "id": reference.id, "delta_rep": area, "summary": sim.summary() }));
            }
            let timing = if *no_timing {
                None
            } else {
                let mut t = grid_timing(&model, &grid_bounds(&cfg, &model), cfg.grid.n)?;
                t.log.clear();
                Some(t)
            };
            let hinge = hinge_loss(model.clf().as_lyapunov(), &model.nominal().pairs().without_origin()?);
            let report = json!({
                "kind": model.clf().kind(),
                "hinge_loss": hinge,
                "trajectories": rows,
                "grid_timing": timing,
            });
            stabgp::io::write_json(&out.join("evaluation.json"), &report)?;
        }
        Command::Benchmark(data) => {
            let dir = dataset(data, &cfg)?;
            let report = run_benchmark(&dir, &cfg, Some(&out.join("rollouts")))?;
            report.write(out)?;
            print!("{}", report.to_markdown());
        }
        Command::ExportField { models, n } => {
            let model = load_models(models, &cfg)?;
            let files = export_field(&model, &grid_bounds(&cfg, &model), n.unwrap_or(cfg.grid.n), out)?;
            for p in [files.nominal, files.stabilized, files.lyapunov, files.sqrt_lyapunov] {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
