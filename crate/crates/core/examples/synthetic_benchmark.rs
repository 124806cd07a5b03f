//! Generates the synthetic shapes into a scratch directory and runs the
//! benchmark on them.
//!
//! ```text
//! cargo run --release --example synthetic_benchmark [out_dir]
//! ```

use std::path::PathBuf;

use stabgp::bench::run_benchmark;
use stabgp::config::Config;
use stabgp::synthetic::{write_dataset, Shape};

fn main() -> stabgp::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("stabgp-bench"));
    let data = out.join("data");
    write_dataset(&data, &[Shape::SShape, Shape::Angle, Shape::CShape], 3, 250, 0)?;
    let report = run_benchmark(&data, &Config::default(), Some(&out.join("rollouts")))?;
    report.write(&out)?;
    print!("{}", report.to_markdown());
    Ok(())
}
