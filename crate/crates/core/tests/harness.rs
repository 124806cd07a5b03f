mod common;

use std::fs;

use common::*;
use stabgp::bench::{grid_timing, run_benchmark};
use stabgp::clf::ClfKind;
use stabgp::config::Config;
use stabgp::export::export_field;
use stabgp::stabilizer::{SolverConfig, StabilizedModel};
use stabgp::synthetic::{write_dataset, Shape};

fn light_config() -> Config {
    let mut cfg = quick_config();
    cfg.skip_grid_timing = true;
    cfg
}

#[test]
fn empty_dataset_gives_empty_report() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_benchmark(dir.path(), &light_config(), None).unwrap();
    assert!(report.shapes.is_empty());
    assert!(report.summary.iter().all(|s| s.shapes == 0 && s.delta_rep_mean.is_none()));
}

#[test]
fn linear_contraction_is_reproduced_by_every_kind() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &[Shape::Line], 3, 250, 0).unwrap();
    let report = run_benchmark(dir.path(), &light_config(), None).unwrap();
    let shape = &report.shapes[0];
    assert!(shape.error.is_none());
    assert_eq!(shape.results.len(), 3);
    for r in &shape.results {
        assert!(r.error.is_none(), "{:?}", r.error);
        assert_eq!(r.delta_rep_count, 3);
        assert!(r.delta_rep_mean.unwrap() < 1.0, "{:?}: {:?}", r.kind, r.delta_rep_mean);
        assert_eq!(r.step_limit_rollouts, 0);
    }
}

#[test]
fn benchmark_numbers_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &[Shape::Angle, Shape::Line], 3, 250, 3).unwrap();
    let cfg = light_config();
    let a = run_benchmark(dir.path(), &cfg, None).unwrap();
    let b = run_benchmark(dir.path(), &cfg, None).unwrap();
    let numbers = |r: &stabgp::bench::BenchmarkReport| -> Vec<(String, ClfKind, Option<f64>, Option<f64>)> {
        r.shapes
            .iter()
            .flat_map(|s| s.results.iter().map(move |c| (s.name.clone(), c.kind, c.delta_rep_total, c.hinge_loss)))
            .collect()
    };
    assert_eq!(numbers(&a), numbers(&b));
}

#[test]
fn broken_shapes_are_recorded_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &[Shape::Line], 2, 100, 0).unwrap();
    let bad = dir.path().join("Broken");
    fs::create_dir_all(&bad).unwrap();
    fs::write(bad.join("demo.csv"), "1,2\nfoo,3\n").unwrap();
    let mut cfg = light_config();
    cfg.clf_kinds = vec![ClfKind::Np];
    let report = run_benchmark(dir.path(), &cfg, None).unwrap();
    assert_eq!(report.shapes.len(), 2);
    let broken = report.shapes.iter().find(|s| s.name == "Broken").unwrap();
    assert!(broken.error.as_deref().unwrap().contains("demo.csv"));
    let line = report.shapes.iter().find(|s| s.name == "Line").unwrap();
    assert!(line.error.is_none());

    let out = tempfile::tempdir().unwrap();
    report.write(out.path()).unwrap();
    let md = fs::read_to_string(out.path().join("report.md")).unwrap();
    assert!(md.starts_with("| Shape | Δ_rep NP |"));
    assert!(md.contains("Broken (failed"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["shapes"].as_array().unwrap().len(), 2);
}

#[test]
fn rollout_csvs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &[Shape::Line], 2, 100, 0).unwrap();
    let out = tempfile::tempdir().unwrap();
    let mut cfg = light_config();
    cfg.clf_kinds = vec![ClfKind::Sos];
    run_benchmark(dir.path(), &cfg, Some(out.path())).unwrap();
    assert!(out.path().join("Line/sos_0.csv").exists());
    assert!(out.path().join("Line/sos_1.csv").exists());
}

#[test]
fn grid_timing_and_field_export_agree_with_direct_evaluation() {
    let (_, nominal) = shape_model(Shape::Angle);
    let clf = clf_for(ClfKind::Np, &nominal);
    let model = StabilizedModel::new(nominal, clf, SolverConfig::default()).unwrap();
    let bounds = [[-50.0, 10.0], [-10.0, 50.0]];

    let t = grid_timing(&model, &bounds, 12).unwrap();
    assert_eq!(t.nodes, 144);
    assert_eq!(t.trivial + t.nontrivial, 144);
    let manual: Vec<f64> = t.log.iter().filter(|n| !n.skipped).map(|n| n.seconds).collect();
    if manual.is_empty() {
        assert!(t.mean_nontrivial_seconds.is_none());
    } else {
        let mean = manual.iter().sum::<f64>() / manual.len() as f64;
        assert!((t.mean_nontrivial_seconds.unwrap() - mean).abs() < 1e-15);
    }

    let out = tempfile::tempdir().unwrap();
    let files = export_field(&model, &bounds, 2, out.path()).unwrap();
    let read = |p: &std::path::Path| -> Vec<Vec<f64>> {
        let text = fs::read_to_string(p).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("x0,x1,"));
        lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect()
    };
    let v = read(&files.lyapunov);
    let sv = read(&files.sqrt_lyapunov);
    assert_eq!(v.len(), 4);
    assert_eq!(read(&files.nominal).len(), 4);
    assert_eq!(read(&files.stabilized).len(), 4);
    for (row, srow) in v.iter().zip(&sv) {
        let direct = model.clf().evaluate(&dvec(&row[..2])).unwrap();
        assert!((row[2] - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        assert!((srow[2] - row[2].sqrt()).abs() <= 1e-12 * srow[2].max(1.0));
    }
}
