use std::fs;

use stabgp::error::Error;
use stabgp::synthetic::{write_dataset, Shape};
use stabgp::trajectory::{load_dataset, load_trajectory, save_trajectory, to_pairs, Trajectory};

#[test]
fn comments_and_blank_lines_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.csv");
    fs::write(&p, "# x,y\n1.0, 2.0\n\n0.5,1.0\n0,0\n").unwrap();
    let t = load_trajectory(&p).unwrap();
    assert_eq!(t.len(), 3);
    assert_eq!(t.id, "a");
    assert_eq!(t.first().as_slice(), &[1.0, 2.0]);
}

#[test]
fn bad_cells_name_file_and_row() {
    let dir = tempfile::tempdir().unwrap();
    for (body, row) in [("1,2\n3,x\n", 2), ("1,2\n3,4\n5\n", 3), ("# h\n1,2\nnan,1\n", 3), ("1,inf\n1,2\n", 1)] {
        let p = dir.path().join("bad.csv");
        fs::write(&p, body).unwrap();
        match load_trajectory(&p) {
            Err(e @ Error::Parse { .. }) => {
                let msg = e.to_string();
                assert!(msg.contains("bad.csv"), "{msg}");
                assert!(matches!(e, Error::Parse { row: r, .. } if r == row), "{msg}");
            }
            other => panic!("{body:?}: {other:?}"),
        }
    }
}

#[test]
fn short_and_empty_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("one.csv");
    fs::write(&p, "1,2\n").unwrap();
    assert!(matches!(load_trajectory(&p), Err(Error::TooShort { .. })));
    fs::write(&p, "").unwrap();
    assert!(matches!(load_trajectory(&p), Err(Error::TooShort { .. })));
    assert!(matches!(load_dataset(&dir.path().join("missing")), Err(Error::Io { .. })));
}

#[test]
fn directories_load_sorted_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &[Shape::Line], 3, 40, 5).unwrap();
    let trajs = load_dataset(&dir.path().join("Line")).unwrap();
    let ids: Vec<&str> = trajs.iter().map(|t| t.id.as_str()).collect();
    assert_eq!(ids, ["demo_0", "demo_1", "demo_2"]);
    assert!(trajs.iter().all(|t| t.len() == 40));

    let p = dir.path().join("copy.csv");
    save_trajectory(&trajs[1], &p).unwrap();
    let back = load_trajectory(&p).unwrap();
    assert_eq!(back.states(), trajs[1].states());
}

#[test]
fn mixed_dimensions_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.csv"), "1,2\n0,0\n").unwrap();
    fs::write(dir.path().join("b.csv"), "1,2,3\n0,0,0\n").unwrap();
    assert!(matches!(load_dataset(dir.path()), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn downsampling_examples() {
    let rows: Vec<Vec<f64>> = (0..25).map(|k| vec![(24 - k) as f64]).collect();
    let t = Trajectory::from_rows("t", &rows).unwrap();
    let d = t.downsample(10).unwrap();
    let got: Vec<f64> = d.states().iter().map(|s| s[0]).collect();
    assert_eq!(got, [24.0, 14.0, 4.0, 0.0]);
    assert_eq!(t.downsample(1).unwrap(), t);
    assert!(matches!(t.downsample(0), Err(Error::DownsampleFactor { .. })));
    assert!(t.downsample(25).is_err());
}

#[test]
fn pairs_reject_states_shared_between_demonstrations() {
    let a = Trajectory::from_rows("a", &[vec![3.0, 0.0], vec![1.0, 1.0], vec![0.5, 0.5]]).unwrap();
    let b = Trajectory::from_rows("b", &[vec![0.0, 3.0], vec![1.0, 1.0], vec![0.2, 0.2]]).unwrap();
    assert!(matches!(to_pairs(&[a, b], false), Err(Error::DuplicateRow { .. })));
}
