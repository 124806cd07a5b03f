mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use stabgp::clf::{hinge_loss, Lyapunov, StageCost, WsaqfParams};
use stabgp::gp::{fit_gp, Hyperparameters, DEFAULT_JITTER};
use stabgp::linalg::{factor_len, min_eigenvalue, spd_from_factor, EIGEN_FLOOR};
use stabgp::metrics::curve_area;
use stabgp::trajectory::{to_pairs, Trajectory};

fn rotate(points: &[DVector<f64>], angle: f64) -> Vec<DVector<f64>> {
    let (c, s) = (angle.cos(), angle.sin());
    points.iter().map(|p| dvec(&[c * p[0] - s * p[1], s * p[0] + c * p[1]])).collect()
}

fn planar_curve() -> impl Strategy<Value = Vec<DVector<f64>>> {
    prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 2..12)
        .prop_map(|v| v.into_iter().map(|(a, b)| dvec(&[a, b])).collect::<Vec<_>>())
        .prop_filter("non-degenerate", |c| c.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum::<f64>() > 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn area_is_symmetric(a in planar_curve(), b in planar_curve()) {
        let ab = curve_area(&a, &b, 200).unwrap();
        let ba = curve_area(&b, &a, 200).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
    }

    #[test]
    fn area_is_rotation_invariant(a in planar_curve(), b in planar_curve(), angle in -3.2..3.2f64) {
        let base = curve_area(&a, &b, 300).unwrap();
        let rot = curve_area(&rotate(&a, angle), &rotate(&b, angle), 300).unwrap();
        prop_assert!((base - rot).abs() <= 1e-8 * base.max(1e-300), "{} vs {}", base, rot);
    }

    #[test]
    fn area_of_a_curve_with_itself_is_zero(a in planar_curve()) {
        prop_assert_eq!(curve_area(&a, &a, 100).unwrap(), 0.0);
    }

    #[test]
    fn factor_parameterization_respects_the_floor(d in 1usize..5, seed in any::<u64>()) {
        let mut r = rng(seed);
        let p = spd_from_factor(&uniform_vec(&mut r, factor_len(d), -10.0, 10.0), d);
        prop_assert!(min_eigenvalue(&p) >= EIGEN_FLOOR - 1e-9);
        prop_assert!(StageCost::new(p).is_ok());
    }

    #[test]
    fn stage_cost_dominates_floor(seed in any::<u64>(), x in prop::collection::vec(-100.0..100.0f64, 2)) {
        let mut r = rng(seed);
        let s = StageCost::from_factor(&uniform_vec(&mut r, 3, -3.0, 3.0), 2);
        let n2 = x[0] * x[0] + x[1] * x[1];
        prop_assert!(s.value(&x) >= EIGEN_FLOOR * n2 * (1.0 - 1e-9));
    }

    #[test]
    fn kernel_is_symmetric_and_bounded(
        a in prop::collection::vec(-10.0..10.0f64, 3),
        b in prop::collection::vec(-10.0..10.0f64, 3),
        l in prop::collection::vec(0.1..10.0f64, 3),
        sf in 0.1..10.0f64,
    ) {
        let h = Hyperparameters::new(l, sf).unwrap();
        let (kab, kba) = (h.k(&a, &b), h.k(&b, &a));
        prop_assert_eq!(kab, kba);
        prop_assert!(kab > 0.0 || (a != b && kab == 0.0));
        prop_assert!(kab <= h.signal_variance());
        prop_assert_eq!(h.k(&a, &a), h.signal_variance());
    }

    #[test]
    fn downsampling_keeps_endpoints_and_never_grows(n in 3usize..300, f1 in 1usize..50, f2 in 1usize..50) {
        let rows: Vec<Vec<f64>> = (0..n).map(|k| vec![(n - 1 - k) as f64, 0.5 * (n - 1 - k) as f64]).collect();
        let t = Trajectory::from_rows("t", &rows).unwrap();
        let (lo, hi) = (f1.min(f2), f1.max(f2));
        prop_assume!(hi <= n - 1);
        let a = t.downsample(lo).unwrap();
        let b = t.downsample(hi).unwrap();
        prop_assert_eq!(a.first(), t.first());
        prop_assert_eq!(a.last(), t.last());
        prop_assert_eq!(b.last(), t.last());
        prop_assert!(b.len() <= a.len());
        prop_assert!(a.len() >= 2);
    }

    #[test]
    fn gp_interpolates_its_training_data(seed in any::<u64>(), n in 1usize..10) {
        let mut r = rng(seed);
        let x = DMatrix::from_fn(n, 2, |i, j| i as f64 * 3.0 + j as f64 + 0.5 * uniform_vec(&mut r, 1, -1.0, 1.0)[0]);
        let y = DVector::from_fn(n, |_, _| uniform_vec(&mut r, 1, -5.0, 5.0)[0]);
        let h = Hyperparameters::isotropic(2, 1.0, 2.0).unwrap();
        let post = fit_gp(&x, &y, &h, DEFAULT_JITTER).unwrap();
        for i in 0..n {
            let p = post.predict_mean(&x.row(i).transpose()).unwrap();
            prop_assert!((p - y[i]).abs() <= 1e-8 * (1.0 + y.amax()));
        }
    }

    #[test]
    fn hinge_loss_is_nonnegative_and_zero_for_contractions(seed in any::<u64>(), m in 1usize..20) {
        let mut r = rng(seed);
        let pairs = random_pairs(&mut r, m, 2);
        let w = WsaqfParams::new(DMatrix::identity(2, 2), vec![], vec![]).unwrap();
        prop_assert!(hinge_loss(&w, &pairs) >= 0.0);
        let rows: Vec<Vec<f64>> = (0..m + 1).map(|k| vec![10.0 * 0.7f64.powi(k as i32), -4.0 * 0.7f64.powi(k as i32)]).collect();
        let contracting = to_pairs(&[Trajectory::from_rows("c", &rows).unwrap()], false).unwrap();
        prop_assert_eq!(hinge_loss(&w, &contracting), 0.0);
    }

    #[test]
    fn wsaqf_is_zero_only_at_origin(seed in any::<u64>(), x in prop::collection::vec(-20.0..20.0f64, 2)) {
        let mut r = rng(seed);
        let mats: Vec<_> = (0..3).map(|_| spd_from_factor(&uniform_vec(&mut r, 3, -2.0, 2.0), 2)).collect();
        let centers: Vec<_> = (0..3).map(|_| dvec(&uniform_vec(&mut r, 2, -5.0, 5.0))).collect();
        let w = WsaqfParams::new(spd_from_factor(&uniform_vec(&mut r, 3, -2.0, 2.0), 2), mats, centers).unwrap();
        prop_assert_eq!(w.value(&[0.0, 0.0]), 0.0);
        let n2 = x[0] * x[0] + x[1] * x[1];
        prop_assert!(w.value(&x) >= EIGEN_FLOOR * n2 * (1.0 - 1e-9));
    }
}
