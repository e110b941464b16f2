use std::f64::consts::TAU;

use nalgebra::{DMatrix, Vector3};
use proptest::prelude::*;
use torkin_core::geom::{
    det_j, normal_jacobian, rotation_exp, rotation_log, sin_angle_bases, wrap_half, wrap_unit, GrassmannPlane,
    SkewMatrix, TorusPoint,
};
use torkin_core::intersect::{count_intersections, DEFAULT_TAU_TRANS};
use torkin_core::submanifold::SubmanifoldSpec;

fn unit(theta: f64) -> DMatrix<f64> {
    DMatrix::from_column_slice(2, 1, &[theta.cos(), theta.sin()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn wrap_lands_in_range(x in -1e6f64..1e6) {
        let u = wrap_unit(x);
        prop_assert!((0.0..1.0).contains(&u));
        let h = wrap_half(x);
        prop_assert!((-0.5..0.5).contains(&h));
        prop_assert!(wrap_unit(u - h).min(1.0 - wrap_unit(u - h)) < 1e-9);
    }

    #[test]
    fn exp_log_round_trip_in_three_dims(a in -1.5f64..1.5, b in -1.5f64..1.5, c in -1.5f64..1.5) {
        let v = SkewMatrix::from_upper(3, &[a, b, c]).unwrap();
        prop_assume!(v.norm() < 2.5);
        let r = rotation_exp(&v);
        let back = rotation_log(&r).unwrap();
        prop_assert!(!back.branch_ambiguous);
        prop_assert!((back.skew.mat() - v.mat()).abs().max() < 1e-10);
        let q = r.mat();
        prop_assert!((q.transpose() * q - DMatrix::identity(3, 3)).abs().max() < 1e-12);
    }

    #[test]
    fn sin_angle_of_lines_is_sine_of_angle(t1 in 0.0f64..TAU, t2 in 0.0f64..TAU) {
        let s = sin_angle_bases(&unit(t1), &unit(t2));
        prop_assert!((s - (t2 - t1).sin().abs()).abs() < 1e-12);
        // with dh = I the determinant is the same sine up to sign
        let dj = det_j(&DMatrix::identity(2, 2), &unit(t1), &unit(t2)).unwrap();
        prop_assert!((dj.abs() - s).abs() < 1e-12);
    }

    #[test]
    fn normal_jacobian_is_rotation_invariant(t in 0.0f64..TAU, sx in 0.1f64..3.0, sy in 0.1f64..3.0) {
        let rot = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        let a = DMatrix::from_row_slice(2, 3, &[sx, 0.0, 0.0, 0.0, sy, 0.0]);
        let nj = normal_jacobian(&(&rot * &a)).unwrap();
        prop_assert!((nj - sx * sy).abs() < 1e-10 * sx * sy);
        let right = rotation_exp(&SkewMatrix::from_upper(3, &[t, 0.3, -0.2]).unwrap());
        let nj_right = normal_jacobian(&(&a * right.mat())).unwrap();
        prop_assert!((nj_right - sx * sy).abs() < 1e-10 * sx * sy);
    }

    #[test]
    fn random_planes_have_unit_gram(seed in 0u64..10_000, k in 0usize..=3) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let p = GrassmannPlane::random(TorusPoint::origin(3), k, &mut rng).unwrap();
        let g = p.basis().transpose() * p.basis();
        prop_assert!((g - DMatrix::identity(k, k)).abs().max() < 1e-12);
    }

    #[test]
    fn crossing_count_is_translation_invariant(t in 0.3f64..2.8, dx in 0.0f64..1.0, dy in 0.0f64..1.0) {
        let a = SubmanifoldSpec::Geodesic { start: vec![0.1, 0.2], direction: vec![1.0, 0.0], length: 0.7 };
        let b = SubmanifoldSpec::Geodesic { start: vec![0.4, 0.05], direction: vec![t.cos(), t.sin()], length: 0.6 };
        let ma = a.discretize(a.resolution_for_spacing(0.05)).unwrap();
        let mb = b.discretize(b.resolution_for_spacing(0.05)).unwrap();
        let base = count_intersections(&ma, &mb, DEFAULT_TAU_TRANS).unwrap().count;
        let shift = Vector3::new(dx, dy, 0.0);
        let moved = count_intersections(&ma.translated(&shift), &mb.translated(&shift), DEFAULT_TAU_TRANS).unwrap().count;
        prop_assert_eq!(base, moved);
        let swapped = count_intersections(&mb, &ma, DEFAULT_TAU_TRANS).unwrap().count;
        prop_assert_eq!(base, swapped);
    }
}
