use torkin_core::family::TranslationFamily;
use torkin_core::geom::{GrassmannPlane, TorusPoint};
use torkin_core::kinematic::{
    coarea_check, fiber_integral_with_check, mc_total_intersections_run, mc_translation_family,
    translation_family_oracle, McOptions,
};
use torkin_core::submanifold::SubmanifoldSpec;

fn geodesic(start: [f64; 2], theta: f64, length: f64) -> SubmanifoldSpec {
    SubmanifoldSpec::Geodesic { start: start.to_vec(), direction: vec![theta.cos(), theta.sin()], length }
}

#[test]
fn same_seed_same_records() {
    let fam = TranslationFamily::new(2).unwrap();
    let a = geodesic([0.1, 0.2], 0.0, 0.6).discretize(12).unwrap();
    let b = geodesic([0.3, 0.1], 1.1, 0.5).discretize(10).unwrap();
    let r1 = mc_total_intersections_run(&fam, &a, &b, 3000, 4, &McOptions::default()).unwrap();
    let r2 = mc_total_intersections_run(&fam, &a, &b, 3000, 4, &McOptions::default()).unwrap();
    assert_eq!(r1, r2);
    let r3 = mc_total_intersections_run(&fam, &a, &b, 3000, 5, &McOptions::default()).unwrap();
    assert_ne!(r1.samples, r3.samples);
}

#[test]
fn translation_estimates_follow_the_closed_form() {
    for (theta, li, lj) in [(0.4, 0.3, 0.9), (1.0, 0.7, 0.7), (2.5, 0.9, 0.2)] {
        let r = mc_translation_family(&geodesic([0.1, 0.2], 0.0, li), &geodesic([0.35, 0.05], theta, lj), 40_000, 8)
            .unwrap();
        let truth = translation_family_oracle(theta, li, lj);
        assert!((r.estimate - truth).abs() <= (0.02 * truth).max(3.0 * r.std_error), "{r:?} vs {truth}");
    }
}

#[test]
fn fiber_estimate_matches_the_sine_in_three_dims() {
    // P a line, Q a plane: the fiber value is |det [B_P | B_Q]|
    let fam = TranslationFamily::new(3).unwrap();
    let sp = GrassmannPlane::from_columns(TorusPoint::new(&[0.1, 0.2, 0.3]).unwrap(), &[vec![0.0, 0.6, 0.8]]).unwrap();
    let sq = GrassmannPlane::from_columns(
        TorusPoint::new(&[0.6, 0.5, 0.9]).unwrap(),
        &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]],
    )
    .unwrap();
    let r = fiber_integral_with_check(&fam, &sp, &sq, 0.05, 2_000_000, 6).unwrap();
    let truth = 0.8;
    assert!((r.estimate.estimate - truth).abs() < 4.0 * r.estimate.std_error, "{r:?}");
    assert!(r.consistent);
}

#[test]
fn coarea_sides_agree_for_a_disk_and_a_segment_in_3d() {
    let fam = TranslationFamily::new(3).unwrap();
    let disk = SubmanifoldSpec::Disk { center: vec![0.5, 0.5, 0.5], normal: vec![0.2, 0.3, 1.0], radius: 0.2 };
    let seg = SubmanifoldSpec::Geodesic { start: vec![0.1, 0.2, 0.3], direction: vec![0.0, 0.6, 0.8], length: 0.6 };
    let v = disk.discretize(disk.resolution_for_spacing(0.05)).unwrap();
    let w = seg.discretize(seg.resolution_for_spacing(0.05)).unwrap();
    let c = coarea_check(&fam, &v, &w, 100_000, 48, 0.05, 100_000, 3).unwrap();
    assert!(c.agree, "{c:?}");
}
