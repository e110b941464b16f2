use proptest::prelude::*;
use std::sync::OnceLock;
use torkin_core::family::{
    calibrate_radius, family_apply, family_jacobian, ChartAtlas, Family, FamilyParams, FamilySpec, TranslationFamily,
};
use torkin_core::geom::TorusPoint;
use torkin_core::sampling::sample_rng;

fn spec2() -> &'static FamilySpec {
    static SPEC: OnceLock<FamilySpec> = OnceLock::new();
    SPEC.get_or_init(|| {
        let s = FamilySpec::new(ChartAtlas::default_for(2).unwrap(), 1.0, 0.05, 1e-6).unwrap();
        let r = calibrate_radius(&s, 100, 1).unwrap();
        s.with_radius(r).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn zero_parameters_act_as_identity(x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let s = spec2();
        let p = TorusPoint::new(&[x, y]).unwrap();
        let q = family_apply(s, &FamilyParams::zeros(s.big_n()), &p).unwrap();
        prop_assert!(p.distance(&q) < 1e-14);
    }

    #[test]
    fn members_are_orientation_preserving_and_invertible(seed in 0u64..1_000_000, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let s = spec2();
        let w = s.sample_params(&mut sample_rng(seed, 0));
        let p = TorusPoint::new(&[x, y]).unwrap();
        let j = family_jacobian(s, &w, &p).unwrap();
        prop_assert!(j.determinant() > 0.0);
        let q = s.apply(&w, &p);
        let back = s.inverse_apply(&w, &q).unwrap();
        prop_assert!(back.distance(&p) < 1e-8, "round trip error {}", back.distance(&p));
    }

    #[test]
    fn translations_move_points_rigidly(seed in 0u64..1_000_000, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let f = TranslationFamily::new(2).unwrap();
        let w = f.sample_params(&mut sample_rng(seed, 0));
        let p = TorusPoint::new(&[x, y]).unwrap();
        let q = f.apply(&w, &p);
        let d = p.displacement_to(&q);
        let a = w.as_slice();
        let expect = torkin_core::geom::wrap_displacement(&nalgebra::Vector3::new(a[0], a[1], 0.0));
        prop_assert!((d - expect).norm() < 1e-12);
    }
}

#[test]
fn samples_stay_in_the_parameter_ball() {
    let s = spec2();
    for j in 0..500 {
        let w = s.sample_params(&mut sample_rng(9, j));
        assert!(w.norm() <= s.radius());
    }
}
