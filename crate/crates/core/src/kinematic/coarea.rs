//! Two-sided check of the co-area identity: the family integral of
//! `#(h(V) ∩ W)` against `vol(V) vol(W)` times the mean fiber integral over
//! uniformly sampled `(p, q) ∈ V x W` with their tangent planes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::family::Family;
use crate::geom::{GrassmannPlane, TorusPoint};
use crate::sampling::{sample_rng, sub_seed};
use crate::submanifold::{DiscreteSubmanifold, Elements};

use super::fiber::fiber_integral_with_check;
use super::mc::{mc_total_intersections_run, mean_and_se, EstimateReport, McOptions};

/// Largest relative difference between the two sides that counts as agreement.
pub const COAREA_TOL: f64 = 0.10;

const TAG_POINTS: u64 = 0xC0A0;
const TAG_FIBERS: u64 = 0xC0A1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoareaCheck {
    pub total: EstimateReport,
    /// `vol(V) vol(W) * mean` of the sampled fiber integrals.
    pub fiber_side: f64,
    pub fiber_side_std_error: f64,
    pub point_pairs: usize,
    /// `|total - fiber_side| / |total|`.
    pub relative_difference: f64,
    pub agree: bool,
}

/// Uniform point of the mesh (elements weighted by volume) with the tangent
/// plane of its element.
fn sample_point(mesh: &DiscreteSubmanifold, cumulative: &[f64], rng: &mut impl Rng) -> Result<GrassmannPlane> {
    let total = *cumulative.last().expect("non-empty mesh");
    let u = rng.random::<f64>() * total;
    let e = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
    let lift = match mesh.elements() {
        Elements::Segments(_) => {
            let (a, d) = mesh.segment_lift(e);
            a + d * rng.random::<f64>()
        }
        Elements::Triangles(_) => {
            let (a, e1, e2) = mesh.triangle_lift(e);
            let (mut s, mut t) = (rng.random::<f64>(), rng.random::<f64>());
            if s + t > 1.0 {
                (s, t) = (1.0 - s, 1.0 - t);
            }
            a + e1 * s + e2 * t
        }
    };
    let p = TorusPoint::from_lift(lift, mesh.ambient_dim());
    Ok(mesh.element_tangents()[e].with_base(p))
}

fn cumulative_volumes(mesh: &DiscreteSubmanifold) -> Vec<f64> {
    let mut acc = 0.0;
    (0..mesh.num_elements())
        .map(|e| {
            acc += mesh.element_volume(e);
            acc
        })
        .collect()
}

/// Both sides of the co-area identity for one `(V, W)` pair. Pair `i` of
/// the fiber side draws its family samples from its own stream.
#[allow(clippy::too_many_arguments)]
pub fn coarea_check<F: Family + ?Sized>(
    family: &F,
    v: &DiscreteSubmanifold,
    w: &DiscreteSubmanifold,
    total_samples: usize,
    point_pairs: usize,
    eps: f64,
    fiber_samples: usize,
    seed: u64,
) -> Result<CoareaCheck> {
    if point_pairs < 2 {
        return Err(invalid("need at least two point pairs"));
    }
    if v.num_elements() == 0 || w.num_elements() == 0 {
        return Err(invalid("empty mesh"));
    }
    let total = mc_total_intersections_run(family, v, w, total_samples, seed, &McOptions::default())?.report()?;
    let (cv, cw) = (cumulative_volumes(v), cumulative_volumes(w));
    let mut rng = sample_rng(sub_seed(seed, TAG_POINTS), 0);
    let fiber_seed = sub_seed(seed, TAG_FIBERS);
    let mut values = Vec::with_capacity(point_pairs);
    for i in 0..point_pairs as u64 {
        let sp = sample_point(v, &cv, &mut rng)?;
        let sq = sample_point(w, &cw, &mut rng)?;
        let r = fiber_integral_with_check(family, &sp, &sq, eps, fiber_samples, sub_seed(fiber_seed, i))?;
        values.push(r.estimate.estimate);
    }
    let (mean, se) = mean_and_se(&values);
    let vol = v.total_volume() * w.total_volume();
    let fiber_side = vol * mean;
    let relative_difference = (total.estimate - fiber_side).abs() / total.estimate.abs();
    Ok(CoareaCheck {
        total,
        fiber_side,
        fiber_side_std_error: vol * se,
        point_pairs,
        relative_difference,
        agree: relative_difference <= COAREA_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::TranslationFamily;
    use crate::submanifold::SubmanifoldSpec;

    #[test]
    fn translation_family_sides_agree_for_a_circle_and_a_segment() {
        let fam = TranslationFamily::new(2).unwrap();
        let circle = SubmanifoldSpec::Circle { center: vec![0.5, 0.5], radius: 0.15, axes: [0, 1] };
        let seg = SubmanifoldSpec::Geodesic { start: vec![0.1, 0.2], direction: vec![0.6, 0.8], length: 0.7 };
        let v = circle.discretize(circle.resolution_for_spacing(0.02)).unwrap();
        let w = seg.discretize(seg.resolution_for_spacing(0.02)).unwrap();
        let c = coarea_check(&fam, &v, &w, 50_000, 64, 0.05, 50_000, 2).unwrap();
        // the exact value: |sin| of the angle averaged over the circle is 2/pi
        let exact = v.total_volume() * w.total_volume() * 2.0 / std::f64::consts::PI;
        assert!((c.total.estimate - exact).abs() < 0.03 * exact, "{c:?} vs {exact}");
        assert!(c.agree, "{c:?}");
    }

    #[test]
    fn sampled_points_lie_on_the_mesh() {
        let seg = SubmanifoldSpec::Geodesic { start: vec![0.9, 0.2], direction: vec![1.0, 0.0], length: 0.5 };
        let m = seg.discretize(5).unwrap();
        let cum = cumulative_volumes(&m);
        let mut rng = sample_rng(1, 0);
        for _ in 0..100 {
            let p = sample_point(&m, &cum, &mut rng).unwrap();
            assert!((p.base().coords()[1] - 0.2).abs() < 1e-12);
            let x = p.base().coords()[0];
            assert!(x >= 0.9 - 1e-12 || x <= 0.4 + 1e-12);
        }
    }

    #[test]
    fn too_few_pairs_rejected() {
        let fam = TranslationFamily::new(2).unwrap();
        let seg = SubmanifoldSpec::Geodesic { start: vec![0.1, 0.2], direction: vec![1.0, 0.0], length: 0.5 };
        let m = seg.discretize(5).unwrap();
        assert!(coarea_check(&fam, &m, &m, 10, 1, 0.05, 10, 0).is_err());
    }
}
