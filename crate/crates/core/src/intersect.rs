//! Counting transversal intersections of complementary-dimensional meshes on
//! the torus.
//!
//! Every element is shorter than the injectivity radius, so a pair of
//! elements can meet through at most a few integer translates of their
//! nearest lifts: the 3^n translates around the nearest one are tested.
//!
//! Ties are resolved by the topological feature hit on each side (element
//! interior, edge or vertex): a point where several element pairs meet
//! through shared vertices or edges counts once, attributed to the
//! lexicographically smallest element pair, and is flagged degenerate.
//! Parallel overlaps (collinear segments, a segment lying in a triangle's
//! plane) count zero and are flagged degenerate.

use std::collections::BTreeMap;

use nalgebra::{Vector2, Vector3};

use crate::error::{invalid, Result};
use crate::geom::{sin_angle_bases, wrap_displacement, TorusPoint};
use crate::submanifold::{DiscreteSubmanifold, Elements};

/// Threshold on the normalized determinant of the intersection solve below
/// which a pair of elements is treated as parallel.
pub const DEFAULT_TAU_TRANS: f64 = 1e-9;
/// Threshold on `sin_angle` used for transversality statistics.
pub const REPORT_SIN_THRESHOLD: f64 = 1e-3;

/// Parameter tolerance for deciding that a hit lies on an element boundary.
const BOUNDARY_EPS: f64 = 1e-12;
/// Distance below which parallel elements are treated as overlapping.
const COPLANAR_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct IntersectionRecord {
    pub point: TorusPoint,
    /// Element index in the first mesh.
    pub element_v: usize,
    /// Element index in the second mesh.
    pub element_w: usize,
    /// `|det|` of the two element tangent bases.
    pub sin_angle: f64,
    pub degenerate: bool,
    /// Whether the record contributes to the count.
    pub counted: bool,
}

impl IntersectionRecord {
    pub const CSV_HEADER: &'static str = "x,y,z,element_v,element_w,sin_angle,degenerate,counted";

    pub fn csv_row(&self) -> String {
        let c = self.point.lift();
        format!(
            "{},{},{},{},{},{},{},{}",
            c[0], c[1], c[2], self.element_v, self.element_w, self.sin_angle, self.degenerate, self.counted
        )
    }
}

/// Count plus the deduplicated intersection records.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IntersectionSet {
    pub count: usize,
    pub records: Vec<IntersectionRecord>,
}

impl IntersectionSet {
    pub fn any_degenerate(&self) -> bool {
        self.records.iter().any(|r| r.degenerate)
    }

    /// Counted records with `sin_angle` below `threshold`.
    pub fn low_angle_count(&self, threshold: f64) -> usize {
        self.records.iter().filter(|r| r.counted && r.sin_angle < threshold).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Feature {
    Vertex(usize),
    Edge(usize, usize),
    Element(usize),
}

/// Element ids, lifted point and a flag, per pair of touched features.
type Hit = (usize, usize, Vector3<f64>, bool);

#[derive(Default)]
struct Collector {
    hits: BTreeMap<(Feature, Feature), Hit>,
    overlaps: Vec<(usize, usize, Vector3<f64>)>,
}

impl Collector {
    fn hit(&mut self, key: (Feature, Feature), ev: usize, ew: usize, point: Vector3<f64>) {
        let boundary = !matches!(key, (Feature::Element(_), Feature::Element(_)));
        self.hits
            .entry(key)
            .and_modify(|e| {
                if (ev, ew) < (e.0, e.1) {
                    *e = (ev, ew, point, true);
                } else {
                    e.3 = true;
                }
            })
            .or_insert((ev, ew, point, boundary));
    }

    fn finish(self, a: &DiscreteSubmanifold, b: &DiscreteSubmanifold, tau: f64, swap: bool) -> IntersectionSet {
        let n = a.ambient_dim();
        let sin = |ev: usize, ew: usize| -> f64 {
            sin_angle_bases(a.element_tangents()[ev].basis(), b.element_tangents()[ew].basis())
        };
        let mut records = Vec::with_capacity(self.hits.len() + self.overlaps.len());
        for (_, (ev, ew, p, tie)) in self.hits {
            let s = sin(ev, ew);
            records.push(IntersectionRecord {
                point: TorusPoint::from_lift(p, n),
                element_v: ev,
                element_w: ew,
                sin_angle: s,
                degenerate: tie || s < tau,
                counted: true,
            });
        }
        let count = records.len();
        for (ev, ew, p) in self.overlaps {
            records.push(IntersectionRecord {
                point: TorusPoint::from_lift(p, n),
                element_v: ev,
                element_w: ew,
                sin_angle: 0.0,
                degenerate: true,
                counted: false,
            });
        }
        if swap {
            for r in &mut records {
                std::mem::swap(&mut r.element_v, &mut r.element_w);
            }
        }
        records.sort_by_key(|x| (x.element_v, x.element_w));
        IntersectionSet { count, records }
    }
}

#[inline]
fn cross2(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

#[inline]
fn endpoint_feature(param: f64, ends: [usize; 2], element: usize) -> Feature {
    if param < BOUNDARY_EPS {
        Feature::Vertex(ends[0])
    } else if param > 1.0 - BOUNDARY_EPS {
        Feature::Vertex(ends[1])
    } else {
        Feature::Element(element)
    }
}

/// Integer translates `k` (per axis in `{-1, 0, 1}`) for which a lift of the
/// second element at `rel + k` can reach the first within `reach`.
#[inline]
fn shifts(rel: f64, reach: f64) -> impl Iterator<Item = f64> {
    [-1.0, 0.0, 1.0].into_iter().filter(move |k| (rel + k).abs() <= reach)
}

struct Seg {
    p: Vector3<f64>,
    d: Vector3<f64>,
    ends: [usize; 2],
}

fn segments(m: &DiscreteSubmanifold) -> Vec<Seg> {
    let Elements::Segments(s) = m.elements() else { unreachable!() };
    s.iter()
        .enumerate()
        .map(|(e, ends)| {
            let (p, d) = m.segment_lift(e);
            Seg { p, d, ends: *ends }
        })
        .collect()
}

/// Transversal crossings of two polylines on `T^2`.
pub fn count_curve_curve_t2(
    a: &DiscreteSubmanifold,
    b: &DiscreteSubmanifold,
    tau_trans: f64,
) -> Result<IntersectionSet> {
    if a.ambient_dim() != 2 || b.ambient_dim() != 2 || a.dim() != 1 || b.dim() != 1 {
        return Err(invalid("curve-curve counting needs two curves on T^2"));
    }
    let sa = segments(a);
    let sb = segments(b);
    let mut col = Collector::default();
    for (i, s) in sa.iter().enumerate() {
        let da = Vector2::new(s.d.x, s.d.y);
        let la = da.norm();
        for (j, t) in sb.iter().enumerate() {
            let db = Vector2::new(t.d.x, t.d.y);
            let lb = db.norm();
            let reach = la + lb + 1e-9;
            let rel0 = wrap_displacement(&(t.p - s.p));
            for kx in shifts(rel0.x, reach) {
                for ky in shifts(rel0.y, reach) {
                    let rel = Vector2::new(rel0.x + kx, rel0.y + ky);
                    segment_pair(&mut col, i, j, s, t, &da, &db, la, lb, &rel, tau_trans);
                }
            }
        }
    }
    Ok(col.finish(a, b, tau_trans, false))
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn segment_pair(
    col: &mut Collector,
    i: usize,
    j: usize,
    s: &Seg,
    t: &Seg,
    da: &Vector2<f64>,
    db: &Vector2<f64>,
    la: f64,
    lb: f64,
    rel: &Vector2<f64>,
    tau: f64,
) {
    let denom = cross2(da, db);
    if denom.abs() < tau * la * lb {
        // parallel: only a collinear overlap matters
        if cross2(da, rel).abs() / la > COPLANAR_EPS {
            return;
        }
        let s0 = rel.dot(da) / (la * la);
        let s1 = (rel + db).dot(da) / (la * la);
        let lo = s0.min(s1).max(0.0);
        let hi = s0.max(s1).min(1.0);
        if lo <= hi + BOUNDARY_EPS {
            let p = s.p + s.d * (0.5 * (lo + hi));
            col.overlaps.push((i, j, p));
        }
        return;
    }
    let u_a = cross2(rel, db) / denom;
    let u_b = cross2(rel, da) / denom;
    let lo = -BOUNDARY_EPS;
    let hi = 1.0 + BOUNDARY_EPS;
    if u_a < lo || u_a > hi || u_b < lo || u_b > hi {
        return;
    }
    let key = (endpoint_feature(u_a, s.ends, i), endpoint_feature(u_b, t.ends, j));
    col.hit(key, i, j, s.p + s.d * u_a.clamp(0.0, 1.0));
}

/// Crossings of a polyline with a triangle mesh on `T^3`.
pub fn count_curve_surface_t3(
    curve: &DiscreteSubmanifold,
    surface: &DiscreteSubmanifold,
    tau_trans: f64,
) -> Result<IntersectionSet> {
    curve_surface(curve, surface, tau_trans, false)
}

fn curve_surface(
    curve: &DiscreteSubmanifold,
    surface: &DiscreteSubmanifold,
    tau: f64,
    swap: bool,
) -> Result<IntersectionSet> {
    if curve.ambient_dim() != 3 || surface.ambient_dim() != 3 || curve.dim() != 1 || surface.dim() != 2 {
        return Err(invalid("curve-surface counting needs a curve and a surface on T^3"));
    }
    let Elements::Triangles(tris) = surface.elements() else { unreachable!() };
    let tri_lifts: Vec<_> = (0..tris.len()).map(|e| surface.triangle_lift(e)).collect();
    let sa = segments(curve);
    let mut col = Collector::default();
    for (i, s) in sa.iter().enumerate() {
        let ls = s.d.norm();
        for (j, (v0, e1, e2)) in tri_lifts.iter().enumerate() {
            let reach = ls + e1.norm().max(e2.norm()) + 1e-9;
            let rel0 = wrap_displacement(&(v0 - s.p));
            for kx in shifts(rel0.x, reach) {
                for ky in shifts(rel0.y, reach) {
                    for kz in shifts(rel0.z, reach) {
                        let rel = rel0 + Vector3::new(kx, ky, kz);
                        segment_triangle(&mut col, i, j, s, tris[j], &rel, e1, e2, tau);
                    }
                }
            }
        }
    }
    Ok(col.finish(curve, surface, tau, swap))
}

/// Moller-Trumbore on the segment `s.p + t s.d` against the triangle
/// `s.p + rel + u e1 + v e2`.
#[allow(clippy::too_many_arguments)]
#[inline]
fn segment_triangle(
    col: &mut Collector,
    i: usize,
    j: usize,
    s: &Seg,
    tri: [usize; 3],
    rel: &Vector3<f64>,
    e1: &Vector3<f64>,
    e2: &Vector3<f64>,
    tau: f64,
) {
    let nrm = e1.cross(e2);
    let h = s.d.cross(e2);
    let det = e1.dot(&h);
    let ls = s.d.norm();
    let area2 = nrm.norm();
    if det.abs() < tau * ls * area2 {
        // parallel: flag when the segment lies in the plane and meets the triangle
        if (rel.dot(&nrm) / area2).abs() > COPLANAR_EPS {
            return;
        }
        if let Some(tm) = coplanar_overlap(rel, &s.d, e1, e2) {
            col.overlaps.push((i, j, s.p + s.d * tm));
        }
        return;
    }
    let f = 1.0 / det;
    let sv = -rel;
    let u = f * sv.dot(&h);
    let q = sv.cross(e1);
    let v = f * s.d.dot(&q);
    let t = f * e2.dot(&q);
    let lo = -BOUNDARY_EPS;
    if t < lo || t > 1.0 + BOUNDARY_EPS || u < lo || v < lo || u + v > 1.0 + BOUNDARY_EPS {
        return;
    }
    let on_u = u.abs() < BOUNDARY_EPS;
    let on_v = v.abs() < BOUNDARY_EPS;
    let on_w = (1.0 - u - v).abs() < BOUNDARY_EPS;
    let [a0, a1, a2] = tri;
    let edge = |x: usize, y: usize| Feature::Edge(x.min(y), x.max(y));
    let tri_feature = match (on_u, on_v, on_w) {
        (true, true, _) => Feature::Vertex(a0),
        (true, _, true) => Feature::Vertex(a2),
        (_, true, true) => Feature::Vertex(a1),
        (true, false, false) => edge(a0, a2),
        (false, true, false) => edge(a0, a1),
        (false, false, true) => edge(a1, a2),
        (false, false, false) => Feature::Element(j),
    };
    let key = (endpoint_feature(t, s.ends, i), tri_feature);
    col.hit(key, i, j, s.p + s.d * t.clamp(0.0, 1.0));
}

/// For a segment `t d`, `t in [0,1]`, in the plane of the triangle
/// `rel + u e1 + v e2`: a parameter of some common point, if any.
fn coplanar_overlap(rel: &Vector3<f64>, d: &Vector3<f64>, e1: &Vector3<f64>, e2: &Vector3<f64>) -> Option<f64> {
    // triangle coordinates (u, v) of a point x: Gram system on (e1, e2)
    let g11 = e1.dot(e1);
    let g12 = e1.dot(e2);
    let g22 = e2.dot(e2);
    let det = g11 * g22 - g12 * g12;
    let coords = |x: &Vector3<f64>| -> Vector2<f64> {
        let b1 = x.dot(e1);
        let b2 = x.dot(e2);
        Vector2::new((g22 * b1 - g12 * b2) / det, (g11 * b2 - g12 * b1) / det)
    };
    let p0 = coords(&(-rel));
    let p1 = coords(&(d - rel));
    let dir = p1 - p0;
    // clip t in [0,1] against u >= 0, v >= 0, u + v <= 1
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let planes = [(dir.x, p0.x), (dir.y, p0.y), (-(dir.x + dir.y), 1.0 - p0.x - p0.y)];
    for (slope, value) in planes {
        // constraint: value + slope * t >= 0
        if slope.abs() < 1e-300 {
            if value < -BOUNDARY_EPS {
                return None;
            }
        } else {
            let root = -value / slope;
            if slope > 0.0 {
                lo = lo.max(root);
            } else {
                hi = hi.min(root);
            }
        }
    }
    (lo <= hi + BOUNDARY_EPS).then(|| 0.5 * (lo + hi).clamp(0.0, 2.0))
}

/// Dispatch on dimensions: curve-curve on `T^2`, curve-surface (either
/// order) on `T^3`. Record element indices refer to `(a, b)` in the given order.
pub fn count_intersections(
    a: &DiscreteSubmanifold,
    b: &DiscreteSubmanifold,
    tau_trans: f64,
) -> Result<IntersectionSet> {
    if a.ambient_dim() != b.ambient_dim() || a.dim() + b.dim() != a.ambient_dim() {
        return Err(invalid(format!(
            "meshes of dimensions {} and {} are not complementary in T^{}",
            a.dim(),
            b.dim(),
            a.ambient_dim()
        )));
    }
    match (a.ambient_dim(), a.dim()) {
        (2, 1) => count_curve_curve_t2(a, b, tau_trans),
        (3, 1) => curve_surface(a, b, tau_trans, false),
        (3, 2) => curve_surface(b, a, tau_trans, true),
        _ => Err(invalid("unsupported intersection configuration")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::submanifold::SubmanifoldSpec;

    fn closed(start: [f64; 2], class: [i64; 2], res: usize) -> DiscreteSubmanifold {
        SubmanifoldSpec::ClosedGeodesic { start: start.to_vec(), class: class.to_vec() }.discretize(res).unwrap()
    }

    fn seg2(start: [f64; 2], dir: [f64; 2], len: f64, res: usize) -> DiscreteSubmanifold {
        SubmanifoldSpec::Geodesic { start: start.to_vec(), direction: dir.to_vec(), length: len }
            .discretize(res)
            .unwrap()
    }

    #[test]
    fn orthogonal_closed_geodesics_meet_once() {
        let a = closed([0.0, 0.3], [1, 0], 5);
        let b = closed([0.55, 0.0], [0, 1], 7);
        let s = count_curve_curve_t2(&a, &b, DEFAULT_TAU_TRANS).unwrap();
        assert_eq!(s.count, 1);
        assert!(!s.any_degenerate());
        assert!((s.records[0].sin_angle - 1.0).abs() < 1e-12);
        let p = s.records[0].point.coords();
        assert!((p[0] - 0.55).abs() < 1e-12 && (p[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn parallel_geodesics_do_not_meet() {
        let a = closed([0.0, 0.2], [1, 0], 5);
        let b = closed([0.1, 0.7], [1, 0], 5);
        assert_eq!(count_curve_curve_t2(&a, &b, DEFAULT_TAU_TRANS).unwrap().count, 0);
    }

    #[test]
    fn collinear_overlap_is_degenerate_and_uncounted() {
        let a = seg2([0.1, 0.2], [1.0, 0.0], 0.5, 5);
        let b = seg2([0.3, 0.2], [1.0, 0.0], 0.5, 4);
        let s = count_curve_curve_t2(&a, &b, DEFAULT_TAU_TRANS).unwrap();
        assert_eq!(s.count, 0);
        assert!(s.any_degenerate());
    }

    #[test]
    fn crossing_through_a_shared_vertex_counts_once() {
        // vertex of `a` at (0.3, 0.2) lies on `b`
        let a = seg2([0.1, 0.2], [1.0, 0.0], 0.4, 2);
        let b = seg2([0.3, 0.05], [0.0, 1.0], 0.3, 3);
        let s = count_curve_curve_t2(&a, &b, DEFAULT_TAU_TRANS).unwrap();
        assert_eq!(s.count, 1);
        assert!(s.records[0].degenerate);
        assert_eq!(s.records[0].element_v, 0);
        let swapped = count_curve_curve_t2(&b, &a, DEFAULT_TAU_TRANS).unwrap();
        assert_eq!(swapped.count, 1);
    }

    #[test]
    fn crossing_across_the_seam() {
        let a = seg2([0.9, 0.5], [1.0, 0.0], 0.2, 2);
        let b = seg2([0.02, 0.4], [0.0, 1.0], 0.2, 2);
        let s = count_curve_curve_t2(&a, &b, DEFAULT_TAU_TRANS).unwrap();
        assert_eq!(s.count, 1);
        let p = s.records[0].point.coords();
        assert!((p[0] - 0.02).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn segment_crosses_coordinate_torus_once() {
        let torus = SubmanifoldSpec::CoordinateTorus { axis: 2, level: 0.5 }.discretize(4).unwrap();
        let line = SubmanifoldSpec::ClosedGeodesic { start: vec![0.13, 0.71, 0.0], class: vec![0, 0, 1] }
            .discretize(7)
            .unwrap();
        let s = count_curve_surface_t3(&line, &torus, DEFAULT_TAU_TRANS).unwrap();
        assert_eq!(s.count, 1);
        assert!((s.records[0].sin_angle - 1.0).abs() < 1e-12);
        let swapped = count_intersections(&torus, &line, DEFAULT_TAU_TRANS).unwrap();
        assert_eq!(swapped.count, 1);
        assert_eq!(swapped.records[0].element_w, s.records[0].element_v);
    }

    #[test]
    fn segment_inside_surface_is_degenerate() {
        let torus = SubmanifoldSpec::CoordinateTorus { axis: 2, level: 0.5 }.discretize(4).unwrap();
        let line =
            SubmanifoldSpec::Geodesic { start: vec![0.1, 0.1, 0.5], direction: vec![1.0, 0.3, 0.0], length: 0.6 }
                .discretize(4)
                .unwrap();
        let s = count_curve_surface_t3(&line, &torus, DEFAULT_TAU_TRANS).unwrap();
        assert_eq!(s.count, 0);
        assert!(!s.records.is_empty() && s.records.iter().all(|r| r.degenerate));
    }

    #[test]
    fn counts_are_translation_invariant() {
        let a = seg2([0.1, 0.2], [1.0, 0.7], 0.9, 9);
        let b = closed([0.3, 0.0], [1, 2], 12);
        let base = count_curve_curve_t2(&a, &b, DEFAULT_TAU_TRANS).unwrap().count;
        for shift in [[0.37, 0.11], [0.5, 0.5], [0.93, 0.02]] {
            let v = Vector3::new(shift[0], shift[1], 0.0);
            let c = count_curve_curve_t2(&a.translated(&v), &b.translated(&v), DEFAULT_TAU_TRANS).unwrap();
            assert_eq!(c.count, base);
        }
    }
}
