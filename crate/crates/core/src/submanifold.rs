//! Polyline curves and triangle-mesh surfaces on the torus.

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::family::{Family, FamilyParams};
use crate::geom::{GrassmannPlane, TorusPoint, MAX_DIM};

/// Elements longer than this are rejected: below the injectivity radius 1/2,
/// so every element has a unique shortest lift.
pub const SEGMENT_CAP: f64 = 0.4;
/// Default bound on local re-subdivision during pushforward.
pub const DEFAULT_MAX_DEPTH: usize = 32;

/// Analytic description of a curve or surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubmanifoldSpec {
    /// Straight segment `start + s * direction / |direction|`, `s in [0, length]`.
    Geodesic { start: Vec<f64>, direction: Vec<f64>, length: f64 },
    /// Closed geodesic through `start` in the primitive integer class `class`.
    ClosedGeodesic { start: Vec<f64>, class: Vec<i64> },
    /// Circle in the coordinate plane spanned by `axes`.
    Circle { center: Vec<f64>, radius: f64, axes: [usize; 2] },
    /// Parallelogram `origin + a u + b v`, `a, b in [0, 1]`, on `T^3`.
    PlanePatch { origin: Vec<f64>, u: Vec<f64>, v: Vec<f64> },
    /// The closed 2-torus `{x_axis = level}` in `T^3`.
    CoordinateTorus { axis: usize, level: f64 },
    /// Flat disk on `T^3`.
    Disk { center: Vec<f64>, normal: Vec<f64>, radius: f64 },
}

fn to_vec3(v: &[f64]) -> Vector3<f64> {
    let mut out = Vector3::zeros();
    out.as_mut_slice()[..v.len()].copy_from_slice(v);
    out
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn check_point(v: &[f64], what: &str) -> Result<()> {
    if v.is_empty() || v.len() > MAX_DIM || v.iter().any(|x| !x.is_finite()) {
        return Err(invalid(format!("{what} must have 1..=3 finite components")));
    }
    Ok(())
}

impl SubmanifoldSpec {
    pub fn ambient_dim(&self) -> usize {
        match self {
            Self::Geodesic { start, .. } | Self::ClosedGeodesic { start, .. } => start.len(),
            Self::Circle { center, .. } => center.len(),
            Self::PlanePatch { origin, .. } => origin.len(),
            Self::CoordinateTorus { .. } => 3,
            Self::Disk { center, .. } => center.len(),
        }
    }

    /// 1 for curves, 2 for surfaces.
    pub fn dim(&self) -> usize {
        match self {
            Self::Geodesic { .. } | Self::ClosedGeodesic { .. } | Self::Circle { .. } => 1,
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Geodesic { start, direction, length } => {
                check_point(start, "geodesic start")?;
                if direction.len() != start.len() || to_vec3(direction).norm() == 0.0 {
                    return Err(invalid("geodesic direction must be nonzero and match the start"));
                }
                if !(*length > 0.0) || !length.is_finite() {
                    return Err(invalid(format!("geodesic length must be positive, got {length}")));
                }
            }
            Self::ClosedGeodesic { start, class } => {
                check_point(start, "closed geodesic start")?;
                if class.len() != start.len() || class.iter().all(|c| *c == 0) {
                    return Err(invalid("closed geodesic class must be nonzero and match the start"));
                }
                if class.iter().fold(0, |g, c| gcd(g, *c)) != 1 {
                    return Err(invalid("closed geodesic class must be primitive"));
                }
            }
            Self::Circle { center, radius, axes } => {
                check_point(center, "circle center")?;
                if axes[0] == axes[1] || axes.iter().any(|a| *a >= center.len()) {
                    return Err(invalid("circle axes must be two distinct coordinate axes"));
                }
                if !(*radius > 0.0) || *radius >= 0.25 {
                    return Err(invalid("circle radius must lie in (0, 1/4)"));
                }
            }
            Self::PlanePatch { origin, u, v } => {
                if origin.len() != 3 || u.len() != 3 || v.len() != 3 {
                    return Err(invalid("plane patches live on T^3"));
                }
                check_point(origin, "patch origin")?;
                if to_vec3(u).cross(&to_vec3(v)).norm() < 1e-12 {
                    return Err(invalid("plane patch edges must be independent"));
                }
            }
            Self::CoordinateTorus { axis, level } => {
                if *axis >= 3 || !level.is_finite() {
                    return Err(invalid("coordinate torus needs axis < 3 and finite level"));
                }
            }
            Self::Disk { center, normal, radius } => {
                if center.len() != 3 || normal.len() != 3 {
                    return Err(invalid("disks live on T^3"));
                }
                check_point(center, "disk center")?;
                if to_vec3(normal).norm() == 0.0 || !(*radius > 0.0) || *radius >= 0.25 {
                    return Err(invalid("disk needs a nonzero normal and radius in (0, 1/4)"));
                }
            }
        }
        Ok(())
    }

    /// Exact length or area of the underlying smooth submanifold.
    pub fn exact_volume(&self) -> f64 {
        match self {
            Self::Geodesic { length, .. } => *length,
            Self::ClosedGeodesic { class, .. } => class.iter().map(|c| (*c as f64).powi(2)).sum::<f64>().sqrt(),
            Self::Circle { radius, .. } => 2.0 * std::f64::consts::PI * radius,
            Self::PlanePatch { u, v, .. } => to_vec3(u).cross(&to_vec3(v)).norm(),
            Self::CoordinateTorus { .. } => 1.0,
            Self::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
        }
    }

    /// Smallest resolution keeping elements below `spacing`.
    pub fn resolution_for_spacing(&self, spacing: f64) -> usize {
        let extent = match self {
            Self::Geodesic { length, .. } => *length,
            Self::ClosedGeodesic { .. } => self.exact_volume(),
            Self::Circle { radius, .. } => 2.0 * std::f64::consts::PI * radius,
            Self::PlanePatch { u, v, .. } => to_vec3(u).norm().max(to_vec3(v).norm()) * 1.5,
            Self::CoordinateTorus { .. } => 1.5,
            Self::Disk { radius, .. } => *radius,
        };
        ((extent / spacing).ceil() as usize).max(2)
    }

    /// Vertices on the exact submanifold. Curves get `resolution` segments;
    /// surfaces a `resolution x resolution` grid of quads split into
    /// triangles (disks: `resolution` rings of `4 resolution` sectors).
    pub fn discretize(&self, resolution: usize) -> Result<DiscreteSubmanifold> {
        self.validate()?;
        if resolution < 2 {
            return Err(invalid(format!("resolution must be >= 2, got {resolution}")));
        }
        let n = self.ambient_dim();
        match self {
            Self::Geodesic { start, direction, length } => {
                let a = to_vec3(start);
                let d = to_vec3(direction).normalize() * *length;
                discretize_parametric_curve(n, |s| a + d * s, false, resolution)
            }
            Self::ClosedGeodesic { start, class } => {
                let a = to_vec3(start);
                let d = to_vec3(&class.iter().map(|c| *c as f64).collect::<Vec<_>>());
                discretize_parametric_curve(n, |s| a + d * s, true, resolution)
            }
            Self::Circle { center, radius, axes } => {
                let c = to_vec3(center);
                let (i, j) = (axes[0], axes[1]);
                discretize_parametric_curve(
                    n,
                    |s| {
                        let th = 2.0 * std::f64::consts::PI * s;
                        let mut p = c;
                        p[i] += radius * th.cos();
                        p[j] += radius * th.sin();
                        p
                    },
                    true,
                    resolution,
                )
            }
            Self::PlanePatch { origin, u, v } => {
                let (o, u, v) = (to_vec3(origin), to_vec3(u), to_vec3(v));
                grid_surface(|a, b| o + u * a + v * b, resolution, false)
            }
            Self::CoordinateTorus { axis, level } => {
                let (i, j) = ((axis + 1) % 3, (axis + 2) % 3);
                let (axis, level) = (*axis, *level);
                grid_surface(
                    move |a, b| {
                        let mut p = Vector3::zeros();
                        p[axis] = level;
                        p[i] = a;
                        p[j] = b;
                        p
                    },
                    resolution,
                    true,
                )
            }
            Self::Disk { center, normal, radius } => {
                disk_surface(to_vec3(center), to_vec3(normal), *radius, resolution)
            }
        }
    }
}

/// Sample `f` on `[0, 1]` at `resolution` uniform intervals; `f` returns a
/// lift in `R^n` (zero padded). Closed curves must satisfy `f(0) = f(1)` mod 1.
pub fn discretize_parametric_curve(
    ambient: usize,
    f: impl Fn(f64) -> Vector3<f64>,
    closed: bool,
    resolution: usize,
) -> Result<DiscreteSubmanifold> {
    if resolution < 2 {
        return Err(invalid("resolution must be >= 2"));
    }
    let count = if closed { resolution } else { resolution + 1 };
    let vertices: Vec<TorusPoint> =
        (0..count).map(|k| TorusPoint::from_lift(f(k as f64 / resolution as f64), ambient)).collect();
    let mut elements: Vec<[usize; 2]> = (0..resolution.min(count - 1)).map(|k| [k, k + 1]).collect();
    if closed {
        elements.push([count - 1, 0]);
    }
    DiscreteSubmanifold::from_segments(ambient, vertices, elements)
}

fn grid_surface(f: impl Fn(f64, f64) -> Vector3<f64>, m: usize, periodic: bool) -> Result<DiscreteSubmanifold> {
    let side = if periodic { m } else { m + 1 };
    let mut vertices = Vec::with_capacity(side * side);
    for a in 0..side {
        for b in 0..side {
            vertices.push(TorusPoint::from_lift(f(a as f64 / m as f64, b as f64 / m as f64), 3));
        }
    }
    let idx = |a: usize, b: usize| (a % side) * side + (b % side);
    let mut tris = Vec::with_capacity(2 * m * m);
    for a in 0..m {
        for b in 0..m {
            let (v00, v10, v01, v11) = (idx(a, b), idx(a + 1, b), idx(a, b + 1), idx(a + 1, b + 1));
            tris.push([v00, v10, v11]);
            tris.push([v00, v11, v01]);
        }
    }
    DiscreteSubmanifold::from_triangles(vertices, tris)
}

fn disk_surface(c: Vector3<f64>, normal: Vector3<f64>, radius: f64, m: usize) -> Result<DiscreteSubmanifold> {
    let nrm = normal.normalize();
    let seed = if nrm.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let e1 = (seed - nrm * nrm.dot(&seed)).normalize();
    let e2 = nrm.cross(&e1);
    let sectors = 4 * m;
    let mut vertices = vec![TorusPoint::from_lift(c, 3)];
    for ring in 1..=m {
        let r = radius * ring as f64 / m as f64;
        for k in 0..sectors {
            let th = 2.0 * std::f64::consts::PI * k as f64 / sectors as f64;
            vertices.push(TorusPoint::from_lift(c + (e1 * th.cos() + e2 * th.sin()) * r, 3));
        }
    }
    let at = |ring: usize, k: usize| 1 + (ring - 1) * sectors + k % sectors;
    let mut tris = Vec::new();
    for k in 0..sectors {
        tris.push([0, at(1, k), at(1, k + 1)]);
    }
    for ring in 1..m {
        for k in 0..sectors {
            tris.push([at(ring, k), at(ring + 1, k), at(ring + 1, k + 1)]);
            tris.push([at(ring, k), at(ring + 1, k + 1), at(ring, k + 1)]);
        }
    }
    DiscreteSubmanifold::from_triangles(vertices, tris)
}

/// Element connectivity.
#[derive(Clone, Debug, PartialEq)]
pub enum Elements {
    Segments(Vec<[usize; 2]>),
    Triangles(Vec<[usize; 3]>),
}

/// A polyline or triangle mesh with per-element tangent planes.
#[derive(Clone, Debug)]
pub struct DiscreteSubmanifold {
    ambient: usize,
    vertices: Vec<TorusPoint>,
    elements: Elements,
    tangents: Vec<GrassmannPlane>,
    volume: f64,
}

fn chord_plane(base: TorusPoint, ambient: usize, edges: &[Vector3<f64>]) -> Result<GrassmannPlane> {
    let m = DMatrix::from_fn(ambient, edges.len(), |r, c| edges[c][r]);
    GrassmannPlane::from_spanning(base, &m)
}

impl DiscreteSubmanifold {
    /// Polyline; tangents are the chord directions.
    pub fn from_segments(ambient: usize, vertices: Vec<TorusPoint>, segments: Vec<[usize; 2]>) -> Result<Self> {
        let mut out =
            Self { ambient, vertices, elements: Elements::Segments(segments), tangents: Vec::new(), volume: 0.0 };
        out.validate()?;
        out.tangents = (0..out.num_elements())
            .map(|e| {
                let (a, d) = out.segment_lift(e);
                chord_plane(TorusPoint::from_lift(a + d * 0.5, ambient), ambient, &[d])
            })
            .collect::<Result<_>>()?;
        Ok(out)
    }

    /// Triangle mesh on `T^3`; tangents are the triangle planes.
    pub fn from_triangles(vertices: Vec<TorusPoint>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mut out =
            Self { ambient: 3, vertices, elements: Elements::Triangles(triangles), tangents: Vec::new(), volume: 0.0 };
        out.validate()?;
        out.tangents = (0..out.num_elements())
            .map(|e| {
                let (a, e1, e2) = out.triangle_lift(e);
                chord_plane(TorusPoint::from_lift(a + (e1 + e2) / 3.0, 3), 3, &[e1, e2])
            })
            .collect::<Result<_>>()?;
        Ok(out)
    }

    fn validate(&mut self) -> Result<()> {
        if !(2..=MAX_DIM).contains(&self.ambient) {
            return Err(invalid("ambient dimension must be 2 or 3"));
        }
        if self.vertices.iter().any(|v| v.dim() != self.ambient) {
            return Err(invalid("vertex dimension differs from ambient dimension"));
        }
        let nv = self.vertices.len();
        let bad_index = match &self.elements {
            Elements::Segments(s) => s.iter().flatten().any(|i| *i >= nv),
            Elements::Triangles(t) => t.iter().flatten().any(|i| *i >= nv),
        };
        if bad_index {
            return Err(invalid("element references a missing vertex"));
        }
        if self.num_elements() == 0 {
            return Err(invalid("mesh has no elements"));
        }
        let longest = self.max_element_diameter();
        if longest >= SEGMENT_CAP {
            return Err(Error::ResolutionTooCoarse { length: longest, cap: SEGMENT_CAP });
        }
        self.volume = (0..self.num_elements()).map(|e| self.element_volume(e)).sum();
        Ok(())
    }

    /// 1 for polylines, 2 for triangle meshes.
    pub fn dim(&self) -> usize {
        match self.elements {
            Elements::Segments(_) => 1,
            Elements::Triangles(_) => 2,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn vertices(&self) -> &[TorusPoint] {
        &self.vertices
    }

    pub fn elements(&self) -> &Elements {
        &self.elements
    }

    pub fn element_tangents(&self) -> &[GrassmannPlane] {
        &self.tangents
    }

    pub fn total_volume(&self) -> f64 {
        self.volume
    }

    pub fn num_elements(&self) -> usize {
        match &self.elements {
            Elements::Segments(s) => s.len(),
            Elements::Triangles(t) => t.len(),
        }
    }

    /// Vertex indices of element `e`.
    pub fn element_vertices(&self, e: usize) -> Vec<usize> {
        match &self.elements {
            Elements::Segments(s) => s[e].to_vec(),
            Elements::Triangles(t) => t[e].to_vec(),
        }
    }

    /// First vertex lift and the shortest displacement to the second.
    #[inline]
    pub fn segment_lift(&self, e: usize) -> (Vector3<f64>, Vector3<f64>) {
        let Elements::Segments(s) = &self.elements else { panic!("segment_lift on a surface mesh") };
        let [a, b] = s[e];
        let pa = self.vertices[a];
        (pa.lift(), pa.displacement_to(&self.vertices[b]))
    }

    /// First vertex lift and the two edge displacements.
    #[inline]
    pub fn triangle_lift(&self, e: usize) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let Elements::Triangles(t) = &self.elements else { panic!("triangle_lift on a curve mesh") };
        let [a, b, c] = t[e];
        let pa = self.vertices[a];
        (pa.lift(), pa.displacement_to(&self.vertices[b]), pa.displacement_to(&self.vertices[c]))
    }

    pub fn element_volume(&self, e: usize) -> f64 {
        match self.elements {
            Elements::Segments(_) => self.segment_lift(e).1.norm(),
            Elements::Triangles(_) => {
                let (_, e1, e2) = self.triangle_lift(e);
                0.5 * e1.cross(&e2).norm()
            }
        }
    }

    pub fn max_element_diameter(&self) -> f64 {
        (0..self.num_elements())
            .map(|e| match self.elements {
                Elements::Segments(_) => self.segment_lift(e).1.norm(),
                Elements::Triangles(_) => {
                    let (_, e1, e2) = self.triangle_lift(e);
                    e1.norm().max(e2.norm()).max((e2 - e1).norm())
                }
            })
            .fold(0.0, f64::max)
    }

    /// Rigid translation of every vertex.
    pub fn translated(&self, shift: &Vector3<f64>) -> Self {
        let mut out = self.clone();
        for v in &mut out.vertices {
            *v = v.translate(shift);
        }
        for t in &mut out.tangents {
            *t = t.with_base(t.base().translate(shift));
        }
        out
    }

    /// One 1-to-2 (curves) or 1-to-4 (surfaces) refinement; new vertices are
    /// midpoints of the lifted elements.
    pub fn refined(&self) -> Result<Self> {
        match &self.elements {
            Elements::Segments(segs) => {
                let mut vertices = self.vertices.clone();
                let mut out = Vec::with_capacity(2 * segs.len());
                for (e, [a, b]) in segs.iter().enumerate() {
                    let (pa, d) = self.segment_lift(e);
                    vertices.push(TorusPoint::from_lift(pa + d * 0.5, self.ambient));
                    let m = vertices.len() - 1;
                    out.push([*a, m]);
                    out.push([m, *b]);
                }
                Self::from_segments(self.ambient, vertices, out)
            }
            Elements::Triangles(tris) => {
                let mut vertices = self.vertices.clone();
                let mut mids = std::collections::HashMap::new();
                let mut mid = |i: usize, j: usize, verts: &mut Vec<TorusPoint>| -> usize {
                    let key = (i.min(j), i.max(j));
                    *mids.entry(key).or_insert_with(|| {
                        let pi = verts[key.0];
                        let d = pi.displacement_to(&verts[key.1]);
                        verts.push(pi.translate(&(d * 0.5)));
                        verts.len() - 1
                    })
                };
                let mut out = Vec::with_capacity(4 * tris.len());
                for &[a, b, c] in tris {
                    let ab = mid(a, b, &mut vertices);
                    let bc = mid(b, c, &mut vertices);
                    let ca = mid(c, a, &mut vertices);
                    out.extend_from_slice(&[[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
                }
                Self::from_triangles(vertices, out)
            }
        }
    }
}

/// How pushed element tangents are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TangentMode {
    /// `dPsi` at the source element midpoint applied to the source tangent.
    Jacobian,
    /// Chord plane of the image element; cheaper, used when only counts matter.
    Chord,
}

/// Image of `mesh` under `Psi(w)`, with tangents pushed by `dPsi` at element
/// midpoints. Stretched elements are split and re-mapped (curves locally,
/// surfaces by global refinement) up to [`DEFAULT_MAX_DEPTH`] times.
pub fn pushforward<F: Family + ?Sized>(
    mesh: &DiscreteSubmanifold,
    family: &F,
    w: &FamilyParams,
) -> Result<DiscreteSubmanifold> {
    pushforward_with(mesh, family, w, TangentMode::Jacobian, DEFAULT_MAX_DEPTH)
}

pub fn pushforward_with<F: Family + ?Sized>(
    mesh: &DiscreteSubmanifold,
    family: &F,
    w: &FamilyParams,
    mode: TangentMode,
    max_depth: usize,
) -> Result<DiscreteSubmanifold> {
    if mesh.ambient_dim() != family.dim() {
        return Err(invalid("mesh and family dimensions differ"));
    }
    if w.len() != family.param_dim() {
        return Err(invalid("parameter vector has the wrong length"));
    }
    match mesh.elements() {
        Elements::Segments(_) => push_curve(mesh, family, w, mode, max_depth),
        Elements::Triangles(_) => push_surface(mesh, family, w, mode, max_depth),
    }
}

fn pushed_plane<F: Family + ?Sized>(
    family: &F,
    w: &FamilyParams,
    src_mid: &TorusPoint,
    edges: &[Vector3<f64>],
) -> Result<GrassmannPlane> {
    let n = family.dim();
    let (y, j) = family.apply_with_jacobian(w, src_mid);
    let images: Vec<Vector3<f64>> = edges.iter().map(|e| j * e).collect();
    chord_plane(y, n, &images)
}

fn push_curve<F: Family + ?Sized>(
    mesh: &DiscreteSubmanifold,
    family: &F,
    w: &FamilyParams,
    mode: TangentMode,
    max_depth: usize,
) -> Result<DiscreteSubmanifold> {
    let n = mesh.ambient_dim();
    let src: Vec<TorusPoint> = mesh.vertices().to_vec();
    let mut out_vertices: Vec<TorusPoint> = src.iter().map(|v| family.apply(w, v)).collect();
    let mut segments = Vec::with_capacity(mesh.num_elements());
    let mut tangents = Vec::with_capacity(mesh.num_elements());
    // (source start lift, source displacement, image index a, image index b, depth)
    type Piece = (Vector3<f64>, Vector3<f64>, usize, usize, usize);
    let mut stack: Vec<Piece> = Vec::new();
    let Elements::Segments(segs) = mesh.elements() else { unreachable!() };
    for (e, [a, b]) in segs.iter().enumerate() {
        let (pa, d) = mesh.segment_lift(e);
        stack.push((pa, d, *a, *b, 0));
        while let Some((pa, d, ia, ib, depth)) = stack.pop() {
            let len = out_vertices[ia].distance(&out_vertices[ib]);
            if len < SEGMENT_CAP * 0.5 || (len < SEGMENT_CAP && depth > 0) {
                if mode == TangentMode::Jacobian {
                    let mid = TorusPoint::from_lift(pa + d * 0.5, n);
                    tangents.push(pushed_plane(family, w, &mid, &[d])?);
                }
                segments.push([ia, ib]);
                continue;
            }
            if depth >= max_depth {
                return Err(Error::SubdivisionDepth { max_depth });
            }
            let mid = TorusPoint::from_lift(pa + d * 0.5, n);
            out_vertices.push(family.apply(w, &mid));
            let im = out_vertices.len() - 1;
            // second half pushed first so the first half is processed first
            stack.push((pa + d * 0.5, d * 0.5, im, ib, depth + 1));
            stack.push((pa, d * 0.5, ia, im, depth + 1));
        }
    }
    if mode == TangentMode::Chord {
        return DiscreteSubmanifold::from_segments(n, out_vertices, segments);
    }
    let mut out = DiscreteSubmanifold {
        ambient: n,
        vertices: out_vertices,
        elements: Elements::Segments(segments),
        tangents,
        volume: 0.0,
    };
    out.validate()?;
    Ok(out)
}

fn push_surface<F: Family + ?Sized>(
    mesh: &DiscreteSubmanifold,
    family: &F,
    w: &FamilyParams,
    mode: TangentMode,
    max_depth: usize,
) -> Result<DiscreteSubmanifold> {
    let mut src = mesh.clone();
    for _ in 0..=max_depth {
        let vertices: Vec<TorusPoint> = src.vertices().iter().map(|v| family.apply(w, v)).collect();
        let Elements::Triangles(tris) = src.elements() else { unreachable!() };
        let stretched = tris
            .iter()
            .any(|t| (0..3).any(|k| vertices[t[k]].distance(&vertices[t[(k + 1) % 3]]) >= SEGMENT_CAP * 0.5));
        if !stretched {
            if mode == TangentMode::Chord {
                return DiscreteSubmanifold::from_triangles(vertices, tris.clone());
            }
            let tangents = (0..src.num_elements())
                .map(|e| {
                    let (a, e1, e2) = src.triangle_lift(e);
                    pushed_plane(family, w, &TorusPoint::from_lift(a + (e1 + e2) / 3.0, 3), &[e1, e2])
                })
                .collect::<Result<Vec<_>>>()?;
            let mut out = DiscreteSubmanifold {
                ambient: 3,
                vertices,
                elements: Elements::Triangles(tris.clone()),
                tangents,
                volume: 0.0,
            };
            out.validate()?;
            return Ok(out);
        }
        src = src.refined()?;
    }
    Err(Error::SubdivisionDepth { max_depth })
}
