use nalgebra::Vector3;

use crate::error::{invalid, Result};

/// Largest ambient dimension handled by the fixed-size kernels.
pub const MAX_DIM: usize = 3;

/// Reduce a real number into `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    // x = -1e-17 rounds to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Reduce a real number into `[-1/2, 1/2]` (nearest-integer representative).
#[inline]
pub fn wrap_half(x: f64) -> f64 {
    x - x.round()
}

/// Componentwise nearest-integer reduction of a displacement.
#[inline]
pub fn wrap_displacement(d: &Vector3<f64>) -> Vector3<f64> {
    d.map(wrap_half)
}

/// A point of the flat torus `R^n / Z^n`, `n` in `1..=3`.
///
/// Stored padded to three components; unused components are zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusPoint {
    lift: Vector3<f64>,
    dim: usize,
}

impl TorusPoint {
    pub fn new(coords: &[f64]) -> Result<Self> {
        let dim = coords.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(invalid(format!("torus dimension {dim} not in 1..=3")));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("non-finite torus coordinate"));
        }
        let mut lift = Vector3::zeros();
        for (l, c) in lift.iter_mut().zip(coords) {
            *l = wrap_unit(*c);
        }
        Ok(Self { lift, dim })
    }

    /// Build from a padded lift; components past `dim` are dropped.
    #[inline]
    pub fn from_lift(lift: Vector3<f64>, dim: usize) -> Self {
        debug_assert!((1..=MAX_DIM).contains(&dim));
        let mut out = Vector3::zeros();
        for i in 0..dim {
            out[i] = wrap_unit(lift[i]);
        }
        Self { lift: out, dim }
    }

    pub fn origin(dim: usize) -> Self {
        Self::from_lift(Vector3::zeros(), dim)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.lift.as_slice()[..self.dim]
    }

    /// Representative in `[0,1)^n`, zero padded to three components.
    #[inline]
    pub fn lift(&self) -> Vector3<f64> {
        self.lift
    }

    #[inline]
    pub fn translate(&self, v: &Vector3<f64>) -> Self {
        Self::from_lift(self.lift + v, self.dim)
    }

    /// Shortest displacement `other - self` (components in `[-1/2, 1/2]`).
    #[inline]
    pub fn displacement_to(&self, other: &TorusPoint) -> Vector3<f64> {
        wrap_displacement(&(other.lift - self.lift))
    }

    /// Flat distance with wrap-around.
    #[inline]
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        self.displacement_to(other).norm()
    }
}

impl std::fmt::Display for TorusPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}
